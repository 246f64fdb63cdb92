#include "cbc_adapt/config.hpp"
#include "cbc_adapt/figures.hpp"
#include "cbc_adapt/io.hpp"
#include "cbc_adapt/runner.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>
#include <sstream>

using namespace cbc_adapt;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = CBC_ADAPT_SCENARIO_DIR;

json base_config() { return read_json_file(kScenarios + "/duffing_invasive.json"); }

void expect_config_error(const json& j, const std::string& fragment) {
    try {
        (void)parse_scenario_config(j);
        FAIL() << "expected a config error mentioning '" << fragment << "'";
    } catch (const ContractViolation& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

}  // namespace

TEST(Format, DoublesRoundTrip) {
    for (double v : {0.0, -0.0, 1.0 / 3.0, 2.515, -1.5e-300, 6.02214076e23, std::numeric_limits<double>::max(),
                     std::numeric_limits<double>::denorm_min()}) {
        EXPECT_EQ(parse_double(format_double(v)), v);
    }
    EXPECT_THROW((void)parse_double("1.5x"), ContractViolation);
    EXPECT_THROW((void)parse_double(""), ContractViolation);
}

TEST(Csv, TraceRoundTrip) {
    auto cfg = load_scenario_config(kScenarios + "/duffing_invasive.json");
    cfg.scenario.t_end = 2.0 * cfg.scenario.excitation.period();
    cfg.scenario.record_stride = 20;
    const auto tr = simulate(cfg.scenario);
    std::stringstream ss;
    write_trace_csv(ss, tr);
    const auto [header, rows] = read_numeric_csv(ss);
    EXPECT_EQ(header, trace_csv_header(tr));
    ASSERT_EQ(rows.size(), tr.size());
    // t, xd1_1, xd0_1, xrd1_1, xrd0_1, u_1, sigma_1, eta_1, y_1, z_1, phi, g, theta_hat_1..3
    ASSERT_EQ(header.size(), 15u);
    EXPECT_EQ(header[1], "xd1_1");
    EXPECT_EQ(header[2], "xd0_1");
    for (std::size_t i = 0; i < tr.size(); ++i) {
        EXPECT_EQ(rows[i][0], tr.time(i));
        EXPECT_EQ(rows[i][1], tr.xi[i][0]);
        EXPECT_EQ(rows[i][2], tr.xi[i][1]);
        EXPECT_EQ(rows[i][5], tr.u[i][0]);
        EXPECT_EQ(rows[i][10], tr.phi[i]);
        EXPECT_EQ(rows[i][14], tr.theta_hat[i][2]);
    }
}

TEST(Csv, RejectsMalformedInput) {
    std::stringstream ragged("a,b\n1,2\n3\n");
    EXPECT_THROW((void)read_numeric_csv(ragged), ContractViolation);
    std::stringstream text("a\nhello\n");
    EXPECT_THROW((void)read_numeric_csv(text), ContractViolation);
    std::stringstream empty;
    EXPECT_THROW((void)read_numeric_csv(empty), ContractViolation);
}

TEST(Json, SignalRoundTrip) {
    const auto s = builtin_reference("cantilever").signal();
    EXPECT_EQ(signal_from_json(signal_to_json(s)), s);
    const auto back = signal_from_json(json::parse(signal_to_json(s).dump()));
    EXPECT_EQ(back, s);
}

TEST(Json, SignalWithUnevenChannels) {
    const json j = json::parse(R"({"omega": 2, "channels": [{"a0": 1, "cos": [0.5]}, {"sin": [0, 0.25]}]})");
    const auto s = signal_from_json(j);
    EXPECT_EQ(s.channels(), 2);
    EXPECT_EQ(s.harmonics(), 2);
    EXPECT_EQ(s.a0[0], 1.0);
    EXPECT_EQ(s.cos_coef(0, 0), 0.5);
    EXPECT_EQ(s.cos_coef(0, 1), 0.0);
    EXPECT_EQ(s.sin_coef(1, 1), 0.25);
    EXPECT_THROW((void)signal_from_json(json::parse(R"({"omega": 0, "channels": [{}]})")), ContractViolation);
    EXPECT_THROW((void)signal_from_json(json::parse(R"({"channels": [{}]})")), ContractViolation);
}

TEST(Config, ShippedScenariosLoad) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(kScenarios)) {
        if (entry.path().extension() != ".json") continue;
        ++count;
        EXPECT_NO_THROW((void)load_scenario_config(entry.path().string())) << entry.path();
    }
    EXPECT_EQ(count, 11);
}

TEST(Config, FigureCatalogPointsAtShippedScenarios) {
    for (const auto& f : figure_catalog()) EXPECT_TRUE(fs::exists(fs::path(kScenarios) / (f.scenario + ".json"))) << f.id;
    EXPECT_EQ(find_figure("fig7b").view, FigureView::Pe);
    EXPECT_THROW((void)find_figure("fig99"), ContractViolation);
}

TEST(Config, DuffingSettings) {
    const auto cfg = parse_scenario_config(base_config());
    const auto& sc = cfg.scenario;
    EXPECT_EQ(sc.plant.name, "duffing");
    EXPECT_EQ(sc.controller.k, 1.0);
    EXPECT_EQ(sc.controller.gamma, 0.1);
    EXPECT_EQ(sc.controller.S, 2.0 * Mat::Identity(3, 3));
    EXPECT_EQ(sc.initial_state, (Vec(2) << 0.0, -1.0).finished());
    EXPECT_NEAR(sc.dt, sc.excitation.period() / 2000.0, 1e-15);
    EXPECT_EQ(sc.steps(), 40 * 2000);
    EXPECT_EQ(cfg.thresholds.expect, "invasive");
    EXPECT_DOUBLE_EQ(cfg.thresholds.tol_noninv, 1.5e-4);
    EXPECT_DOUBLE_EQ(cfg.thresholds.floor_inv, 1.5e-3);
    ASSERT_TRUE(cfg.natural_reference.has_value());
    EXPECT_FALSE(*cfg.natural_reference == *sc.reference);
}

TEST(Config, Errors) {
    {
        json j = base_config();
        j["schema"] = 2;
        expect_config_error(j, "schema");
    }
    {
        json j = base_config();
        j.erase("plant");
        expect_config_error(j, "config error");
    }
    {
        json j = base_config();
        j["plant"] = {{"builtin", "pendulum"}};
        expect_config_error(j, "unknown plant");
    }
    {
        json j = base_config();
        j["dt"] = -0.001;
        expect_config_error(j, "dt must be positive");
    }
    {
        json j = base_config();
        j["dt"] = 0.0;
        expect_config_error(j, "dt must be positive");
    }
    {
        json j = base_config();
        j["controller"]["k"] = 0;
        expect_config_error(j, "k must be positive");
    }
    {
        json j = base_config();
        j["regressor_mask"] = "cross_terms";
        expect_config_error(j, "cross_beam");
    }
    {
        json j = base_config();
        j["regressor_mask"] = {true, false};
        expect_config_error(j, "mask");
    }
    {
        json j = base_config();
        j["thresholds"]["expect"] = "sometimes";
        expect_config_error(j, "thresholds.expect");
    }
    {
        json j = base_config();
        j["mode"] = "half_open";
        expect_config_error(j, "mode");
    }
    {
        json j = base_config();
        j["excitation"]["amplitude"] = {0.1, 0.2};
        expect_config_error(j, "amplitude");
    }
    EXPECT_THROW((void)load_scenario_config("/nonexistent/config.json"), ContractViolation);
}

TEST(Config, PolynomialPlant) {
    json j = base_config();
    j["plant"] = json::parse(R"({"order": 2, "dof": 1, "theta": [-0.1, 4, -2],
        "columns": [{"row": 0, "exponents": [1, 0]}, {"row": 0, "exponents": [0, 1]}, {"row": 0, "exponents": [0, 3]}]})");
    const auto cfg = parse_scenario_config(j);
    const Vec xi = (Vec(2) << 0.3, 1.2).finished();
    EXPECT_EQ(cfg.scenario.plant.regressor(xi), make_duffing().regressor(xi));
    EXPECT_EQ(cfg.scenario.plant.true_theta, make_duffing().true_theta);
}

TEST(Config, SeedOverrideChangesPerturbationAndHash) {
    const json j = base_config();
    const auto a = parse_scenario_config(j);
    const auto b = parse_scenario_config(j);
    const auto c = parse_scenario_config(j, ".", 2);
    const auto d = parse_scenario_config(j, ".", 1);
    EXPECT_EQ(a.scenario.hash, b.scenario.hash);
    EXPECT_EQ(*a.scenario.reference, *b.scenario.reference);
    EXPECT_NE(a.scenario.hash, c.scenario.hash);
    EXPECT_FALSE(*a.scenario.reference == *c.scenario.reference);
    // the shipped seed is 1, so overriding with 1 reproduces the reference
    EXPECT_EQ(*a.scenario.reference, *d.scenario.reference);
}

TEST(Config, HashTracksContent) {
    json j = base_config();
    const auto h0 = parse_scenario_config(j).scenario.hash;
    j["periods"] = 41;
    EXPECT_NE(parse_scenario_config(j).scenario.hash, h0);
    EXPECT_EQ(hash_hex(0x0123456789abcdefULL), "0123456789abcdef");
}

TEST(Summary, SchemaAndChecks) {
    const auto cfg = parse_scenario_config(base_config());
    const std::vector<Check> checks{check_le("a", 1.0, 2.0), check_ge("b", 1.0, 2.0), check_eq("c", 2.0, 2.0),
                                    check_true("d", true)};
    EXPECT_TRUE(checks[0].pass);
    EXPECT_FALSE(checks[1].pass);
    EXPECT_TRUE(checks[2].pass);
    EXPECT_TRUE(checks[3].pass);
    EXPECT_FALSE(all_pass(checks));
    const json s = make_summary("simulate", cfg, checks, std::nullopt);
    EXPECT_EQ(s.at("schema"), kSummarySchema);
    EXPECT_EQ(s.at("kind"), "simulate");
    EXPECT_EQ(s.at("scenario"), "duffing_invasive");
    EXPECT_EQ(s.at("checks").size(), 4u);
    EXPECT_EQ(s.at("pass"), false);
    EXPECT_TRUE(s.at("seed").is_null());
}

TEST(Artifacts, SimulationWritesDocumentedFiles) {
    auto cfg = load_scenario_config(kScenarios + "/duffing_invasive.json");
    cfg.scenario.t_end = 3.0 * cfg.scenario.excitation.period();
    const auto run = run_simulation(cfg);
    const auto dir = fs::temp_directory_path() / "cbc_adapt_artifacts_test";
    fs::remove_all(dir);
    const json s = write_simulation_artifacts(dir, cfg, run, std::nullopt);
    for (const char* f : {"trace.csv", "metrics.json", "summary.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(read_json_file((dir / "summary.json").string()), s);
    fs::remove_all(dir);
}

TEST(Artifacts, FigureBatchFollowsCatalogOrder) {
    FigureOptions opt;
    opt.scenario_dir = kScenarios;
    opt.out_dir = fs::temp_directory_path() / "cbc_adapt_figures_test";
    opt.parallel = 2;
    fs::remove_all(opt.out_dir);
    const json s = reproduce_figures({"fig2d", "fig1b", "fig1a"}, opt);
    ASSERT_EQ(s.at("figures").size(), 3u);
    const char* order[] = {"fig1a", "fig1b", "fig2d"};
    for (std::size_t i = 0; i < 3; ++i) {
        const auto& f = s.at("figures")[i];
        EXPECT_EQ(f.at("figure").get<std::string>(), order[i]);
        EXPECT_FALSE(f.contains("error")) << f.dump();
        EXPECT_TRUE(fs::exists(opt.out_dir / (std::string(order[i]) + ".csv")));
    }
    EXPECT_TRUE(s.at("pass").get<bool>());
    EXPECT_THROW((void)reproduce_figures({"fig99"}, opt), ContractViolation);
    fs::remove_all(opt.out_dir);
}
