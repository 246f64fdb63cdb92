// Command-line front end: simulate, branch, cbc and reproduce-figure.
//
// Exit status: 0 all checks passed, 1 a declared check failed, 2 invalid
// config or arguments, 3 solver failure.

#include "cbc_adapt/config.hpp"
#include "cbc_adapt/figures.hpp"
#include "cbc_adapt/runner.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef CBC_ADAPT_SCENARIO_DIR
#define CBC_ADAPT_SCENARIO_DIR "scenarios"
#endif

namespace fs = std::filesystem;
using namespace cbc_adapt;

namespace {

enum ExitCode : int { kOk = 0, kChecksFailed = 1, kInvalid = 2, kSolverFailure = 3 };

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("cbc_adapt");
    logger->set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("CBC_ADAPT_LOG")) spdlog::set_level(spdlog::level::from_str(env));
}

void log_checks(const json& summary) {
    for (const auto& c : summary.at("checks"))
        spdlog::info("check {:<36} {:.6g} {} {:.6g}  {}", c.at("name").get<std::string>(), c.at("value").get<double>(),
                     c.at("relation").get<std::string>(), c.at("limit").get<double>(),
                     c.at("pass").get<bool>() ? "pass" : "FAIL");
}

int finish(const json& summary) {
    log_checks(summary);
    const bool pass = summary.at("pass").get<bool>();
    spdlog::info("{}", pass ? "all checks passed" : "some checks failed");
    return pass ? kOk : kChecksFailed;
}

void write_error_summary(const std::string& out, const std::string& kind, const std::string& what) {
    if (out.empty()) return;
    try {
        fs::create_directories(out);
        write_json_file(fs::path(out) / "summary.json",
                        {{"schema", kSummarySchema}, {"kind", kind}, {"checks", json::array()}, {"pass", false}, {"error", what}});
    } catch (const std::exception&) {
        // the original error is the one worth reporting
    }
}

template <class Fn>
int guarded(const std::string& kind, const std::string& out, Fn&& fn) {
    try {
        return fn();
    } catch (const ContractViolation& e) {
        spdlog::error("{}", e.what());
        write_error_summary(out, kind, e.what());
        return kInvalid;
    } catch (const SolverFailure& e) {
        spdlog::error("{} (last residual {:.3g})", e.what(), e.last_residual());
        write_error_summary(out, kind, e.what());
        return kSolverFailure;
    } catch (const SimulationDiverged& e) {
        spdlog::error("{}", e.what());
        write_error_summary(out, kind, e.what());
        return kSolverFailure;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        write_error_summary(out, kind, e.what());
        return kInvalid;
    }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Adaptive noninvasive control, continuation and control-based continuation"};
    app.require_subcommand(1);

    std::string config, out = "out", scenarios = CBC_ADAPT_SCENARIO_DIR;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> figures;
    int parallel = 1;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", out, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Override every perturbation seed");
    };

    auto* sim = app.add_subcommand("simulate", "Integrate a scenario and check its thresholds");
    sim->add_option("--config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    add_common(sim);

    auto* branch = app.add_subcommand("branch", "Continue a frequency-response branch");
    branch->add_option("--config", config, "Scenario config with a 'branch' section")->required()->check(CLI::ExistingFile);
    add_common(branch);

    auto* cbc = app.add_subcommand("cbc", "Solve the control-based continuation zero problem");
    cbc->add_option("--config", config, "Scenario config with a 'cbc' section")->required()->check(CLI::ExistingFile);
    cbc->add_option("--parallel", parallel, "Threads for Jacobian columns")->check(CLI::PositiveNumber);
    add_common(cbc);

    auto* fig = app.add_subcommand("reproduce-figure", "Write the CSV data behind one or more figures");
    fig->add_option("--figure", figures, "Figure id, repeatable, or 'all'")->required();
    fig->add_option("--parallel", parallel, "Scenarios run concurrently")->check(CLI::PositiveNumber);
    fig->add_option("--scenarios", scenarios, "Directory of scenario configs")->capture_default_str();
    add_common(fig);

    auto* list = app.add_subcommand("list-figures", "Print the figure catalog");

    CLI11_PARSE(app, argc, argv);
    const auto t0 = std::chrono::steady_clock::now();

    if (*list) {
        for (const auto& f : figure_catalog()) std::cout << f.id << '\t' << f.scenario << '\t' << f.description << '\n';
        return kOk;
    }

    if (*sim) {
        return guarded("simulate", out, [&] {
            const auto cfg = load_scenario_config(config, seed);
            spdlog::info("simulate {} ({} steps, {})", cfg.scenario.name, cfg.scenario.steps(), to_string(cfg.scenario.mode));
            const auto run = run_simulation(cfg);
            const json summary = write_simulation_artifacts(out, cfg, run, seed);
            spdlog::info("done in {:.2f} s, artifacts in {}", seconds_since(t0), out);
            return finish(summary);
        });
    }

    if (*branch) {
        return guarded("branch", out, [&] {
            const auto cfg = load_scenario_config(config, seed);
            spdlog::info("branch {} over [{}, {}]", cfg.scenario.name, cfg.branch ? cfg.branch->settings.omega_min : 0.0,
                         cfg.branch ? cfg.branch->settings.omega_max : 0.0);
            const auto run = run_branch(cfg);
            for (std::size_t s = 0; s < run.segments.size(); ++s) {
                const auto& br = run.segments[s];
                spdlog::info("segment {}: {} orbits, {}", s, br.orbits.size(), br.termination);
                for (const auto& e : br.events)
                    spdlog::info("  {} in [{:.6f}, {:.6f}]", to_string(e.type), e.omega_lo, e.omega_hi);
            }
            const json summary = write_branch_artifacts(out, cfg, run, seed);
            spdlog::info("done in {:.2f} s, artifacts in {}", seconds_since(t0), out);
            return finish(summary);
        });
    }

    if (*cbc) {
        return guarded("cbc", out, [&] {
            const auto cfg = load_scenario_config(config, seed);
            spdlog::info("cbc {} on {} thread(s)", cfg.scenario.name, parallel);
            const auto run = run_cbc(cfg, parallel);
            for (std::size_t i = 0; i < run.result.residual_history.size(); ++i)
                spdlog::debug("iteration {}: residual {:.3e}", i, run.result.residual_history[i]);
            const json summary = write_cbc_artifacts(out, cfg, run, seed);
            spdlog::info("converged in {} iterations, {:.1f} s", run.result.iterations, seconds_since(t0));
            return finish(summary);
        });
    }

    return guarded("reproduce-figure", out, [&] {
        FigureOptions opt;
        opt.scenario_dir = scenarios;
        opt.out_dir = out;
        opt.seed = seed;
        opt.parallel = parallel;
        opt.log = [](const std::string& msg) { spdlog::info("{}", msg); };
        const json summary = reproduce_figures(figures, opt);
        bool pass = true;
        for (const auto& f : summary.at("figures")) {
            const bool ok = f.at("pass").get<bool>();
            pass = pass && ok;
            spdlog::info("{:<6} {}{}", f.at("figure").get<std::string>(), ok ? "pass" : "FAIL",
                         f.contains("error") ? "  " + f.at("error").get<std::string>() : "");
        }
        spdlog::info("done in {:.1f} s, artifacts in {}", seconds_since(t0), out);
        return pass ? kOk : kChecksFailed;
    });
}
