#pragma once

// Figure catalog: each id names a checked-in scenario and the CSV view of
// its run. Figures sharing a scenario reuse one run.
//
// CSV layouts
//   branch    segment, omega, max_abs_x_<c>, a0_<c>, amp<k>_<c>, stable, max_abs_mu, event
//   state     t, x_<i>, xr_<i>, e_<i>          (positions, reference, error)
//   input     t, u_<i>, u_inf                   (control input and its max-norm)
//   estimate  t, theta_err                      (||th_hat - theta||)
//   pe        t, lambda_min, trace, lambda_min_rel   (one-period window M_e)

#include "cbc_adapt/config.hpp"
#include "cbc_adapt/diagnostics.hpp"
#include "cbc_adapt/io.hpp"
#include "cbc_adapt/runner.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cbc_adapt {

enum class FigureView { Branch, State, Input, Estimate, Pe };

struct FigureInfo {
    std::string id;
    std::string scenario;  // file stem under the scenarios directory
    FigureView view;
    std::string description;
};

[[nodiscard]] inline const std::vector<FigureInfo>& figure_catalog() {
    static const std::vector<FigureInfo> catalog{
        {"fig1a", "duffing_branch", FigureView::Branch, "Duffing frequency response, A = 0.15"},
        {"fig1b", "duffing_open_loop", FigureView::State, "Duffing open loop from (0, -1) against the unstable orbit"},
        {"fig2a", "duffing_noninvasive", FigureView::State, "Duffing closed loop tracking the natural orbit"},
        {"fig2b", "duffing_noninvasive", FigureView::Input, "Duffing control input, natural reference"},
        {"fig2c", "duffing_invasive", FigureView::State, "Duffing closed loop, 30% perturbed reference"},
        {"fig2d", "duffing_invasive", FigureView::Input, "Duffing control input, 30% perturbed reference"},
        {"fig3", "cross_beam_branch", FigureView::Branch, "Cross-beam frequency response, first mode"},
        {"fig4a", "cross_beam", FigureView::State, "Cross-beam closed loop response"},
        {"fig4b", "cross_beam", FigureView::Input, "Cross-beam control inputs"},
        {"fig4c", "cross_beam_partial", FigureView::State, "Cross-beam response, cross terms left out of the controller"},
        {"fig4d", "cross_beam_partial", FigureView::Input, "Cross-beam inputs, cross terms left out of the controller"},
        {"fig4e", "cross_beam_partial_invasive", FigureView::Input, "Partial-model inputs, 30% perturbed reference"},
        {"fig5", "cantilever_branch", FigureView::Branch, "Cantilever frequency response, 2 cos(wt) at the tip"},
        {"fig6a", "cantilever", FigureView::State, "Cantilever closed loop response"},
        {"fig6b", "cantilever", FigureView::Input, "Cantilever control inputs"},
        {"fig7a", "cantilever", FigureView::Estimate, "Cantilever parameter estimation error"},
        {"fig7b", "cantilever", FigureView::Pe, "Cantilever smallest eigenvalue of M_e"},
    };
    return catalog;
}

[[nodiscard]] inline const FigureInfo& find_figure(const std::string& id) {
    for (const auto& f : figure_catalog())
        if (f.id == id) return f;
    throw ContractViolation("unknown figure id '" + id + "'");
}

// ---------------------------------------------------------------------------
// CSV views
// ---------------------------------------------------------------------------

inline void write_state_view(std::ostream& os, const SimTrace& tr) {
    const int p = tr.dof_p, np = tr.dof_p * tr.order_n;
    std::vector<std::string> h{"t"};
    for (int i = 1; i <= p; ++i) h.push_back("x_" + std::to_string(i));
    if (tr.has_reference()) {
        for (int i = 1; i <= p; ++i) h.push_back("xr_" + std::to_string(i));
        for (int i = 1; i <= p; ++i) h.push_back("e_" + std::to_string(i));
    }
    CsvWriter w(os, h);
    std::vector<double> row;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        row.assign({tr.time(k)});
        const auto x = tr.xi[k].segment(np - p, p);
        row.insert(row.end(), x.begin(), x.end());
        if (tr.has_reference()) {
            const auto xr = tr.xi_ref[k].segment(np - p, p);
            row.insert(row.end(), xr.begin(), xr.end());
            for (int i = 0; i < p; ++i) row.push_back(x[i] - xr[i]);
        }
        w.row(row);
    }
}

inline void write_input_view(std::ostream& os, const SimTrace& tr) {
    std::vector<std::string> h{"t"};
    for (int i = 1; i <= tr.dof_p; ++i) h.push_back("u_" + std::to_string(i));
    h.push_back("u_inf");
    CsvWriter w(os, h);
    std::vector<double> row;
    for (std::size_t k = 0; k < tr.size(); ++k) {
        row.assign({tr.time(k)});
        const auto u = tr.u[k];
        row.insert(row.end(), u.begin(), u.end());
        row.push_back(u.cwiseAbs().maxCoeff());
        w.row(row);
    }
}

inline void write_estimate_view(std::ostream& os, const SimTrace& tr, const VecRef& true_theta) {
    CsvWriter w(os, {"t", "theta_err"});
    const auto err = estimation_error(tr, true_theta);
    for (std::size_t k = 0; k < tr.size(); ++k) w.row({tr.time(k), err[k]});
}

inline void write_pe_view(std::ostream& os, const SimTrace& tr, const Scenario& sc) {
    const PlantModel model = sc.controller_model();
    const std::size_t stride = std::max<std::size_t>(1, tr.size() / 4000);
    const auto pe = pe_matrix_min_eig(tr, model, sc.excitation.period(), stride);
    CsvWriter w(os, {"t", "lambda_min", "trace", "lambda_min_rel"});
    for (std::size_t k = 0; k < pe.time.size(); ++k) {
        const double avg = pe.trace[k] / model.param_count_m;
        w.row({pe.time[k], pe.min_eig[k], pe.trace[k], avg > 0.0 ? pe.min_eig[k] / avg : 0.0});
    }
}

// ---------------------------------------------------------------------------
// batch runner
// ---------------------------------------------------------------------------

struct FigureOptions {
    std::filesystem::path scenario_dir;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;
    int parallel = 1;
    std::function<void(const std::string&)> log;  // progress messages; may be empty
};

namespace detail {

inline void emit(const FigureOptions& opt, const std::string& msg) {
    if (opt.log) opt.log(msg);
}

/// Runs one scenario and writes every requested figure that uses it.
inline std::vector<json> run_figure_group(const std::string& scenario, const std::vector<const FigureInfo*>& figs,
                                          const FigureOptions& opt) {
    std::vector<json> out;
    const auto cfg_path = opt.scenario_dir / (scenario + ".json");
    try {
        const ScenarioConfig cfg = load_scenario_config(cfg_path.string(), opt.seed);
        const bool branch = figs.front()->view == FigureView::Branch;
        std::optional<SimulationRun> sim;
        std::optional<BranchRun> br;
        emit(opt, "running scenario " + scenario);
        if (branch)
            br = run_branch(cfg);
        else
            sim = run_simulation(cfg);
        const auto& checks = branch ? br->checks : sim->checks;
        for (const auto* f : figs) {
            const auto csv = opt.out_dir / (f->id + ".csv");
            {
                std::ofstream os(csv);
                require(os.good(), "cannot write '" + csv.string() + "'");
                switch (f->view) {
                    case FigureView::Branch:
                        for (std::size_t s = 0; s < br->segments.size(); ++s)
                            write_branch_csv(os, br->segments[s], static_cast<int>(s), s == 0);
                        break;
                    case FigureView::State: write_state_view(os, sim->trace); break;
                    case FigureView::Input: write_input_view(os, sim->trace); break;
                    case FigureView::Estimate: write_estimate_view(os, sim->trace, cfg.scenario.plant.true_theta); break;
                    case FigureView::Pe: write_pe_view(os, sim->trace, cfg.scenario); break;
                }
            }
            json s = make_summary("reproduce-figure", cfg, checks, opt.seed);
            s["figure"] = f->id;
            s["description"] = f->description;
            s["artifacts"] = {f->id + ".csv"};
            if (sim && sim->metrics) s["metrics"] = metrics_to_json(*sim->metrics);
            if (br) {
                s["segments"] = branch_segments_to_json(br->segments);
                s["limit_points"] = br->count(BranchEventType::LimitPoint);
                s["neimark_sacker_points"] = br->count(BranchEventType::NeimarkSacker);
            }
            write_json_file(opt.out_dir / (f->id + ".json"), s);
            emit(opt, "wrote " + csv.string() + (s["pass"].get<bool>() ? "" : " (checks failed)"));
            out.push_back(std::move(s));
        }
    } catch (const std::exception& e) {
        for (const auto* f : figs) {
            json s{{"schema", kSummarySchema}, {"kind", "reproduce-figure"}, {"figure", f->id}, {"scenario", scenario},
                   {"seed", opt.seed ? json(*opt.seed) : json(nullptr)}, {"checks", json::array()},
                   {"pass", false}, {"error", e.what()}};
            emit(opt, f->id + " failed: " + e.what());
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace detail

/// Reproduces the given figures ("all" expands to the whole catalog).
/// Scenario groups run on up to `parallel` threads; output order follows the
/// catalog regardless of scheduling.
[[nodiscard]] inline json reproduce_figures(std::vector<std::string> ids, const FigureOptions& opt) {
    if (std::find(ids.begin(), ids.end(), "all") != ids.end()) {
        ids.clear();
        for (const auto& f : figure_catalog()) ids.push_back(f.id);
    }
    require(!ids.empty(), "no figure requested");
    std::filesystem::create_directories(opt.out_dir);

    std::vector<std::string> order;
    std::map<std::string, std::vector<const FigureInfo*>> groups;
    for (const auto& f : figure_catalog()) {
        if (std::find(ids.begin(), ids.end(), f.id) == ids.end()) continue;
        if (!groups.count(f.scenario)) order.push_back(f.scenario);
        groups[f.scenario].push_back(&f);
    }
    for (const auto& id : ids) (void)find_figure(id);

    std::vector<std::vector<json>> results(order.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t g; (g = next++) < order.size();) results[g] = detail::run_figure_group(order[g], groups[order[g]], opt);
    };
    const int threads = std::clamp(opt.parallel, 1, static_cast<int>(order.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::map<std::string, json> by_id;
    for (auto& r : results)
        for (auto& s : r) {
            // read the key first: json::operator= takes its argument by value
            const std::string id = s.at("figure").get<std::string>();
            by_id[id] = std::move(s);
        }
    json figures = json::array();
    bool pass = true;
    for (const auto& f : figure_catalog()) {
        auto it = by_id.find(f.id);
        if (it == by_id.end()) continue;
        pass = pass && it->second["pass"].get<bool>();
        figures.push_back(std::move(it->second));
    }
    json summary{{"schema", kSummarySchema}, {"kind", "reproduce-figure"},
                 {"seed", opt.seed ? json(*opt.seed) : json(nullptr)}, {"figures", figures}, {"pass", pass}};
    write_json_file(opt.out_dir / "summary.json", summary);
    return summary;
}

}  // namespace cbc_adapt
