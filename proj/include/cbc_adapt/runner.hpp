#pragma once

// Runs a parsed scenario config (simulation, branch or CBC solve), evaluates
// the checks the config declares, and writes the artifacts of each run.

#include "cbc_adapt/cbc.hpp"
#include "cbc_adapt/config.hpp"
#include "cbc_adapt/continuation.hpp"
#include "cbc_adapt/diagnostics.hpp"
#include "cbc_adapt/harmonic_balance.hpp"
#include "cbc_adapt/io.hpp"
#include "cbc_adapt/simulator.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cbc_adapt {

inline constexpr int kSummarySchema = 1;

/// One named pass/fail comparison.
struct Check {
    std::string name;
    double value = 0.0;
    double limit = 0.0;
    std::string relation;  // "<=", ">=", "==" or "is"
    bool pass = false;
};

[[nodiscard]] inline Check check_le(std::string name, double value, double limit) {
    return {std::move(name), value, limit, "<=", value <= limit};
}

[[nodiscard]] inline Check check_ge(std::string name, double value, double limit) {
    return {std::move(name), value, limit, ">=", value >= limit};
}

[[nodiscard]] inline Check check_eq(std::string name, double value, double expected) {
    return {std::move(name), value, expected, "==", value == expected};
}

[[nodiscard]] inline Check check_true(std::string name, bool ok) { return {std::move(name), ok ? 1.0 : 0.0, 1.0, "is", ok}; }

[[nodiscard]] inline json checks_to_json(const std::vector<Check>& checks) {
    json a = json::array();
    for (const auto& c : checks)
        a.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"relation", c.relation}, {"pass", c.pass}});
    return a;
}

[[nodiscard]] inline bool all_pass(const std::vector<Check>& checks) {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

/// Common summary layout for every subcommand and figure.
[[nodiscard]] inline json make_summary(const std::string& kind, const ScenarioConfig& cfg, const std::vector<Check>& checks,
                                       std::optional<std::uint64_t> seed) {
    json j;
    j["schema"] = kSummarySchema;
    j["kind"] = kind;
    j["scenario"] = cfg.scenario.name;
    j["scenario_hash"] = hash_hex(cfg.scenario.hash);
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["checks"] = checks_to_json(checks);
    j["pass"] = all_pass(checks);
    return j;
}

[[nodiscard]] inline json metrics_to_json(const MetricsReport& r) {
    return {{"period", r.period},
            {"sup_u", r.sup_u},
            {"sup_e", r.sup_e},
            {"sup_z", r.sup_z},
            {"sup_y", r.sup_y},
            {"theta_err_initial", r.theta_err_initial},
            {"theta_err_final", r.theta_err_final},
            {"theta_err_min", r.theta_err_min},
            {"theta_err_max", r.theta_err_max},
            {"phi_final", r.phi_final},
            {"lyapunov_nonincreasing", r.lyapunov_nonincreasing},
            {"pe_min_eig_min", r.pe_min_eig_min},
            {"pe_min_eig_rel_max", r.pe_min_eig_rel_max},
            {"delta_sup", r.delta_sup},
            {"tol_noninv", r.thresholds.tol_noninv},
            {"floor_inv", r.thresholds.floor_inv},
            {"noninvasive", r.noninvasive},
            {"invasive", r.invasive}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulationRun {
    SimTrace trace;
    std::optional<MetricsReport> metrics;  // closed loop only
    std::vector<Check> checks;
};

[[nodiscard]] inline std::vector<Check> simulation_checks(const ScenarioConfig& cfg, const SimTrace& tr,
                                                          const std::optional<MetricsReport>& m) {
    std::vector<Check> out;
    const auto& th = cfg.thresholds;
    const double T = cfg.scenario.excitation.period();
    if (m) {
        if (th.expect == "noninvasive") out.push_back(check_le("invasiveness", m->sup_u, th.tol_noninv));
        if (th.expect == "invasive") out.push_back(check_ge("invasiveness", m->sup_u, th.floor_inv));
        if (th.estimate_drift_max && m->theta_err_initial > 0.0)
            out.push_back(check_le("estimate_drift",
                                   std::abs(m->theta_err_final - m->theta_err_initial) / m->theta_err_initial,
                                   *th.estimate_drift_max));
        if (th.pe_min_eig_rel_max) out.push_back(check_le("pe_min_eig_rel", m->pe_min_eig_rel_max, *th.pe_min_eig_rel_max));
    }
    if (tr.has_reference()) {
        const double e = m ? m->sup_e : final_tracking_error(tr, T);
        if (th.tracking_error_max) out.push_back(check_le("tracking_error", e, *th.tracking_error_max));
        if (th.tracking_error_min) out.push_back(check_ge("tracking_error", e, *th.tracking_error_min));
    }
    return out;
}

[[nodiscard]] inline SimulationRun run_simulation(const ScenarioConfig& cfg) {
    SimulationRun run;
    run.trace = simulate(cfg.scenario);
    if (run.trace.closed_loop()) run.metrics = compute_metrics(cfg.scenario, run.trace);
    run.checks = simulation_checks(cfg, run.trace, run.metrics);
    return run;
}

// ---------------------------------------------------------------------------
// branch
// ---------------------------------------------------------------------------

struct BranchRun {
    std::vector<Branch> segments;
    std::vector<Check> checks;

    [[nodiscard]] std::size_t count(BranchEventType t) const {
        std::size_t n = 0;
        for (const auto& s : segments) n += s.count(t);
        return n;
    }
};

/// Finds the branch piece closest to `target` (max-norm over coefficients) at
/// the target's frequency, interpolating linearly between consecutive orbits
/// that bracket it. `unstable` is set when both bracketing orbits are.
struct BranchLocation {
    bool found = false;
    double distance = 0.0;
    bool unstable = false;
};

[[nodiscard]] inline BranchLocation locate_on_branch(const std::vector<Branch>& segments, const FourierSignal& target) {
    BranchLocation best;
    best.distance = std::numeric_limits<double>::infinity();
    const double w = target.omega;
    for (const auto& br : segments) {
        for (std::size_t i = 0; i + 1 < br.orbits.size(); ++i) {
            const auto& a = br.orbits[i];
            const auto& b = br.orbits[i + 1];
            if ((a.omega - w) * (b.omega - w) > 0.0 || a.omega == b.omega) continue;
            const double s = (w - a.omega) / (b.omega - a.omega);
            const int H = a.fourier.harmonics();
            const Vec c = (1.0 - s) * a.fourier.pack() + s * b.fourier.pack();
            const double d = (c - target.with_harmonics(H).pack()).cwiseAbs().maxCoeff();
            if (d < best.distance) {
                best.found = true;
                best.distance = d;
                best.unstable = !a.stable && !b.stable;
            }
        }
    }
    return best;
}

[[nodiscard]] inline BranchRun run_branch(const ScenarioConfig& cfg) {
    require(cfg.branch.has_value(), "scenario '" + cfg.scenario.name + "' has no 'branch' section");
    const auto& bc = *cfg.branch;
    const auto& plant = cfg.scenario.plant;
    BranchRun run;
    for (const auto& seed : bc.seeds) {
        Excitation exc = cfg.scenario.excitation;
        exc.omega = seed.omega;
        HbSettings hs = bc.settings.hb;
        const PeriodicOrbit orbit = hb_solve(plant, exc, seed.guess, seed.omega, hs);
        for (int dir : seed.directions) {
            ContinuationSettings s = bc.settings;
            s.direction = dir;
            run.segments.push_back(continue_branch(plant, exc, orbit, s));
        }
    }
    if (bc.limit_points)
        run.checks.push_back(check_eq("limit_points", static_cast<double>(run.count(BranchEventType::LimitPoint)), *bc.limit_points));
    if (bc.min_limit_points)
        run.checks.push_back(
            check_ge("limit_points", static_cast<double>(run.count(BranchEventType::LimitPoint)), *bc.min_limit_points));
    if (bc.min_neimark_sacker)
        run.checks.push_back(check_ge("neimark_sacker_points",
                                      static_cast<double>(run.count(BranchEventType::NeimarkSacker)),
                                      *bc.min_neimark_sacker));
    if (bc.orbit_on_unstable) {
        require(cfg.natural_reference || cfg.scenario.reference, "orbit_on_unstable check needs a reference");
        FourierSignal target = (cfg.natural_reference ? *cfg.natural_reference : *cfg.scenario.reference).signal();
        target.omega = *bc.orbit_on_unstable;
        const auto loc = locate_on_branch(run.segments, target);
        run.checks.push_back(check_true("reference_orbit_on_unstable_segment", loc.found && loc.unstable));
    }
    return run;
}

// ---------------------------------------------------------------------------
// cbc
// ---------------------------------------------------------------------------

struct CbcRun {
    ReferenceTrajectory initial;
    CbcResult result;
    std::optional<double> coefficient_error;  // against the refined natural reference
    std::vector<Check> checks;
};

[[nodiscard]] inline CbcRun run_cbc(const ScenarioConfig& cfg, int threads = 1) {
    require(cfg.cbc.has_value(), "scenario '" + cfg.scenario.name + "' has no 'cbc' section");
    require(cfg.scenario.reference.has_value(), "cbc run needs a reference");
    const auto& cc = *cfg.cbc;
    CbcRun run;
    const ReferenceTrajectory natural = cfg.natural_reference ? *cfg.natural_reference : *cfg.scenario.reference;
    run.initial = cc.perturb_dev > 0.0 ? perturb_coefficients(natural, cc.perturb_dev, cc.perturb_seed) : natural;
    CbcSettings s = cc.settings;
    s.threads = threads;
    run.result = cbc_solve(cfg.scenario, run.initial, s);
    if (cfg.natural_reference)
        run.coefficient_error = (run.result.reference.signal().pack() - cfg.natural_reference->signal().pack()).cwiseAbs().maxCoeff();
    run.checks.push_back(check_true("converged", run.result.converged));
    run.checks.push_back(check_le("iterations", run.result.iterations, s.max_iter));
    if (cc.coefficient_error_max && run.coefficient_error)
        run.checks.push_back(check_le("coefficient_error", *run.coefficient_error, *cc.coefficient_error_max));
    return run;
}

// ---------------------------------------------------------------------------
// artifacts
// ---------------------------------------------------------------------------

inline void write_json_file(const std::filesystem::path& path, const json& j) { write_text_file(path.string(), j.dump(2) + "\n"); }

inline void write_branch_segments_csv(const std::filesystem::path& path, const std::vector<Branch>& segments) {
    std::ofstream os(path);
    require(os.good(), "cannot write '" + path.string() + "'");
    for (std::size_t s = 0; s < segments.size(); ++s) write_branch_csv(os, segments[s], static_cast<int>(s), s == 0);
}

[[nodiscard]] inline json branch_segments_to_json(const std::vector<Branch>& segments) {
    json a = json::array();
    for (std::size_t s = 0; s < segments.size(); ++s) {
        const auto& br = segments[s];
        a.push_back({{"segment", s},
                     {"orbits", br.orbits.size()},
                     {"omega_first", br.orbits.front().omega},
                     {"omega_last", br.orbits.back().omega},
                     {"termination", br.termination},
                     {"events", branch_events_to_json(br)}});
    }
    return a;
}

/// Writes trace.csv, metrics.json (closed loop) and summary.json into `dir`.
inline json write_simulation_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg, const SimulationRun& run,
                                       std::optional<std::uint64_t> seed) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir / "trace.csv");
        require(os.good(), "cannot write '" + (dir / "trace.csv").string() + "'");
        write_trace_csv(os, run.trace);
    }
    json summary = make_summary("simulate", cfg, run.checks, seed);
    summary["artifacts"] = {"trace.csv"};
    summary["mode"] = to_string(cfg.scenario.mode);
    summary["samples"] = run.trace.size();
    if (run.metrics) {
        write_json_file(dir / "metrics.json", metrics_to_json(*run.metrics));
        summary["metrics"] = metrics_to_json(*run.metrics);
        summary["artifacts"].push_back("metrics.json");
    }
    write_json_file(dir / "summary.json", summary);
    return summary;
}

/// Writes branch.csv, events.json and summary.json into `dir`.
inline json write_branch_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg, const BranchRun& run,
                                   std::optional<std::uint64_t> seed) {
    std::filesystem::create_directories(dir);
    write_branch_segments_csv(dir / "branch.csv", run.segments);
    const json segs = branch_segments_to_json(run.segments);
    write_json_file(dir / "events.json", segs);
    json summary = make_summary("branch", cfg, run.checks, seed);
    summary["segments"] = segs;
    summary["limit_points"] = run.count(BranchEventType::LimitPoint);
    summary["neimark_sacker_points"] = run.count(BranchEventType::NeimarkSacker);
    summary["artifacts"] = {"branch.csv", "events.json"};
    write_json_file(dir / "summary.json", summary);
    return summary;
}

/// Writes reference.json (converged), residuals.csv and summary.json into `dir`.
inline json write_cbc_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg, const CbcRun& run,
                                std::optional<std::uint64_t> seed) {
    std::filesystem::create_directories(dir);
    write_json_file(dir / "reference.json", signal_to_json(run.result.reference.signal()));
    {
        std::ofstream os(dir / "residuals.csv");
        CsvWriter w(os, {"iteration", "residual_inf"});
        for (std::size_t i = 0; i < run.result.residual_history.size(); ++i)
            w.row({static_cast<double>(i), run.result.residual_history[i]});
    }
    json summary = make_summary("cbc", cfg, run.checks, seed);
    summary["iterations"] = run.result.iterations;
    summary["fallback_steps"] = run.result.fallback_steps;
    summary["final_residual"] = run.result.residual_history.back();
    summary["coefficient_error"] = run.coefficient_error ? json(*run.coefficient_error) : json(nullptr);
    summary["initial_reference"] = signal_to_json(run.initial.signal());
    summary["artifacts"] = {"reference.json", "residuals.csv"};
    write_json_file(dir / "summary.json", summary);
    return summary;
}

}  // namespace cbc_adapt
