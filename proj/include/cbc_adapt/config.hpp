#pragma once

// Scenario configuration files (JSON, "schema": 1).
//
//   {
//     "schema": 1,
//     "name": "duffing_noninvasive",
//     "plant": {"builtin": "duffing"},                 // or a polynomial plant, see below
//     "regressor_mask": "cross_terms",                  // or [true, false, ...]; optional
//     "excitation": {"omega": 2.515, "amplitude": [0.15], "phase": [0]},
//     "reference": {"builtin": "duffing", "refine_harmonics": 7,
//                   "perturb": {"max_rel_dev": 0.3, "seed": 1}},
//     "controller": {"k": 1, "kappa": 1, "epsilon": 1, "gamma": 0.1, "lambda": [1], "s_diag": 2},
//     "initial_state": [0, -1],                         // or "reference"
//     "periods": 40, "steps_per_period": 2000,          // or "t_end" / "dt" in seconds
//     "mode": "closed_loop", "record_stride": 1,
//     "thresholds": {"expect": "noninvasive", "tracking_error_max": 1e-3},
//     "branch": {"omega_min", "omega_max", "harmonics", "seeds": [...], "expect": {...}},
//     "cbc": {"tol", "max_iter", "perturb": {...}, "coefficient_error_max": 1e-4}
//   }
//
// A polynomial plant is {"order": n, "dof": p, "theta": [...],
// "columns": [{"row": r, "exponents": [...], "coeff": c}, ...]} with one
// exponent per state entry. A reference is {"builtin": name}, {"file": path}
// or an inline {"omega", "channels"} object, optionally refined by harmonic
// balance and perturbed.

#include "cbc_adapt/cbc.hpp"
#include "cbc_adapt/continuation.hpp"
#include "cbc_adapt/diagnostics.hpp"
#include "cbc_adapt/harmonic_balance.hpp"
#include "cbc_adapt/io.hpp"
#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cbc_adapt {

inline constexpr int kConfigSchema = 1;

struct ThresholdConfig {
    std::string expect = "none";  // "noninvasive", "invasive" or "none"
    double tol_noninv = 0.0;      // resolved: config value or default from the excitation
    double floor_inv = 0.0;
    std::optional<double> tracking_error_max;
    std::optional<double> tracking_error_min;
    std::optional<double> estimate_drift_max;   // |(||th~_end|| - ||th~_0||)| / ||th~_0||
    std::optional<double> pe_min_eig_rel_max;   // lambda_min(M_e) / (trace(M_e)/m), steady state
};

struct BranchSeed {
    FourierSignal guess;  // initial guess for the seed orbit
    double omega = 0.0;
    std::vector<int> directions{+1};
};

struct BranchConfig {
    ContinuationSettings settings;
    std::vector<BranchSeed> seeds;  // each seed and direction yields one segment
    std::optional<int> limit_points;           // exact count over all segments
    std::optional<int> min_limit_points;
    std::optional<int> min_neimark_sacker;
    std::optional<double> orbit_on_unstable;   // frequency whose branch orbit must be unstable
};

struct CbcConfig {
    CbcSettings settings;
    double perturb_dev = 0.0;
    std::uint64_t perturb_seed = 1;
    std::optional<double> coefficient_error_max;  // against the refined natural reference
};

struct ScenarioConfig {
    Scenario scenario;
    ThresholdConfig thresholds;
    std::optional<BranchConfig> branch;
    std::optional<CbcConfig> cbc;
    std::optional<ReferenceTrajectory> natural_reference;  // refined, unperturbed; when refinement was requested
    json source;
};

namespace detail {

[[nodiscard]] inline std::vector<double> number_array(const json& j, const std::string& what) {
    require(j.is_array(), what + " must be an array of numbers");
    std::vector<double> v;
    for (const auto& e : j) {
        require(e.is_number(), what + " must be an array of numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

[[nodiscard]] inline Vec to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

[[nodiscard]] inline PlantModel plant_from_json(const json& j) {
    if (j.is_string()) return builtin_plant(j.get<std::string>());
    require(j.is_object(), "'plant' must be a name or an object");
    if (j.contains("builtin")) return builtin_plant(j.at("builtin").get<std::string>());
    const int n = j.at("order").get<int>(), p = j.at("dof").get<int>();
    std::vector<MonomialColumn> cols;
    for (const auto& c : j.at("columns")) {
        MonomialColumn mc;
        mc.row = c.at("row").get<int>();
        mc.exponents = c.at("exponents").get<std::vector<int>>();
        mc.coeff = c.value("coeff", 1.0);
        cols.push_back(std::move(mc));
    }
    return make_polynomial_plant(n, p, std::move(cols), to_vec(number_array(j.at("theta"), "plant.theta")),
                                 j.value("name", std::string("custom")));
}

[[nodiscard]] inline Excitation excitation_from_json(const json& j, const PlantModel& plant) {
    require(j.is_object(), "'excitation' must be an object");
    const double omega = j.at("omega").get<double>();
    Vec amp;
    if (j.contains("physical_amplitude")) {
        require(plant.name == "cantilever", "'physical_amplitude' is only defined for the cantilever plant");
        const auto v = number_array(j.at("physical_amplitude"), "excitation.physical_amplitude");
        require(v.size() == 4, "excitation.physical_amplitude must have 4 entries");
        amp = cantilever_modal_forcing(Eigen::Vector4d(v[0], v[1], v[2], v[3]));
    } else {
        amp = to_vec(number_array(j.at("amplitude"), "excitation.amplitude"));
    }
    Vec phase = j.contains("phase") ? to_vec(number_array(j.at("phase"), "excitation.phase")) : Vec::Zero(amp.size());
    return {omega, amp, phase};
}

[[nodiscard]] inline ControllerParams controller_from_json(const json& j, int m) {
    require(j.is_object(), "'controller' must be an object");
    ControllerParams c;
    c.k = j.at("k").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.lambda = to_vec(number_array(j.at("lambda"), "controller.lambda"));
    if (j.contains("s_diag")) {
        c.S = j.at("s_diag").get<double>() * Mat::Identity(m, m);
    } else {
        const auto& rows = j.at("S");
        require(rows.is_array() && static_cast<int>(rows.size()) == m, "controller.S must be m x m");
        c.S.resize(m, m);
        for (int r = 0; r < m; ++r) {
            const auto row = number_array(rows[static_cast<std::size_t>(r)], "controller.S row");
            require(static_cast<int>(row.size()) == m, "controller.S must be m x m");
            for (int col = 0; col < m; ++col) c.S(r, col) = row[static_cast<std::size_t>(col)];
        }
    }
    return c;
}

[[nodiscard]] inline FourierSignal signal_source(const json& j, const std::filesystem::path& base_dir) {
    if (j.contains("builtin")) return builtin_reference(j.at("builtin").get<std::string>()).signal();
    if (j.contains("file")) return signal_from_json(read_json_file((base_dir / j.at("file").get<std::string>()).string()));
    return signal_from_json(j);
}

}  // namespace detail

/// Builds the scenario. `seed_override` replaces every perturbation seed.
[[nodiscard]] inline ScenarioConfig parse_scenario_config(const json& j, const std::filesystem::path& base_dir = ".",
                                                          std::optional<std::uint64_t> seed_override = std::nullopt) {
    try {
        require(j.is_object(), "config must be a JSON object");
        require(j.value("schema", 0) == kConfigSchema, "config 'schema' must be " + std::to_string(kConfigSchema));
        ScenarioConfig cfg;
        cfg.source = j;
        Scenario& sc = cfg.scenario;
        sc.name = j.value("name", std::string("scenario"));
        sc.plant = detail::plant_from_json(j.at("plant"));
        sc.plant.validate();
        const int p = sc.plant.dof_p, m = sc.plant.param_count_m, n = sc.plant.order_n;

        if (j.contains("regressor_mask")) {
            const auto& mj = j.at("regressor_mask");
            if (mj.is_string()) {
                require(mj.get<std::string>() == "cross_terms" && sc.plant.name == "cross_beam",
                        "regressor_mask \"cross_terms\" is only defined for the cross_beam plant");
                sc.regressor_mask = cross_beam_cross_term_mask();
            } else {
                sc.regressor_mask = mj.get<std::vector<bool>>();
            }
        }
        sc.excitation = detail::excitation_from_json(j.at("excitation"), sc.plant);
        sc.excitation.validate(p);
        const double T = sc.excitation.period();

        if (j.contains("reference")) {
            const auto& rj = j.at("reference");
            FourierSignal sig = detail::signal_source(rj, base_dir);
            require(sig.channels() == p, "reference channel count must equal plant dof");
            if (rj.contains("refine_harmonics")) {
                HbSettings hs;
                hs.harmonics = rj.at("refine_harmonics").get<int>();
                hs.compute_floquet = false;
                sig = hb_solve(sc.plant, sc.excitation, sig, sc.excitation.omega, hs).fourier;
                cfg.natural_reference = ReferenceTrajectory(sig, n);
            }
            ReferenceTrajectory ref(sig, n);
            if (rj.contains("perturb")) {
                const auto& pj = rj.at("perturb");
                ref = perturb_coefficients(ref, pj.at("max_rel_dev").get<double>(),
                                           seed_override.value_or(pj.value("seed", std::uint64_t{1})));
            }
            sc.reference = ref;
        }

        const std::string mode = j.value("mode", std::string("closed_loop"));
        require(mode == "closed_loop" || mode == "open_loop", "mode must be closed_loop or open_loop");
        sc.mode = mode == "closed_loop" ? SimMode::ClosedLoop : SimMode::OpenLoop;
        if (j.contains("controller")) sc.controller = detail::controller_from_json(j.at("controller"), m);

        const auto& ij = j.contains("initial_state") ? j.at("initial_state") : json(std::vector<double>(static_cast<std::size_t>(n * p), 0.0));
        if (ij.is_string()) {
            require(ij.get<std::string>() == "reference" && sc.reference, "initial_state \"reference\" needs a reference");
            sc.initial_state = sc.reference->eval(0.0);
        } else {
            sc.initial_state = detail::to_vec(detail::number_array(ij, "initial_state"));
        }
        if (j.contains("theta_hat0")) sc.theta_hat0 = detail::to_vec(detail::number_array(j.at("theta_hat0"), "theta_hat0"));
        sc.phi0 = j.value("phi0", 0.0);

        sc.dt = j.contains("dt") ? j.at("dt").get<double>() : T / j.value("steps_per_period", 2000);
        sc.t_end = j.contains("t_end") ? j.at("t_end").get<double>() : T * j.value("periods", 40);
        sc.record_stride = j.value("record_stride", 1);

        const auto th = InvasivenessThresholds::for_excitation(sc.excitation);
        cfg.thresholds.tol_noninv = th.tol_noninv;
        cfg.thresholds.floor_inv = th.floor_inv;
        if (j.contains("thresholds")) {
            const auto& tj = j.at("thresholds");
            cfg.thresholds.expect = tj.value("expect", std::string("none"));
            require(cfg.thresholds.expect == "none" || cfg.thresholds.expect == "noninvasive" ||
                        cfg.thresholds.expect == "invasive",
                    "thresholds.expect must be none, noninvasive or invasive");
            cfg.thresholds.tol_noninv = tj.value("tol_noninv", cfg.thresholds.tol_noninv);
            cfg.thresholds.floor_inv = tj.value("floor_inv", 10.0 * cfg.thresholds.tol_noninv);
            if (tj.contains("tracking_error_max")) cfg.thresholds.tracking_error_max = tj.at("tracking_error_max").get<double>();
            if (tj.contains("tracking_error_min")) cfg.thresholds.tracking_error_min = tj.at("tracking_error_min").get<double>();
            if (tj.contains("estimate_drift_max")) cfg.thresholds.estimate_drift_max = tj.at("estimate_drift_max").get<double>();
            if (tj.contains("pe_min_eig_rel_max")) cfg.thresholds.pe_min_eig_rel_max = tj.at("pe_min_eig_rel_max").get<double>();
        }

        if (j.contains("branch")) {
            const auto& bj = j.at("branch");
            BranchConfig b;
            auto& s = b.settings;
            s.omega_min = bj.at("omega_min").get<double>();
            s.omega_max = bj.at("omega_max").get<double>();
            s.hb.harmonics = bj.value("harmonics", 7);
            s.hb.floquet_steps = bj.value("floquet_steps", s.hb.floquet_steps);
            s.ds_initial = bj.value("ds_initial", s.ds_initial);
            s.ds_max = bj.value("ds_max", s.ds_max);
            s.max_steps = bj.value("max_steps", s.max_steps);
            s.coeff_scale = bj.value("coeff_scale", 0.0);
            s.omega_scale = bj.value("omega_scale", 0.0);
            s.tol = bj.value("tol", s.tol);
            const auto& seeds = bj.at("seeds");
            require(seeds.is_array() && !seeds.empty(), "branch.seeds must be a non-empty array");
            for (const auto& sj : seeds) {
                BranchSeed bs;
                bs.omega = sj.value("omega", sc.excitation.omega);
                const auto& gj = sj.at("guess");
                if (gj.is_string()) {
                    require(gj.get<std::string>() == "reference" && sc.reference,
                            "branch seed guess \"reference\" needs a reference");
                    bs.guess = (cfg.natural_reference ? *cfg.natural_reference : *sc.reference).signal();
                } else {
                    bs.guess = detail::signal_source(gj, base_dir);
                }
                require(bs.guess.channels() == p, "branch seed guess channel count must equal plant dof");
                if (sj.contains("directions")) bs.directions = sj.at("directions").get<std::vector<int>>();
                for (int d : bs.directions) require(d == 1 || d == -1, "branch seed directions must be +1 or -1");
                b.seeds.push_back(std::move(bs));
            }
            if (bj.contains("expect")) {
                const auto& ej = bj.at("expect");
                if (ej.contains("limit_points")) b.limit_points = ej.at("limit_points").get<int>();
                if (ej.contains("min_limit_points")) b.min_limit_points = ej.at("min_limit_points").get<int>();
                if (ej.contains("min_neimark_sacker")) b.min_neimark_sacker = ej.at("min_neimark_sacker").get<int>();
                if (ej.contains("orbit_on_unstable")) b.orbit_on_unstable = ej.at("orbit_on_unstable").get<double>();
            }
            cfg.branch = std::move(b);
        }
        if (j.contains("cbc")) {
            const auto& cj = j.at("cbc");
            CbcConfig c;
            c.settings.tol = cj.value("tol", c.settings.tol);
            c.settings.max_iter = cj.value("max_iter", c.settings.max_iter);
            c.settings.min_periods = cj.value("min_periods", c.settings.min_periods);
            c.settings.max_periods = cj.value("max_periods", c.settings.max_periods);
            c.settings.steps_per_period = cj.value("steps_per_period", c.settings.steps_per_period);
            c.settings.steady_rel = cj.value("steady_rel", c.settings.steady_rel);
            c.settings.steady_abs = cj.value("steady_abs", c.settings.steady_abs);
            c.settings.allow_fallback = cj.value("allow_fallback", true);
            if (cj.contains("perturb")) {
                c.perturb_dev = cj.at("perturb").at("max_rel_dev").get<double>();
                c.perturb_seed = seed_override.value_or(cj.at("perturb").value("seed", std::uint64_t{1}));
            }
            if (cj.contains("coefficient_error_max")) c.coefficient_error_max = cj.at("coefficient_error_max").get<double>();
            cfg.cbc = c;
        }

        sc.hash = fnv1a64(j.dump());
        if (seed_override) sc.hash = fnv1a64(j.dump() + "#seed=" + std::to_string(*seed_override));
        sc.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ContractViolation(std::string("config error: ") + e.what());
    }
}

[[nodiscard]] inline ScenarioConfig load_scenario_config(const std::string& path,
                                                         std::optional<std::uint64_t> seed_override = std::nullopt) {
    const json j = read_json_file(path);
    return parse_scenario_config(j, std::filesystem::path(path).parent_path(), seed_override);
}

}  // namespace cbc_adapt
