#pragma once

// Pseudo-arclength continuation of forced periodic orbits in (coefficients,
// omega), with limit-point and Neimark-Sacker detection.
//
// Unknowns are scaled: v = [c / coeff_scale; omega / omega_scale]. Arclength
// steps, tangents and the step bound all live in that scaled space.

#include "cbc_adapt/harmonic_balance.hpp"
#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace cbc_adapt {

enum class BranchEventType { LimitPoint, NeimarkSacker };

[[nodiscard]] inline const char* to_string(BranchEventType e) {
    return e == BranchEventType::LimitPoint ? "LP" : "NS";
}

struct BranchEvent {
    BranchEventType type;
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    std::size_t after_index = 0;  // event lies between orbits[after_index] and orbits[after_index + 1]
};

struct Branch {
    std::vector<PeriodicOrbit> orbits;
    std::vector<Vec> tangents;       // scaled tangent at each orbit
    std::vector<double> arclength;   // cumulative scaled arclength
    std::vector<BranchEvent> events;
    std::string termination = "range";  // "range", "max_steps" or a truncation reason
    double coeff_scale = 1.0;
    double omega_scale = 1.0;

    [[nodiscard]] std::size_t count(BranchEventType t) const {
        return static_cast<std::size_t>(
            std::count_if(events.begin(), events.end(), [t](const BranchEvent& e) { return e.type == t; }));
    }
};

struct ContinuationSettings {
    double omega_min = 0.0;
    double omega_max = 0.0;
    int direction = +1;           // initial sense of omega
    double ds_initial = 0.01;
    double ds_min = 1e-6;
    double ds_max = 0.05;
    int max_steps = 5000;
    int max_corrector_iter = 8;
    double tol = 1e-10;           // max-norm HB residual
    double coeff_scale = 0.0;     // 0: max |c| of the seed
    double omega_scale = 0.0;     // 0: omega_max - omega_min
    double min_tangent_cos = 0.95;
    double event_resolution = 1e-3;  // bracketing width in omega
    int max_bisections = 30;
    HbSettings hb;                // harmonics and Floquet steps
};

namespace detail {

class ArclengthProblem {
public:
    ArclengthProblem(const PlantModel& plant, const Excitation& excitation, int H, double cs, double ws)
        : plant_(plant), exc_(excitation), H_(H), cs_(cs), ws_(ws) {}

    [[nodiscard]] Eigen::Index unknowns() const { return plant_.dof_p * (2 * H_ + 1) + 1; }

    [[nodiscard]] Vec to_scaled(const Vec& c, double omega) const {
        Vec v(c.size() + 1);
        v.head(c.size()) = c / cs_;
        v[c.size()] = omega / ws_;
        return v;
    }
    [[nodiscard]] double omega(const Vec& v) const { return v[v.size() - 1] * ws_; }
    [[nodiscard]] Vec coeffs(const Vec& v) const { return v.head(v.size() - 1) * cs_; }

    [[nodiscard]] Vec residual(const Vec& v) const {
        const double w = omega(v);
        return hb_residual(plant_, exc_, FourierSignal::unpack(coeffs(v), w, plant_.dof_p, H_), w, H_);
    }

    /// N x (N+1) forward-difference Jacobian in scaled variables.
    [[nodiscard]] Mat jacobian(const Vec& v, const Vec& R0) const {
        Mat J(R0.size(), v.size());
        Vec probe = v;
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(v[j]));
            probe[j] = v[j] + h;
            J.col(j) = (residual(probe) - R0) / h;
            probe[j] = v[j];
        }
        return J;
    }

    /// Unit null vector of J with t_ref . t > 0.
    [[nodiscard]] static Vec tangent(const Mat& J, const Vec& t_ref) {
        const Eigen::Index n = J.cols();
        Mat A(n, n);
        A.topRows(n - 1) = J;
        A.row(n - 1) = t_ref.transpose();
        Vec rhs = Vec::Zero(n);
        rhs[n - 1] = 1.0;
        Vec t = A.fullPivLu().solve(rhs);
        return t / t.norm();
    }

    struct Corrected {
        Vec v;
        Vec tangent;
        double residual = 0.0;
        int iterations = 0;
    };

    /// Newton on [R(v); t0.(v - v0) - ds] = 0 starting from the predictor.
    [[nodiscard]] std::optional<Corrected> correct(const Vec& v0, const Vec& t0, double ds, int max_iter,
                                                   double tol) const {
        Vec v = v0 + ds * t0;
        const Eigen::Index n = v.size();
        for (int it = 0; it <= max_iter; ++it) {
            const Vec R = residual(v);
            const double rn = R.cwiseAbs().maxCoeff();
            if (!std::isfinite(rn)) return std::nullopt;
            const Mat J = jacobian(v, R);
            if (rn <= tol) return Corrected{v, tangent(J, t0), rn, it};
            if (it == max_iter) break;
            Mat A(n, n);
            A.topRows(n - 1) = J;
            A.row(n - 1) = t0.transpose();
            Vec G(n);
            G.head(n - 1) = R;
            G[n - 1] = t0.dot(v - v0) - ds;
            const Vec dv = A.fullPivLu().solve(-G);
            if (!dv.allFinite()) return std::nullopt;
            v += dv;
        }
        return std::nullopt;
    }

    [[nodiscard]] PeriodicOrbit make_orbit(const Vec& v, double residual, int iterations, int floquet_steps) const {
        PeriodicOrbit orb;
        orb.omega = omega(v);
        orb.fourier = FourierSignal::unpack(coeffs(v), orb.omega, plant_.dof_p, H_);
        orb.residual_norm = residual;
        orb.newton_iterations = iterations;
        classify_floquet(orb, plant_, floquet_steps);
        return orb;
    }

private:
    const PlantModel& plant_;
    const Excitation& exc_;
    int H_;
    double cs_, ws_;
};

[[nodiscard]] inline bool is_complex(std::complex<double> mu) {
    return std::abs(mu.imag()) > 1e-9 * std::max(1.0, std::abs(mu));
}

/// Number of complex (non-real) multipliers outside the unit circle.
[[nodiscard]] inline int complex_unstable_count(const PeriodicOrbit& o) {
    int c = 0;
    for (const auto& mu : o.floquet_multipliers)
        if (is_complex(mu) && std::abs(mu) > 1.0) ++c;
    return c;
}

[[nodiscard]] inline int unstable_count(const PeriodicOrbit& o) {
    int c = 0;
    for (const auto& mu : o.floquet_multipliers)
        if (std::abs(mu) > 1.0) ++c;
    return c;
}

/// A complex pair crossed |mu| = 1 between a and b. A pair that merely
/// collides on the real axis changes the complex count but not the total.
[[nodiscard]] inline bool complex_crossing(const PeriodicOrbit& a, const PeriodicOrbit& b) {
    const int dc = complex_unstable_count(b) - complex_unstable_count(a);
    return dc != 0 && dc == unstable_count(b) - unstable_count(a);
}

/// Distance of the closest complex multiplier to the unit circle.
[[nodiscard]] inline double complex_unit_distance(const PeriodicOrbit& o) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& mu : o.floquet_multipliers)
        if (is_complex(mu)) d = std::min(d, std::abs(std::abs(mu) - 1.0));
    return d;
}

}  // namespace detail

/// Traces the branch through `seed` until omega leaves [omega_min, omega_max].
/// Step-size underflow truncates the branch with a reason instead of throwing.
[[nodiscard]] inline Branch continue_branch(const PlantModel& plant, const Excitation& excitation,
                                            const PeriodicOrbit& seed, const ContinuationSettings& cfg) {
    require(cfg.omega_max > cfg.omega_min, "continue_branch: empty omega range");
    require(cfg.direction == 1 || cfg.direction == -1, "continue_branch: direction must be +1 or -1");
    require(seed.residual_norm <= std::max(cfg.tol, cfg.hb.tol) * 10.0, "continue_branch: seed orbit not converged");
    const int H = cfg.hb.harmonics;
    const FourierSignal seed_sig = seed.fourier.with_harmonics(H);
    const Vec c0 = seed_sig.pack();

    Branch br;
    br.coeff_scale = cfg.coeff_scale > 0.0 ? cfg.coeff_scale : std::max(c0.cwiseAbs().maxCoeff(), 1e-300);
    br.omega_scale = cfg.omega_scale > 0.0 ? cfg.omega_scale : (cfg.omega_max - cfg.omega_min);
    const detail::ArclengthProblem prob(plant, excitation, H, br.coeff_scale, br.omega_scale);

    Vec v = prob.to_scaled(c0, seed.omega);
    Vec R = prob.residual(v);
    Vec e_omega = Vec::Zero(v.size());
    e_omega[v.size() - 1] = cfg.direction;
    Vec t = detail::ArclengthProblem::tangent(prob.jacobian(v, R), e_omega);

    br.orbits.push_back(prob.make_orbit(v, R.cwiseAbs().maxCoeff(), 0, cfg.hb.floquet_steps));
    br.tangents.push_back(t);
    br.arclength.push_back(0.0);

    double ds = cfg.ds_initial;
    int steps = 0;
    for (;; ++steps) {
        if (steps >= cfg.max_steps) {
            br.termination = "max_steps";
            break;
        }
        std::optional<detail::ArclengthProblem::Corrected> next;
        while (ds >= cfg.ds_min) {
            next = prob.correct(v, t, ds, cfg.max_corrector_iter, cfg.tol);
            if (next && next->tangent.dot(t) >= cfg.min_tangent_cos) break;
            next.reset();
            ds *= 0.5;
        }
        if (!next) {
            br.termination = "step size underflow at omega = " + std::to_string(prob.omega(v));
            break;
        }

        PeriodicOrbit orb = prob.make_orbit(next->v, next->residual, next->iterations, cfg.hb.floquet_steps);
        const PeriodicOrbit& prev = br.orbits.back();
        const std::size_t idx = br.orbits.size() - 1;
        const double ds_taken = ds;

        // Localise sign changes by bisection on the step length from v along t.
        auto bracket = [&](auto indicator, PeriodicOrbit* lo_orbit = nullptr, PeriodicOrbit* hi_orbit = nullptr) {
            double lo = 0.0, hi = ds_taken;
            double w_lo = prev.omega, w_hi = orb.omega;
            const auto ind_lo = indicator(prev, t);
            for (int b = 0; b < cfg.max_bisections && std::abs(w_hi - w_lo) > cfg.event_resolution; ++b) {
                const double mid = 0.5 * (lo + hi);
                auto c = prob.correct(v, t, mid, cfg.max_corrector_iter, cfg.tol);
                if (!c) break;
                const PeriodicOrbit o = prob.make_orbit(c->v, c->residual, c->iterations, cfg.hb.floquet_steps);
                if (indicator(o, c->tangent) == ind_lo) {
                    lo = mid;
                    w_lo = o.omega;
                    if (lo_orbit) *lo_orbit = o;
                } else {
                    hi = mid;
                    w_hi = o.omega;
                    if (hi_orbit) *hi_orbit = o;
                }
            }
            return std::pair{std::min(w_lo, w_hi), std::max(w_lo, w_hi)};
        };

        const bool fold = (t[t.size() - 1] > 0.0) != (next->tangent[t.size() - 1] > 0.0);
        if (fold) {
            auto [lo, hi] = bracket([](const PeriodicOrbit&, const Vec& tan) { return tan[tan.size() - 1] > 0.0; });
            br.events.push_back({BranchEventType::LimitPoint, lo, hi, idx});
        }
        if (detail::complex_crossing(prev, orb)) {
            PeriodicOrbit near_lo = prev, near_hi = orb;
            auto [lo, hi] = bracket(
                [](const PeriodicOrbit& o, const Vec&) { return detail::complex_unstable_count(o); },
                &near_lo, &near_hi);
            // Keep the event only if the localised bracket sits on the unit circle.
            if (std::min(detail::complex_unit_distance(near_lo), detail::complex_unit_distance(near_hi)) < 0.05)
                br.events.push_back({BranchEventType::NeimarkSacker, lo, hi, idx});
        }

        br.arclength.push_back(br.arclength.back() + (next->v - v).norm());
        v = next->v;
        t = next->tangent;
        br.orbits.push_back(std::move(orb));
        br.tangents.push_back(t);

        if (next->iterations <= 3) ds = std::min(ds * 1.5, cfg.ds_max);
        const double w = prob.omega(v);
        if (w < cfg.omega_min || w > cfg.omega_max) break;
    }
    return br;
}

}  // namespace cbc_adapt
