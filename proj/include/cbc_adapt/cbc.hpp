#pragma once

// Control-based continuation as a zero problem on reference coefficients:
// find c such that the Fourier projection of u'(t) over the final simulated
// period vanishes. Newton with a forward-difference Jacobian, step halving,
// and a fixed-point fallback that replaces the reference with the measured
// response.

#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/simulator.hpp"
#include "cbc_adapt/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace cbc_adapt {

struct CbcSettings {
    double tol = 1e-7;            // max-norm of the projected u'
    int max_iter = 15;
    int min_periods = 10;         // simulated forcing periods before steady-state checks
    int max_periods = 400;
    double steady_rel = 1e-3;     // period-to-period change of the projection, relative
    double steady_abs = 1e-8;     // ... or absolute
    int steps_per_period = 1000;
    int threads = 1;              // Jacobian columns evaluated in parallel
    bool allow_fallback = true;
};

struct CbcResult {
    ReferenceTrajectory reference;
    int iterations = 0;
    std::vector<double> residual_history;  // ||R||_inf after each accepted update, entry 0 = initial
    int fallback_steps = 0;
    bool converged = false;
};

class CbcFailure : public SolverFailure {
public:
    CbcFailure(const std::string& what, CbcResult partial)
        : SolverFailure(what, partial.residual_history.empty() ? std::numeric_limits<double>::infinity()
                                                               : partial.residual_history.back()),
          partial_(std::move(partial)) {}

    [[nodiscard]] const CbcResult& partial() const noexcept { return partial_; }

private:
    CbcResult partial_;
};

/// Projection of a sampled periodic signal onto harmonics 0..H, packed like
/// FourierSignal::pack(). `samples` holds N points uniformly covering one
/// period without the repeated endpoint.
[[nodiscard]] inline FourierSignal project_period(const Series& samples, std::size_t first, std::size_t count,
                                                  double omega, int H) {
    require(count >= static_cast<std::size_t>(2 * H + 1), "project_period: too few samples for H harmonics");
    const int p = static_cast<int>(samples.dim());
    FourierSignal s(omega, p, H);
    const double N = static_cast<double>(count);
    for (std::size_t j = 0; j < count; ++j) {
        const auto v = samples[first + j];
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(j) / N;
        s.a0 += v / N;
        for (int k = 1; k <= H; ++k) {
            s.cos_coef.col(k - 1) += (2.0 / N) * std::cos(k * phase) * v;
            s.sin_coef.col(k - 1) += (2.0 / N) * std::sin(k * phase) * v;
        }
    }
    return s;
}

/// One CBC measurement: closed loop started on the reference with I = 0,
/// phi = 0 and th_hat = 0, integrated period by period until the projection
/// of u' settles. u' and x are projected over the final period.
struct CbcEvaluation {
    Vec residual;            // packed projection of u'
    FourierSignal response;  // projection of the measured position
    int periods = 0;
    bool steady = false;
    bool diverged = false;

    [[nodiscard]] double norm() const {
        return diverged ? std::numeric_limits<double>::infinity() : residual.cwiseAbs().maxCoeff();
    }
};

/// `fixed_periods` > 0 disables the steady-state test and runs exactly that
/// many periods, so finite differences compare equal horizons.
[[nodiscard]] inline CbcEvaluation cbc_evaluate(const Scenario& base, const ReferenceTrajectory& ref,
                                                const CbcSettings& cfg, int fixed_periods = 0) {
    const int H = ref.signal().harmonics();
    const int p = base.plant.dof_p, np = base.plant.state_dim();
    Scenario sc = base;
    sc.mode = SimMode::ClosedLoop;
    sc.reference = ref;
    sc.initial_state = ref.eval(0.0);
    sc.theta_hat0 = Vec();
    sc.phi0 = 0.0;
    const int n = cfg.steps_per_period;
    const double T = sc.excitation.period();
    sc.dt = T / n;

    detail::ClosedLoopSystem sys(sc);
    Vec Y = sys.initial();
    Rk4Workspace ws(Y.size());
    ControlOutput out;
    Series u(p), x(p);
    u.reserve(static_cast<std::size_t>(n));
    x.reserve(static_cast<std::size_t>(n));

    CbcEvaluation ev;
    const int limit = fixed_periods > 0 ? fixed_periods : cfg.max_periods;
    Vec previous;
    for (int k = 0; k < limit; ++k) {
        u = Series(p);
        x = Series(p);
        for (int i = 0; i < n; ++i) {
            // Global step index keeps t exact: t = (k n + i) dt.
            const double t = static_cast<double>(static_cast<long>(k) * n + i) * sc.dt;
            sys.control(t, Y, out);
            u.push_back(out.u);
            x.push_back(Y.segment(np - p, p));
            rk4_step(sys, t, Y, sc.dt, ws);
        }
        if (!Y.allFinite()) {
            ev.diverged = true;
            ev.periods = k + 1;
            ev.residual = Vec::Constant(ref.signal().pack().size(), std::numeric_limits<double>::infinity());
            return ev;
        }
        ev.periods = k + 1;
        if (fixed_periods > 0 && k + 1 < fixed_periods) continue;
        if (fixed_periods == 0 && k + 1 < cfg.min_periods) continue;
        Vec current = project_period(u, 0, static_cast<std::size_t>(n), ref.omega(), H).pack();
        if (fixed_periods == 0 && previous.size() == current.size()) {
            const double change = (current - previous).cwiseAbs().maxCoeff();
            ev.steady = change <= std::max(cfg.steady_abs, cfg.steady_rel * current.cwiseAbs().maxCoeff());
        }
        previous = std::move(current);
        if (fixed_periods > 0 || ev.steady) break;
    }
    ev.residual = previous;
    ev.response = project_period(x, 0, static_cast<std::size_t>(n), ref.omega(), H);
    if (fixed_periods > 0) ev.steady = true;
    return ev;
}

namespace detail {

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::clamp(threads, 1, std::max(count, 1));
    if (threads == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += threads) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace detail

/// Drives the projected control input to zero. `base` supplies plant,
/// excitation and controller; its reference and initial state are ignored.
[[nodiscard]] inline CbcResult cbc_solve(const Scenario& base, const ReferenceTrajectory& initial_reference,
                                         const CbcSettings& cfg = {}) {
    require(cfg.tol > 0.0 && cfg.max_iter >= 0 && cfg.min_periods >= 1 && cfg.max_periods >= cfg.min_periods && cfg.steps_per_period >= 8,
            "cbc_solve: invalid settings");
    require(initial_reference.dof() == base.plant.dof_p && initial_reference.order() == base.plant.order_n,
            "cbc_solve: reference shape does not match plant");
    base.controller.validate(base.plant.order_n, base.plant.param_count_m);

    const FourierSignal& sig0 = initial_reference.signal();
    const int p = sig0.channels(), H = sig0.harmonics(), n = initial_reference.order();
    const double omega = sig0.omega;
    auto make_ref = [&](const Vec& c) { return ReferenceTrajectory(FourierSignal::unpack(c, omega, p, H), n); };

    CbcResult res;
    Vec c = sig0.pack();
    CbcEvaluation ev = cbc_evaluate(base, initial_reference, cfg);
    res.reference = initial_reference;
    res.residual_history.push_back(ev.norm());
    if (ev.diverged || !ev.steady)
        throw CbcFailure("cbc_solve: no steady state reached from the initial reference", res);

    const auto nc = static_cast<int>(c.size());
    while (ev.norm() > cfg.tol) {
        if (res.iterations >= cfg.max_iter)
            throw CbcFailure("cbc_solve: no convergence after " + std::to_string(cfg.max_iter) + " iterations", res);
        ++res.iterations;

        Mat J(nc, nc);
        std::atomic<bool> column_diverged{false};
        detail::parallel_for(nc, cfg.threads, [&](int j) {
            Vec cj = c;
            const double h = std::max(1e-6, 1e-3 * std::abs(c[j]));
            cj[j] += h;
            const CbcEvaluation e = cbc_evaluate(base, make_ref(cj), cfg, ev.periods);
            if (e.diverged) column_diverged = true;
            J.col(j) = (e.residual - ev.residual) / h;
        });

        std::optional<std::pair<Vec, CbcEvaluation>> accepted;
        if (!column_diverged) {
            const Vec step = J.fullPivLu().solve(-ev.residual);
            if (step.allFinite()) {
                double lam = 1.0;
                for (int halvings = 0; halvings <= 8; ++halvings, lam *= 0.5) {
                    Vec c_try = c + lam * step;
                    CbcEvaluation e_try = cbc_evaluate(base, make_ref(c_try), cfg);
                    if (e_try.norm() < ev.norm()) {
                        accepted.emplace(std::move(c_try), std::move(e_try));
                        break;
                    }
                }
            }
        }
        if (!accepted && cfg.allow_fallback) {
            // Fixed-point update: adopt the measured response as the next reference.
            Vec c_fp = ev.response.pack();
            CbcEvaluation e_fp = cbc_evaluate(base, make_ref(c_fp), cfg);
            if (e_fp.norm() < ev.norm()) {
                ++res.fallback_steps;
                accepted.emplace(std::move(c_fp), std::move(e_fp));
            }
        }
        if (!accepted) throw CbcFailure("cbc_solve: Newton stagnated at iteration " + std::to_string(res.iterations), res);

        c = std::move(accepted->first);
        ev = std::move(accepted->second);
        res.reference = make_ref(c);
        res.residual_history.push_back(ev.norm());
    }
    res.converged = true;
    return res;
}

}  // namespace cbc_adapt
