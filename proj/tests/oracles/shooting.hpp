#pragma once

// Shooting oracle for forced periodic orbits. Integrates the uncontrolled
// plant with an adaptive Dormand-Prince scheme (Boost.Odeint), independent
// of the library's fixed-step RK4, and solves phi_T(x0) = x0 by Newton with
// a central-difference Jacobian.

#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using cbc_adapt::Excitation;
using cbc_adapt::Mat;
using cbc_adapt::PlantModel;
using cbc_adapt::Vec;

/// State after one forcing period starting at t = 0 from x0 (library state ordering).
inline Vec period_map(const PlantModel& plant, const Excitation& exc, const Vec& x0, double rel_tol = 1e-13) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const double T = 2.0 * std::numbers::pi / exc.omega;
    const auto n = static_cast<std::size_t>(x0.size());
    State x(x0.data(), x0.data() + n);
    auto rhs = [&](const State& s, State& ds, double t) {
        const Eigen::Map<const Vec> xi(s.data(), static_cast<Eigen::Index>(n));
        const Vec dx = cbc_adapt::plant_rhs(plant, xi, exc.eval(t));
        for (std::size_t i = 0; i < n; ++i) ds[i] = dx[static_cast<Eigen::Index>(i)];
    };
    auto stepper = ode::make_controlled(rel_tol * 1e-3, rel_tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_adaptive(stepper, rhs, x, 0.0, T, T / 1000.0);
    return Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(n));
}

/// Positions x(t_j), t_j = j T / N, j = 0..N-1, along the orbit through x0,
/// projected onto harmonics 0..H by the trapezoid rule (exact for
/// trigonometric polynomials of degree < N/2).
inline cbc_adapt::FourierSignal project_orbit(const PlantModel& plant, const Excitation& exc, const Vec& x0, int H,
                                              int N = 512, double rel_tol = 1e-13) {
    namespace ode = boost::numeric::odeint;
    using State = std::vector<double>;
    const double T = 2.0 * std::numbers::pi / exc.omega;
    const auto n = static_cast<std::size_t>(x0.size());
    const int p = plant.dof_p;
    State x(x0.data(), x0.data() + n);
    auto rhs = [&](const State& s, State& ds, double t) {
        const Eigen::Map<const Vec> xi(s.data(), static_cast<Eigen::Index>(n));
        const Vec dx = cbc_adapt::plant_rhs(plant, xi, exc.eval(t));
        for (std::size_t i = 0; i < n; ++i) ds[i] = dx[static_cast<Eigen::Index>(i)];
    };
    std::vector<double> times(static_cast<std::size_t>(N));
    for (int j = 0; j < N; ++j) times[static_cast<std::size_t>(j)] = T * j / N;
    Mat pos(p, N);
    int col = 0;
    auto observer = [&](const State& s, double) {
        if (col < N)
            for (int i = 0; i < p; ++i) pos(i, col) = s[n - static_cast<std::size_t>(p) + static_cast<std::size_t>(i)];
        ++col;
    };
    auto stepper = ode::make_dense_output(rel_tol * 1e-3, rel_tol, ode::runge_kutta_dopri5<State>());
    ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), T / 1000.0, observer);

    cbc_adapt::FourierSignal out(exc.omega, p, H);
    out.a0 = pos.rowwise().mean();
    for (int k = 1; k <= H; ++k) {
        Vec c = Vec::Zero(p), s = Vec::Zero(p);
        for (int j = 0; j < N; ++j) {
            const double ph = 2.0 * std::numbers::pi * k * j / N;
            c += std::cos(ph) * pos.col(j);
            s += std::sin(ph) * pos.col(j);
        }
        out.cos_coef.col(k - 1) = 2.0 * c / N;
        out.sin_coef.col(k - 1) = 2.0 * s / N;
    }
    return out;
}

struct ShootingResult {
    Vec x0;
    double residual = 0.0;
    int iterations = 0;
};

inline ShootingResult shoot(const PlantModel& plant, const Excitation& exc, Vec x0, double tol = 1e-11, int max_iter = 30) {
    ShootingResult r;
    const auto n = x0.size();
    for (; r.iterations < max_iter; ++r.iterations) {
        const Vec g = period_map(plant, exc, x0) - x0;
        r.residual = g.cwiseAbs().maxCoeff();
        if (r.residual <= tol) break;
        Mat J(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(x0[j])) * std::max(1e-3, x0.cwiseAbs().maxCoeff());
            Vec xp = x0, xm = x0;
            xp[j] += h;
            xm[j] -= h;
            J.col(j) = ((period_map(plant, exc, xp) - xp) - (period_map(plant, exc, xm) - xm)) / (2.0 * h);
        }
        x0 += J.fullPivLu().solve(-g);
    }
    r.x0 = x0;
    return r;
}

}  // namespace oracle
