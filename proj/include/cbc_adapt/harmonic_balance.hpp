#pragma once

// Periodic orbits of the uncontrolled plant by harmonic balance, with
// Floquet multipliers from the monodromy matrix along the Fourier orbit.

#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

namespace cbc_adapt {

struct PeriodicOrbit {
    FourierSignal fourier;
    double omega = 0.0;
    std::vector<std::complex<double>> floquet_multipliers;
    bool stable = false;
    double residual_norm = 0.0;
    int newton_iterations = 0;
    Mat monodromy;

    [[nodiscard]] ReferenceTrajectory as_reference(int order_n) const { return {fourier, order_n}; }

    [[nodiscard]] double max_multiplier_modulus() const {
        double r = 0.0;
        for (const auto& mu : floquet_multipliers) r = std::max(r, std::abs(mu));
        return r;
    }
};

struct HbSettings {
    int harmonics = 7;
    double tol = 1e-10;
    int max_iter = 40;
    int floquet_steps = 2000;
    bool compute_floquet = true;
};

/// Quadrature points used for the Galerkin projection.
[[nodiscard]] inline int hb_sample_count(int harmonics) { return 8 * harmonics + 8; }

namespace detail {

/// Precomputed trigonometric table for one (omega, H, N) triple.
struct HbGrid {
    int H, N;
    double omega;
    Mat cos_t, sin_t;  // N x H

    HbGrid(double w, int h) : H(h), N(hb_sample_count(h)), omega(w), cos_t(N, h), sin_t(N, h) {
        for (int j = 0; j < N; ++j) {
            const double phase = 2.0 * std::numbers::pi * j / N;
            for (int k = 1; k <= H; ++k) {
                cos_t(j, k - 1) = std::cos(k * phase);
                sin_t(j, k - 1) = std::sin(k * phase);
            }
        }
    }

    [[nodiscard]] double time(int j) const { return 2.0 * std::numbers::pi * j / (N * omega); }
};

}  // namespace detail

/// Fourier-Galerkin residual of x^(n) - F(xi) theta - sigma for the candidate
/// orbit `fourier` (channels = dof, harmonics = H) at forcing frequency omega.
/// Packed like FourierSignal::pack().
[[nodiscard]] inline Vec hb_residual(const PlantModel& plant, const Excitation& excitation, const FourierSignal& fourier,
                                     double omega, int H) {
    require(fourier.channels() == plant.dof_p, "hb_residual: channel count must equal plant dof");
    require(H >= 1, "hb_residual: H must be at least 1");
    FourierSignal sig = fourier.harmonics() == H ? fourier : fourier.with_harmonics(H);
    sig.omega = omega;
    Excitation exc = excitation;
    exc.omega = omega;

    const int p = plant.dof_p, n = plant.order_n;
    const detail::HbGrid grid(omega, H);
    const ReferenceTrajectory traj(sig, n);
    Vec xi(plant.state_dim()), top(p), sigma(p);
    Mat F(p, plant.param_count_m);
    Mat r(grid.N, p);
    for (int j = 0; j < grid.N; ++j) {
        const double t = grid.time(j);
        traj.eval_into(t, xi);
        sig.eval_into(t, n, top);
        exc.eval_into(t, sigma);
        plant.regressor_into(xi, F);
        r.row(j) = (top - F * plant.true_theta - sigma).transpose();
    }
    const int stride = 2 * H + 1;
    Vec R(p * stride);
    for (int ch = 0; ch < p; ++ch) {
        R[ch * stride] = r.col(ch).mean();
        R.segment(ch * stride + 1, H) = (2.0 / grid.N) * (grid.cos_t.transpose() * r.col(ch));
        R.segment(ch * stride + 1 + H, H) = (2.0 / grid.N) * (grid.sin_t.transpose() * r.col(ch));
    }
    return R;
}

/// Forward-difference Jacobian of hb_residual with respect to the packed coefficients.
[[nodiscard]] inline Mat hb_jacobian(const PlantModel& plant, const Excitation& excitation, const Vec& coeffs,
                                     double omega, int H, const Vec* R0 = nullptr) {
    const int p = plant.dof_p;
    auto res = [&](const Vec& c) { return hb_residual(plant, excitation, FourierSignal::unpack(c, omega, p, H), omega, H); };
    const Vec base = R0 ? *R0 : res(coeffs);
    const double scale = coeffs.size() ? coeffs.cwiseAbs().maxCoeff() : 0.0;
    Mat J(base.size(), coeffs.size());
    Vec probe = coeffs;
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
        const double h = 1e-7 * (scale > 0.0 ? std::max(std::abs(coeffs[j]), scale) : 1.0);
        probe[j] = coeffs[j] + h;
        J.col(j) = (res(probe) - base) / h;
        probe[j] = coeffs[j];
    }
    return J;
}

/// Monodromy matrix of the variational equation dPhi/dt = J(xi*(t)) Phi over
/// one forcing period, with xi*(t) taken from the Fourier orbit.
[[nodiscard]] inline Mat monodromy_matrix(const PlantModel& plant, const FourierSignal& orbit, int steps) {
    require(steps > 0, "monodromy_matrix: steps must be positive");
    const int np = plant.state_dim();
    const ReferenceTrajectory traj(orbit, plant.order_n);
    const double T = orbit.period();
    const double h = T / steps;
    const double scale = traj.eval(0.0).cwiseAbs().maxCoeff();
    auto jac = [&](double t) { return state_jacobian(plant, traj.eval(t), scale); };

    Mat Phi = Mat::Identity(np, np);
    Mat J0 = jac(0.0);
    for (int i = 0; i < steps; ++i) {
        const double t = i * h;
        const Mat Jh = jac(t + 0.5 * h);
        const Mat J1 = jac(t + h);
        const Mat k1 = J0 * Phi;
        const Mat k2 = Jh * (Phi + 0.5 * h * k1);
        const Mat k3 = Jh * (Phi + 0.5 * h * k2);
        const Mat k4 = J1 * (Phi + h * k3);
        Phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        J0 = J1;
    }
    return Phi;
}

/// Forced orbits have no trivial multiplier, so every multiplier counts.
inline void classify_floquet(PeriodicOrbit& orb, const PlantModel& plant, int steps) {
    orb.monodromy = monodromy_matrix(plant, orb.fourier, steps);
    Eigen::EigenSolver<Mat> es(orb.monodromy, false);
    orb.floquet_multipliers.clear();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) orb.floquet_multipliers.push_back(es.eigenvalues()[i]);
    orb.stable = orb.max_multiplier_modulus() < 1.0;
}

/// Damped Newton on hb_residual. The step is halved up to eight times while
/// the residual (max norm) increases.
[[nodiscard]] inline PeriodicOrbit hb_solve(const PlantModel& plant, const Excitation& excitation,
                                            const FourierSignal& initial_guess, double omega, const HbSettings& cfg) {
    require(initial_guess.channels() == plant.dof_p, "hb_solve: guess channel count must equal plant dof");
    const int H = cfg.harmonics, p = plant.dof_p;
    Vec c = initial_guess.with_harmonics(H).pack();
    require(c.allFinite(), "hb_solve: initial guess must be finite");

    auto res = [&](const Vec& cc) { return hb_residual(plant, excitation, FourierSignal::unpack(cc, omega, p, H), omega, H); };
    Vec R = res(c);
    double rn = R.cwiseAbs().maxCoeff();
    int it = 0;
    for (; it < cfg.max_iter && rn > cfg.tol; ++it) {
        const Mat J = hb_jacobian(plant, excitation, c, omega, H, &R);
        const Vec step = J.fullPivLu().solve(-R);
        if (!step.allFinite()) throw SolverFailure("hb_solve: singular Jacobian", rn);
        double lam = 1.0;
        Vec c_try = c + step;
        Vec R_try = res(c_try);
        for (int halvings = 0; halvings < 8 && !(R_try.cwiseAbs().maxCoeff() < rn); ++halvings) {
            lam *= 0.5;
            c_try = c + lam * step;
            R_try = res(c_try);
        }
        c = std::move(c_try);
        R = std::move(R_try);
        rn = R.cwiseAbs().maxCoeff();
        if (!std::isfinite(rn)) throw SolverFailure("hb_solve: residual became non-finite", rn);
    }
    if (!(rn <= cfg.tol))
        throw SolverFailure("hb_solve: no convergence after " + std::to_string(cfg.max_iter) + " iterations", rn);

    PeriodicOrbit orb;
    orb.fourier = FourierSignal::unpack(c, omega, p, H);
    orb.omega = omega;
    orb.residual_norm = rn;
    orb.newton_iterations = it;
    if (cfg.compute_floquet) classify_floquet(orb, plant, cfg.floquet_steps);
    return orb;
}

}  // namespace cbc_adapt
