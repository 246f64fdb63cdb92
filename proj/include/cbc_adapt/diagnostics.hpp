#pragma once

// Post-processing of simulation traces: invasiveness, Lyapunov function,
// parameter-estimation error, persistent-excitation matrix and the model
// residual of a reference.

#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/simulator.hpp"
#include "cbc_adapt/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cbc_adapt {

/// Noninvasiveness tolerance and invasiveness floor for a forcing level.
struct InvasivenessThresholds {
    double tol_noninv = 0.0;
    double floor_inv = 0.0;

    [[nodiscard]] static InvasivenessThresholds for_excitation(const Excitation& exc) {
        const double t = 1e-3 * std::max(exc.sup_norm(), 1e-6);
        return {t, 10.0 * t};
    }
};

/// Index of the first sample in the final window [t_end - T, t_end].
[[nodiscard]] inline std::size_t final_window_start(const SimTrace& tr, double period) {
    require(period > 0.0, "final window: period must be positive");
    require(tr.size() >= 2, "final window: trace too short");
    const double span = tr.t_end() - tr.t0;
    require(span + 1e-9 * period >= 2.0 * period, "final window: trace must cover at least two periods");
    const auto w = static_cast<std::size_t>(std::lround(period / tr.sample_dt));
    return tr.size() - 1 - std::min(w, tr.size() - 1);
}

/// Sup of `norm(sample)` over the final forcing period.
template <class NormFn>
[[nodiscard]] double final_period_sup(const SimTrace& tr, double period, NormFn&& norm) {
    double s = 0.0;
    for (std::size_t i = final_window_start(tr, period); i < tr.size(); ++i) s = std::max(s, norm(i));
    return s;
}

/// sup over the final period of ||u'(t)||_inf.
[[nodiscard]] inline double invasiveness(const SimTrace& tr, double period) {
    return final_period_sup(tr, period, [&](std::size_t i) { return tr.u[i].cwiseAbs().maxCoeff(); });
}

/// sup over the final period of ||e(t)||_2 with e the position error.
[[nodiscard]] inline double final_tracking_error(const SimTrace& tr, double period) {
    require(tr.has_reference(), "final_tracking_error: trace has no reference");
    return final_period_sup(tr, period, [&](std::size_t i) { return tr.position_error(i).norm(); });
}

struct LyapunovSeries {
    std::vector<double> V;          // 1/2 z'z + 1/2 th~' S^-1 th~
    std::vector<double> dV;         // five-point central difference; NaN at the two samples at each end
    std::vector<double> predicted;  // -k z'z

    [[nodiscard]] bool nonincreasing(double tol) const {
        for (std::size_t i = 1; i < V.size(); ++i)
            if (V[i] - V[i - 1] > tol) return false;
        return true;
    }
};

[[nodiscard]] inline LyapunovSeries lyapunov_series(const SimTrace& tr, const VecRef& true_theta, const Mat& S, double k) {
    require(tr.closed_loop() && !tr.theta_hat.empty(), "lyapunov_series: requires a closed-loop trace");
    require(S.rows() == true_theta.size() && S.cols() == true_theta.size(), "lyapunov_series: S must be m x m");
    const Eigen::LLT<Mat> S_llt(S);
    require(S_llt.info() == Eigen::Success, "lyapunov_series: S must be positive definite");
    const std::size_t N = tr.size();
    LyapunovSeries out;
    out.V.resize(N);
    out.predicted.resize(N);
    out.dV.assign(N, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < N; ++i) {
        const Vec th_err = tr.theta_hat[i] - true_theta;
        const double zz = tr.z_tilde[i].squaredNorm();
        out.V[i] = 0.5 * zz + 0.5 * th_err.dot(S_llt.solve(th_err));
        out.predicted[i] = -k * zz;
    }
    const double h = tr.sample_dt;
    for (std::size_t i = 2; i + 2 < N; ++i)
        out.dV[i] = (out.V[i - 2] - 8.0 * out.V[i - 1] + 8.0 * out.V[i + 1] - out.V[i + 2]) / (12.0 * h);
    return out;
}

/// ||th_hat(t) - theta|| at every sample.
[[nodiscard]] inline std::vector<double> estimation_error(const SimTrace& tr, const VecRef& true_theta) {
    require(!tr.theta_hat.empty(), "estimation_error: trace has no estimate channel");
    std::vector<double> e(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i) e[i] = (tr.theta_hat[i] - true_theta).norm();
    return e;
}

struct PeSeries {
    std::vector<double> time;     // window start
    std::vector<double> min_eig;  // lambda_min(M_e)
    std::vector<double> trace;    // trace(M_e)
};

/// M_e(t) = int_t^{t+s} F(xi)' F(xi) dtau by the trapezoid rule on the trace
/// grid, evaluated at every `stride`-th window start where the window fits.
[[nodiscard]] inline PeSeries pe_matrix_min_eig(const SimTrace& tr, const PlantModel& regressor_model, double window,
                                                std::size_t stride = 1) {
    require(window > 0.0, "pe_matrix_min_eig: window must be positive");
    require(stride >= 1, "pe_matrix_min_eig: stride must be positive");
    const auto w = static_cast<std::size_t>(std::lround(window / tr.sample_dt));
    require(w >= 1 && w < tr.size(), "pe_matrix_min_eig: window longer than trace");
    const int m = regressor_model.param_count_m;
    const std::size_t N = tr.size();
    const double h = tr.sample_dt;

    Mat F(regressor_model.dof_p, m);
    auto gram = [&](std::size_t i) {
        regressor_model.regressor_into(tr.xi[i], F);
        return Mat(F.transpose() * F);
    };
    // Trapezoid panel [t_i, t_{i+1}].
    auto panel = [&](std::size_t i) { return Mat(0.5 * h * (gram(i) + gram(i + 1))); };
    auto window_sum = [&](std::size_t start) {
        Mat M = Mat::Zero(m, m);
        for (std::size_t j = start; j < start + w; ++j) M += panel(j);
        return M;
    };

    PeSeries out;
    Eigen::SelfAdjointEigenSolver<Mat> es;
    Mat Me = window_sum(0);
    for (std::size_t i = 0; i + w < N; ++i) {
        if (i > 0) {
            // Slide by one panel; resynchronise periodically to bound drift.
            if (i % w == 0)
                Me = window_sum(i);
            else
                Me += panel(i + w - 1) - panel(i - 1);
        }
        if (i % stride != 0) continue;
        es.compute(0.5 * (Me + Me.transpose()), Eigen::EigenvaluesOnly);
        out.time.push_back(tr.time(i));
        out.min_eig.push_back(es.eigenvalues().minCoeff());
        out.trace.push_back(Me.trace());
    }
    return out;
}

struct ReferenceResidual {
    std::vector<double> time;
    Series delta{0};
    double sup_norm = 0.0;  // max over samples of ||Delta||_inf
};

/// Delta(t) = x^{r(n)}(t) - F(xi^r(t)) theta - sigma(t) over one forcing period.
[[nodiscard]] inline ReferenceResidual reference_residual(const PlantModel& plant, const Excitation& exc,
                                                          const ReferenceTrajectory& ref, int samples = 512) {
    require(samples >= 2, "reference_residual: need at least two samples");
    require(ref.dof() == plant.dof_p && ref.order() == plant.order_n, "reference_residual: reference shape mismatch");
    const double T = 2.0 * std::numbers::pi / ref.omega();
    ReferenceResidual out;
    out.delta = Series(plant.dof_p);
    Vec xi(plant.state_dim()), sigma(plant.dof_p);
    Mat F(plant.dof_p, plant.param_count_m);
    for (int j = 0; j < samples; ++j) {
        const double t = T * j / samples;
        ref.eval_into(t, xi);
        exc.eval_into(t, sigma);
        plant.regressor_into(xi, F);
        const Vec d = ref.top_derivative(t) - F * plant.true_theta - sigma;
        out.time.push_back(t);
        out.delta.push_back(d);
        out.sup_norm = std::max(out.sup_norm, d.cwiseAbs().maxCoeff());
    }
    return out;
}

struct MetricsReport {
    double period = 0.0;
    double sup_u = 0.0;
    double sup_e = 0.0;
    double sup_z = 0.0;
    double sup_y = 0.0;
    double theta_err_initial = 0.0;
    double theta_err_final = 0.0;
    double theta_err_min = 0.0;
    double theta_err_max = 0.0;
    double phi_final = 0.0;
    bool lyapunov_nonincreasing = false;
    double pe_min_eig_min = 0.0;  // over windows in the second half of the run
    double pe_min_eig_rel_max = 0.0;  // max of lambda_min / (trace / m) over the same windows
    double delta_sup = 0.0;
    InvasivenessThresholds thresholds;
    bool noninvasive = false;  // sup_u <= tol_noninv
    bool invasive = false;     // sup_u >= floor_inv
};

/// Full report for a closed-loop run of `sc`. The PE window is one period.
[[nodiscard]] inline MetricsReport compute_metrics(const Scenario& sc, const SimTrace& tr) {
    require(tr.closed_loop(), "compute_metrics: requires a closed-loop trace");
    MetricsReport r;
    const double T = sc.excitation.period();
    r.period = T;
    r.sup_u = invasiveness(tr, T);
    r.sup_e = final_tracking_error(tr, T);
    r.sup_z = final_period_sup(tr, T, [&](std::size_t i) { return tr.z_tilde[i].norm(); });
    r.sup_y = final_period_sup(tr, T, [&](std::size_t i) { return tr.y[i].norm(); });
    const auto est = estimation_error(tr, sc.plant.true_theta);
    r.theta_err_initial = est.front();
    r.theta_err_final = est.back();
    r.theta_err_min = *std::min_element(est.begin(), est.end());
    r.theta_err_max = *std::max_element(est.begin(), est.end());
    r.phi_final = tr.phi.back();

    const auto lyap = lyapunov_series(tr, sc.plant.true_theta, sc.controller.S, sc.controller.k);
    const double vscale = std::max(1.0, *std::max_element(lyap.V.begin(), lyap.V.end()));
    r.lyapunov_nonincreasing = lyap.nonincreasing(1e-12 * vscale);

    const PlantModel ctrl = sc.controller_model();
    const auto pe = pe_matrix_min_eig(tr, ctrl, T);
    const std::size_t half = pe.min_eig.size() / 2;
    r.pe_min_eig_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = half; i < pe.min_eig.size(); ++i) {
        r.pe_min_eig_min = std::min(r.pe_min_eig_min, pe.min_eig[i]);
        const double avg = pe.trace[i] / ctrl.param_count_m;
        if (avg > 0.0) r.pe_min_eig_rel_max = std::max(r.pe_min_eig_rel_max, pe.min_eig[i] / avg);
    }
    if (sc.reference) r.delta_sup = reference_residual(sc.plant, sc.excitation, *sc.reference).sup_norm;
    r.thresholds = InvasivenessThresholds::for_excitation(sc.excitation);
    r.noninvasive = r.sup_u <= r.thresholds.tol_noninv;
    r.invasive = r.sup_u >= r.thresholds.floor_inv;
    return r;
}

}  // namespace cbc_adapt
