#pragma once

// Adaptive noninvasive tracking controller.
//
//   u'      = -k z~ + eta
//   z~      = x^(n-1) - I - x^{r(n-1)}(0),     dI/dt = F(xi) th + sigma + eta
//   eta     = -lam_{n-1} e^(n-1) - ... - lam_1 e' - phi y - g sat(y / eps)
//   y       = e^(n-1) + lam_{n-1} e^(n-2) + ... + lam_1 e
//   g       = ||(F(xi) - F(xi^r)) th|| + kappa
//   dphi/dt = gamma y'y
//   dth/dt  = S F(xi)' z~
//
// with e = x - x^r and th the parameter estimate. The estimate never enters
// u' additively, so tracking does not depend on th converging.

#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace cbc_adapt {

[[nodiscard]] inline double saturate(double v, double eps) {
    require(eps > 0.0, "saturate: epsilon must be positive");
    const double r = v / eps;
    return std::clamp(r, -1.0, 1.0);
}

/// Roots of s^d + lam_d s^(d-1) + ... + lam_1 all in the open left half plane.
[[nodiscard]] inline bool is_hurwitz(const VecRef& lambda) {
    const Eigen::Index d = lambda.size();
    if (d == 0) return true;
    Mat companion = Mat::Zero(d, d);
    // Last row holds -lam_1 ... -lam_d for the monic polynomial.
    for (Eigen::Index i = 0; i + 1 < d; ++i) companion(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) companion(d - 1, j) = -lambda[j];
    Eigen::EigenSolver<Mat> es(companion, false);
    return (es.eigenvalues().real().array() < 0.0).all();
}

struct ControllerParams {
    double k = 1.0;
    double kappa = 1.0;
    double epsilon = 1.0;
    double gamma = 1.0;
    Mat S;       // m x m, symmetric positive definite
    Vec lambda;  // lam_1 .. lam_{n-1}

    void validate(int order_n, int param_count_m) const {
        require(k > 0.0, "controller: k must be positive");
        require(kappa > 0.0, "controller: kappa must be positive");
        require(epsilon > 0.0, "controller: epsilon must be positive");
        require(gamma > 0.0, "controller: gamma must be positive");
        require(S.rows() == param_count_m && S.cols() == param_count_m, "controller: S must be m x m");
        require((S - S.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, S.cwiseAbs().maxCoeff()),
                "controller: S must be symmetric");
        Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > 0.0, "controller: S must be positive definite");
        require(lambda.size() == order_n - 1, "controller: lambda must have n-1 entries");
        require((lambda.array() > 0.0).all(), "controller: lambda entries must be positive");
        require(is_hurwitz(lambda), "controller: pol(lambda, n-1) is not Hurwitz");
    }
};

struct ControllerState {
    Vec accum;       // I(t), length p
    double phi = 0;  // adaptive scalar gain
    Vec theta_hat;   // length m

    static ControllerState initial(int p, int m, double phi0 = 0.0) {
        return {Vec::Zero(p), phi0, Vec::Zero(m)};
    }
};

struct ControlOutput {
    Vec u;        // u'
    Vec eta;
    Vec y;
    double g = 0;
    Vec z_tilde;
};

struct ControllerDerivative {
    Vec d_accum;
    double d_phi = 0;
    Vec d_theta_hat;
};

/// e^(j) is block (n-1-j) of the stacked error xi - xi^r.
[[nodiscard]] inline auto error_derivative(const VecRef& err, int order_n, int p, int j) {
    return err.segment((order_n - 1 - j) * p, p);
}

/// y = e^(n-1) + sum_{i=1}^{n-1} lam_i e^(i-1); err is the stacked xi - xi^r.
[[nodiscard]] inline Vec surface_y(const VecRef& err, const VecRef& lambda, int p) {
    require(p > 0 && err.size() % p == 0, "surface_y: error stack length must be a multiple of p");
    const int n = static_cast<int>(err.size() / p);
    require(lambda.size() == n - 1, "surface_y: lambda must have n-1 entries");
    Vec y = error_derivative(err, n, p, n - 1);
    for (int i = 1; i <= n - 1; ++i) y += lambda[i - 1] * error_derivative(err, n, p, i - 1);
    return y;
}

[[nodiscard]] inline double gain_g(const Mat& F_xi, const Mat& F_ref, const VecRef& theta_hat, double kappa) {
    require(F_xi.rows() == F_ref.rows() && F_xi.cols() == F_ref.cols(), "gain_g: regressor shapes differ");
    require(F_xi.cols() == theta_hat.size(), "gain_g: theta length mismatch");
    return ((F_xi - F_ref) * theta_hat).norm() + kappa;
}

/// eta = -sum_{i=1}^{n-1} lam_i e^(i) - phi y - g sat(y/eps), sat elementwise.
[[nodiscard]] inline Vec robust_eta(const VecRef& err, const VecRef& y, double phi, double g, double eps,
                                   const VecRef& lambda) {
    const Eigen::Index p = y.size();
    require(p > 0 && err.size() % p == 0, "robust_eta: error stack length must be a multiple of p");
    const int n = static_cast<int>(err.size() / p);
    require(lambda.size() == n - 1, "robust_eta: lambda must have n-1 entries");
    Vec eta = -phi * y;
    for (Eigen::Index i = 0; i < p; ++i) eta[i] -= g * saturate(y[i], eps);
    for (int i = 1; i <= n - 1; ++i) eta -= lambda[i - 1] * error_derivative(err, n, static_cast<int>(p), i);
    return eta;
}

/// Evaluates u' and all intermediates. `plant` is the controller's view of
/// the model (possibly masked); only its regressor is used, never its theta.
[[nodiscard]] inline ControlOutput control_input(const ControllerParams& params, const PlantModel& plant,
                                                 const ControllerState& state, const VecRef& xi,
                                                 const VecRef& xi_ref, const VecRef& ref_top0) {
    const int p = plant.dof_p;
    require(xi.size() == plant.state_dim() && xi_ref.size() == plant.state_dim(),
            "control_input: state length mismatch");
    require(ref_top0.size() == p && state.accum.size() == p, "control_input: length-p vector mismatch");
    ControlOutput out;
    const Vec err = xi - xi_ref;
    out.z_tilde = xi.head(p) - state.accum - ref_top0;
    out.y = surface_y(err, params.lambda, p);
    out.g = gain_g(plant.regressor(xi), plant.regressor(xi_ref), state.theta_hat, params.kappa);
    out.eta = robust_eta(err, out.y, state.phi, out.g, params.epsilon, params.lambda);
    out.u = -params.k * out.z_tilde + out.eta;
    return out;
}

[[nodiscard]] inline ControllerDerivative controller_rhs(const ControllerParams& params, const Mat& F_xi,
                                                         const ControllerState& state, const VecRef& sigma,
                                                         const ControlOutput& out) {
    require(F_xi.cols() == state.theta_hat.size(), "controller_rhs: regressor/theta mismatch");
    ControllerDerivative d;
    d.d_accum = F_xi * state.theta_hat + sigma + out.eta;
    d.d_phi = params.gamma * out.y.squaredNorm();
    d.d_theta_hat = params.S * (F_xi.transpose() * out.z_tilde);
    return d;
}

/// Convenience overload that evaluates the regressor at xi.
[[nodiscard]] inline ControllerDerivative controller_rhs(const ControllerParams& params, const PlantModel& plant,
                                                         const ControllerState& state, const VecRef& xi,
                                                         const VecRef& sigma, const ControlOutput& out) {
    return controller_rhs(params, plant.regressor(xi), state, sigma, out);
}

}  // namespace cbc_adapt
