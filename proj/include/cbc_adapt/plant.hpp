#pragma once

// Plant class x^(n) = F(xi) theta + u and the builtin benchmark models.
//
// State ordering throughout the library is the stacked derivative form
//   xi = [x^(n-1); ...; x'; x]   (each block has dof_p entries)
// so the top block is the highest stored derivative.

#include "cbc_adapt/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace cbc_adapt {

using RegressorFn = std::function<void(const VecRef& xi, Eigen::Ref<Mat> F)>;

struct PlantModel {
    int order_n = 0;
    int dof_p = 0;
    int param_count_m = 0;
    RegressorFn regressor_fn;
    Vec true_theta;
    std::string name;

    [[nodiscard]] int state_dim() const noexcept { return order_n * dof_p; }

    void validate() const {
        require(order_n > 0 && dof_p > 0 && param_count_m > 0,
                "PlantModel '" + name + "': order, dof and parameter count must be positive");
        require(true_theta.size() == param_count_m,
                "PlantModel '" + name + "': theta length must equal parameter count");
        require(static_cast<bool>(regressor_fn), "PlantModel '" + name + "': missing regressor");
    }

    /// Writes F(xi) into a preallocated p x m block. No allocation.
    void regressor_into(const VecRef& xi, Eigen::Ref<Mat> F) const {
        require(xi.size() == state_dim(), "regressor: state length mismatch for plant '" + name + "'");
        require(F.rows() == dof_p && F.cols() == param_count_m, "regressor: output shape mismatch");
        F.setZero();
        regressor_fn(xi, F);
    }

    [[nodiscard]] Mat regressor(const VecRef& xi) const {
        Mat F(dof_p, param_count_m);
        regressor_into(xi, F);
        return F;
    }
};

[[nodiscard]] inline Mat eval_regressor(const PlantModel& plant, const VecRef& xi) {
    return plant.regressor(xi);
}

/// Top-block acceleration F(xi) theta + u, with an explicit theta so the same
/// routine serves both the true plant and perturbed models.
inline void top_derivative_into(const PlantModel& plant, const VecRef& xi, const VecRef& theta,
                                const VecRef& u, Mat& F_scratch, Eigen::Ref<Vec> out) {
    plant.regressor_into(xi, F_scratch);
    out.noalias() = F_scratch * theta;
    out += u;
}

/// First-order form derivative of the state. Top block is F(xi) theta + u,
/// lower blocks shift: d/dt x^(k) = x^(k+1), read from xi.
[[nodiscard]] inline Vec plant_rhs(const PlantModel& plant, const VecRef& xi, const VecRef& u) {
    require(xi.size() == plant.state_dim(), "plant_rhs: state length mismatch");
    require(u.size() == plant.dof_p, "plant_rhs: input length mismatch");
    const int p = plant.dof_p;
    const int np = plant.state_dim();
    Vec dxi(np);
    Mat F(p, plant.param_count_m);
    top_derivative_into(plant, xi, plant.true_theta, u, F, dxi.head(p));
    if (np > p) dxi.tail(np - p) = xi.head(np - p);
    return dxi;
}

/// Jacobian of xi -> plant_rhs(xi, u) (u enters additively so it drops out).
/// Top block by central differences of F(xi) theta; the shift blocks are exact.
[[nodiscard]] inline Mat state_jacobian(const PlantModel& plant, const VecRef& xi, double scale = 0.0) {
    const int p = plant.dof_p;
    const int np = plant.state_dim();
    require(xi.size() == np, "state_jacobian: state length mismatch");
    Mat J = Mat::Zero(np, np);
    for (int i = 0; i + p < np; ++i) J(p + i, i) = 1.0;

    const double ref = std::max(scale, xi.cwiseAbs().maxCoeff());
    Mat F(p, plant.param_count_m);
    Vec probe = xi;
    for (int j = 0; j < np; ++j) {
        const double h = 1e-6 * std::max({std::abs(xi[j]), 1e-2 * ref, 1e-12});
        probe[j] = xi[j] + h;
        plant.regressor_into(probe, F);
        const Vec fp = F * plant.true_theta;
        probe[j] = xi[j] - h;
        plant.regressor_into(probe, F);
        const Vec fm = F * plant.true_theta;
        probe[j] = xi[j];
        J.block(0, j, p, 1) = (fp - fm) / (2.0 * h);
    }
    return J;
}

// ---------------------------------------------------------------------------
// Harmonic excitation sigma_i(t) = A_i cos(omega t + psi_i)
// ---------------------------------------------------------------------------

struct Excitation {
    double omega = 1.0;
    Vec amplitude;
    Vec phase;

    Excitation() = default;
    Excitation(double w, Vec amp) : omega(w), amplitude(std::move(amp)), phase(Vec::Zero(amplitude.size())) {}
    Excitation(double w, Vec amp, Vec ph) : omega(w), amplitude(std::move(amp)), phase(std::move(ph)) {}

    static Excitation none(int dof, double w = 1.0) { return Excitation(w, Vec::Zero(dof)); }

    void validate(int dof) const {
        require(amplitude.size() == dof, "Excitation: amplitude length must equal plant dof");
        require(phase.size() == dof, "Excitation: phase length must equal plant dof");
        require(omega > 0.0 || amplitude.isZero(0.0), "Excitation: omega must be positive when forcing is nonzero");
    }

    [[nodiscard]] double period() const { return 2.0 * std::numbers::pi / omega; }

    [[nodiscard]] double sup_norm() const {
        return amplitude.size() == 0 ? 0.0 : amplitude.cwiseAbs().maxCoeff();
    }

    void eval_into(double t, Eigen::Ref<Vec> out) const {
        for (Eigen::Index i = 0; i < amplitude.size(); ++i)
            out[i] = amplitude[i] == 0.0 ? 0.0 : amplitude[i] * std::cos(omega * t + phase[i]);
    }

    [[nodiscard]] Vec eval(double t) const {
        Vec s(amplitude.size());
        eval_into(t, s);
        return s;
    }
};

// ---------------------------------------------------------------------------
// Polynomial regressors: each column is c * prod_j xi_j^e_j placed in one row.
// ---------------------------------------------------------------------------

struct MonomialColumn {
    int row = 0;
    std::vector<int> exponents;  // one per state component
    double coeff = 1.0;
};

[[nodiscard]] inline PlantModel make_polynomial_plant(int order_n, int dof_p, std::vector<MonomialColumn> columns,
                                                      Vec theta, std::string name) {
    const int np = order_n * dof_p;
    require(order_n > 0 && dof_p > 0, "polynomial plant: order and dof must be positive");
    require(!columns.empty(), "polynomial plant: at least one column required");
    require(static_cast<Eigen::Index>(columns.size()) == theta.size(),
            "polynomial plant: theta length must equal column count");
    for (const auto& c : columns) {
        require(c.row >= 0 && c.row < dof_p, "polynomial plant: column row out of range");
        require(static_cast<int>(c.exponents.size()) == np, "polynomial plant: exponent vector length must be n*p");
        for (int e : c.exponents) require(e >= 0, "polynomial plant: exponents must be nonnegative");
    }
    PlantModel plant;
    plant.order_n = order_n;
    plant.dof_p = dof_p;
    plant.param_count_m = static_cast<int>(columns.size());
    plant.true_theta = std::move(theta);
    plant.name = std::move(name);
    plant.regressor_fn = [cols = std::move(columns)](const VecRef& xi, Eigen::Ref<Mat> F) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double v = cols[k].coeff;
            for (std::size_t j = 0; j < cols[k].exponents.size(); ++j) {
                for (int e = 0; e < cols[k].exponents[j]; ++e) v *= xi[static_cast<Eigen::Index>(j)];
            }
            F(cols[k].row, static_cast<Eigen::Index>(k)) = v;
        }
    };
    return plant;
}

// ---------------------------------------------------------------------------
// Builtin benchmarks
// ---------------------------------------------------------------------------

/// Forced Duffing oscillator x'' = theta1 x' + theta2 x + theta3 x^3 + u.
[[nodiscard]] inline PlantModel make_duffing() {
    // xi = (x', x)
    std::vector<MonomialColumn> cols = {
        {0, {1, 0}, 1.0},
        {0, {0, 1}, 1.0},
        {0, {0, 3}, 1.0},
    };
    Vec theta(3);
    theta << -0.1, 4.0, -2.0;
    return make_polynomial_plant(2, 1, std::move(cols), std::move(theta), "duffing");
}

struct CrossBeamParams {
    double zeta1 = 0.0076, zeta2 = 0.0026;
    double omega1 = 101.6, omega2 = 104.6;
    // gamma[i][j]: i = 1..10 term index, j = 1..2 mode
    double g[11][3] = {};

    CrossBeamParams() {
        g[1][1] = 113.321;   g[1][2] = -104.755;
        g[2][1] = -104.755;  g[2][2] = -29.740;
        g[3][1] = -104.755;  g[3][2] = -29.740;
        g[4][1] = -29.740;   g[4][2] = 85.367;
        g[5][1] = 3.836e8;   g[5][2] = 9.644e7;
        g[6][1] = 2.451e7;   g[6][2] = 6.104e6;
        g[7][1] = 4.902e7;   g[7][2] = 1.221e7;
        g[8][1] = 1.929e8;   g[8][2] = 4.902e7;
        g[9][1] = 9.644e7;   g[9][2] = 2.451e7;
        g[10][1] = 6.104e6;  g[10][2] = 2.351e6;
    }
};

/// Column layout of the cross-beam regressor within one mode's block of nine.
enum CrossBeamColumn : int {
    kVel = 0, kPos, kX1Sq, kX1X2, kX2Sq, kX1Cu, kX1X2Sq, kX1SqX2, kX2Cu, kCrossBeamBlock
};

/// Two-mode cross-beam model with 1:1 internal resonance. m = 18, block
/// diagonal: row 0 uses columns 0..8, row 1 uses columns 9..17.
[[nodiscard]] inline PlantModel make_cross_beam(const CrossBeamParams& P = {}) {
    // xi = (x1', x2', x1, x2)
    auto mono = [](int row, int d1, int d2, int e1, int e2) { return MonomialColumn{row, {d1, d2, e1, e2}, 1.0}; };
    std::vector<MonomialColumn> cols;
    Vec theta(2 * kCrossBeamBlock);
    const double zeta[2] = {P.zeta1, P.zeta2};
    const double om[2] = {P.omega1, P.omega2};
    for (int r = 0; r < 2; ++r) {
        const int j = r + 1;
        cols.push_back(mono(r, r == 0, r == 1, 0, 0));
        cols.push_back(mono(r, 0, 0, r == 0, r == 1));
        cols.push_back(mono(r, 0, 0, 2, 0));
        cols.push_back(mono(r, 0, 0, 1, 1));
        cols.push_back(mono(r, 0, 0, 0, 2));
        cols.push_back(mono(r, 0, 0, 3, 0));
        cols.push_back(mono(r, 0, 0, 1, 2));
        cols.push_back(mono(r, 0, 0, 2, 1));
        cols.push_back(mono(r, 0, 0, 0, 3));
        auto th = theta.segment(r * kCrossBeamBlock, kCrossBeamBlock);
        th[kVel] = -2.0 * zeta[r] * om[r];
        th[kPos] = -om[r] * om[r];
        th[kX1Sq] = -P.g[1][j] / 2.0;
        th[kX1X2] = -(P.g[2][j] + P.g[3][j]) / 2.0;
        th[kX2Sq] = -P.g[4][j] / 2.0;
        th[kX1Cu] = -P.g[5][j] / 3.0;
        th[kX1X2Sq] = -(P.g[6][j] + P.g[7][j]) / 3.0;
        th[kX1SqX2] = -(P.g[8][j] + P.g[9][j]) / 3.0;
        th[kX2Cu] = -P.g[10][j] / 3.0;
    }
    return make_polynomial_plant(2, 2, std::move(cols), std::move(theta), "cross_beam");
}

/// Mask selecting every regressor column except the mixed x1/x2 monomials
/// (x1 x2, x1 x2^2, x1^2 x2) in both rows.
[[nodiscard]] inline std::vector<bool> cross_beam_cross_term_mask() {
    std::vector<bool> mask(2 * kCrossBeamBlock, true);
    for (int r = 0; r < 2; ++r)
        for (int c : {kX1X2, kX1X2Sq, kX1SqX2}) mask[static_cast<std::size_t>(r * kCrossBeamBlock + c)] = false;
    return mask;
}

struct CantileverParams {
    double zeta1 = 0.01, zeta2 = 0.01;
    double omega1 = 67.395, omega2 = 235.783;
    double k0 = 910.0, l0 = 0.018, a = 0.019;
    Eigen::Matrix<double, 4, 2> phi = (Eigen::Matrix<double, 4, 2>() <<
        -0.1603, -0.6821,
        -1.7748, -4.4598,
        -5.9745,  6.1940,
        -6.1389,  7.0245).finished();
};

/// Shape of the tip spring force per unit 2 k0 l0: x4' (1/a - 1/sqrt(a^2 + x4'^2)).
[[nodiscard]] inline double cantilever_spring_shape(double x4, double a) {
    return x4 * (1.0 / a - 1.0 / std::sqrt(a * a + x4 * x4));
}

/// Cantilever with a nonlinear tip mechanism, in modal coordinates. a and the
/// mode-shape matrix are known and live in the regressor; per mode the unknowns
/// are damping, stiffness and the modal participation of the spring force:
///   row i: [x_i', x_i, s(x4')] . [-2 zeta_i w_i, -w_i^2, -2 k0 l0 Phi(3,i)]
[[nodiscard]] inline PlantModel make_cantilever(const CantileverParams& P = {}) {
    PlantModel plant;
    plant.order_n = 2;
    plant.dof_p = 2;
    plant.param_count_m = 6;
    plant.name = "cantilever";
    plant.true_theta.resize(6);
    plant.true_theta << -2.0 * P.zeta1 * P.omega1, -P.omega1 * P.omega1, -2.0 * P.k0 * P.l0 * P.phi(3, 0),
                        -2.0 * P.zeta2 * P.omega2, -P.omega2 * P.omega2, -2.0 * P.k0 * P.l0 * P.phi(3, 1);
    const double a = P.a;
    const double p41 = P.phi(3, 0), p42 = P.phi(3, 1);
    plant.regressor_fn = [a, p41, p42](const VecRef& xi, Eigen::Ref<Mat> F) {
        // xi = (x1', x2', x1, x2)
        const double s = cantilever_spring_shape(p41 * xi[2] + p42 * xi[3], a);
        F(0, 0) = xi[0];
        F(0, 1) = xi[2];
        F(0, 2) = s;
        F(1, 3) = xi[1];
        F(1, 4) = xi[3];
        F(1, 5) = s;
    };
    return plant;
}

/// Physical forcing on the four measurement points mapped to modal channels.
[[nodiscard]] inline Vec cantilever_modal_forcing(const Eigen::Vector4d& physical, const CantileverParams& P = {}) {
    return P.phi.transpose() * physical;
}

[[nodiscard]] inline PlantModel builtin_plant(const std::string& name) {
    if (name == "duffing") return make_duffing();
    if (name == "cross_beam") return make_cross_beam();
    if (name == "cantilever") return make_cantilever();
    throw ContractViolation("unknown plant '" + name + "' (expected duffing, cross_beam or cantilever)");
}

/// Controller-side copy of the plant whose regressor has the masked columns
/// zeroed. The true plant used for simulation is untouched.
[[nodiscard]] inline PlantModel apply_regressor_mask(const PlantModel& plant, const std::vector<bool>& mask) {
    require(static_cast<int>(mask.size()) == plant.param_count_m, "regressor mask length must equal m");
    PlantModel masked = plant;
    masked.name = plant.name + "[masked]";
    masked.regressor_fn = [inner = plant.regressor_fn, mask](const VecRef& xi, Eigen::Ref<Mat> F) {
        inner(xi, F);
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (!mask[j]) F.col(static_cast<Eigen::Index>(j)).setZero();
    };
    return masked;
}

}  // namespace cbc_adapt
