#pragma once

// Fixed-step RK4 integration of plant + controller + excitation.
//
// The augmented state is Y = [xi (n p); I (p); phi (1); theta_hat (m)]. The
// controller is evaluated at every RK stage so the closed loop is a single
// smooth ODE. Open-loop runs integrate xi alone with u' = 0.

#include "cbc_adapt/controller.hpp"
#include "cbc_adapt/plant.hpp"
#include "cbc_adapt/reference.hpp"
#include "cbc_adapt/rk4.hpp"
#include "cbc_adapt/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cbc_adapt {

enum class SimMode { ClosedLoop, OpenLoop };

[[nodiscard]] inline const char* to_string(SimMode m) {
    return m == SimMode::ClosedLoop ? "closed_loop" : "open_loop";
}

struct Scenario {
    std::string name = "scenario";
    PlantModel plant;                              // true plant
    std::optional<std::vector<bool>> regressor_mask;  // controller-side only
    std::optional<ReferenceTrajectory> reference;  // required for closed loop
    Excitation excitation;
    ControllerParams controller;
    Vec initial_state;
    Vec theta_hat0;   // empty means zeros
    double phi0 = 0.0;
    double t_end = 1.0;
    double dt = 1e-3;
    SimMode mode = SimMode::ClosedLoop;
    int record_stride = 1;
    std::uint64_t hash = 0;

    [[nodiscard]] long steps() const { return std::lround(t_end / dt); }

    void validate() const {
        plant.validate();
        require(dt > 0.0 && std::isfinite(dt), "scenario '" + name + "': dt must be positive");
        require(t_end >= dt, "scenario '" + name + "': t_end must be at least dt");
        require(record_stride >= 1, "scenario '" + name + "': record_stride must be >= 1");
        require(steps() % record_stride == 0, "scenario '" + name + "': record_stride must divide the step count");
        require(initial_state.size() == plant.state_dim(), "scenario '" + name + "': initial state length must be n*p");
        excitation.validate(plant.dof_p);
        if (regressor_mask)
            require(static_cast<int>(regressor_mask->size()) == plant.param_count_m,
                    "scenario '" + name + "': mask length must equal m");
        if (reference) {
            require(reference->dof() == plant.dof_p && reference->order() == plant.order_n,
                    "scenario '" + name + "': reference shape does not match plant");
        }
        if (mode == SimMode::ClosedLoop) {
            require(reference.has_value(), "scenario '" + name + "': closed loop requires a reference");
            controller.validate(plant.order_n, plant.param_count_m);
            require(theta_hat0.size() == 0 || theta_hat0.size() == plant.param_count_m,
                    "scenario '" + name + "': theta_hat0 length must equal m");
        }
    }

    /// Regressor the controller sees: the plant's, with masked columns zeroed.
    [[nodiscard]] PlantModel controller_model() const {
        return regressor_mask ? apply_regressor_mask(plant, *regressor_mask) : plant;
    }
};

/// Uniformly sampled record of a run. Sample i is at t0 + i * sample_dt.
struct SimTrace {
    double t0 = 0.0;
    double sample_dt = 0.0;
    int dof_p = 0;
    int order_n = 0;
    Series xi, xi_ref, u, eta, y, z_tilde, theta_hat, sigma;
    std::vector<double> phi, g;

    // metadata
    std::uint64_t scenario_hash = 0;
    std::string integrator = "rk4";
    double dt = 0.0;
    SimMode mode = SimMode::ClosedLoop;

    [[nodiscard]] std::size_t size() const noexcept { return xi.size(); }
    [[nodiscard]] double time(std::size_t i) const noexcept { return t0 + static_cast<double>(i) * sample_dt; }
    [[nodiscard]] double t_end() const noexcept { return size() == 0 ? t0 : time(size() - 1); }
    [[nodiscard]] bool has_reference() const noexcept { return !xi_ref.empty(); }
    [[nodiscard]] bool closed_loop() const noexcept { return mode == SimMode::ClosedLoop; }

    /// Position error e = x - x^r at sample i (bottom block of xi - xi^r).
    [[nodiscard]] Vec position_error(std::size_t i) const {
        return (xi[i] - xi_ref[i]).tail(dof_p);
    }

    bool operator==(const SimTrace&) const = default;
};

class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(double t, SimTrace partial)
        : std::runtime_error("simulation diverged at t = " + std::to_string(t)), time_(t),
          partial_(std::move(partial)) {}

    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] const SimTrace& partial_trace() const noexcept { return partial_; }

private:
    double time_;
    SimTrace partial_;
};

namespace detail {

/// Closed-loop vector field with preallocated scratch buffers.
class ClosedLoopSystem {
public:
    explicit ClosedLoopSystem(const Scenario& sc)
        : sc_(sc), ctrl_plant_(sc.controller_model()), masked_(sc.regressor_mask.has_value()),
          p_(sc.plant.dof_p), np_(sc.plant.state_dim()), m_(sc.plant.param_count_m),
          F_(p_, m_), Fc_(p_, m_), Fr_(p_, m_), xi_ref_(np_), sigma_(p_), top_(p_) {}

    [[nodiscard]] Eigen::Index dim() const { return np_ + p_ + 1 + m_; }

    [[nodiscard]] Vec initial() const {
        Vec Y(dim());
        Y.head(np_) = sc_.initial_state;
        Y.segment(np_, p_).setZero();
        Y[np_ + p_] = sc_.phi0;
        Y.tail(m_) = sc_.theta_hat0.size() == 0 ? Vec::Zero(m_) : sc_.theta_hat0;
        return Y;
    }

    /// Evaluates the control law at (t, Y); leaves F_, Fc_, Fr_, xi_ref_, sigma_ set.
    void control(double t, const Vec& Y, ControlOutput& out) {
        const auto xi = Y.head(np_);
        const auto accum = Y.segment(np_, p_);
        const double phi = Y[np_ + p_];
        const auto th = Y.tail(m_);
        const ControllerParams& cp = sc_.controller;

        sc_.reference->eval_into(t, xi_ref_);
        sc_.excitation.eval_into(t, sigma_);
        sc_.plant.regressor_into(xi, F_);
        if (masked_)
            ctrl_plant_.regressor_into(xi, Fc_);
        else
            Fc_ = F_;
        ctrl_plant_.regressor_into(xi_ref_, Fr_);

        err_ = xi - xi_ref_;
        out.z_tilde = xi.head(p_) - accum - sc_.reference->initial_top_derivative();
        out.y = surface_y(err_, cp.lambda, p_);
        out.g = ((Fc_ - Fr_) * th).norm() + cp.kappa;
        out.eta = robust_eta(err_, out.y, phi, out.g, cp.epsilon, cp.lambda);
        out.u = -cp.k * out.z_tilde + out.eta;
    }

    void operator()(double t, const Vec& Y, Vec& dY) {
        control(t, Y, out_);
        const auto xi = Y.head(np_);
        const auto th = Y.tail(m_);
        // plant: x^(n) = F(xi) theta + sigma + u'
        top_.noalias() = F_ * sc_.plant.true_theta;
        dY.head(p_) = top_ + sigma_ + out_.u;
        if (np_ > p_) dY.segment(p_, np_ - p_) = xi.head(np_ - p_);
        // controller states
        dY.segment(np_, p_).noalias() = Fc_ * th;
        dY.segment(np_, p_) += sigma_ + out_.eta;
        dY[np_ + p_] = sc_.controller.gamma * out_.y.squaredNorm();
        dY.tail(m_).noalias() = sc_.controller.S * (Fc_.transpose() * out_.z_tilde);
    }

    [[nodiscard]] const Vec& xi_ref() const { return xi_ref_; }
    [[nodiscard]] const Vec& sigma() const { return sigma_; }

private:
    const Scenario& sc_;
    PlantModel ctrl_plant_;
    bool masked_;
    int p_, np_, m_;
    Mat F_, Fc_, Fr_;
    Vec xi_ref_, sigma_, top_, err_;
    ControlOutput out_;
};

class OpenLoopSystem {
public:
    explicit OpenLoopSystem(const Scenario& sc)
        : sc_(sc), p_(sc.plant.dof_p), np_(sc.plant.state_dim()), F_(p_, sc.plant.param_count_m), sigma_(p_) {}

    void operator()(double t, const Vec& xi, Vec& dxi) {
        sc_.excitation.eval_into(t, sigma_);
        sc_.plant.regressor_into(xi, F_);
        dxi.head(p_).noalias() = F_ * sc_.plant.true_theta;
        dxi.head(p_) += sigma_;
        if (np_ > p_) dxi.segment(p_, np_ - p_) = xi.head(np_ - p_);
    }

private:
    const Scenario& sc_;
    int p_, np_;
    Mat F_;
    Vec sigma_;
};

}  // namespace detail

[[nodiscard]] inline SimTrace simulate(const Scenario& sc) {
    sc.validate();
    const int p = sc.plant.dof_p, np = sc.plant.state_dim(), m = sc.plant.param_count_m;
    const long steps = sc.steps();
    const std::size_t samples = static_cast<std::size_t>(steps / sc.record_stride) + 1;

    SimTrace tr;
    tr.t0 = 0.0;
    tr.sample_dt = sc.dt * sc.record_stride;
    tr.dof_p = p;
    tr.order_n = sc.plant.order_n;
    tr.scenario_hash = sc.hash;
    tr.dt = sc.dt;
    tr.mode = sc.mode;
    tr.xi = Series(np);
    tr.u = Series(p);
    tr.sigma = Series(p);
    tr.xi.reserve(samples);
    tr.u.reserve(samples);
    tr.sigma.reserve(samples);
    if (sc.reference) {
        tr.xi_ref = Series(np);
        tr.xi_ref.reserve(samples);
    }

    Rk4Workspace ws;
    if (sc.mode == SimMode::OpenLoop) {
        detail::OpenLoopSystem sys(sc);
        Vec xi = sc.initial_state;
        const Vec zero_u = Vec::Zero(p);
        for (long i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) * sc.dt;
            if (i % sc.record_stride == 0) {
                tr.xi.push_back(xi);
                tr.u.push_back(zero_u);
                tr.sigma.push_back(sc.excitation.eval(t));
                if (sc.reference) tr.xi_ref.push_back(sc.reference->eval(t));
            }
            if (i == steps) break;
            rk4_step(sys, t, xi, sc.dt, ws);
            if (!xi.allFinite()) throw SimulationDiverged(t + sc.dt, std::move(tr));
        }
        return tr;
    }

    tr.eta = Series(p);
    tr.y = Series(p);
    tr.z_tilde = Series(p);
    tr.theta_hat = Series(m);
    for (Series* s : {&tr.eta, &tr.y, &tr.z_tilde, &tr.theta_hat}) s->reserve(samples);
    tr.phi.reserve(samples);
    tr.g.reserve(samples);

    detail::ClosedLoopSystem sys(sc);
    Vec Y = sys.initial();
    ControlOutput out;
    for (long i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) * sc.dt;
        if (i % sc.record_stride == 0) {
            sys.control(t, Y, out);
            tr.xi.push_back(Y.head(np));
            tr.xi_ref.push_back(sys.xi_ref());
            tr.sigma.push_back(sys.sigma());
            tr.u.push_back(out.u);
            tr.eta.push_back(out.eta);
            tr.y.push_back(out.y);
            tr.z_tilde.push_back(out.z_tilde);
            tr.theta_hat.push_back(Y.tail(m));
            tr.phi.push_back(Y[np + p]);
            tr.g.push_back(out.g);
        }
        if (i == steps) break;
        rk4_step(sys, t, Y, sc.dt, ws);
        if (!Y.allFinite()) throw SimulationDiverged(t + sc.dt, std::move(tr));
    }
    return tr;
}

}  // namespace cbc_adapt
