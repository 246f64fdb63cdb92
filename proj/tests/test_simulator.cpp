#include "cbc_adapt/config.hpp"
#include "cbc_adapt/diagnostics.hpp"
#include "cbc_adapt/simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

using namespace cbc_adapt;

namespace {

const std::string kScenarios = CBC_ADAPT_SCENARIO_DIR;

ScenarioConfig load(const std::string& stem) { return load_scenario_config(kScenarios + "/" + stem + ".json"); }

Vec vec(std::initializer_list<double> v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

/// Closed-form solution of x'' + c x' + k x = A cos(w t) from (v0, x0).
struct LinearOscillator {
    double c, k, A, w, v0, x0;

    [[nodiscard]] double position(double t) const {
        // particular: Re(C e^{iwt}) with C = A / (k - w^2 + i c w)
        const std::complex<double> C = A / std::complex<double>(k - w * w, c * w);
        const double xp0 = C.real(), vp0 = -w * C.imag();
        // homogeneous roots (real, distinct for the cases used here)
        const double disc = c * c - 4.0 * k;
        const double r1 = 0.5 * (-c + std::sqrt(disc)), r2 = 0.5 * (-c - std::sqrt(disc));
        const double a = x0 - xp0, b = v0 - vp0;  // h(0), h'(0)
        const double c2 = (b - r1 * a) / (r2 - r1), c1 = a - c2;
        return c1 * std::exp(r1 * t) + c2 * std::exp(r2 * t) + (C * std::exp(std::complex<double>(0.0, w * t))).real();
    }
};

Scenario linear_duffing_open_loop(double dt, double t_end) {
    Scenario sc;
    sc.plant = make_duffing();
    sc.plant.true_theta[2] = 0.0;  // drop the cubic term
    sc.excitation = Excitation(2.515, vec({0.15}));
    sc.initial_state = vec({0.3, -0.2});
    sc.mode = SimMode::OpenLoop;
    sc.dt = dt;
    sc.t_end = t_end;
    return sc;
}

double final_state_gap(Scenario sc) {
    const Vec a = [&] {
        const auto tr = simulate(sc);
        return Vec(tr.xi[tr.size() - 1]);
    }();
    sc.dt *= 0.5;
    const auto tr = simulate(sc);
    return (a - Vec(tr.xi[tr.size() - 1])).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Simulator, Rk4OrderOnLinearOscillator) {
    const double t_end = 2.0;
    const LinearOscillator exact{0.1, -4.0, 0.15, 2.515, 0.3, -0.2};
    std::vector<double> err;
    for (double dt : {1e-2, 5e-3, 2.5e-3}) {
        const auto tr = simulate(linear_duffing_open_loop(dt, t_end));
        err.push_back(std::abs(tr.xi[tr.size() - 1][1] - exact.position(t_end)));
    }
    const double order1 = std::log2(err[0] / err[1]);
    const double order2 = std::log2(err[1] / err[2]);
    EXPECT_GE(order1, 3.7) << err[0] << " " << err[1];
    EXPECT_GE(order2, 3.7) << err[1] << " " << err[2];
}

TEST(Simulator, Deterministic) {
    auto cfg = load("duffing_invasive");
    cfg.scenario.t_end = 5.0 * cfg.scenario.excitation.period();
    const auto a = simulate(cfg.scenario);
    const auto b = simulate(cfg.scenario);
    EXPECT_TRUE(a == b);
}

TEST(Simulator, ZeroEquilibriumStaysAtRest) {
    Scenario sc;
    sc.plant = make_duffing();
    sc.excitation = Excitation(2.515, vec({0.0}));
    sc.reference = ReferenceTrajectory(FourierSignal(2.515, 1, 3), 2);
    sc.controller.S = 2.0 * Mat::Identity(3, 3);
    sc.controller.lambda = vec({1.0});
    sc.initial_state = Vec::Zero(2);
    sc.dt = 1e-3;
    sc.t_end = 5.0;
    const auto tr = simulate(sc);
    for (std::size_t i = 0; i < tr.size(); i += 97) {
        EXPECT_TRUE(tr.xi[i].isZero(0.0));
        EXPECT_TRUE(tr.u[i].isZero(0.0));
        EXPECT_TRUE(tr.theta_hat[i].isZero(0.0));
    }
}

TEST(Simulator, OpenLoopDepartsFromUnstableOrbit) {
    auto cfg = load("duffing_noninvasive");
    Scenario sc = cfg.scenario;
    sc.mode = SimMode::OpenLoop;
    sc.initial_state = vec({1.314, 1.483});
    const auto tr = simulate(sc);
    const double T = sc.excitation.period();
    // starts close to the orbit, ends far from it
    EXPECT_LT(tr.position_error(0).norm(), 1e-2);
    EXPECT_GT(final_tracking_error(tr, T), 0.1);
}

TEST(Simulator, StepHalvingConverges) {
    struct Case {
        const char* stem;
        int periods;
    };
    for (const Case c : {Case{"duffing_noninvasive", 40}, Case{"cross_beam", 20}, Case{"cantilever", 20}}) {
        auto cfg = load(c.stem);
        cfg.scenario.t_end = c.periods * cfg.scenario.excitation.period();
        cfg.scenario.record_stride = 1;
        EXPECT_LT(final_state_gap(cfg.scenario), 1e-6) << c.stem;
    }
}

TEST(Simulator, AdaptiveGainNondecreasingAndInputReconstructs) {
    const auto cfg = load("duffing_invasive");
    const auto tr = simulate(cfg.scenario);
    const double k = cfg.scenario.controller.k;
    for (std::size_t i = 0; i < tr.size(); ++i) {
        if (i > 0) {
            ASSERT_GE(tr.phi[i], tr.phi[i - 1] - 1e-12) << "at sample " << i;
        }
        const Vec rebuilt = -k * tr.z_tilde[i] + tr.eta[i];
        ASSERT_LE((rebuilt - tr.u[i]).cwiseAbs().maxCoeff(), 1e-15 * std::max(1.0, tr.u[i].cwiseAbs().maxCoeff()));
    }
}

TEST(Simulator, AllFalseMaskFreezesEstimate) {
    auto cfg = load("duffing_invasive");
    cfg.scenario.t_end = 3.0 * cfg.scenario.excitation.period();
    cfg.scenario.regressor_mask = std::vector<bool>(3, false);
    const auto tr = simulate(cfg.scenario);
    for (std::size_t i = 0; i < tr.size(); i += 50) EXPECT_TRUE(tr.theta_hat[i].isZero(0.0));
}

TEST(Simulator, MaskLeavesTruePlantIntact) {
    // a masked controller must not change the open-loop physics
    auto cfg = load("cross_beam");
    Scenario sc = cfg.scenario;
    sc.mode = SimMode::OpenLoop;
    sc.t_end = 2.0 * sc.excitation.period();
    const auto a = simulate(sc);
    sc.regressor_mask = cross_beam_cross_term_mask();
    const auto b = simulate(sc);
    EXPECT_TRUE(a.xi == b.xi);
}

TEST(Simulator, TraceGridAndChannels) {
    auto cfg = load("cross_beam");
    cfg.scenario.t_end = 2.0 * cfg.scenario.excitation.period();
    const auto tr = simulate(cfg.scenario);
    const long samples = cfg.scenario.steps() / cfg.scenario.record_stride + 1;
    EXPECT_EQ(tr.size(), static_cast<std::size_t>(samples));
    for (const Series* s : {&tr.xi_ref, &tr.u, &tr.eta, &tr.y, &tr.z_tilde, &tr.theta_hat, &tr.sigma})
        EXPECT_EQ(s->size(), tr.size());
    EXPECT_EQ(tr.phi.size(), tr.size());
    EXPECT_EQ(tr.g.size(), tr.size());
    EXPECT_DOUBLE_EQ(tr.sample_dt, cfg.scenario.dt * cfg.scenario.record_stride);
    EXPECT_NEAR(tr.t_end(), cfg.scenario.t_end, 1e-12);
    EXPECT_EQ(tr.scenario_hash, cfg.scenario.hash);
}

TEST(Simulator, DivergenceCarriesPartialTrace) {
    Scenario sc = linear_duffing_open_loop(1e-3, 20.0);
    sc.plant.true_theta[2] = 2.0;  // softening sign flipped: finite-time blow-up
    sc.initial_state = vec({0.0, 2.0});
    try {
        (void)simulate(sc);
        FAIL() << "expected divergence";
    } catch (const SimulationDiverged& e) {
        EXPECT_GT(e.time(), 0.0);
        EXPECT_LT(e.time(), 20.0);
        EXPECT_GT(e.partial_trace().size(), 1u);
    }
}

TEST(Simulator, RejectsInvalidScenarios) {
    Scenario sc = linear_duffing_open_loop(1e-3, 1.0);
    EXPECT_NO_THROW(sc.validate());
    auto bad = sc;
    bad.dt = 0.0;
    EXPECT_THROW((void)simulate(bad), ContractViolation);
    bad = sc;
    bad.dt = -1e-3;
    EXPECT_THROW((void)simulate(bad), ContractViolation);
    bad = sc;
    bad.t_end = 1e-4;
    EXPECT_THROW((void)simulate(bad), ContractViolation);
    bad = sc;
    bad.initial_state = Vec::Zero(3);
    EXPECT_THROW((void)simulate(bad), ContractViolation);
    bad = sc;
    bad.regressor_mask = std::vector<bool>(2, true);
    EXPECT_THROW((void)simulate(bad), ContractViolation);
    bad = sc;
    bad.mode = SimMode::ClosedLoop;  // no reference
    EXPECT_THROW((void)simulate(bad), ContractViolation);
}
