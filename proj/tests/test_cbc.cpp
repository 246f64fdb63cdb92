#include "cbc_adapt/cbc.hpp"
#include "cbc_adapt/config.hpp"
#include "cbc_adapt/harmonic_balance.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cbc_adapt;

namespace {

const std::string kScenarios = CBC_ADAPT_SCENARIO_DIR;

ScenarioConfig duffing_cbc(int harmonics) {
    json j = read_json_file(kScenarios + "/duffing_cbc.json");
    j["reference"]["refine_harmonics"] = harmonics;
    return parse_scenario_config(j);
}

double coefficient_gap(const ReferenceTrajectory& a, const ReferenceTrajectory& b) {
    return (a.signal().pack() - b.signal().pack()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(ProjectPeriod, RecoversTrigonometricPolynomialExactly) {
    FourierSignal s(3.0, 2, 4);
    s.a0 << 0.5, -1.25;
    s.cos_coef << 1.0, 0.0, -0.3, 0.01, 0.2, 0.4, 0.0, -0.7;
    s.sin_coef << -0.5, 0.25, 0.0, 0.02, 0.0, -0.1, 0.9, 0.05;
    const std::size_t N = 37;
    Series samples(2);
    for (std::size_t j = 0; j < N + 5; ++j) samples.push_back(s.eval(s.period() * static_cast<double>(j % N) / N));
    // window offset by a whole period gives the same projection
    for (std::size_t first : {std::size_t{0}, N}) {
        if (first + N > samples.size()) continue;
        const auto proj = project_period(samples, first, N, s.omega, 4);
        EXPECT_LE((proj.pack() - s.pack()).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(ProjectPeriod, RejectsTooFewSamples) {
    Series samples(1);
    for (int j = 0; j < 8; ++j) samples.push_back(Vec::Zero(1));
    EXPECT_THROW((void)project_period(samples, 0, 8, 1.0, 4), ContractViolation);
    EXPECT_NO_THROW((void)project_period(samples, 0, 8, 1.0, 3));
}

TEST(CbcEvaluate, NaturalOrbitIsNoninvasivePerturbedIsNot) {
    const auto cfg = duffing_cbc(7);
    const CbcSettings s = cfg.cbc->settings;
    const auto natural = cbc_evaluate(cfg.scenario, *cfg.natural_reference, s);
    EXPECT_TRUE(natural.steady);
    EXPECT_LE(natural.norm(), s.tol);
    // the measured response reproduces the reference
    EXPECT_LE(coefficient_gap(ReferenceTrajectory(natural.response, 2), *cfg.natural_reference), 1e-6);

    const auto perturbed = cbc_evaluate(cfg.scenario, perturb_coefficients(*cfg.natural_reference, 0.1, 1), s);
    EXPECT_TRUE(perturbed.steady);
    EXPECT_GT(perturbed.norm(), 1e-3);
}

TEST(CbcSolve, NaturalOrbitNeedsNoIteration) {
    const auto cfg = duffing_cbc(7);
    const auto r = cbc_solve(cfg.scenario, *cfg.natural_reference, cfg.cbc->settings);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.residual_history.size(), 1u);
    EXPECT_TRUE(r.reference == *cfg.natural_reference);
}

TEST(CbcSolve, FixedPointSolvesHarmonicBalance) {
    // With a tight steady-state test, the zero of the projected control is a
    // harmonic-balance solution of the open-loop plant. H must be large enough
    // that the harmonics dropped by the truncation are below the tolerance.
    const int H = 11;
    const auto cfg = duffing_cbc(H);
    CbcSettings s = cfg.cbc->settings;
    s.tol = 1e-10;
    s.steady_abs = 1e-12;
    const auto r = cbc_solve(cfg.scenario, perturb_coefficients(*cfg.natural_reference, 1e-3, 1), s);
    ASSERT_TRUE(r.converged);
    for (std::size_t i = 1; i < r.residual_history.size(); ++i)
        EXPECT_LT(r.residual_history[i], r.residual_history[i - 1]);
    const Vec R = hb_residual(cfg.scenario.plant, cfg.scenario.excitation, r.reference.signal(), r.reference.omega(), H);
    EXPECT_LE(R.cwiseAbs().maxCoeff(), 10.0 * HbSettings{}.tol);
    EXPECT_LE(coefficient_gap(r.reference, *cfg.natural_reference), 1e-8);
}

TEST(CbcSolve, ParallelColumnsGiveIdenticalResult) {
    const auto cfg = duffing_cbc(7);
    const ReferenceTrajectory start(perturb_coefficients(*cfg.natural_reference, 0.05, 3).signal().with_harmonics(2), 2);
    CbcSettings s = cfg.cbc->settings;
    s.tol = 1e-4;
    s.steps_per_period = 400;
    const auto serial = cbc_solve(cfg.scenario, start, s);
    s.threads = 3;
    const auto parallel = cbc_solve(cfg.scenario, start, s);
    EXPECT_TRUE(serial.converged);
    EXPECT_TRUE(serial.reference == parallel.reference);
    EXPECT_EQ(serial.residual_history, parallel.residual_history);
}

TEST(CbcSolve, IterationLimitReportsPartialResult) {
    const auto cfg = duffing_cbc(7);
    CbcSettings s = cfg.cbc->settings;
    s.max_iter = 0;
    const auto start = perturb_coefficients(*cfg.natural_reference, 0.1, 1);
    try {
        (void)cbc_solve(cfg.scenario, start, s);
        FAIL() << "expected CbcFailure";
    } catch (const CbcFailure& e) {
        EXPECT_EQ(e.partial().iterations, 0);
        ASSERT_EQ(e.partial().residual_history.size(), 1u);
        EXPECT_GT(e.last_residual(), s.tol);
        EXPECT_TRUE(e.partial().reference == start);
    }
}

TEST(CbcSolve, RejectsInvalidInput) {
    const auto cfg = duffing_cbc(7);
    const auto& ref = *cfg.natural_reference;
    auto bad = [&](auto mutate) {
        CbcSettings s = cfg.cbc->settings;
        mutate(s);
        return s;
    };
    EXPECT_THROW((void)cbc_solve(cfg.scenario, ref, bad([](CbcSettings& s) { s.tol = 0.0; })), ContractViolation);
    EXPECT_THROW((void)cbc_solve(cfg.scenario, ref, bad([](CbcSettings& s) { s.max_iter = -1; })), ContractViolation);
    EXPECT_THROW((void)cbc_solve(cfg.scenario, ref, bad([](CbcSettings& s) { s.max_periods = 5; })), ContractViolation);
    EXPECT_THROW((void)cbc_solve(cfg.scenario, ref, bad([](CbcSettings& s) { s.steps_per_period = 4; })), ContractViolation);
    const ReferenceTrajectory two_dof(FourierSignal(2.515, 2, 3), 2);
    EXPECT_THROW((void)cbc_solve(cfg.scenario, two_dof, cfg.cbc->settings), ContractViolation);
    Scenario bad_gain = cfg.scenario;
    bad_gain.controller.k = -1.0;
    EXPECT_THROW((void)cbc_solve(bad_gain, ref, cfg.cbc->settings), ContractViolation);
}
