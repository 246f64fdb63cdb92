#include "cbc_adapt/reference.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace cbc_adapt;

TEST(Reference, DuffingPrintedInitialState) {
    const Vec xi = eval_reference(builtin_reference("duffing"), 0.0);
    ASSERT_EQ(xi.size(), 2);
    // printed values are rounded; the coefficients themselves give 1.3229, 1.484
    EXPECT_NEAR(xi[0], 1.314, 1e-2);
    EXPECT_NEAR(xi[1], 1.483, 1e-2);
}

TEST(Reference, CantileverPrintedInitialState) {
    const Vec xi = eval_reference(builtin_reference("cantilever"), 0.0);
    ASSERT_EQ(xi.size(), 4);
    EXPECT_NEAR(xi[0], -0.066, 1e-3);
    EXPECT_NEAR(xi[1], -0.011, 1e-3);
    EXPECT_NEAR(xi[2], -2.613e-4, 5e-7);
    EXPECT_NEAR(xi[3], -3.031e-4, 5e-7);
}

TEST(Reference, BuiltinFrequenciesAndShapes) {
    EXPECT_EQ(builtin_reference("duffing").omega(), 2.515);
    EXPECT_EQ(builtin_reference("cross_beam").omega(), 118.814);
    EXPECT_EQ(builtin_reference("cantilever").omega(), 83.085);
    EXPECT_EQ(builtin_reference("duffing").signal().harmonics(), 3);
    EXPECT_EQ(builtin_reference("cross_beam").signal().harmonics(), 5);
    EXPECT_EQ(builtin_reference("cantilever").signal().harmonics(), 7);
    EXPECT_THROW((void)builtin_reference("pendulum"), ContractViolation);
}

TEST(Reference, ZeroSignalIsZeroEverywhere) {
    const ReferenceTrajectory r(FourierSignal(3.0, 2, 4), 3);
    for (double t : {0.0, 0.3, 10.0}) EXPECT_TRUE(r.eval(t).isZero(0.0));
    EXPECT_TRUE(r.top_derivative(1.0).isZero(0.0));
}

TEST(Reference, StackOrderingHighestDerivativeFirst) {
    FourierSignal s(2.0, 1, 1);
    s.a0 << 0.5;
    s.cos_coef << 1.0;  // x = 0.5 + cos 2t
    const ReferenceTrajectory r(s, 3);
    const double t = 0.4;
    const Vec xi = r.eval(t);
    EXPECT_NEAR(xi[0], -4.0 * std::cos(2.0 * t), 1e-14);  // x''
    EXPECT_NEAR(xi[1], -2.0 * std::sin(2.0 * t), 1e-14);  // x'
    EXPECT_NEAR(xi[2], 0.5 + std::cos(2.0 * t), 1e-14);   // x
    EXPECT_NEAR(r.top_derivative(t)[0], 8.0 * std::sin(2.0 * t), 1e-13);
    EXPECT_NEAR(r.initial_top_derivative()[0], -4.0, 1e-14);
}

TEST(Reference, DerivativeMapIsExact) {
    const FourierSignal s = builtin_reference("cantilever").signal();
    const FourierSignal d = s.derivative();
    for (double t : {0.0, 0.013, 0.05}) {
        const Vec a = s.eval(t, 1), b = d.eval(t, 0);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-15 * std::max(1.0, a.cwiseAbs().maxCoeff()) * 10);
    }
}

TEST(Reference, DerivativesMatchCentralDifferences) {
    // Richardson-extrapolated central differences with h = 1e-5 and h / 2;
    // plain O(h^2) differences are too coarse for the 7th cantilever harmonic.
    const double h = 1e-5;
    for (const char* name : {"duffing", "cross_beam", "cantilever"}) {
        const auto ref = builtin_reference(name);
        const FourierSignal& s = ref.signal();
        const double T = s.period();
        for (int d = 1; d <= 2; ++d) {
            double worst = 0.0, scale = 0.0;
            for (int j = 0; j < 64; ++j) {
                const double t = T * j / 64.0;
                const Vec exact = s.eval(t, d);
                auto central = [&](double step) {
                    return Vec((s.eval(t + step, d - 1) - s.eval(t - step, d - 1)) / (2.0 * step));
                };
                const Vec fd = (4.0 * central(0.5 * h) - central(h)) / 3.0;
                worst = std::max(worst, (exact - fd).cwiseAbs().maxCoeff());
                scale = std::max(scale, exact.cwiseAbs().maxCoeff());
            }
            EXPECT_LE(worst / scale, 1e-6) << name << " derivative " << d;
        }
    }
}

TEST(Reference, Periodic) {
    for (const char* name : {"duffing", "cross_beam", "cantilever"}) {
        const auto ref = builtin_reference(name);
        const double T = 2.0 * std::numbers::pi / ref.omega();
        for (double t : {0.0, 0.37 * T, 0.81 * T}) {
            const Vec a = ref.eval(t), b = ref.eval(t + T);
            EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff())) << name;
        }
    }
}

TEST(Reference, PackUnpackRoundTrip) {
    const FourierSignal s = builtin_reference("cross_beam").signal();
    EXPECT_EQ(FourierSignal::unpack(s.pack(), s.omega, s.channels(), s.harmonics()), s);
    EXPECT_THROW((void)FourierSignal::unpack(Vec::Zero(5), 1.0, 2, 3), ContractViolation);
}

TEST(Reference, HarmonicPaddingPreservesSignal) {
    const FourierSignal s = builtin_reference("duffing").signal();
    const FourierSignal padded = s.with_harmonics(9);
    EXPECT_EQ(padded.harmonics(), 9);
    for (double t : {0.0, 1.1, 2.0}) EXPECT_NEAR(padded.eval(t)[0], s.eval(t)[0], 1e-15);
    EXPECT_EQ(padded.with_harmonics(3), s);
}

TEST(Perturb, ZeroDeviationIsIdentity) {
    const auto ref = builtin_reference("duffing");
    EXPECT_EQ(perturb_coefficients(ref, 0.0, 42), ref);
}

TEST(Perturb, RatiosWithinRangeAndZerosKept) {
    for (const char* name : {"duffing", "cross_beam", "cantilever"}) {
        const auto ref = builtin_reference(name);
        const Vec c0 = ref.signal().pack();
        for (std::uint64_t seed : {1u, 2u, 99u}) {
            const Vec c1 = perturb_coefficients(ref, 0.3, seed).signal().pack();
            for (Eigen::Index i = 0; i < c0.size(); ++i) {
                if (c0[i] == 0.0) {
                    EXPECT_EQ(c1[i], 0.0);
                } else {
                    const double ratio = c1[i] / c0[i];
                    EXPECT_GE(ratio, 0.7 - 1e-15);
                    EXPECT_LE(ratio, 1.3 + 1e-15);
                }
            }
        }
    }
}

TEST(Perturb, DeterministicPerSeed) {
    const auto ref = builtin_reference("cantilever");
    EXPECT_EQ(perturb_coefficients(ref, 0.3, 7), perturb_coefficients(ref, 0.3, 7));
    EXPECT_FALSE(perturb_coefficients(ref, 0.3, 7) == perturb_coefficients(ref, 0.3, 8));
    EXPECT_THROW((void)perturb_coefficients(ref, -0.1, 1), ContractViolation);
}

TEST(Perturb, DeviationsSpreadOverRange) {
    // uniform draws: with many coefficients both tails of the range are hit
    FourierSignal s(1.0, 1, 200);
    s.a0 << 1.0;
    s.cos_coef.setOnes();
    s.sin_coef.setOnes();
    const Vec c = perturb_coefficients(ReferenceTrajectory(s, 2), 0.3, 5).signal().pack();
    EXPECT_LT(c.minCoeff(), 0.75);
    EXPECT_GT(c.maxCoeff(), 1.25);
    EXPECT_NEAR(c.mean(), 1.0, 0.03);
}
