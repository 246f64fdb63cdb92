#pragma once

// Truncated Fourier series references with analytic derivatives.

#include "cbc_adapt/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

namespace cbc_adapt {

/// x_c(t) = a0_c + sum_k cos_c,k cos(k w t) + sin_c,k sin(k w t), one row per channel.
struct FourierSignal {
    double omega = 1.0;
    Vec a0;        // channels
    Mat cos_coef;  // channels x H
    Mat sin_coef;  // channels x H

    FourierSignal() = default;
    FourierSignal(double w, int channels, int harmonics)
        : omega(w), a0(Vec::Zero(channels)), cos_coef(Mat::Zero(channels, harmonics)),
          sin_coef(Mat::Zero(channels, harmonics)) {}

    [[nodiscard]] int channels() const noexcept { return static_cast<int>(a0.size()); }
    [[nodiscard]] int harmonics() const noexcept { return static_cast<int>(cos_coef.cols()); }
    [[nodiscard]] double period() const { return 2.0 * std::numbers::pi / omega; }

    /// Number of packed coefficients per channel: a0, cos 1..H, sin 1..H.
    [[nodiscard]] int coefficients_per_channel() const noexcept { return 2 * harmonics() + 1; }

    /// d-th time derivative evaluated at t. d = 0 is the signal itself.
    void eval_into(double t, int d, Eigen::Ref<Vec> out) const {
        if (d == 0)
            out = a0;
        else
            out.setZero();
        for (int k = 1; k <= harmonics(); ++k) {
            const double kw = k * omega;
            const double c = std::cos(kw * t), s = std::sin(kw * t);
            // d^d/dt^d [A cos + B sin] cycles with period 4 in d.
            const double scale = std::pow(kw, d);
            double cc = 0.0, cs = 0.0;  // weights of cos_coef and sin_coef
            switch (d % 4) {
                case 0: cc = c;  cs = s;  break;
                case 1: cc = -s; cs = c;  break;
                case 2: cc = -c; cs = -s; break;
                default: cc = s; cs = -c; break;
            }
            out += scale * (cc * cos_coef.col(k - 1) + cs * sin_coef.col(k - 1));
        }
    }

    [[nodiscard]] Vec eval(double t, int d = 0) const {
        Vec out(channels());
        eval_into(t, d, out);
        return out;
    }

    /// Exact derivative: (a_k, b_k) -> (k w b_k, -k w a_k).
    [[nodiscard]] FourierSignal derivative() const {
        FourierSignal out(omega, channels(), harmonics());
        for (int k = 1; k <= harmonics(); ++k) {
            out.cos_coef.col(k - 1) = k * omega * sin_coef.col(k - 1);
            out.sin_coef.col(k - 1) = -k * omega * cos_coef.col(k - 1);
        }
        return out;
    }

    /// Copy with H' harmonics (zero padded or truncated).
    [[nodiscard]] FourierSignal with_harmonics(int h) const {
        require(h >= 0, "with_harmonics: H must be nonnegative");
        FourierSignal out(omega, channels(), h);
        out.a0 = a0;
        const int keep = std::min(h, harmonics());
        out.cos_coef.leftCols(keep) = cos_coef.leftCols(keep);
        out.sin_coef.leftCols(keep) = sin_coef.leftCols(keep);
        return out;
    }

    /// Packed coefficient vector, per channel [a0, cos_1..H, sin_1..H].
    [[nodiscard]] Vec pack() const {
        const int H = harmonics(), stride = coefficients_per_channel();
        Vec c(channels() * stride);
        for (int ch = 0; ch < channels(); ++ch) {
            c[ch * stride] = a0[ch];
            c.segment(ch * stride + 1, H) = cos_coef.row(ch).transpose();
            c.segment(ch * stride + 1 + H, H) = sin_coef.row(ch).transpose();
        }
        return c;
    }

    [[nodiscard]] static FourierSignal unpack(const VecRef& c, double omega, int channels, int harmonics) {
        const int stride = 2 * harmonics + 1;
        require(c.size() == channels * stride, "FourierSignal::unpack: coefficient count mismatch");
        FourierSignal s(omega, channels, harmonics);
        for (int ch = 0; ch < channels; ++ch) {
            s.a0[ch] = c[ch * stride];
            s.cos_coef.row(ch) = c.segment(ch * stride + 1, harmonics).transpose();
            s.sin_coef.row(ch) = c.segment(ch * stride + 1 + harmonics, harmonics).transpose();
        }
        return s;
    }

    bool operator==(const FourierSignal& o) const {
        return omega == o.omega && a0 == o.a0 && cos_coef == o.cos_coef && sin_coef == o.sin_coef;
    }
};

/// Reference xi^r(t) for an order-n plant: the position signal plus its
/// analytic derivative stack, assembled as [x^(n-1); ...; x'; x].
class ReferenceTrajectory {
public:
    ReferenceTrajectory() = default;
    ReferenceTrajectory(FourierSignal signal, int order_n) : signal_(std::move(signal)), order_(order_n) {
        require(order_n > 0, "ReferenceTrajectory: order must be positive");
        initial_top_ = signal_.eval(0.0, order_ - 1);
    }

    [[nodiscard]] const FourierSignal& signal() const noexcept { return signal_; }
    [[nodiscard]] int order() const noexcept { return order_; }
    [[nodiscard]] int dof() const noexcept { return signal_.channels(); }
    [[nodiscard]] int state_dim() const noexcept { return order_ * dof(); }
    [[nodiscard]] double omega() const noexcept { return signal_.omega; }

    /// x^{r(n-1)}(0), the anchor of the auxiliary state.
    [[nodiscard]] const Vec& initial_top_derivative() const noexcept { return initial_top_; }

    void eval_into(double t, Eigen::Ref<Vec> xi) const {
        const int p = dof();
        for (int blk = 0; blk < order_; ++blk) signal_.eval_into(t, order_ - 1 - blk, xi.segment(blk * p, p));
    }

    [[nodiscard]] Vec eval(double t) const {
        Vec xi(state_dim());
        eval_into(t, xi);
        return xi;
    }

    /// x^{r(n)}(t), needed for the model residual.
    [[nodiscard]] Vec top_derivative(double t) const { return signal_.eval(t, order_); }

    bool operator==(const ReferenceTrajectory& o) const { return order_ == o.order_ && signal_ == o.signal_; }

private:
    FourierSignal signal_;
    int order_ = 1;
    Vec initial_top_;
};

[[nodiscard]] inline Vec eval_reference(const ReferenceTrajectory& ref, double t) { return ref.eval(t); }

/// Scales each nonzero coefficient by (1 + delta), delta uniform in
/// [-max_rel_dev, max_rel_dev]. Uses the raw 64-bit Mersenne stream so the
/// draw sequence is identical on every standard library.
[[nodiscard]] inline ReferenceTrajectory perturb_coefficients(const ReferenceTrajectory& ref, double max_rel_dev,
                                                              std::uint64_t seed) {
    require(max_rel_dev >= 0.0, "perturb_coefficients: max_rel_dev must be nonnegative");
    std::mt19937_64 gen(seed);
    const FourierSignal& s = ref.signal();
    Vec c = s.pack();
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
        if (c[i] != 0.0) c[i] *= 1.0 + (2.0 * u - 1.0) * max_rel_dev;
    }
    return ReferenceTrajectory(FourierSignal::unpack(c, s.omega, s.channels(), s.harmonics()), ref.order());
}

// ---------------------------------------------------------------------------
// Printed natural-response approximations of the three benchmarks. These are
// rounded values; refine them with hb_solve before treating them as orbits.
// ---------------------------------------------------------------------------

[[nodiscard]] inline ReferenceTrajectory builtin_reference(const std::string& name) {
    if (name == "duffing") {
        FourierSignal s(2.515, 1, 3);
        s.a0 << 1.271;
        s.cos_coef << 0.244, -0.026, -0.005;
        s.sin_coef << 0.436, 0.045, 0.0;
        return {s, 2};
    }
    if (name == "cross_beam") {
        FourierSignal s(118.814, 2, 5);
        s.cos_coef << -35.344, 0, 0.521, 0, 0.002,
                      -10.974, 0, 0.132, 0, 0.001;
        s.sin_coef << 42.08, 0, 0.303, 0, -0.006,
                      12.358, 0, 0.077, 0, -0.002;
        s.cos_coef *= 1e-4;
        s.sin_coef *= 1e-4;
        return {s, 2};
    }
    if (name == "cantilever") {
        FourierSignal s(83.085, 2, 7);
        s.cos_coef << -2.834, 0, 0.254, 0, -0.0341, 0, -0.001,
                      -0.487, 0, -2.6, 0, 0.055, 0, 0.001;
        s.sin_coef << -8.241, 0, 0.066, 0, 0.026, 0, -0.007,
                      -0.469, 0, -0.219, 0, -0.044, 0, 0.009;
        s.cos_coef *= 1e-4;
        s.sin_coef *= 1e-4;
        return {s, 2};
    }
    throw ContractViolation("unknown builtin reference '" + name + "'");
}

}  // namespace cbc_adapt
