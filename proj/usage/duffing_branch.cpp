// Continues the Duffing frequency response over w in [1.5, 3.5] and prints
// the limit points and the stability of each segment.

#include "cbc_adapt/continuation.hpp"

#include <cmath>
#include <cstdio>

using namespace cbc_adapt;

int main() {
    const PlantModel plant = make_duffing();
    const Excitation exc(1.5, (Vec(1) << 0.15).finished());

    // small oscillation about the x = sqrt(2) well
    FourierSignal guess(1.5, 1, 1);
    guess.a0[0] = std::sqrt(2.0);
    guess.cos_coef(0, 0) = 0.026;
    const PeriodicOrbit seed = hb_solve(plant, exc, guess, 1.5, {});

    ContinuationSettings cfg;
    cfg.omega_min = 1.5;
    cfg.omega_max = 3.5;
    const Branch br = continue_branch(plant, exc, seed, cfg);

    std::printf("%zu orbits, terminated by %s\n", br.orbits.size(), br.termination.c_str());
    for (const auto& e : br.events)
        std::printf("%s between w = %.4f and %.4f\n", to_string(e.type), e.omega_lo, e.omega_hi);
    for (std::size_t i = 0; i < br.orbits.size(); i += 10) {
        const auto& o = br.orbits[i];
        std::printf("w %.4f  a0 %+.4f  |a1| %.4f  max|mu| %.3f  %s\n", o.omega, o.fourier.a0[0],
                    std::hypot(o.fourier.cos_coef(0, 0), o.fourier.sin_coef(0, 0)), o.max_multiplier_modulus(),
                    o.stable ? "stable" : "unstable");
    }
}
