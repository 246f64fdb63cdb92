#pragma once

#include "cbc_adapt/types.hpp"

namespace cbc_adapt {

/// Scratch space for the classical fourth-order Runge-Kutta step.
struct Rk4Workspace {
    Vec k1, k2, k3, k4, tmp;

    explicit Rk4Workspace(Eigen::Index n = 0) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}

    void resize(Eigen::Index n) {
        if (k1.size() == n) return;
        k1.resize(n); k2.resize(n); k3.resize(n); k4.resize(n); tmp.resize(n);
    }
};

/// One RK4 step of x' = f(t, x), in place. `f(t, x, dx)` writes into dx.
template <class Rhs>
void rk4_step(Rhs&& f, double t, Vec& x, double dt, Rk4Workspace& ws) {
    ws.resize(x.size());
    const double h2 = 0.5 * dt;
    f(t, x, ws.k1);
    ws.tmp = x + h2 * ws.k1;
    f(t + h2, ws.tmp, ws.k2);
    ws.tmp = x + h2 * ws.k2;
    f(t + h2, ws.tmp, ws.k3);
    ws.tmp = x + dt * ws.k3;
    f(t + dt, ws.tmp, ws.k4);
    x += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

/// Integrates over [t0, t0 + steps*dt]; time is t0 + i*dt, never accumulated.
template <class Rhs>
void rk4_integrate(Rhs&& f, double t0, Vec& x, double dt, long steps) {
    Rk4Workspace ws(x.size());
    for (long i = 0; i < steps; ++i) rk4_step(f, t0 + static_cast<double>(i) * dt, x, dt, ws);
}

}  // namespace cbc_adapt
