#pragma once

#include <string>

#include "femma/errors.hpp"
#include "femma/fem/block_operator.hpp"

namespace femma::fem {

// Classical RK4 for M dx/dt = -A x + F(t); one apply_block per stage.
inline State rk4_step(const BlockOperator& op, const State& x, double t, double dt, long step = 0) {
  if (!(dt > 0.0)) throw Error("rk4_step: dt must be positive, got " + std::to_string(dt));
  const State k1 = op.rate(t, x);
  State y = x;
  y.axpy(0.5 * dt, k1);
  const State k2 = op.rate(t + 0.5 * dt, y);
  y = x;
  y.axpy(0.5 * dt, k2);
  const State k3 = op.rate(t + 0.5 * dt, y);
  y = x;
  y.axpy(dt, k3);
  const State k4 = op.rate(t + dt, y);
  State out = x;
  out.axpy(dt / 6.0, k1).axpy(dt / 3.0, k2).axpy(dt / 3.0, k3).axpy(dt / 6.0, k4);
  if (!out.all_finite())
    throw DivergenceError("rk4_step: non-finite state at step " + std::to_string(step), step);
  return out;
}

// 1/2 integral of (rho |u|^2 + K^-1 p^2) with the lumped mass.
inline double acoustic_energy(const BlockOperator& op, const State& x) { return op.energy(x); }

}  // namespace femma::fem
