#pragma once

// Discrete standing mode of the semi-discrete system M dx/dt = -A x.
// With S = M^-1/2 A M^-1/2 (skew), every eigenvector v of -S^2 with
// eigenvalue w^2 gives a solution that returns to x0 = M^-1/2 v after
// exactly T = 2 pi / w, so time-integration error is all that remains.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "femma/fem/block_operator.hpp"
#include "femma/fem/time_stepping.hpp"

namespace oracle {

struct DiscreteMode {
  femma::fem::State x0;
  double omega = 0.0;
  double period() const { return 2.0 * std::numbers::pi / omega; }
};

inline DiscreteMode discrete_mode(const femma::fem::BlockOperator& op, double target_omega) {
  const femma::Matrix A = femma::fem::dense_probe(op);
  std::vector<double> m = op.lumped_u();
  m.insert(m.end(), op.lumped_p().begin(), op.lumped_p().end());
  const int n = A.rows;
  Eigen::MatrixXd S(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) S(i, j) = A(i, j) / std::sqrt(m[i] * m[j]);
  const Eigen::MatrixXd N = -(S * S);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (N + N.transpose()));
  int best = 0;
  for (int k = 1; k < n; ++k)
    if (std::abs(es.eigenvalues()(k) - target_omega * target_omega) <
        std::abs(es.eigenvalues()(best) - target_omega * target_omega))
      best = k;
  DiscreteMode mode;
  mode.omega = std::sqrt(es.eigenvalues()(best));
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[i] = es.eigenvectors()(i, best) / std::sqrt(m[i]);
  mode.x0 = op.zero_state();
  mode.x0.assign_flat(x);
  return mode;
}

// max |x(T) - x0| / max |x0| after one period in `steps` RK4 steps.
inline double return_error(const femma::fem::BlockOperator& op, const DiscreteMode& mode, int steps) {
  const double dt = mode.period() / steps;
  femma::fem::State x = mode.x0;
  for (int s = 0; s < steps; ++s) x = femma::fem::rk4_step(op, x, s * dt, dt, s);
  x.axpy(-1.0, mode.x0);
  return x.max_abs() / mode.x0.max_abs();
}

}  // namespace oracle
