#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace femma {

// 1D point sets on the reference interval [-1, 1].
struct PointSet1D {
  std::vector<double> points;
  std::vector<double> weights;
};

namespace detail {

// Legendre P_n(x) and its derivative by the three-term recurrence.
inline void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 2; k <= n; ++k) {
    const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = pk;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace detail

// n-point Gauss-Legendre rule, exact for polynomials of degree 2n-1.
inline PointSet1D gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  PointSet1D r;
  r.points.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = -std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      detail::legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    detail::legendre(n, x, p, dp);
    r.points[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// n-point Gauss-Lobatto-Legendre points (endpoints included) with weights.
inline PointSet1D gauss_lobatto(int n) {
  if (n < 2) throw std::invalid_argument("gauss_lobatto: n must be >= 2");
  PointSet1D r;
  r.points.resize(n);
  r.weights.resize(n);
  const int N = n - 1;
  for (int i = 0; i < n; ++i) {
    // Chebyshev-Gauss-Lobatto initial guess, then Newton on (1-x^2) P_N'(x).
    double x = -std::cos(std::numbers::pi * i / N);
    if (i != 0 && i != N) {
      for (int it = 0; it < 100; ++it) {
        double p = 0.0, dp = 0.0;
        detail::legendre(N, x, p, dp);
        // d/dx[(1-x^2) P'] = -N(N+1) P
        const double f = (1.0 - x * x) * dp;
        const double df = -N * (N + 1.0) * p;
        const double dx = f / df;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
    }
    double p = 0.0, dp = 0.0;
    if (i == 0 || i == N) {
      p = (i == 0 && N % 2 == 1) ? -1.0 : 1.0;
    } else {
      detail::legendre(N, x, p, dp);
    }
    r.points[i] = x;
    r.weights[i] = 2.0 / (N * (N + 1.0) * p * p);
  }
  return r;
}

// Value of the j-th Lagrange polynomial on `nodes` at x.
inline double lagrange_value(const std::vector<double>& nodes, int j, double x) {
  double v = 1.0;
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    if (static_cast<int>(m) == j) continue;
    v *= (x - nodes[m]) / (nodes[j] - nodes[m]);
  }
  return v;
}

inline double lagrange_derivative(const std::vector<double>& nodes, int j, double x) {
  double sum = 0.0;
  for (std::size_t l = 0; l < nodes.size(); ++l) {
    if (static_cast<int>(l) == j) continue;
    double term = 1.0 / (nodes[j] - nodes[l]);
    for (std::size_t m = 0; m < nodes.size(); ++m) {
      if (static_cast<int>(m) == j || m == l) continue;
      term *= (x - nodes[m]) / (nodes[j] - nodes[m]);
    }
    sum += term;
  }
  return sum;
}

}  // namespace femma
