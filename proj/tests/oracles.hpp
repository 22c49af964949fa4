#pragma once

// Reference implementations used only by the tests. They deliberately take
// the long way round (explicit Kronecker products, per-byte bank scans,
// elementwise integration) so they share no code paths with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "femma/core_tensor.hpp"
#include "femma/fem/block_operator.hpp"
#include "femma/quadrature.hpp"
#include "femma/warp_mma.hpp"

namespace oracle {

using femma::Matrix;

inline Matrix random_matrix(int r, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.data) v = U(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = U(rng);
  return v;
}

// max |a - b| / max |b|
inline double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den == 0.0 ? num : num / den;
}

// C = A (x) B, with (A (x) B)(i*rB + k, j*cB + l) = A(i,j) B(k,l).
inline Matrix kron(const Matrix& A, const Matrix& B) {
  Matrix C(A.rows * B.rows, A.cols * B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j)
      for (int k = 0; k < B.rows; ++k)
        for (int l = 0; l < B.cols; ++l) C(i * B.rows + k, j * B.cols + l) = A(i, j) * B(k, l);
  return C;
}

inline std::vector<double> matvec(const Matrix& A, const std::vector<double>& x) {
  std::vector<double> y(static_cast<std::size_t>(A.rows), 0.0);
  for (int i = 0; i < A.rows; ++i) {
    long double s = 0.0L;
    for (int j = 0; j < A.cols; ++j) s += static_cast<long double>(A(i, j)) * x[j];
    y[i] = static_cast<double>(s);
  }
  return y;
}

// With x-fastest storage the 3D operator B_z (x) B_y (x) B_x acts on the flat vector.
inline Matrix kron3(const Matrix& bx, const Matrix& by, const Matrix& bz) { return kron(bz, kron(by, bx)); }

// Long-double triple loop C = A B.
inline std::vector<long double> gemm_ld(const Matrix& A, const Matrix& B) {
  std::vector<long double> C(static_cast<std::size_t>(A.rows) * B.cols, 0.0L);
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.cols; ++j) {
      long double s = 0.0L;
      for (int k = 0; k < A.cols; ++k) s += static_cast<long double>(A(i, k)) * B(k, j);
      C[static_cast<std::size_t>(i) * B.cols + j] = s;
    }
  return C;
}

// Conflict degree of one access phase by scanning every byte each lane
// touches: the largest number of distinct addresses that share a bank.
inline int brute_force_degree(const std::vector<std::optional<std::int64_t>>& lanes, int word_bytes = 8,
                              int bank_bytes = 4, int banks = 32) {
  std::vector<std::set<std::int64_t>> per_bank(static_cast<std::size_t>(banks));
  for (const auto& a : lanes) {
    if (!a) continue;
    for (std::int64_t byte = *a; byte < *a + word_bytes; ++byte) per_bank[(byte / bank_bytes) % banks].insert(*a);
  }
  std::size_t deg = 0;
  for (const auto& s : per_bank) deg = std::max(deg, s.size());
  return static_cast<int>(deg);
}

// Element coupling matrix on an axis-aligned box element with edge lengths h:
// G[(c * nu + i), j] = coupling * integral psi_i d(phi_j)/dx_c, psi the L2
// basis (Gauss nodes, order_u), phi the H1 basis (Lobatto nodes, order_p).
// Integrated point by point with Lagrange polynomials evaluated directly.
inline Matrix box_coupling_matrix(int order_p, int order_u, int num_quad, std::array<double, 3> h,
                                  double coupling) {
  const auto gp = femma::gauss_legendre(num_quad);
  const auto np = femma::gauss_lobatto(order_p + 1).points;
  const auto nu = femma::gauss_legendre(order_u + 1).points;
  const int dp = order_p + 1, du = order_u + 1;
  const int lp = dp * dp * dp, lu = du * du * du;
  const double det = h[0] * h[1] * h[2] / 8.0;
  Matrix G(3 * lu, lp);
  for (int c3 = 0; c3 < num_quad; ++c3)
    for (int b = 0; b < num_quad; ++b)
      for (int a = 0; a < num_quad; ++a) {
        const std::array<double, 3> xi{gp.points[a], gp.points[b], gp.points[c3]};
        const double w = gp.weights[a] * gp.weights[b] * gp.weights[c3] * det * coupling;
        std::vector<double> psi(static_cast<std::size_t>(lu));
        for (int k = 0, l = 0; k < du; ++k)
          for (int j = 0; j < du; ++j)
            for (int i = 0; i < du; ++i, ++l)
              psi[l] = femma::lagrange_value(nu, i, xi[0]) * femma::lagrange_value(nu, j, xi[1]) *
                       femma::lagrange_value(nu, k, xi[2]);
        std::vector<std::array<double, 3>> dphi(static_cast<std::size_t>(lp));
        for (int k = 0, l = 0; k < dp; ++k)
          for (int j = 0; j < dp; ++j)
            for (int i = 0; i < dp; ++i, ++l) {
              const double vx = femma::lagrange_value(np, i, xi[0]), dx = femma::lagrange_derivative(np, i, xi[0]);
              const double vy = femma::lagrange_value(np, j, xi[1]), dy = femma::lagrange_derivative(np, j, xi[1]);
              const double vz = femma::lagrange_value(np, k, xi[2]), dz = femma::lagrange_derivative(np, k, xi[2]);
              dphi[l] = {2.0 / h[0] * dx * vy * vz, 2.0 / h[1] * vx * dy * vz, 2.0 / h[2] * vx * vy * dz};
            }
        for (int c = 0; c < 3; ++c)
          for (int i = 0; i < lu; ++i)
            for (int j = 0; j < lp; ++j) G(c * lu + i, j) += w * psi[i] * dphi[j][c];
      }
  return G;
}

// Global pressure index of local H1 node (i, j, k) of element (ex, ey, ez).
inline int lattice_index(const femma::fem::Mesh& m, int order, int e, int i, int j, int k) {
  const int ex = e % m.nx, ey = (e / m.nx) % m.ny, ez = e / (m.nx * m.ny);
  const int gx = m.nx * order + 1, gy = m.ny * order + 1;
  return (ex * order + i) + gx * ((ey * order + j) + gy * (ez * order + k));
}

// A x on an axis-aligned mesh with no boundary terms, from element matrices:
//   r_u = G p_e,  r_p = -sum_e G^T u_e.
// Elements may carry different coupling factors.
inline femma::fem::State reference_apply(const femma::fem::Mesh& m, const std::vector<double>& coupling, int order_p,
                                         int order_u, int num_quad, const femma::fem::State& x) {
  const int dp = order_p + 1, du = order_u + 1;
  const int lp = dp * dp * dp, lu = du * du * du;
  femma::fem::State r{std::vector<double>(x.u.size(), 0.0), std::vector<double>(x.p.size(), 0.0)};
  const std::array<double, 3> h{m.extent[0] / m.nx, m.extent[1] / m.ny, m.extent[2] / m.nz};
  const Matrix G1 = box_coupling_matrix(order_p, order_u, num_quad, h, 1.0);
  for (int e = 0; e < m.num_elements(); ++e) {
    std::vector<int> dofs;
    for (int k = 0; k < dp; ++k)
      for (int j = 0; j < dp; ++j)
        for (int i = 0; i < dp; ++i) dofs.push_back(lattice_index(m, order_p, e, i, j, k));
    const double s = coupling[e];
    const std::size_t ub = static_cast<std::size_t>(e) * 3 * lu;
    for (int row = 0; row < 3 * lu; ++row) {
      double acc = 0.0;
      for (int col = 0; col < lp; ++col) acc += G1(row, col) * x.p[dofs[col]];
      r.u[ub + row] = s * acc;
    }
    for (int col = 0; col < lp; ++col) {
      double acc = 0.0;
      for (int row = 0; row < 3 * lu; ++row) acc += G1(row, col) * x.u[ub + row];
      r.p[dofs[col]] -= s * acc;
    }
  }
  return r;
}

}  // namespace oracle
