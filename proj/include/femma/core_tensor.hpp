#pragma once

// Sum-factorized application of 1D tensor-product bases to hexahedral
// element data. Tensors are stored with the contracted index fastest; each
// contraction appends its new index as the slowest one (cyclic order), so
// three contractions bring a tensor back to canonical x-fastest order.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "femma/counters.hpp"
#include "femma/errors.hpp"
#include "femma/quadrature.hpp"

namespace femma {

// Dense row-major matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  Matrix transposed() const {
    Matrix t(cols, rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// 1D basis tabulated at quadrature points: values(a, i) = phi_i(x_a).
class Basis1D {
 public:
  Basis1D() = default;

  // Lagrange basis on `nodes` evaluated at `points`.
  static Basis1D nodal(const std::vector<double>& nodes, const std::vector<double>& points) {
    if (nodes.empty() || points.empty()) throw ShapeError("Basis1D: empty node or point set");
    const int d = static_cast<int>(nodes.size());
    const int q = static_cast<int>(points.size());
    Matrix v(q, d), g(q, d);
    for (int a = 0; a < q; ++a) {
      for (int i = 0; i < d; ++i) {
        v(a, i) = d == 1 ? 1.0 : lagrange_value(nodes, i, points[a]);
        g(a, i) = d == 1 ? 0.0 : lagrange_derivative(nodes, i, points[a]);
      }
    }
    return Basis1D(std::move(v), std::move(g), nodes, points);
  }

  // Order-p GLL nodal basis at the n-point Gauss-Legendre rule on [-1, 1].
  static Basis1D gll_at_gauss(int order, int num_quad) {
    return nodal(gauss_lobatto(order + 1).points, gauss_legendre(num_quad).points);
  }

  Basis1D(Matrix values, Matrix gradients, std::vector<double> nodes = {},
          std::vector<double> points = {})
      : values_(std::move(values)),
        gradients_(std::move(gradients)),
        values_t_(values_.transposed()),
        gradients_t_(gradients_.transposed()),
        nodes_(std::move(nodes)),
        points_(std::move(points)) {
    if (values_.rows != gradients_.rows || values_.cols != gradients_.cols)
      throw ShapeError("Basis1D: values " + std::to_string(values_.rows) + "x" +
                       std::to_string(values_.cols) + " vs gradients " +
                       std::to_string(gradients_.rows) + "x" + std::to_string(gradients_.cols));
  }

  int num_dofs_1d() const { return values_.cols; }
  int num_quad_1d() const { return values_.rows; }
  const Matrix& values() const { return values_; }
  const Matrix& gradients() const { return gradients_; }
  const Matrix& values_transposed() const { return values_t_; }
  const Matrix& gradients_transposed() const { return gradients_t_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& points() const { return points_; }

 private:
  Matrix values_, gradients_, values_t_, gradients_t_;
  std::vector<double> nodes_, points_;
};

// 3-index tensor. `extents` and `order` are listed fastest-first; order[s]
// names the logical axis (0 = x, 1 = y, 2 = z) stored in slot s.
struct Tensor3 {
  std::array<int, 3> extents{1, 1, 1};
  std::array<int, 3> order{0, 1, 2};
  std::vector<double> data;

  Tensor3() : data(1, 0.0) {}
  explicit Tensor3(std::array<int, 3> ext)
      : extents(ext), data(static_cast<std::size_t>(ext[0]) * ext[1] * ext[2], 0.0) {
    check_order();
  }
  Tensor3(std::array<int, 3> ext, std::vector<double> values, std::array<int, 3> ord = {0, 1, 2})
      : extents(ext), order(ord), data(std::move(values)) {
    if (data.size() != static_cast<std::size_t>(ext[0]) * ext[1] * ext[2])
      throw ShapeError("Tensor3: data length " + std::to_string(data.size()) +
                       " != product of extents");
    check_order();
  }

  static Tensor3 cube(int n) { return Tensor3(std::array<int, 3>{n, n, n}); }

  static Tensor3 zeros(std::array<int, 3> ext, std::array<int, 3> ord) {
    return Tensor3(ext, std::vector<double>(static_cast<std::size_t>(ext[0]) * ext[1] * ext[2], 0.0), ord);
  }

  std::size_t size() const { return data.size(); }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) + static_cast<std::size_t>(extents[0]) * (j + static_cast<std::size_t>(extents[1]) * k);
  }
  double& operator()(int i, int j, int k) { return data[index(i, j, k)]; }
  double operator()(int i, int j, int k) const { return data[index(i, j, k)]; }

  bool is_canonical() const { return order == std::array<int, 3>{0, 1, 2}; }

 private:
  void check_order() const {
    std::array<bool, 3> seen{};
    for (int a : order) {
      if (a < 0 || a > 2 || seen[a]) throw ShapeError("Tensor3: order tag is not a permutation");
      seen[a] = true;
    }
    for (int e : extents)
      if (e < 1) throw ShapeError("Tensor3: extents must be positive");
  }
};

inline std::string extents_string(const std::array<int, 3>& e) {
  return "(" + std::to_string(e[0]) + "," + std::to_string(e[1]) + "," + std::to_string(e[2]) + ")";
}

// One cyclic stage: out(j, k, a) = sum_i B(a, i) X(i, j, k).
// The contracted index is X's fastest; the new index becomes the slowest.
inline Tensor3 contract_cyclic(const Matrix& B, const Tensor3& X, OpCounters* counters = nullptr) {
  if (X.extents[0] != B.cols)
    throw ShapeError("contract_cyclic: matrix is " + std::to_string(B.rows) + "x" +
                     std::to_string(B.cols) + " but tensor extents are " +
                     extents_string(X.extents) + " (fastest must equal " +
                     std::to_string(B.cols) + ")");
  const int d = X.extents[0], n1 = X.extents[1], n2 = X.extents[2], q = B.rows;
  const int mn = n1 * n2;
  Tensor3 out = Tensor3::zeros({n1, n2, q}, {X.order[1], X.order[2], X.order[0]});
  for (int a = 0; a < q; ++a) {
    const double* brow = &B.data[static_cast<std::size_t>(a) * d];
    double* dst = &out.data[static_cast<std::size_t>(a) * mn];
    for (int jk = 0; jk < mn; ++jk) {
      const double* src = &X.data[static_cast<std::size_t>(jk) * d];
      double acc = 0.0;
      for (int i = 0; i < d; ++i) acc += brow[i] * src[i];
      dst[jk] = acc;
    }
  }
  count_flops(counters, 2ull * q * d * mn);
  return out;
}

// Default contraction backend.
struct ScalarContractor {
  Tensor3 operator()(const Matrix& B, const Tensor3& X, OpCounters* counters) const {
    return contract_cyclic(B, X, counters);
  }
};

namespace detail {

inline void require_cube(const Tensor3& X, int n, const char* who) {
  if (X.extents[0] != n || X.extents[1] != n || X.extents[2] != n)
    throw ShapeError(std::string(who) + ": expected cubical extent " + std::to_string(n) +
                     ", got " + extents_string(X.extents));
}

template <class Contract>
Tensor3 three_stages(const Matrix& m0, const Matrix& m1, const Matrix& m2, const Tensor3& X,
                     Contract&& contract, OpCounters* counters) {
  Tensor3 t = contract(m0, X, counters);
  t = contract(m1, t, counters);
  return contract(m2, t, counters);
}

}  // namespace detail

// Y(a,b,c) = sum_ijk B(a,i) B(b,j) B(c,k) X(i,j,k).
template <class Contract = ScalarContractor>
Tensor3 apply_basis_3d(const Basis1D& basis, const Tensor3& X, OpCounters* counters = nullptr,
                       Contract&& contract = {}) {
  detail::require_cube(X, basis.num_dofs_1d(), "apply_basis_3d");
  const Matrix& B = basis.values();
  return detail::three_stages(B, B, B, X, contract, counters);
}

// Adjoint of apply_basis_3d.
template <class Contract = ScalarContractor>
Tensor3 apply_basis_transpose_3d(const Basis1D& basis, const Tensor3& Y,
                                 OpCounters* counters = nullptr, Contract&& contract = {}) {
  detail::require_cube(Y, basis.num_quad_1d(), "apply_basis_transpose_3d");
  const Matrix& Bt = basis.values_transposed();
  return detail::three_stages(Bt, Bt, Bt, Y, contract, counters);
}

// Reference-space gradient at quadrature points; component r differentiates
// along logical axis r.
template <class Contract = ScalarContractor>
std::array<Tensor3, 3> apply_gradient_3d(const Basis1D& basis, const Tensor3& X,
                                         OpCounters* counters = nullptr, Contract&& contract = {}) {
  detail::require_cube(X, basis.num_dofs_1d(), "apply_gradient_3d");
  const Matrix& B = basis.values();
  const Matrix& G = basis.gradients();
  return {detail::three_stages(G, B, B, X, contract, counters),
          detail::three_stages(B, G, B, X, contract, counters),
          detail::three_stages(B, B, G, X, contract, counters)};
}

// Adjoint of apply_gradient_3d: sum_r (component r transposed).
template <class Contract = ScalarContractor>
Tensor3 apply_gradient_transpose_3d(const Basis1D& basis, const std::array<Tensor3, 3>& Y,
                                    OpCounters* counters = nullptr, Contract&& contract = {}) {
  const Matrix& Bt = basis.values_transposed();
  const Matrix& Gt = basis.gradients_transposed();
  for (const auto& y : Y) detail::require_cube(y, basis.num_quad_1d(), "apply_gradient_transpose_3d");
  Tensor3 out = detail::three_stages(Gt, Bt, Bt, Y[0], contract, counters);
  const Tensor3 t1 = detail::three_stages(Bt, Gt, Bt, Y[1], contract, counters);
  const Tensor3 t2 = detail::three_stages(Bt, Bt, Gt, Y[2], contract, counters);
  for (std::size_t n = 0; n < out.size(); ++n) out.data[n] += t1.data[n] + t2.data[n];
  count_flops(counters, 2ull * out.size());
  return out;
}

}  // namespace femma
