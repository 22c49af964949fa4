#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "femma/errors.hpp"
#include "femma/fem/mesh.hpp"
#include "femma/quadrature.hpp"

namespace femma::fem {

// Piecewise-constant material data of one element. `coupling` scales the
// gradient/divergence blocks of the stiffness operator (1 for the physical
// system, 0 switches the stiffness off).
struct Material {
  double rho = 1.0;
  double bulk_modulus = 1.0;
  double coupling = 1.0;

  double sound_speed() const { return std::sqrt(bulk_modulus / rho); }
  double impedance() const { return rho * sound_speed(); }

  static Material seawater() { return {1025.0, 1025.0 * 1500.0 * 1500.0, 1.0}; }
};

struct Coefficients {
  std::vector<Material> element;
  double gravity = 9.81;

  static Coefficients uniform(const Mesh& mesh, Material m, double gravity = 9.81) {
    return {std::vector<Material>(static_cast<std::size_t>(mesh.num_elements()), m), gravity};
  }
};

using Mat3 = std::array<double, 9>;  // row-major

namespace detail {

// Trilinear shape function gradients at reference point xi in [-1, 1]^3.
inline void trilinear_jacobian(const std::array<Vec3, 8>& x, const Vec3& xi, Mat3& J) {
  J.fill(0.0);
  for (int c = 0; c < 8; ++c) {
    const double s[3] = {(c & 1) ? 1.0 : -1.0, (c & 2) ? 1.0 : -1.0, (c & 4) ? 1.0 : -1.0};
    const double f[3] = {0.5 * (1.0 + s[0] * xi[0]), 0.5 * (1.0 + s[1] * xi[1]), 0.5 * (1.0 + s[2] * xi[2])};
    const double dN[3] = {0.5 * s[0] * f[1] * f[2], 0.5 * s[1] * f[0] * f[2], 0.5 * s[2] * f[0] * f[1]};
    for (int d = 0; d < 3; ++d)
      for (int r = 0; r < 3; ++r) J[3 * d + r] += x[c][d] * dN[r];
  }
}

inline Vec3 trilinear_point(const std::array<Vec3, 8>& x, const Vec3& xi) {
  Vec3 p{0.0, 0.0, 0.0};
  for (int c = 0; c < 8; ++c) {
    const double N = 0.125 * (1.0 + ((c & 1) ? xi[0] : -xi[0])) * (1.0 + ((c & 2) ? xi[1] : -xi[1])) *
                     (1.0 + ((c & 4) ? xi[2] : -xi[2]));
    for (int d = 0; d < 3; ++d) p[d] += N * x[c][d];
  }
  return p;
}

inline double det3(const Mat3& J) {
  return J[0] * (J[4] * J[8] - J[5] * J[7]) - J[1] * (J[3] * J[8] - J[5] * J[6]) +
         J[2] * (J[3] * J[7] - J[4] * J[6]);
}

// Inverse transpose: (J^{-T})_{cr} = (J^{-1})_{rc}.
inline Mat3 inverse_transpose(const Mat3& J, double det) {
  Mat3 cof{};
  cof[0] = J[4] * J[8] - J[5] * J[7];
  cof[1] = -(J[3] * J[8] - J[5] * J[6]);
  cof[2] = J[3] * J[7] - J[4] * J[6];
  cof[3] = -(J[1] * J[8] - J[2] * J[7]);
  cof[4] = J[0] * J[8] - J[2] * J[6];
  cof[5] = -(J[0] * J[7] - J[1] * J[6]);
  cof[6] = J[1] * J[5] - J[2] * J[4];
  cof[7] = -(J[0] * J[5] - J[2] * J[3]);
  cof[8] = J[0] * J[4] - J[1] * J[3];
  for (double& v : cof) v /= det;  // cofactor matrix / det = J^{-T}
  return cof;
}

}  // namespace detail

// Geometric factors of one element at the tensor quadrature points,
// point n = a + q (b + q c).
struct ElementGeometry {
  std::vector<Mat3> jinvt;
  std::vector<double> weight_det;
  std::vector<Mat3> D;  // coupling * weight * det J * J^{-T}
};

inline ElementGeometry element_geometry(const Mesh& mesh, int e, const PointSet1D& rule, double coupling) {
  const int q = static_cast<int>(rule.points.size());
  const auto x = mesh.element_coords(e);
  ElementGeometry g;
  g.jinvt.resize(static_cast<std::size_t>(q) * q * q);
  g.weight_det.resize(g.jinvt.size());
  g.D.resize(g.jinvt.size());
  Mat3 J{};
  std::size_t n = 0;
  for (int c = 0; c < q; ++c)
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a, ++n) {
        detail::trilinear_jacobian(x, {rule.points[a], rule.points[b], rule.points[c]}, J);
        const double det = detail::det3(J);
        if (!(det > 0.0))
          throw GeometryError("element " + std::to_string(e) + " has non-positive Jacobian determinant " +
                              std::to_string(det) + " at quadrature point " + std::to_string(n));
        g.jinvt[n] = detail::inverse_transpose(J, det);
        g.weight_det[n] = rule.weights[a] * rule.weights[b] * rule.weights[c] * det;
        for (int i = 0; i < 9; ++i) g.D[n][i] = coupling * g.weight_det[n] * g.jinvt[n][i];
      }
  return g;
}

// Stored quadrature-point data for partial assembly.
struct QuadData {
  int num_quad_1d = 0;
  int points_per_element = 0;
  std::vector<double> jinvt;       // [e][n][9]
  std::vector<double> weight_det;  // [e][n]
  std::vector<double> D;           // [e][n][9]
  std::vector<double> rho;         // per element
  std::vector<double> inv_bulk;    // per element

  const double* D_element(int e) const {
    return D.data() + static_cast<std::size_t>(e) * points_per_element * 9;
  }
  const double* weight_det_element(int e) const {
    return weight_det.data() + static_cast<std::size_t>(e) * points_per_element;
  }
};

inline QuadData setup_quad_data(const Mesh& mesh, const PointSet1D& rule, const Coefficients& coeff) {
  if (coeff.element.size() != static_cast<std::size_t>(mesh.num_elements()))
    throw ShapeError("setup_quad_data: " + std::to_string(coeff.element.size()) +
                     " materials for " + std::to_string(mesh.num_elements()) + " elements");
  QuadData qd;
  qd.num_quad_1d = static_cast<int>(rule.points.size());
  qd.points_per_element = qd.num_quad_1d * qd.num_quad_1d * qd.num_quad_1d;
  const std::size_t np = static_cast<std::size_t>(qd.points_per_element) * mesh.num_elements();
  qd.jinvt.resize(np * 9);
  qd.D.resize(np * 9);
  qd.weight_det.resize(np);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Material& mat = coeff.element[e];
    if (!(mat.rho > 0.0) || !(mat.bulk_modulus > 0.0))
      throw GeometryError("element " + std::to_string(e) + ": density and bulk modulus must be positive");
    qd.rho.push_back(mat.rho);
    qd.inv_bulk.push_back(1.0 / mat.bulk_modulus);
    const ElementGeometry g = element_geometry(mesh, e, rule, mat.coupling);
    const std::size_t base = static_cast<std::size_t>(e) * qd.points_per_element;
    for (int n = 0; n < qd.points_per_element; ++n) {
      qd.weight_det[base + n] = g.weight_det[n];
      for (int i = 0; i < 9; ++i) {
        qd.jinvt[(base + n) * 9 + i] = g.jinvt[n][i];
        qd.D[(base + n) * 9 + i] = g.D[n][i];
      }
    }
  }
  return qd;
}

// Quadrature on one boundary face: q x q points over the two tangential
// axes (lower axis fastest).
struct FaceQuad {
  BoundaryFace face;
  std::array<int, 2> tangential{0, 1};
  std::vector<double> weight_area;  // w_a w_b |t1 x t2|
  std::vector<Vec3> points;         // physical coordinates
};

inline FaceQuad face_quadrature(const Mesh& mesh, const BoundaryFace& f, const PointSet1D& rule) {
  const int q = static_cast<int>(rule.points.size());
  const int nrm = f.normal_axis();
  FaceQuad fq;
  fq.face = f;
  fq.tangential = nrm == 0 ? std::array<int, 2>{1, 2} : nrm == 1 ? std::array<int, 2>{0, 2}
                                                                   : std::array<int, 2>{0, 1};
  const auto x = mesh.element_coords(f.element);
  Mat3 J{};
  for (int b = 0; b < q; ++b)
    for (int a = 0; a < q; ++a) {
      Vec3 xi{};
      xi[nrm] = f.upper() ? 1.0 : -1.0;
      xi[fq.tangential[0]] = rule.points[a];
      xi[fq.tangential[1]] = rule.points[b];
      detail::trilinear_jacobian(x, xi, J);
      const int t1 = fq.tangential[0], t2 = fq.tangential[1];
      const Vec3 u{J[t1], J[3 + t1], J[6 + t1]};
      const Vec3 v{J[t2], J[3 + t2], J[6 + t2]};
      const Vec3 cr{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
      const double area = std::sqrt(cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]);
      fq.weight_area.push_back(rule.weights[a] * rule.weights[b] * area);
      fq.points.push_back(detail::trilinear_point(x, xi));
    }
  return fq;
}

}  // namespace femma::fem
