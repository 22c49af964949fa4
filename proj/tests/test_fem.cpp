#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <numeric>
#include <random>

#include "femma/fem/block_operator.hpp"
#include "oracles.hpp"

using namespace femma;
using namespace femma::fem;

namespace {

State random_state(const BlockOperator& op, std::mt19937_64& rng) {
  State x = op.zero_state();
  x.u = oracle::random_vector(x.u.size(), rng);
  x.p = oracle::random_vector(x.p.size(), rng);
  return x;
}

double rel(const State& a, const State& b) { return oracle::rel_diff(a.flatten(), b.flatten()); }

Eigen::MatrixXd to_eigen(const Matrix& M) {
  Eigen::MatrixXd E(M.rows, M.cols);
  for (int i = 0; i < M.rows; ++i)
    for (int j = 0; j < M.cols; ++j) E(i, j) = M(i, j);
  return E;
}

Coefficients varied_coefficients(const Mesh& m) {
  Coefficients c = Coefficients::uniform(m, {1.0, 1.0, 1.0});
  for (int e = 0; e < m.num_elements(); ++e) {
    c.element[e].rho = 1.0 + 0.1 * (e % 3);
    c.element[e].bulk_modulus = 2.0 - 0.05 * (e % 5);
    c.element[e].coupling = 0.5 + 0.25 * (e % 4);
  }
  return c;
}

struct Combo {
  Strategy strategy;
  Backend backend;
};

std::vector<Combo> all_combos() {
  std::vector<Combo> out;
  for (Strategy s : {Strategy::PA, Strategy::MF, Strategy::FusedPA, Strategy::FusedMF})
    for (Backend b : {Backend::Scalar, Backend::Mma}) out.push_back({s, b});
  return out;
}

OperatorOptions options(Combo c) {
  OperatorOptions o;
  o.strategy = c.strategy;
  o.backend = c.backend;
  return o;
}

}  // namespace

TEST(Mesh, CountsAndBoundaryTags) {
  const Mesh m = build_mesh(2, 3, 4, {2.0, 3.0, 4.0});
  EXPECT_EQ(m.num_elements(), 24);
  EXPECT_EQ(m.num_vertices(), 60);
  int surface = 0, bottom = 0, side = 0;
  for (const auto& f : m.boundary) {
    if (f.tag == BoundaryTag::Surface) {
      ++surface;
      EXPECT_EQ(f.local_face, 5);
    }
    if (f.tag == BoundaryTag::Bottom) {
      ++bottom;
      EXPECT_EQ(f.local_face, 4);
    }
    if (f.tag == BoundaryTag::Absorbing) ++side;
  }
  EXPECT_EQ(surface, 6);
  EXPECT_EQ(bottom, 6);
  EXPECT_EQ(side, 2 * 12 + 2 * 8);
  EXPECT_THROW(build_mesh(0, 1, 1), GeometryError);
  EXPECT_THROW(build_mesh(1, 1, 1, {1.0, -1.0, 1.0}), GeometryError);
}

TEST(Geometry, BoxJacobian) {
  const Mesh m = build_mesh(2, 1, 1, {2.0, 1.0, 1.0});
  const auto g = element_geometry(m, 1, gauss_legendre(3), 1.5);
  double vol = 0.0;
  for (std::size_t n = 0; n < g.weight_det.size(); ++n) {
    vol += g.weight_det[n];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        EXPECT_NEAR(g.jinvt[n][3 * r + c], r == c ? 2.0 : 0.0, 1e-14);
        EXPECT_NEAR(g.D[n][3 * r + c], r == c ? 1.5 * 2.0 * g.weight_det[n] : 0.0, 1e-14);
      }
  }
  EXPECT_NEAR(vol, 1.0, 1e-14);
  const auto rule = gauss_legendre(3);
  EXPECT_NEAR(g.weight_det[0], rule.weights[0] * rule.weights[0] * rule.weights[0] / 8.0, 1e-15);
}

TEST(Geometry, DIsLinearInCoupling) {
  Mesh m = build_mesh(2, 2, 2);
  distort_interior(m, 0.3);
  const auto rule = gauss_legendre(4);
  const auto g1 = element_geometry(m, 3, rule, 1.0), g3 = element_geometry(m, 3, rule, 3.0);
  for (std::size_t n = 0; n < g1.D.size(); ++n)
    for (int i = 0; i < 9; ++i) EXPECT_NEAR(g3.D[n][i], 3.0 * g1.D[n][i], 1e-13);
}

TEST(Geometry, DistortedVolumeIsPreserved) {
  Mesh m = build_mesh(3, 2, 2, {1.5, 1.0, 0.75});
  distort_interior(m, 0.4);
  const QuadData qd = setup_quad_data(m, gauss_legendre(5), Coefficients::uniform(m, {}));
  const double vol = std::accumulate(qd.weight_det.begin(), qd.weight_det.end(), 0.0);
  EXPECT_NEAR(vol, m.volume(), 1e-12);
}

TEST(Geometry, InvertedElementIsRejected) {
  Mesh m = build_mesh(2, 1, 1);
  std::swap(m.elements[1][0], m.elements[1][1]);
  try {
    setup_quad_data(m, gauss_legendre(3), Coefficients::uniform(m, {}));
    FAIL() << "expected GeometryError";
  } catch (const GeometryError& e) {
    EXPECT_NE(std::string(e.what()).find("element 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(BlockOperator(m, Coefficients::uniform(m, {})), GeometryError);
}

TEST(Restriction, MultiplicityAndScatterOfGather) {
  const Mesh m = build_mesh(2, 2, 2);
  const H1Restriction R(m, 2);
  EXPECT_EQ(R.num_global(), 125);
  const auto& mult = R.multiplicity();
  // Lattice point (i, j, k) on the 5^3 grid is shared by 2^(number of coordinates equal to 2).
  for (int k = 0; k < 5; ++k)
    for (int j = 0; j < 5; ++j)
      for (int i = 0; i < 5; ++i) {
        const int shared = (i == 2) + (j == 2) + (k == 2);
        EXPECT_EQ(mult[i + 5 * (j + 5 * k)], 1 << shared);
      }
  std::vector<double> ones(125, 1.0), acc(125, 0.0);
  for (int e = 0; e < m.num_elements(); ++e) R.scatter_add(e, R.gather(e, ones), acc);
  EXPECT_EQ(acc, mult);
  for (int e = 0; e < 8; ++e) EXPECT_EQ(R.ready_after(e), 7);
  const H1Restriction line(build_mesh(3, 1, 1), 3);
  EXPECT_EQ(line.ready_after(0), 1);
  EXPECT_EQ(line.ready_after(1), 2);
  EXPECT_EQ(line.ready_after(2), 2);
}

TEST(Restriction, MatchesLatticeOracle) {
  const Mesh m = build_mesh(3, 2, 2);
  const H1Restriction R(m, 4);
  for (int e = 0; e < m.num_elements(); ++e) {
    const auto dofs = R.element_dofs(e);
    for (int k = 0, l = 0; k < 5; ++k)
      for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i, ++l) EXPECT_EQ(dofs[l], oracle::lattice_index(m, 4, e, i, j, k));
  }
}

TEST(Operator, LumpedMassTotals) {
  Mesh m = build_mesh(2, 2, 2, {2.0, 1.0, 1.0});
  distort_interior(m, 0.2);
  const Material mat{1.3, 0.7, 1.0};
  const BlockOperator op(m, Coefficients::uniform(m, mat, 9.81));
  const double su = std::accumulate(op.lumped_u().begin(), op.lumped_u().end(), 0.0);
  const double sp = std::accumulate(op.lumped_p().begin(), op.lumped_p().end(), 0.0);
  EXPECT_NEAR(su, 3.0 * mat.rho * m.volume(), 1e-12);
  EXPECT_NEAR(sp, m.volume() / mat.bulk_modulus, 1e-12);

  OperatorOptions o;
  o.surface_gravity = true;
  const BlockOperator og(m, Coefficients::uniform(m, mat, 9.81), o);
  const double sg = std::accumulate(og.lumped_p().begin(), og.lumped_p().end(), 0.0);
  EXPECT_NEAR(sg - sp, 2.0 * 1.0 / (mat.rho * 9.81), 1e-12);

  State one = op.zero_state();
  std::fill(one.p.begin(), one.p.end(), 1.0);
  EXPECT_NEAR(op.energy(one), 0.5 * m.volume() / mat.bulk_modulus, 1e-12);
}

TEST(Operator, ConstantPressureHasNoGradient) {
  Mesh m = build_mesh(2, 2, 2);
  distort_interior(m, 0.3);
  for (const Combo& c : all_combos()) {
    const BlockOperator op(m, Coefficients::uniform(m, {}), options(c));
    State x = op.zero_state();
    std::fill(x.p.begin(), x.p.end(), 2.5);
    EXPECT_LE(op.apply_block(x).max_abs(), 1e-12);
  }
}

TEST(Operator, LinearPressureGivesL2Weights) {
  // p = x: (K_p p)_0,i = integral psi_i = product of Gauss weights times det J.
  const Mesh m = build_mesh(2, 1, 1, {2.0, 1.0, 1.0});
  const BlockOperator op(m, Coefficients::uniform(m, {}));
  const State x = op.interpolate(nullptr, [](const Vec3& v) { return v[0]; });
  const State r = op.apply_block(x);
  const auto w = gauss_legendre(4).weights;
  const int nu = 64;
  for (int e = 0; e < 2; ++e)
    for (int k = 0, l = 0; k < 4; ++k)
      for (int j = 0; j < 4; ++j)
        for (int i = 0; i < 4; ++i, ++l) {
          const std::size_t base = static_cast<std::size_t>(e) * 3 * nu;
          EXPECT_NEAR(r.u[base + l], w[i] * w[j] * w[k] / 8.0, 1e-14);
          EXPECT_NEAR(r.u[base + nu + l], 0.0, 1e-14);
          EXPECT_NEAR(r.u[base + 2 * nu + l], 0.0, 1e-14);
        }
}

TEST(Operator, StrategiesAndBackendsAgree) {
  Mesh m = build_mesh(2, 2, 2, {1.0, 1.5, 0.5});
  distort_interior(m, 0.3);
  const Coefficients coeff = varied_coefficients(m);
  std::mt19937_64 rng(8);
  const BlockOperator ref(m, coeff);
  const State x = random_state(ref, rng);
  const State yb = ref.apply_block(x), yn = ref.apply_fused_normal(x);
  for (const Combo& c : all_combos()) {
    const BlockOperator op(m, coeff, options(c));
    EXPECT_LE(rel(op.apply_block(x), yb), 1e-13) << strategy_name(c.strategy) << "/" << backend_name(c.backend);
    EXPECT_LE(rel(op.apply_fused_normal(x), yn), 1e-13) << strategy_name(c.strategy) << "/" << backend_name(c.backend);
  }
}

TEST(Operator, MatchesElementMatrixOracle) {
  const Mesh m = build_mesh(3, 3, 3, {1.5, 1.0, 0.75});
  Coefficients coeff = varied_coefficients(m);
  std::vector<double> coupling;
  for (const auto& mat : coeff.element) coupling.push_back(mat.coupling);
  std::mt19937_64 rng(12);
  const BlockOperator probe(m, coeff);
  const State x = random_state(probe, rng);
  const State ref = oracle::reference_apply(m, coupling, 4, 3, 5, x);
  for (const Combo& c : all_combos()) {
    const BlockOperator op(m, coeff, options(c));
    EXPECT_LE(rel(op.apply_block(x), ref), 1e-12) << strategy_name(c.strategy) << "/" << backend_name(c.backend);
  }
}

TEST(Operator, DenseProbeMatchesOracleAndIsSkew) {
  const Mesh m = build_mesh(1, 1, 2, {1.0, 1.0, 2.0});
  const Coefficients coeff = varied_coefficients(m);
  const BlockOperator op(m, coeff);
  const Matrix A = dense_probe(op);
  std::vector<double> coupling;
  for (const auto& mat : coeff.element) coupling.push_back(mat.coupling);
  State e = op.zero_state();
  std::vector<double> unit(e.size(), 0.0);
  double amax = 0.0, dev = 0.0, skew = 0.0;
  for (int j = 0; j < A.cols; ++j) {
    unit[j] = 1.0;
    e.assign_flat(unit);
    unit[j] = 0.0;
    const auto col = oracle::reference_apply(m, coupling, 4, 3, 5, e).flatten();
    for (int i = 0; i < A.rows; ++i) {
      amax = std::max(amax, std::abs(A(i, j)));
      dev = std::max(dev, std::abs(A(i, j) - col[i]));
      skew = std::max(skew, std::abs(A(i, j) + A(j, i)));
    }
  }
  EXPECT_LE(dev / amax, 1e-12);
  EXPECT_LE(skew / amax, 1e-13);
}

TEST(Operator, FusedNormalIsMinusASquared) {
  Mesh m = build_mesh(2, 2, 2);
  distort_interior(m, 0.25);
  const Coefficients coeff = varied_coefficients(m);
  std::mt19937_64 rng(21);
  for (const Combo& c : all_combos()) {
    const BlockOperator op(m, coeff, options(c));
    const State x = random_state(op, rng);
    State expect = op.apply_block(op.apply_block(x));
    for (double& v : expect.u) v = -v;
    for (double& v : expect.p) v = -v;
    EXPECT_LE(rel(op.apply_fused_normal(x), expect), 1e-13);
  }
}

TEST(Operator, FusedNormalIsSymmetricPositiveSemidefinite) {
  Mesh m = build_mesh(2, 2, 2);
  distort_interior(m, 0.25);
  OperatorOptions o;
  o.strategy = Strategy::FusedPA;
  const BlockOperator op(m, varied_coefficients(m), o);
  const Eigen::MatrixXd K = to_eigen(dense_probe(op, ProbeTarget::FusedNormal));
  const double scale = K.cwiseAbs().maxCoeff();
  EXPECT_LE((K - K.transpose()).cwiseAbs().maxCoeff() / scale, 1e-12);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (K + K.transpose()), Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * scale);
}

TEST(Operator, AbsorbingTermIsSymmetricPositiveOnSides) {
  const Mesh m = build_mesh(1, 1, 1);
  OperatorOptions o;
  o.absorbing = true;
  const BlockOperator op(m, Coefficients::uniform(m, {2.0, 8.0, 1.0}), o);
  const Eigen::MatrixXd A = to_eigen(dense_probe(op));
  const Eigen::MatrixXd S = A + A.transpose();
  EXPECT_LE((S - S.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  // 1^T S 1 over p = 2 * (side area) / Z with Z = rho c = sqrt(rho K) = 4.
  State one = op.zero_state();
  std::fill(one.p.begin(), one.p.end(), 1.0);
  EXPECT_NEAR(one.dot(op.apply_block(one)), 4.0 / 4.0, 1e-13);
}

TEST(Operator, CountersReflectStrategy) {
  const Mesh m = build_mesh(2, 2, 2);
  const Coefficients coeff = Coefficients::uniform(m, {});
  std::mt19937_64 rng(4);
  std::map<std::string, OpCounters> seen;
  for (const Combo& c : all_combos()) {
    const BlockOperator op(m, coeff, options(c));
    const State x = random_state(op, rng);
    op.counters().reset();
    op.apply_block(x);
    op.apply_fused_normal(x);
    seen[std::string(strategy_name(c.strategy)) + backend_name(c.backend)] = op.counters();
  }
  const std::uint64_t per_element = 9ull * 125;
  EXPECT_EQ(seen["PAscalar"].d_reads, 2 * 2 * 8 * per_element);
  EXPECT_EQ(seen["FusedPAscalar"].d_reads, 2 * 8 * per_element);
  EXPECT_EQ(seen["MFscalar"].d_reads, 0u);
  EXPECT_EQ(seen["MFscalar"].geometry_evals, 2u * 2 * 8);
  EXPECT_EQ(seen["FusedMFscalar"].geometry_evals, 2u * 8);
  EXPECT_EQ(seen["PAscalar"].mma_instructions, 0u);
  EXPECT_GT(seen["PAmma"].mma_instructions, 0u);
  EXPECT_EQ(seen["PAscalar"].flops, seen["FusedPAmma"].flops);
  EXPECT_EQ(seen["PAscalar"].apply_calls, 1u);
}

TEST(Operator, RejectsMismatchedState) {
  const Mesh m = build_mesh(1, 1, 1);
  const BlockOperator op(m, Coefficients::uniform(m, {}));
  State x = op.zero_state();
  x.p.pop_back();
  EXPECT_THROW(op.apply_block(x), ShapeError);
  EXPECT_THROW(op.apply_fused_normal(x), ShapeError);
  EXPECT_THROW(op.apply_mass_inverse(x), ShapeError);
}

TEST(Operator, BottomForcingAndSurfaceElevation) {
  const Mesh m = build_mesh(2, 1, 1, {3.0, 2.0, 1.0});
  OperatorOptions o;
  o.bottom_velocity = [](const Vec3&, double t) { return 2.0 * t; };
  const Material mat{1.5, 1.0, 1.0};
  const BlockOperator op(m, Coefficients::uniform(m, mat, 10.0), o);
  const State f = op.forcing(0.5);
  EXPECT_GT(f.max_abs(), 0.0);
  EXPECT_NEAR(std::accumulate(f.p.begin(), f.p.end(), 0.0), 6.0, 1e-12);
  for (double v : f.u) EXPECT_EQ(v, 0.0);

  State x = op.zero_state();
  std::fill(x.p.begin(), x.p.end(), 30.0);
  const auto eta = op.surface_elevation(x);
  EXPECT_EQ(eta.size(), op.surface_dofs().size());
  EXPECT_EQ(eta.size(), 9u * 5u);
  for (double v : eta) EXPECT_NEAR(v, 2.0, 1e-15);
}

TEST(Operator, ZeroCouplingGivesZeroOperator) {
  const Mesh m = build_mesh(2, 1, 1);
  const BlockOperator op(m, Coefficients::uniform(m, {1.0, 1.0, 0.0}));
  std::mt19937_64 rng(2);
  EXPECT_EQ(op.apply_block(random_state(op, rng)).max_abs(), 0.0);
}
