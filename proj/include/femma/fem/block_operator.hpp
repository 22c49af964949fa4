#pragma once

// Acoustic-gravity block operator on a structured hex mesh:
//
//   A [u p] = [ (grad p, tau)                          ]
//             [ -(u, grad v) + <Z^-1 p, v>_absorbing   ]
//
// with u in (L2)^3 (Gauss-Legendre nodal, one block per element) and p in
// continuous H1 (GLL nodal). Element work is sum-factorized; contractions run
// on the scalar backend or on the emulated warp MMA path.

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "femma/bank_model.hpp"
#include "femma/core_tensor.hpp"
#include "femma/cost_model.hpp"
#include "femma/counters.hpp"
#include "femma/errors.hpp"
#include "femma/fem/mesh.hpp"
#include "femma/fem/quad_data.hpp"
#include "femma/fem/restriction.hpp"
#include "femma/warp_mma.hpp"

namespace femma::fem {

struct State {
  std::vector<double> u;  // [element][component][local dof]
  std::vector<double> p;  // global H1 dofs

  std::size_t size() const { return u.size() + p.size(); }

  State& axpy(double a, const State& x) {
    check_same(x);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += a * x.u[i];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += a * x.p[i];
    return *this;
  }

  double dot(const State& x) const {
    check_same(x);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * x.u[i];
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * x.p[i];
    return s;
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    for (double v : p) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const {
    return std::all_of(u.begin(), u.end(), [](double v) { return std::isfinite(v); }) &&
           std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
  }

  std::vector<double> flatten() const {
    std::vector<double> v(u);
    v.insert(v.end(), p.begin(), p.end());
    return v;
  }

  void assign_flat(std::span<const double> v) {
    if (v.size() != size())
      throw ShapeError("State: flat vector of length " + std::to_string(v.size()) + ", expected " +
                       std::to_string(size()));
    std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(u.size()), u.begin());
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(u.size()), v.end(), p.begin());
  }

  void check_same(const State& x) const {
    if (x.u.size() != u.size() || x.p.size() != p.size())
      throw ShapeError("State: sizes (" + std::to_string(x.u.size()) + "," + std::to_string(x.p.size()) +
                       ") vs (" + std::to_string(u.size()) + "," + std::to_string(p.size()) + ")");
  }
};

enum class Backend { Scalar, Mma };

inline const char* backend_name(Backend b) { return b == Backend::Scalar ? "scalar" : "mma"; }

inline Backend parse_backend(const std::string& s) {
  if (s == "scalar") return Backend::Scalar;
  if (s == "mma") return Backend::Mma;
  throw ParseError("unknown backend '" + s + "' (expected scalar or mma)");
}

// Seafloor inward normal velocity d_t b at (x, t).
using BottomVelocity = std::function<double(const Vec3&, double)>;
// Adds a right-hand side [f g] at time t.
using ExtraForcing = std::function<void(double, State&)>;

struct OperatorOptions {
  int order_p = 4;  // H1 pressure
  int order_u = 3;  // L2 velocity
  int num_quad = 5;
  Strategy strategy = Strategy::PA;
  Backend backend = Backend::Scalar;
  bool absorbing = false;        // <Z^-1 p, v> on absorbing faces
  bool surface_gravity = false;  // <(rho g)^-1 p, v> on the surface, lumped into M_p
  BottomVelocity bottom_velocity;
  ExtraForcing extra_forcing;
  std::uint64_t mapping_search_budget = 2'000'000;
};

// GEMM shapes of every contraction stage between d-point and q-point 1D sets.
inline std::vector<GemmShape> contraction_shapes(int d, int q) {
  return {{d * d, q, d}, {d * q, q, d}, {q * q, q, d}, {q * q, d, q}, {q * d, d, q}, {d * d, d, q}};
}

// Conflict-free mapping sets are searched once per (d_p, d_u, q) and shared.
inline const MappingSet& operator_mapping_set(int dofs_p, int dofs_u, int num_quad,
                                              std::uint64_t budget = 2'000'000) {
  static std::mutex mu;
  static std::map<std::array<int, 3>, MappingSet> cache;
  std::lock_guard lock(mu);
  const std::array<int, 3> key{dofs_p, dofs_u, num_quad};
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<GemmShape> shapes;
  for (int d : {dofs_p, dofs_u})
    for (const auto& s : contraction_shapes(d, num_quad))
      if (std::find(shapes.begin(), shapes.end(), s) == shapes.end()) shapes.push_back(s);
  return cache.emplace(key, build_mapping_set(shapes, BankConfig{}, budget)).first->second;
}

class BlockOperator {
 public:
  BlockOperator(const Mesh& mesh, const Coefficients& coeff, OperatorOptions opt = {})
      : mesh_(mesh), coeff_(coeff), opt_(std::move(opt)) {
    if (opt_.order_p < 1 || opt_.order_u < 0 || opt_.num_quad < 1)
      throw ShapeError("BlockOperator: invalid orders or quadrature size");
    rule_ = gauss_legendre(opt_.num_quad);
    h1_ = Basis1D::gll_at_gauss(opt_.order_p, opt_.num_quad);
    l2_ = Basis1D::nodal(gauss_legendre(opt_.order_u + 1).points, rule_.points);
    restriction_ = H1Restriction(mesh_, opt_.order_p);
    nq_ = opt_.num_quad * opt_.num_quad * opt_.num_quad;
    nu_ = (opt_.order_u + 1) * (opt_.order_u + 1) * (opt_.order_u + 1);
    qd_ = setup_quad_data(mesh_, rule_, coeff_);  // validates geometry for every strategy
    if (!stores_quad_data()) {
      qd_.D.clear();
      qd_.D.shrink_to_fit();
    }
    if (opt_.backend == Backend::Mma)
      mappings_ = &operator_mapping_set(h1_.num_dofs_1d(), l2_.num_dofs_1d(), opt_.num_quad,
                                        opt_.mapping_search_budget);
    for (const auto& f : mesh_.boundary) faces_.push_back(face_quadrature(mesh_, f, rule_));
    build_lumped_mass();
  }

  const Mesh& mesh() const { return mesh_; }
  const OperatorOptions& options() const { return opt_; }
  const Coefficients& coefficients() const { return coeff_; }
  const H1Restriction& restriction() const { return restriction_; }
  const QuadData& quad_data() const { return qd_; }
  const Basis1D& h1_basis() const { return h1_; }
  const Basis1D& l2_basis() const { return l2_; }
  const std::vector<double>& lumped_u() const { return mass_u_; }
  const std::vector<double>& lumped_p() const { return mass_p_; }
  OpCounters& counters() const { return counters_; }

  void set_strategy(Strategy s) {
    if (stores_quad_data(s) && !stores_quad_data()) qd_ = setup_quad_data(mesh_, rule_, coeff_);
    opt_.strategy = s;
  }

  State zero_state() const {
    return {std::vector<double>(static_cast<std::size_t>(3) * nu_ * mesh_.num_elements(), 0.0),
            std::vector<double>(static_cast<std::size_t>(restriction_.num_global()), 0.0)};
  }

  // A x.
  State apply_block(const State& x) const {
    check_state(x);
    ++counters_.apply_calls;
    State r = zero_state();
    const int E = mesh_.num_elements();
    if (fused()) {
      std::vector<double> D;
      for (int e = 0; e < E; ++e) {
        load_D(e, D);
        put_u(r, e, kp_element(restriction_.gather(e, x.p, &counters_), D));
        restriction_.scatter_add(e, ku_element(get_u(x, e), D), r.p, -1.0, &counters_);
      }
    } else {
      std::vector<double> D;
      for (int e = 0; e < E; ++e) {
        load_D(e, D);
        put_u(r, e, kp_element(restriction_.gather(e, x.p, &counters_), D));
      }
      for (int e = 0; e < E; ++e) {
        load_D(e, D);
        restriction_.scatter_add(e, ku_element(get_u(x, e), D), r.p, -1.0, &counters_);
      }
    }
    if (opt_.absorbing) apply_absorbing(x.p, r.p);
    return r;
  }

  // -A^2 x restricted to the coupling blocks: u -> K_p G G^T K_u u (K_fused)
  // and p -> K_u K_p p. Both halves are symmetric positive semi-definite.
  State apply_fused_normal(const State& x) const {
    check_state(x);
    State r = zero_state();
    const int E = mesh_.num_elements();
    std::vector<double> w(static_cast<std::size_t>(restriction_.num_global()), 0.0);
    if (fused()) {
      // Single pass: element e's K_p half runs once every element sharing a
      // DOF with it has scattered into w; its D stays in the window until then.
      std::deque<std::pair<int, std::vector<double>>> window;
      for (int e = 0; e < E; ++e) {
        std::vector<double> D;
        load_D(e, D);
        restriction_.scatter_add(e, ku_element(get_u(x, e), D), w, 1.0, &counters_);
        const auto tau = kp_element(restriction_.gather(e, x.p, &counters_), D);
        restriction_.scatter_add(e, ku_element(tau, D), r.p, 1.0, &counters_);
        window.emplace_back(e, std::move(D));
        while (!window.empty() && restriction_.ready_after(window.front().first) <= e) {
          const auto& [f, Df] = window.front();
          put_u(r, f, kp_element(restriction_.gather(f, w, &counters_), Df));
          window.pop_front();
        }
      }
    } else {
      std::vector<double> D;
      std::vector<std::array<Tensor3, 3>> tau(static_cast<std::size_t>(E));
      for (int e = 0; e < E; ++e) {
        load_D(e, D);
        restriction_.scatter_add(e, ku_element(get_u(x, e), D), w, 1.0, &counters_);
        tau[e] = kp_element(restriction_.gather(e, x.p, &counters_), D);
      }
      for (int e = 0; e < E; ++e) {
        load_D(e, D);
        put_u(r, e, kp_element(restriction_.gather(e, w, &counters_), D));
        restriction_.scatter_add(e, ku_element(tau[e], D), r.p, 1.0, &counters_);
      }
    }
    return r;
  }

  State apply_mass_inverse(const State& r) const {
    check_state(r);
    State out = r;
    for (std::size_t i = 0; i < out.u.size(); ++i) out.u[i] /= mass_u_[i];
    for (std::size_t i = 0; i < out.p.size(); ++i) out.p[i] /= mass_p_[i];
    return out;
  }

  State apply_lumped_mass(const State& x) const {
    check_state(x);
    State out = x;
    for (std::size_t i = 0; i < out.u.size(); ++i) out.u[i] *= mass_u_[i];
    for (std::size_t i = 0; i < out.p.size(); ++i) out.p[i] *= mass_p_[i];
    return out;
  }

  // Right-hand side [f g] at time t; g = <d_t b, v> on the bottom.
  State forcing(double t) const {
    State f = zero_state();
    if (opt_.bottom_velocity) {
      for (const auto& fq : faces_) {
        if (fq.face.tag != BoundaryTag::Bottom) continue;
        std::vector<double> vals(fq.weight_area.size());
        for (std::size_t n = 0; n < vals.size(); ++n)
          vals[n] = fq.weight_area[n] * opt_.bottom_velocity(fq.points[n], t);
        face_test(fq, vals, f.p);
      }
    }
    if (opt_.extra_forcing) opt_.extra_forcing(t, f);
    return f;
  }

  // d/dt x = M^-1 (-A x + F(t)).
  State rate(double t, const State& x) const {
    State r = apply_block(x);
    const State f = forcing(t);
    for (std::size_t i = 0; i < r.u.size(); ++i) r.u[i] = f.u[i] - r.u[i];
    for (std::size_t i = 0; i < r.p.size(); ++i) r.p[i] = f.p[i] - r.p[i];
    return apply_mass_inverse(r);
  }

  // Global DOFs on the sea surface and the surface height eta = p / (rho g).
  std::vector<int> surface_dofs() const {
    std::vector<int> dofs;
    for (const auto& f : mesh_.boundary)
      if (f.tag == BoundaryTag::Surface)
        for (int g : face_dofs(f)) dofs.push_back(g);
    std::sort(dofs.begin(), dofs.end());
    dofs.erase(std::unique(dofs.begin(), dofs.end()), dofs.end());
    return dofs;
  }

  std::vector<double> surface_elevation(const State& x) const {
    std::vector<double> eta(static_cast<std::size_t>(restriction_.num_global()), 0.0);
    for (const auto& f : mesh_.boundary)
      if (f.tag == BoundaryTag::Surface)
        for (int g : face_dofs(f)) eta[g] = x.p[g] / (coeff_.element[f.element].rho * coeff_.gravity);
    std::vector<double> out;
    for (int g : surface_dofs()) out.push_back(eta[g]);
    return out;
  }

  // Lumped-mass energy 1/2 (u^T M_u u + p^T M_p p).
  double energy(const State& x) const { return 0.5 * x.dot(apply_lumped_mass(x)); }

  // Interpolates nodal values into a state: u_c(x) and p(x) at the nodes.
  State interpolate(const std::function<Vec3(const Vec3&)>& u, const std::function<double(const Vec3&)>& p) const {
    State s = zero_state();
    const auto l2nodes = l2_.nodes();
    const auto h1nodes = h1_.nodes();
    const int du = l2_.num_dofs_1d(), dp = h1_.num_dofs_1d();
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto X = mesh_.element_coords(e);
      if (u) {
        int l = 0;
        for (int k = 0; k < du; ++k)
          for (int j = 0; j < du; ++j)
            for (int i = 0; i < du; ++i, ++l) {
              const Vec3 v = u(detail::trilinear_point(X, {l2nodes[i], l2nodes[j], l2nodes[k]}));
              for (int c = 0; c < 3; ++c) s.u[(static_cast<std::size_t>(e) * 3 + c) * nu_ + l] = v[c];
            }
      }
      if (p) {
        const auto dofs = restriction_.element_dofs(e);
        int l = 0;
        for (int k = 0; k < dp; ++k)
          for (int j = 0; j < dp; ++j)
            for (int i = 0; i < dp; ++i, ++l)
              s.p[dofs[l]] = p(detail::trilinear_point(X, {h1nodes[i], h1nodes[j], h1nodes[k]}));
      }
    }
    return s;
  }

  static bool stores_quad_data(Strategy s) { return s == Strategy::PA || s == Strategy::FusedPA; }
  bool stores_quad_data() const { return stores_quad_data(opt_.strategy); }
  bool fused() const { return opt_.strategy == Strategy::FusedPA || opt_.strategy == Strategy::FusedMF; }

 private:
  struct Dispatch {
    const BlockOperator* op;
    Tensor3 operator()(const Matrix& B, const Tensor3& X, OpCounters* c) const {
      if (op->opt_.backend == Backend::Mma) return MmaContractor{op->mappings_}(B, X, c);
      return contract_cyclic(B, X, c);
    }
  };

  void check_state(const State& x) const {
    const std::size_t nu = static_cast<std::size_t>(3) * nu_ * mesh_.num_elements();
    const std::size_t np = static_cast<std::size_t>(restriction_.num_global());
    if (x.u.size() != nu || x.p.size() != np)
      throw ShapeError("BlockOperator: state has (u, p) lengths (" + std::to_string(x.u.size()) + ", " +
                       std::to_string(x.p.size()) + "), expected (" + std::to_string(nu) + ", " +
                       std::to_string(np) + ")");
  }

  // Element D factors: 9 per quadrature point, D_cr at 3c + r.
  void load_D(int e, std::vector<double>& D) const {
    const std::size_t n = static_cast<std::size_t>(nq_) * 9;
    if (stores_quad_data()) {
      const double* src = qd_.D_element(e);
      D.assign(src, src + n);
      counters_.d_reads += n;
    } else {
      const auto g = element_geometry(mesh_, e, rule_, coeff_.element[e].coupling);
      D.resize(n);
      for (int q = 0; q < nq_; ++q)
        for (int i = 0; i < 9; ++i) D[static_cast<std::size_t>(q) * 9 + i] = g.D[q][i];
      ++counters_.geometry_evals;
    }
  }

  std::array<Tensor3, 3> get_u(const State& x, int e) const {
    std::array<Tensor3, 3> t;
    const int d = l2_.num_dofs_1d();
    for (int c = 0; c < 3; ++c) {
      const auto first = x.u.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(e) * 3 + c) * nu_);
      t[c] = Tensor3({d, d, d}, std::vector<double>(first, first + nu_));
    }
    return t;
  }

  void put_u(State& r, int e, const std::array<Tensor3, 3>& t) const {
    for (int c = 0; c < 3; ++c)
      std::copy(t[c].data.begin(), t[c].data.end(),
                r.u.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(e) * 3 + c) * nu_));
  }

  // tau_c = B_test^T sum_r D_cr (B_trial G p)_r
  std::array<Tensor3, 3> kp_element(const Tensor3& pe, const std::vector<double>& D) const {
    const auto g = apply_gradient_3d(h1_, pe, &counters_, Dispatch{this});
    std::array<Tensor3, 3> flux{Tensor3::cube(opt_.num_quad), Tensor3::cube(opt_.num_quad),
                                Tensor3::cube(opt_.num_quad)};
    for (int n = 0; n < nq_; ++n) {
      const double* Dn = &D[static_cast<std::size_t>(n) * 9];
      for (int c = 0; c < 3; ++c)
        flux[c].data[n] = Dn[3 * c] * g[0].data[n] + Dn[3 * c + 1] * g[1].data[n] + Dn[3 * c + 2] * g[2].data[n];
    }
    count_flops(&counters_, 15ull * nq_);
    return {apply_basis_transpose_3d(l2_, flux[0], &counters_, Dispatch{this}),
            apply_basis_transpose_3d(l2_, flux[1], &counters_, Dispatch{this}),
            apply_basis_transpose_3d(l2_, flux[2], &counters_, Dispatch{this})};
  }

  // B_trial^T G^T-side: (grad-transpose) of sum_c D_cr (B_test u)_c
  Tensor3 ku_element(const std::array<Tensor3, 3>& ue, const std::vector<double>& D) const {
    std::array<Tensor3, 3> uq;
    for (int c = 0; c < 3; ++c) uq[c] = apply_basis_3d(l2_, ue[c], &counters_, Dispatch{this});
    std::array<Tensor3, 3> flux{Tensor3::cube(opt_.num_quad), Tensor3::cube(opt_.num_quad),
                                Tensor3::cube(opt_.num_quad)};
    for (int n = 0; n < nq_; ++n) {
      const double* Dn = &D[static_cast<std::size_t>(n) * 9];
      for (int r = 0; r < 3; ++r)
        flux[r].data[n] = Dn[r] * uq[0].data[n] + Dn[3 + r] * uq[1].data[n] + Dn[6 + r] * uq[2].data[n];
    }
    count_flops(&counters_, 15ull * nq_);
    return apply_gradient_transpose_3d(h1_, flux, &counters_, Dispatch{this});
  }

  // Local H1 indices of a face's DOF slab, tangential axes lower-first.
  std::vector<int> face_local(const BoundaryFace& f) const {
    const int d = h1_.num_dofs_1d();
    const int a = f.normal_axis();
    const int s = f.upper() ? d - 1 : 0;
    std::vector<int> out;
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        std::array<int, 3> ijk{};
        ijk[a] = s;
        ijk[a == 0 ? 1 : 0] = i;
        ijk[a == 2 ? 1 : 2] = j;
        out.push_back(ijk[0] + d * (ijk[1] + d * ijk[2]));
      }
    return out;
  }

  std::vector<int> face_dofs(const BoundaryFace& f) const {
    const auto dofs = restriction_.element_dofs(f.element);
    std::vector<int> out;
    for (int l : face_local(f)) out.push_back(dofs[l]);
    return out;
  }

  // Face values at quadrature points from the face DOF slab.
  std::vector<double> face_eval(const FaceQuad& fq, std::span<const double> global) const {
    const Matrix& B = h1_.values();
    const int d = h1_.num_dofs_1d(), q = opt_.num_quad;
    const auto dofs = face_dofs(fq.face);
    std::vector<double> out(static_cast<std::size_t>(q) * q, 0.0);
    for (int b = 0; b < q; ++b)
      for (int a = 0; a < q; ++a) {
        double s = 0.0;
        for (int j = 0; j < d; ++j)
          for (int i = 0; i < d; ++i) s += B(a, i) * B(b, j) * global[dofs[i + d * j]];
        out[a + q * b] = s;
      }
    return out;
  }

  // global += sum_ab B(a,i) B(b,j) vals(a,b) on the face slab.
  void face_test(const FaceQuad& fq, const std::vector<double>& vals, std::span<double> global) const {
    const Matrix& B = h1_.values();
    const int d = h1_.num_dofs_1d(), q = opt_.num_quad;
    const auto dofs = face_dofs(fq.face);
    for (int j = 0; j < d; ++j)
      for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int b = 0; b < q; ++b)
          for (int a = 0; a < q; ++a) s += B(a, i) * B(b, j) * vals[a + q * b];
        global[dofs[i + d * j]] += s;
      }
  }

  void apply_absorbing(std::span<const double> p, std::span<double> out) const {
    for (const auto& fq : faces_) {
      if (fq.face.tag != BoundaryTag::Absorbing) continue;
      auto vals = face_eval(fq, p);
      const double zinv = 1.0 / coeff_.element[fq.face.element].impedance();
      for (std::size_t n = 0; n < vals.size(); ++n) vals[n] *= zinv * fq.weight_area[n];
      face_test(fq, vals, out);
    }
  }

  void build_lumped_mass() {
    const int E = mesh_.num_elements();
    mass_u_.assign(static_cast<std::size_t>(3) * nu_ * E, 0.0);
    mass_p_.assign(static_cast<std::size_t>(restriction_.num_global()), 0.0);
    for (int e = 0; e < E; ++e) {
      const double* wd = qd_.weight_det_element(e);
      Tensor3 w = Tensor3::cube(opt_.num_quad);
      std::copy(wd, wd + nq_, w.data.begin());
      const Tensor3 ru = apply_basis_transpose_3d(l2_, w);
      for (int c = 0; c < 3; ++c)
        for (int l = 0; l < nu_; ++l)
          mass_u_[(static_cast<std::size_t>(e) * 3 + c) * nu_ + l] = qd_.rho[e] * ru.data[l];
      restriction_.scatter_add(e, apply_basis_transpose_3d(h1_, w), mass_p_, qd_.inv_bulk[e]);
    }
    if (opt_.surface_gravity) {
      for (const auto& fq : faces_) {
        if (fq.face.tag != BoundaryTag::Surface) continue;
        const double s = 1.0 / (coeff_.element[fq.face.element].rho * coeff_.gravity);
        std::vector<double> vals(fq.weight_area);
        for (double& v : vals) v *= s;
        face_test(fq, vals, mass_p_);
      }
    }
    for (std::size_t i = 0; i < mass_u_.size(); ++i)
      if (!(mass_u_[i] > 0.0)) throw Error("lumped velocity mass entry " + std::to_string(i) + " is not positive");
    for (std::size_t i = 0; i < mass_p_.size(); ++i)
      if (!(mass_p_[i] > 0.0)) throw Error("lumped pressure mass entry " + std::to_string(i) + " is not positive");
  }

  Mesh mesh_;
  Coefficients coeff_;
  OperatorOptions opt_;
  PointSet1D rule_;
  Basis1D h1_, l2_;
  H1Restriction restriction_;
  QuadData qd_;
  int nq_ = 0, nu_ = 0;
  const MappingSet* mappings_ = nullptr;
  std::vector<FaceQuad> faces_;
  std::vector<double> mass_u_, mass_p_;
  mutable OpCounters counters_;
};

enum class ProbeTarget { Block, FusedNormal, Mass };

// Explicit matrix of an operator by application to every unit vector.
inline Matrix dense_probe(const BlockOperator& op, ProbeTarget target = ProbeTarget::Block) {
  State x = op.zero_state();
  const int n = static_cast<int>(x.size());
  Matrix M(n, n);
  std::vector<double> unit(static_cast<std::size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    unit[j] = 1.0;
    x.assign_flat(unit);
    unit[j] = 0.0;
    const State y = target == ProbeTarget::Block         ? op.apply_block(x)
                    : target == ProbeTarget::FusedNormal ? op.apply_fused_normal(x)
                                                         : op.apply_lumped_mass(x);
    const auto col = y.flatten();
    for (int i = 0; i < n; ++i) M(i, j) = col[i];
  }
  return M;
}

}  // namespace femma::fem
