#pragma once

// Scalar emulation of the FP64 m8n8k4 warp MMA instruction and a tiling
// engine that runs irregular m/n/k GEMMs through explicit index mappings.

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "femma/core_tensor.hpp"
#include "femma/counters.hpp"
#include "femma/errors.hpp"

namespace femma {

inline constexpr int kWarpSize = 32;
inline constexpr int kInstrM = 8;
inline constexpr int kInstrN = 8;
inline constexpr int kInstrK = 4;
inline constexpr int kPad = -1;

// m-by-k times k-by-n equals m-by-n.
struct GemmShape {
  int m = 1;
  int n = 1;
  int k = 1;

  auto operator<=>(const GemmShape&) const = default;

  bool valid() const { return m >= 1 && n >= 1 && k >= 1; }
  std::string str() const {
    return std::to_string(m) + "x" + std::to_string(n) + "x" + std::to_string(k);
  }
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

// Parses "25x5x4" or "25/5/4".
inline GemmShape parse_shape(const std::string& text) {
  GemmShape s;
  char sep1 = 0, sep2 = 0;
  std::istringstream in(text);
  if (!(in >> s.m >> sep1 >> s.n >> sep2 >> s.k) || (sep1 != 'x' && sep1 != '/') ||
      sep2 != sep1 || !in.eof() || !s.valid())
    throw ParseError("malformed GEMM shape '" + text + "' (expected MxNxK with positive entries)");
  return s;
}

// The GEMM shapes of the order-4 H1 / order-3 L2 sum factorizations at five
// quadrature points per direction.
inline const std::vector<GemmShape>& reference_shapes() {
  static const std::vector<GemmShape> shapes{{25, 5, 4}, {25, 5, 5}, {25, 4, 5}, {20, 4, 5},
                                             {16, 4, 5}, {16, 5, 4}, {20, 5, 4}};
  return shapes;
}

// Per-lane fragment coordinates of the m8n8k4 instruction.
struct FragmentLayout {
  struct Coord {
    int row;
    int col;
    auto operator<=>(const Coord&) const = default;
  };

  static constexpr Coord a(int lane) { return {lane / 4, lane % 4}; }
  static constexpr Coord b(int lane) { return {lane % 4, lane / 4}; }
  // slot 0 -> c0, slot 1 -> c1
  static constexpr Coord c(int lane, int slot) { return {lane / 4, 2 * (lane % 4) + slot}; }
};

struct WarpFragments {
  std::array<double, kWarpSize> a{};
  std::array<double, kWarpSize> b{};
  std::array<std::array<double, 2>, kWarpSize> c{};
};

// C' = A B + C with A 8x4 and B 4x8 reassembled from the lanes. Each output
// cell accumulates over kappa = 0..3 in ascending order, one FMA per term.
inline std::array<std::array<double, 2>, kWarpSize> dmma_m8n8k4(
    const std::array<double, kWarpSize>& a, const std::array<double, kWarpSize>& b,
    const std::array<std::array<double, 2>, kWarpSize>& c) {
  double A[kInstrM][kInstrK];
  double B[kInstrK][kInstrN];
  for (int lane = 0; lane < kWarpSize; ++lane) {
    const auto ca = FragmentLayout::a(lane);
    const auto cb = FragmentLayout::b(lane);
    A[ca.row][ca.col] = a[lane];
    B[cb.row][cb.col] = b[lane];
  }
  std::array<std::array<double, 2>, kWarpSize> out{};
  for (int lane = 0; lane < kWarpSize; ++lane) {
    for (int slot = 0; slot < 2; ++slot) {
      const auto cc = FragmentLayout::c(lane, slot);
      double acc = c[lane][slot];
      for (int kappa = 0; kappa < kInstrK; ++kappa)
        acc = std::fma(A[cc.row][kappa], B[kappa][cc.col], acc);
      out[lane][slot] = acc;
    }
  }
  return out;
}

inline std::array<std::array<double, 2>, kWarpSize> dmma_m8n8k4(const WarpFragments& f) {
  return dmma_m8n8k4(f.a, f.b, f.c);
}

// Tiles a problem GEMM onto m8n8k4 instructions. Every warp runs
// m_tiles * n_tiles * k_tiles instructions; instruction indices along m run
// over [0, 8 m_tiles), along n over [0, 8 n_tiles), along k over [0, 4 k_tiles).
// f_m depends on the warp, f_n and f_k do not. kPad marks a slot with no
// problem index: its operand reads as zero and its result is discarded.
struct IndexMapping {
  GemmShape shape;
  int num_warps = 1;
  int m_tiles = 1;
  int n_tiles = 1;
  int k_tiles = 1;
  std::vector<int> f_m;  // [warp * m_slots() + instr_m]
  std::vector<int> f_n;  // [instr_n]
  std::vector<int> f_k;  // [instr_k]

  int m_slots() const { return kInstrM * m_tiles; }
  int n_slots() const { return kInstrN * n_tiles; }
  int k_slots() const { return kInstrK * k_tiles; }
  int instructions_per_warp() const { return m_tiles * n_tiles * k_tiles; }
  int total_instructions() const { return num_warps * instructions_per_warp(); }

  int map_m(int warp, int instr_m) const {
    return f_m[static_cast<std::size_t>(warp) * m_slots() + instr_m];
  }
  int map_n(int instr_n) const { return f_n[instr_n]; }
  int map_k(int instr_k) const { return f_k[instr_k]; }

  bool operator==(const IndexMapping&) const = default;

  // One warp per 8 rows, m_p = m_i + 8 w; identity along n and k.
  static IndexMapping blocked(GemmShape s) {
    IndexMapping mp;
    mp.shape = s;
    mp.num_warps = ceil_div(s.m, kInstrM);
    mp.n_tiles = ceil_div(s.n, kInstrN);
    mp.k_tiles = ceil_div(s.k, kInstrK);
    mp.f_m.resize(static_cast<std::size_t>(mp.num_warps) * mp.m_slots());
    for (int w = 0; w < mp.num_warps; ++w)
      for (int i = 0; i < mp.m_slots(); ++i) {
        const int p = i + mp.m_slots() * w;
        mp.f_m[static_cast<std::size_t>(w) * mp.m_slots() + i] = p < s.m ? p : kPad;
      }
    mp.f_n = identity_slots(mp.n_slots(), s.n);
    mp.f_k = identity_slots(mp.k_slots(), s.k);
    return mp;
  }

  static std::vector<int> identity_slots(int slots, int extent) {
    std::vector<int> f(slots);
    for (int i = 0; i < slots; ++i) f[i] = i < extent ? i : kPad;
    return f;
  }
};

namespace detail {

inline void tally_axis(const char* axis, const std::vector<int>& values, int extent,
                       std::vector<std::string>& problems) {
  std::vector<int> hits(static_cast<std::size_t>(extent), 0);
  for (int v : values) {
    if (v == kPad) continue;
    if (v < 0 || v >= extent) {
      problems.push_back(std::string(axis) + "=" + std::to_string(v) + " out of range");
      continue;
    }
    ++hits[v];
  }
  for (int i = 0; i < extent; ++i) {
    if (hits[i] == 0) problems.push_back(std::string(axis) + "=" + std::to_string(i) + " missing");
    if (hits[i] > 1)
      problems.push_back(std::string(axis) + "=" + std::to_string(i) + " covered " +
                         std::to_string(hits[i]) + " times");
  }
}

}  // namespace detail

// Structural problems with a mapping (empty when it partitions the problem).
// A (warp, instr_m, instr_n, instr_k) slot covers problem triple
// (f_m, f_n, f_k); with per-axis maps the triple relation is a partition
// iff each axis map is a bijection onto its problem range plus padding.
inline std::vector<std::string> coverage_problems(const IndexMapping& mp) {
  std::vector<std::string> problems;
  if (!mp.shape.valid()) problems.push_back("shape " + mp.shape.str() + " is not positive");
  if (mp.num_warps < 1 || mp.m_tiles < 1 || mp.n_tiles < 1 || mp.k_tiles < 1)
    problems.push_back("warp and tile counts must be positive");
  if (!problems.empty()) return problems;
  if (mp.f_m.size() != static_cast<std::size_t>(mp.num_warps) * mp.m_slots())
    problems.push_back("f_m has " + std::to_string(mp.f_m.size()) + " entries, expected " +
                       std::to_string(mp.num_warps * mp.m_slots()));
  if (mp.f_n.size() != static_cast<std::size_t>(mp.n_slots()))
    problems.push_back("f_n has " + std::to_string(mp.f_n.size()) + " entries, expected " +
                       std::to_string(mp.n_slots()));
  if (mp.f_k.size() != static_cast<std::size_t>(mp.k_slots()))
    problems.push_back("f_k has " + std::to_string(mp.f_k.size()) + " entries, expected " +
                       std::to_string(mp.k_slots()));
  if (!problems.empty()) return problems;
  detail::tally_axis("m", mp.f_m, mp.shape.m, problems);
  detail::tally_axis("n", mp.f_n, mp.shape.n, problems);
  detail::tally_axis("k", mp.f_k, mp.shape.k, problems);
  return problems;
}

inline void require_coverage(const IndexMapping& mp) {
  auto problems = coverage_problems(mp);
  if (problems.empty()) return;
  std::string what = "mapping for " + mp.shape.str() + " is not a partition:";
  for (const auto& p : problems) what += " [" + p + "]";
  throw CoverageError(what, std::move(problems));
}

// Dense C = A B through the mapping, one emulated instruction at a time.
// A is m x k, B is k x n. Within a warp the C fragment accumulates across the
// k tiles before it is stored.
inline Matrix tiled_gemm(const GemmShape& shape, const IndexMapping& mp, const Matrix& A,
                         const Matrix& B, OpCounters* counters = nullptr) {
  if (mp.shape != shape)
    throw ShapeError("tiled_gemm: mapping is for " + mp.shape.str() + ", problem is " + shape.str());
  if (A.rows != shape.m || A.cols != shape.k || B.rows != shape.k || B.cols != shape.n)
    throw ShapeError("tiled_gemm: operands " + std::to_string(A.rows) + "x" +
                     std::to_string(A.cols) + " and " + std::to_string(B.rows) + "x" +
                     std::to_string(B.cols) + " do not match " + shape.str());
  require_coverage(mp);

  Matrix C(shape.m, shape.n);
  std::vector<std::uint8_t> written(static_cast<std::size_t>(shape.m) * shape.n, 0);
  std::array<double, kWarpSize> a{}, b{};
  for (int w = 0; w < mp.num_warps; ++w) {
    for (int tm = 0; tm < mp.m_tiles; ++tm) {
      for (int tn = 0; tn < mp.n_tiles; ++tn) {
        std::array<std::array<double, 2>, kWarpSize> c{};
        for (int tk = 0; tk < mp.k_tiles; ++tk) {
          for (int lane = 0; lane < kWarpSize; ++lane) {
            const auto ca = FragmentLayout::a(lane);
            const int pm = mp.map_m(w, tm * kInstrM + ca.row);
            const int pka = mp.map_k(tk * kInstrK + ca.col);
            a[lane] = (pm == kPad || pka == kPad) ? 0.0 : A(pm, pka);

            const auto cb = FragmentLayout::b(lane);
            const int pkb = mp.map_k(tk * kInstrK + cb.row);
            const int pn = mp.map_n(tn * kInstrN + cb.col);
            b[lane] = (pkb == kPad || pn == kPad) ? 0.0 : B(pkb, pn);
          }
          c = dmma_m8n8k4(a, b, c);
          if (counters) ++counters->mma_instructions;
        }
        for (int lane = 0; lane < kWarpSize; ++lane) {
          for (int slot = 0; slot < 2; ++slot) {
            const auto cc = FragmentLayout::c(lane, slot);
            const int pm = mp.map_m(w, tm * kInstrM + cc.row);
            const int pn = mp.map_n(tn * kInstrN + cc.col);
            if (pm == kPad || pn == kPad) continue;
            auto& flag = written[static_cast<std::size_t>(pm) * shape.n + pn];
            if (flag) throw CoverageError("tiled_gemm: C(" + std::to_string(pm) + "," +
                                              std::to_string(pn) + ") written twice",
                                          {});
            flag = 1;
            C(pm, pn) = c[lane][slot];
          }
        }
      }
    }
  }
  count_flops(counters, 2ull * shape.m * shape.n * shape.k);
  return C;
}

// Mappings keyed by GEMM shape, consulted by the MMA contraction backend.
class MappingSet {
 public:
  void add(IndexMapping mp) {
    require_coverage(mp);
    const GemmShape s = mp.shape;
    by_shape_.insert_or_assign(s, std::move(mp));
  }
  bool contains(const GemmShape& s) const { return by_shape_.count(s) != 0; }
  const IndexMapping& at(const GemmShape& s) const {
    auto it = by_shape_.find(s);
    if (it == by_shape_.end()) throw ShapeError("no DMMA mapping registered for shape " + s.str());
    return it->second;
  }
  std::size_t size() const { return by_shape_.size(); }
  auto begin() const { return by_shape_.begin(); }
  auto end() const { return by_shape_.end(); }

 private:
  std::map<GemmShape, IndexMapping> by_shape_;
};

// GEMM view of one cyclic contraction stage: m = middle * slowest extent,
// n = rows of the 1D matrix, k = contracted (fastest) extent.
inline GemmShape contraction_shape(const Matrix& B, const Tensor3& X) {
  return {X.extents[1] * X.extents[2], B.rows, X.extents[0]};
}

// contract_cyclic routed through tiled_gemm. X's storage is already the
// row-major m x k operand; the output tensor is C stored m-fastest.
inline Tensor3 mma_contract_cyclic(const Matrix& B, const Tensor3& X, const IndexMapping& mp,
                                   OpCounters* counters = nullptr) {
  if (X.extents[0] != B.cols)
    throw ShapeError("mma_contract_cyclic: matrix is " + std::to_string(B.rows) + "x" +
                     std::to_string(B.cols) + " but tensor extents are " +
                     extents_string(X.extents));
  const GemmShape shape = contraction_shape(B, X);
  if (mp.shape != shape)
    throw ShapeError("mma_contract_cyclic: stage needs " + shape.str() + ", mapping is for " +
                     mp.shape.str());
  Matrix A;
  A.rows = shape.m;
  A.cols = shape.k;
  A.data = X.data;
  const Matrix C = tiled_gemm(shape, mp, A, B.transposed(), counters);
  Tensor3 out = Tensor3::zeros({X.extents[1], X.extents[2], B.rows}, {X.order[1], X.order[2], X.order[0]});
  for (int mm = 0; mm < shape.m; ++mm)
    for (int nn = 0; nn < shape.n; ++nn)
      out.data[static_cast<std::size_t>(nn) * shape.m + mm] = C(mm, nn);
  return out;
}

// Contraction backend that looks up a mapping per stage shape.
struct MmaContractor {
  const MappingSet* mappings = nullptr;

  Tensor3 operator()(const Matrix& B, const Tensor3& X, OpCounters* counters) const {
    return mma_contract_cyclic(B, X, mappings->at(contraction_shape(B, X)), counters);
  }
};

}  // namespace femma
