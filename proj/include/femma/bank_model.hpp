#pragma once

// Shared-memory bank model for 8-byte warp accesses and a checker/search for
// conflict-free DMMA index mappings.
//
// A warp-wide 8-byte access is served in two phases (lanes 0-15, then 16-31).
// Each active lane touches the two 4-byte banks of its word. Lanes of one
// phase that hit the same full address are served by a single broadcast
// access; distinct addresses that share a bank serialize. PAD lanes do not
// access memory.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "femma/errors.hpp"
#include "femma/warp_mma.hpp"

namespace femma {

struct BankConfig {
  int num_banks = 32;
  int bank_width_bytes = 4;
  int word_bytes = 8;
  int phase_split = 16;  // lanes per access phase

  void validate() const {
    if (num_banks < 1 || bank_width_bytes < 1 || word_bytes < 1 || phase_split < 1)
      throw LayoutError("BankConfig: all fields must be positive");
    if (word_bytes % bank_width_bytes != 0)
      throw LayoutError("BankConfig: word size must be a multiple of the bank width");
    if (kWarpSize % phase_split != 0)
      throw LayoutError("BankConfig: phase split must divide the warp size");
  }
  int num_phases() const { return kWarpSize / phase_split; }
  int banks_per_word() const { return word_bytes / bank_width_bytes; }
  std::int64_t period_bytes() const { return static_cast<std::int64_t>(num_banks) * bank_width_bytes; }
};

inline int bank_of(std::int64_t address_bytes, const BankConfig& cfg = {}) {
  return static_cast<int>((address_bytes / cfg.bank_width_bytes) % cfg.num_banks);
}

// One access phase after broadcast coalescing.
struct PhaseTrace {
  std::vector<int> lanes;                 // active lanes in this phase
  std::vector<std::int64_t> addresses;    // their byte addresses
  std::vector<int> histogram;             // distinct addresses per bank
  std::vector<std::vector<int>> bank_lanes;  // lanes touching each bank
  int distinct_addresses = 0;
  int degree = 0;                         // max over banks of histogram

  bool conflict_free() const { return degree <= 1; }
};

// Splits a warp access into phases. `lane_addresses[l]` is empty for lanes
// that perform no access.
inline std::vector<PhaseTrace> access_phases(std::span<const std::optional<std::int64_t>> lane_addresses,
                                             const BankConfig& cfg = {}) {
  cfg.validate();
  if (lane_addresses.size() != static_cast<std::size_t>(kWarpSize))
    throw LayoutError("access_phases: expected 32 lane addresses, got " +
                      std::to_string(lane_addresses.size()));
  std::vector<PhaseTrace> phases(static_cast<std::size_t>(cfg.num_phases()));
  for (int ph = 0; ph < cfg.num_phases(); ++ph) {
    PhaseTrace& t = phases[ph];
    t.histogram.assign(static_cast<std::size_t>(cfg.num_banks), 0);
    t.bank_lanes.assign(static_cast<std::size_t>(cfg.num_banks), {});
    std::vector<std::int64_t> distinct;
    for (int lane = ph * cfg.phase_split; lane < (ph + 1) * cfg.phase_split; ++lane) {
      const auto& addr = lane_addresses[lane];
      if (!addr) continue;
      if (*addr < 0 || *addr % cfg.word_bytes != 0)
        throw AlignmentError("lane " + std::to_string(lane) + " address " + std::to_string(*addr) +
                             " is not " + std::to_string(cfg.word_bytes) + "-byte aligned");
      t.lanes.push_back(lane);
      t.addresses.push_back(*addr);
      for (int w = 0; w < cfg.banks_per_word(); ++w)
        t.bank_lanes[bank_of(*addr + static_cast<std::int64_t>(w) * cfg.bank_width_bytes, cfg)]
            .push_back(lane);
      if (std::find(distinct.begin(), distinct.end(), *addr) == distinct.end())
        distinct.push_back(*addr);
    }
    t.distinct_addresses = static_cast<int>(distinct.size());
    for (std::int64_t addr : distinct)
      for (int w = 0; w < cfg.banks_per_word(); ++w)
        ++t.histogram[bank_of(addr + static_cast<std::int64_t>(w) * cfg.bank_width_bytes, cfg)];
    t.degree = *std::max_element(t.histogram.begin(), t.histogram.end());
  }
  return phases;
}

inline std::vector<PhaseTrace> access_phases(std::span<const std::int64_t> lane_addresses,
                                             const BankConfig& cfg = {}) {
  std::vector<std::optional<std::int64_t>> opt(lane_addresses.begin(), lane_addresses.end());
  return access_phases(std::span<const std::optional<std::int64_t>>(opt), cfg);
}

// Strided placement of a tensor in shared memory, in units of words.
struct SmemLayout {
  std::int64_t base_offset_bytes = 0;
  std::vector<int> extents;       // fastest-first
  std::vector<int> strides_elems;
  std::vector<int> order;         // logical axis held by each slot (informational)

  std::int64_t span_elems() const {
    std::int64_t top = 0;
    for (std::size_t i = 0; i < extents.size(); ++i)
      top += static_cast<std::int64_t>(extents[i] - 1) * strides_elems[i];
    return top + 1;
  }

  bool is_injective() const {
    std::vector<std::int64_t> offsets{0};
    for (std::size_t ax = 0; ax < extents.size(); ++ax) {
      std::vector<std::int64_t> next;
      next.reserve(offsets.size() * extents[ax]);
      for (int i = 0; i < extents[ax]; ++i)
        for (auto o : offsets) next.push_back(o + static_cast<std::int64_t>(i) * strides_elems[ax]);
      offsets = std::move(next);
    }
    std::sort(offsets.begin(), offsets.end());
    return std::adjacent_find(offsets.begin(), offsets.end()) == offsets.end();
  }
};

// A GEMM operand viewed through a tensor layout: the operand's row index is
// the mixed-radix combination of `row_axes` (first listed fastest), and
// likewise for columns.
struct OperandLayout {
  SmemLayout layout;
  std::vector<int> row_axes;
  std::vector<int> col_axes;

  int rows() const { return radix_extent(row_axes); }
  int cols() const { return radix_extent(col_axes); }

  std::int64_t address(int row, int col, int word_bytes = 8) const {
    if (row < 0 || row >= rows() || col < 0 || col >= cols())
      throw LayoutError("operand index (" + std::to_string(row) + "," + std::to_string(col) +
                        ") outside layout bounds " + std::to_string(rows()) + "x" +
                        std::to_string(cols()));
    return layout.base_offset_bytes +
           static_cast<std::int64_t>(word_bytes) * (offset(row, row_axes) + offset(col, col_axes));
  }

 private:
  int radix_extent(const std::vector<int>& axes) const {
    int e = 1;
    for (int a : axes) e *= layout.extents[a];
    return e;
  }
  std::int64_t offset(int idx, const std::vector<int>& axes) const {
    std::int64_t o = 0;
    for (int a : axes) {
      o += static_cast<std::int64_t>(idx % layout.extents[a]) * layout.strides_elems[a];
      idx /= layout.extents[a];
    }
    return o;
  }
};

// rows x cols with columns contiguous (leading dimension `ld` >= cols).
inline OperandLayout row_major_layout(int rows, int cols, std::int64_t base = 0, int ld = 0) {
  if (ld == 0) ld = cols;
  return {{base, {cols, rows}, {1, ld}, {1, 0}}, {1}, {0}};
}

// rows x cols with rows contiguous (leading dimension `ld` >= rows).
inline OperandLayout col_major_layout(int rows, int cols, std::int64_t base = 0, int ld = 0) {
  if (ld == 0) ld = rows;
  return {{base, {rows, cols}, {1, ld}, {0, 1}}, {0}, {1}};
}

struct GemmLayouts {
  OperandLayout a;
  OperandLayout b;
  OperandLayout c;
};

namespace detail {
inline std::int64_t round_up(std::int64_t v, std::int64_t to) { return (v + to - 1) / to * to; }
}  // namespace detail

// Layouts of one cyclic contraction stage: the data tensor is A with the
// contracted index fastest (row-major m x k), the 1D matrix is B with k
// fastest, and the output C keeps m fastest so the new index is slowest.
// `c_pad` widens C's column stride, `b_pad` widens B's.
inline GemmLayouts cyclic_layouts(const GemmShape& s, int c_pad = 0, int b_pad = 0) {
  const std::int64_t a_bytes = 8LL * s.m * s.k;
  const std::int64_t b_base = detail::round_up(a_bytes, 128);
  const std::int64_t b_bytes = 8LL * (s.k + b_pad) * s.n;
  const std::int64_t c_base = detail::round_up(b_base + b_bytes, 128);
  return {row_major_layout(s.m, s.k, 0), col_major_layout(s.k, s.n, b_base, s.k + b_pad),
          col_major_layout(s.m, s.n, c_base, s.m + c_pad)};
}

// Same GEMM when the data tensor is stored lexicographically with the
// contracted index in the middle: A(row, kk) lives at f + fast*kk + fast*k*s
// where row = f + fast*s.
inline GemmLayouts middle_contracted_layouts(const GemmShape& s, int fast_extent) {
  if (fast_extent < 1 || s.m % fast_extent != 0)
    throw LayoutError("middle_contracted_layouts: m=" + std::to_string(s.m) +
                      " is not a multiple of " + std::to_string(fast_extent));
  GemmLayouts l = cyclic_layouts(s);
  const int slow = s.m / fast_extent;
  l.a = {{0, {fast_extent, s.k, slow}, {1, fast_extent, fast_extent * s.k}, {0, 1, 2}}, {0, 2}, {1}};
  return l;
}

enum class AccessKind { ALoad = 0, BLoad = 1, CStore0 = 2, CStore1 = 3 };
inline constexpr std::array<AccessKind, 4> kAllAccessKinds{AccessKind::ALoad, AccessKind::BLoad,
                                                           AccessKind::CStore0, AccessKind::CStore1};

inline const char* access_name(AccessKind k) {
  switch (k) {
    case AccessKind::ALoad: return "A-load";
    case AccessKind::BLoad: return "B-load";
    case AccessKind::CStore0: return "C-store c0";
    case AccessKind::CStore1: return "C-store c1";
  }
  return "?";
}

struct AccessSummary {
  AccessKind kind = AccessKind::ALoad;
  int max_degree = 0;
  int instances = 0;  // warp-wide accesses examined
  // First instance attaining max_degree.
  int worst_warp = 0;
  std::array<int, 3> worst_tile{0, 0, 0};
  std::vector<PhaseTrace> phases;
};

struct ConflictReport {
  GemmShape shape;
  std::array<AccessSummary, 4> accesses;
  int max_degree = 0;
  bool conflict_free = true;

  const AccessSummary& access(AccessKind k) const { return accesses[static_cast<int>(k)]; }
};

namespace detail {

// Addresses of one warp-wide access, empty for PAD lanes.
inline std::array<std::optional<std::int64_t>, kWarpSize> lane_addresses(
    AccessKind kind, const IndexMapping& mp, const GemmLayouts& layouts, int warp,
    std::array<int, 3> tile, int word_bytes) {
  std::array<std::optional<std::int64_t>, kWarpSize> out{};
  const auto [tm, tn, tk] = tile;
  for (int lane = 0; lane < kWarpSize; ++lane) {
    switch (kind) {
      case AccessKind::ALoad: {
        const auto c = FragmentLayout::a(lane);
        const int pm = mp.map_m(warp, tm * kInstrM + c.row);
        const int pk = mp.map_k(tk * kInstrK + c.col);
        if (pm != kPad && pk != kPad) out[lane] = layouts.a.address(pm, pk, word_bytes);
        break;
      }
      case AccessKind::BLoad: {
        const auto c = FragmentLayout::b(lane);
        const int pk = mp.map_k(tk * kInstrK + c.row);
        const int pn = mp.map_n(tn * kInstrN + c.col);
        if (pk != kPad && pn != kPad) out[lane] = layouts.b.address(pk, pn, word_bytes);
        break;
      }
      case AccessKind::CStore0:
      case AccessKind::CStore1: {
        const auto c = FragmentLayout::c(lane, kind == AccessKind::CStore0 ? 0 : 1);
        const int pm = mp.map_m(warp, tm * kInstrM + c.row);
        const int pn = mp.map_n(tn * kInstrN + c.col);
        if (pm != kPad && pn != kPad) out[lane] = layouts.c.address(pm, pn, word_bytes);
        break;
      }
    }
  }
  return out;
}

// Enumerates the distinct warp-wide accesses of one kind: A-loads vary with
// (warp, tm, tk), B-loads with (tn, tk), C-stores with (warp, tm, tn).
template <class Visit>
void for_each_instance(AccessKind kind, const IndexMapping& mp, Visit&& visit) {
  switch (kind) {
    case AccessKind::ALoad:
      for (int w = 0; w < mp.num_warps; ++w)
        for (int tm = 0; tm < mp.m_tiles; ++tm)
          for (int tk = 0; tk < mp.k_tiles; ++tk)
            if (!visit(w, std::array<int, 3>{tm, 0, tk})) return;
      break;
    case AccessKind::BLoad:
      for (int tn = 0; tn < mp.n_tiles; ++tn)
        for (int tk = 0; tk < mp.k_tiles; ++tk)
          if (!visit(0, std::array<int, 3>{0, tn, tk})) return;
      break;
    default:
      for (int w = 0; w < mp.num_warps; ++w)
        for (int tm = 0; tm < mp.m_tiles; ++tm)
          for (int tn = 0; tn < mp.n_tiles; ++tn)
            if (!visit(w, std::array<int, 3>{tm, tn, 0})) return;
  }
}

// Fast path for the search: true when every instance of `kind` is
// conflict-free. Assumes the default two-bank 8-byte configuration shape but
// honours `cfg` fully.
inline bool access_conflict_free(AccessKind kind, const IndexMapping& mp, const GemmLayouts& layouts,
                                 const BankConfig& cfg) {
  bool ok = true;
  std::vector<std::int64_t> seen_addr;
  std::vector<int> bank_use(static_cast<std::size_t>(cfg.num_banks));
  for_each_instance(kind, mp, [&](int w, std::array<int, 3> tile) {
    const auto addrs = lane_addresses(kind, mp, layouts, w, tile, cfg.word_bytes);
    for (int ph = 0; ph < cfg.num_phases() && ok; ++ph) {
      seen_addr.clear();
      std::fill(bank_use.begin(), bank_use.end(), 0);
      for (int lane = ph * cfg.phase_split; lane < (ph + 1) * cfg.phase_split; ++lane) {
        if (!addrs[lane]) continue;
        const std::int64_t a = *addrs[lane];
        if (std::find(seen_addr.begin(), seen_addr.end(), a) != seen_addr.end()) continue;
        seen_addr.push_back(a);
        for (int j = 0; j < cfg.banks_per_word(); ++j) {
          if (++bank_use[bank_of(a + static_cast<std::int64_t>(j) * cfg.bank_width_bytes, cfg)] > 1) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    }
    return ok;
  });
  return ok;
}

inline void check_layout_bounds(const GemmShape& s, const GemmLayouts& l) {
  auto check = [](const OperandLayout& o, int rows, int cols, const char* name) {
    if (o.rows() < rows || o.cols() < cols)
      throw LayoutError(std::string(name) + " layout is " + std::to_string(o.rows()) + "x" +
                        std::to_string(o.cols()) + ", operand needs " + std::to_string(rows) +
                        "x" + std::to_string(cols));
    if (!o.layout.is_injective()) throw LayoutError(std::string(name) + " layout is not injective");
  };
  check(l.a, s.m, s.k, "A");
  check(l.b, s.k, s.n, "B");
  check(l.c, s.m, s.n, "C");
}

}  // namespace detail

// Derives every lane's A/B/C address through the fragment layout, mapping
// and shared-memory layouts, and reports the worst conflict degree of each
// access kind over all warps and instructions.
inline ConflictReport verify_mapping(const GemmShape& shape, const IndexMapping& mp,
                                     const GemmLayouts& layouts, const BankConfig& cfg = {}) {
  cfg.validate();
  if (mp.shape != shape)
    throw ShapeError("verify_mapping: mapping is for " + mp.shape.str() + ", shape is " + shape.str());
  require_coverage(mp);
  detail::check_layout_bounds(shape, layouts);

  ConflictReport report;
  report.shape = shape;
  for (AccessKind kind : kAllAccessKinds) {
    AccessSummary& sum = report.accesses[static_cast<int>(kind)];
    sum.kind = kind;
    sum.max_degree = -1;
    detail::for_each_instance(kind, mp, [&](int w, std::array<int, 3> tile) {
      const auto addrs = detail::lane_addresses(kind, mp, layouts, w, tile, cfg.word_bytes);
      auto phases = access_phases(std::span<const std::optional<std::int64_t>>(addrs), cfg);
      int degree = 0;
      for (const auto& p : phases) degree = std::max(degree, p.degree);
      ++sum.instances;
      if (degree > sum.max_degree) {
        sum.max_degree = degree;
        sum.worst_warp = w;
        sum.worst_tile = tile;
        sum.phases = std::move(phases);
      }
      return true;
    });
    report.max_degree = std::max(report.max_degree, sum.max_degree);
  }
  report.conflict_free = report.max_degree <= 1;
  return report;
}

// ---------------------------------------------------------------------------
// Mapping search.
//
// Depth-first over (a) strided warp tilings of the m range, (b) arrangements
// of the n indices in the instruction's n slots, (c) arrangements of the k
// indices in the k slots. Arrangements are enumerated in lexicographic order
// with PAD ordered after every problem index, so the identity arrangement
// comes first. The first conflict-free candidate wins.
// ---------------------------------------------------------------------------

struct SearchStats {
  std::uint64_t nodes = 0;
  std::uint64_t budget = 0;
  std::uint64_t m_candidates = 0;
  std::uint64_t n_candidates = 0;
  std::uint64_t k_candidates = 0;
  bool exhausted = false;  // stopped because the budget ran out
};

struct SearchResult {
  std::optional<IndexMapping> mapping;
  SearchStats stats;

  bool found() const { return mapping.has_value(); }
};

// f_m for `warps` warps of one m tile each: the 8*warps slots are dealt out
// over padded rows with the given stride, rows >= m are PAD.
//   stride 1      -> m_p = m_i + 8 w
//   stride warps  -> m_p = m_i * warps + w
inline std::vector<int> strided_m_map(int m, int warps, int stride) {
  const int slots = kInstrM * warps;
  const int run = slots / stride;
  std::vector<int> f(static_cast<std::size_t>(slots));
  for (int sigma = 0; sigma < slots; ++sigma) {
    const int row = (sigma % run) * stride + sigma / run;
    f[sigma] = row < m ? row : kPad;
  }
  return f;
}

// Strides usable with strided_m_map (divisors of the slot count).
inline std::vector<int> m_map_strides(int warps) {
  const int slots = kInstrM * warps;
  std::vector<int> out;
  for (int s = 1; s <= slots; ++s)
    if (slots % s == 0) out.push_back(s);
  return out;
}

// Lexicographic arrangements of [0, extent) plus PAD in `slots` positions.
class SlotArrangements {
 public:
  SlotArrangements(int slots, int extent) : extent_(extent), values_(static_cast<std::size_t>(slots)) {
    for (int i = 0; i < slots; ++i) values_[i] = i < extent ? i : extent;  // `extent` stands for PAD
  }
  std::vector<int> current() const {
    std::vector<int> f(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) f[i] = values_[i] < extent_ ? values_[i] : kPad;
    return f;
  }
  bool advance() { return std::next_permutation(values_.begin(), values_.end()); }

 private:
  int extent_;
  std::vector<int> values_;
};

inline SearchResult search_mapping(const GemmShape& shape, const GemmLayouts& layouts,
                                   const BankConfig& cfg = {}, std::uint64_t budget = 20'000'000) {
  cfg.validate();
  if (!shape.valid()) throw ShapeError("search_mapping: shape " + shape.str() + " is not positive");
  detail::check_layout_bounds(shape, layouts);

  SearchResult result;
  result.stats.budget = budget;
  auto spend = [&]() {
    if (result.stats.nodes >= budget) {
      result.stats.exhausted = true;
      return false;
    }
    ++result.stats.nodes;
    return true;
  };

  IndexMapping cand;
  cand.shape = shape;
  cand.num_warps = ceil_div(shape.m, kInstrM);
  cand.n_tiles = ceil_div(shape.n, kInstrN);
  cand.k_tiles = ceil_div(shape.k, kInstrK);

  for (int stride : m_map_strides(cand.num_warps)) {
    if (!spend()) return result;
    ++result.stats.m_candidates;
    cand.f_m = strided_m_map(shape.m, cand.num_warps, stride);
    cand.f_n = IndexMapping::identity_slots(cand.n_slots(), shape.n);

    // k arrangements whose A-loads are clean under this f_m.
    std::vector<std::vector<int>> k_ok;
    {
      SlotArrangements ks(cand.k_slots(), shape.k);
      do {
        if (!spend()) return result;
        ++result.stats.k_candidates;
        cand.f_k = ks.current();
        if (detail::access_conflict_free(AccessKind::ALoad, cand, layouts, cfg))
          k_ok.push_back(cand.f_k);
      } while (ks.advance());
    }
    if (k_ok.empty()) continue;

    SlotArrangements ns(cand.n_slots(), shape.n);
    do {
      if (!spend()) return result;
      ++result.stats.n_candidates;
      cand.f_n = ns.current();
      if (!detail::access_conflict_free(AccessKind::CStore0, cand, layouts, cfg) ||
          !detail::access_conflict_free(AccessKind::CStore1, cand, layouts, cfg))
        continue;
      for (const auto& fk : k_ok) {
        if (!spend()) return result;
        cand.f_k = fk;
        if (detail::access_conflict_free(AccessKind::BLoad, cand, layouts, cfg)) {
          result.mapping = cand;
          return result;
        }
      }
    } while (ns.advance());
  }
  return result;
}

// Default layouts for a stage: the cyclic layouts with the smallest C column
// padding (then B padding) for which the search finds a conflict-free
// mapping. Returns the unpadded layouts and an empty mapping if none of the
// paddings up to `max_pad` succeed.
struct LayoutChoice {
  GemmLayouts layouts;
  int c_pad = 0;
  int b_pad = 0;
  SearchResult search;
};

inline LayoutChoice choose_cyclic_layouts(const GemmShape& shape, const BankConfig& cfg = {},
                                          std::uint64_t budget = 20'000'000, int max_pad = 8) {
  LayoutChoice choice;
  std::uint64_t spent = 0;
  for (int total = 0; total <= 2 * max_pad; ++total) {
    for (int b_pad = 0; b_pad <= std::min(total, max_pad); ++b_pad) {
      const int c_pad = total - b_pad;
      if (c_pad > max_pad) continue;
      GemmLayouts l = cyclic_layouts(shape, c_pad, b_pad);
      const std::uint64_t left = budget > spent ? budget - spent : 0;
      SearchResult r = search_mapping(shape, l, cfg, left);
      spent += r.stats.nodes;
      if (r.found()) {
        choice = {std::move(l), c_pad, b_pad, std::move(r)};
        choice.search.stats.nodes = spent;
        return choice;
      }
      if (r.stats.exhausted) {
        choice.layouts = cyclic_layouts(shape);
        choice.search = std::move(r);
        choice.search.stats.nodes = spent;
        return choice;
      }
    }
  }
  choice.layouts = cyclic_layouts(shape);
  choice.search.stats.nodes = spent;
  choice.search.stats.budget = budget;
  return choice;
}

// Mapping set for the MMA backend: searched conflict-free mappings where the
// search succeeds, blocked mappings otherwise.
inline MappingSet build_mapping_set(const std::vector<GemmShape>& shapes, const BankConfig& cfg = {},
                                    std::uint64_t budget = 20'000'000) {
  MappingSet set;
  for (const auto& s : shapes) {
    if (set.contains(s)) continue;
    auto choice = choose_cyclic_layouts(s, cfg, budget);
    set.add(choice.search.found() ? *choice.search.mapping : IndexMapping::blocked(s));
  }
  return set;
}

}  // namespace femma
