#include <gtest/gtest.h>

#include <random>

#include "femma/bank_model.hpp"
#include "oracles.hpp"

using namespace femma;

namespace {

IndexMapping hand_mapping() {
  IndexMapping mp = IndexMapping::blocked({25, 5, 4});
  mp.f_n = {0, 2, 1, 3, 4, kPad, kPad, kPad};
  return mp;
}

using Lanes = std::array<std::optional<std::int64_t>, kWarpSize>;

}  // namespace

TEST(BankModel, BankOfAddress) {
  EXPECT_EQ(bank_of(0), 0);
  EXPECT_EQ(bank_of(4), 1);
  EXPECT_EQ(bank_of(124), 31);
  EXPECT_EQ(bank_of(128), 0);
  EXPECT_EQ(bank_of(132), 1);
}

TEST(BankModel, ContiguousWordsAreConflictFree) {
  std::vector<std::int64_t> a(32);
  for (int l = 0; l < 32; ++l) a[l] = 8 * l;
  for (const auto& ph : access_phases(std::span<const std::int64_t>(a))) {
    EXPECT_EQ(ph.degree, 1);
    EXPECT_EQ(ph.distinct_addresses, 16);
  }
}

TEST(BankModel, BroadcastIsNotAConflict) {
  std::vector<std::int64_t> a(32, 64);
  const auto ph = access_phases(std::span<const std::int64_t>(a));
  EXPECT_EQ(ph[0].degree, 1);
  EXPECT_EQ(ph[0].distinct_addresses, 1);
}

TEST(BankModel, StrideOf128BytesSerializes) {
  std::vector<std::int64_t> a(32);
  for (int l = 0; l < 32; ++l) a[l] = 128 * l;
  const auto ph = access_phases(std::span<const std::int64_t>(a));
  EXPECT_EQ(ph[0].degree, 16);
  EXPECT_EQ(ph[1].degree, 16);
}

TEST(BankModel, MisalignedAddressRejected) {
  std::vector<std::int64_t> a(32, 0);
  a[5] = 12;
  EXPECT_THROW(access_phases(std::span<const std::int64_t>(a)), AlignmentError);
  std::vector<std::int64_t> short_warp(16, 0);
  EXPECT_THROW(access_phases(std::span<const std::int64_t>(short_warp)), LayoutError);
}

TEST(BankModel, MatchesBruteForceOnRandomWarps) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> word(0, 96), pad(0, 9);
  for (int trial = 0; trial < 3000; ++trial) {
    Lanes lanes;
    for (auto& l : lanes)
      if (pad(rng) != 0) l = 8LL * word(rng);
    const auto phases = access_phases(std::span<const std::optional<std::int64_t>>(lanes));
    for (int ph = 0; ph < 2; ++ph) {
      std::vector<std::optional<std::int64_t>> half(lanes.begin() + 16 * ph, lanes.begin() + 16 * (ph + 1));
      EXPECT_EQ(phases[ph].degree, oracle::brute_force_degree(half));
    }
  }
}

TEST(BankModel, HandMappingIsConflictFree) {
  const GemmShape s{25, 5, 4};
  const auto r = verify_mapping(s, hand_mapping(), cyclic_layouts(s));
  EXPECT_TRUE(r.conflict_free);
  for (const auto& a : r.accesses) {
    EXPECT_EQ(a.max_degree, 1) << access_name(a.kind);
    for (const auto& ph : a.phases) {
      // 16 lanes touch 16 distinct words, i.e. all 32 banks once.
      int used = 0;
      for (int h : ph.histogram) used += h;
      EXPECT_EQ(used, 2 * ph.distinct_addresses);
    }
  }
}

TEST(BankModel, BlockedIdentityMappingConflictsForC) {
  const GemmShape s{25, 5, 4};
  const auto r = verify_mapping(s, IndexMapping::blocked(s), cyclic_layouts(s));
  EXPECT_FALSE(r.conflict_free);
  EXPECT_EQ(r.access(AccessKind::ALoad).max_degree, 1);
  EXPECT_EQ(r.access(AccessKind::BLoad).max_degree, 1);
  EXPECT_GT(std::max(r.access(AccessKind::CStore0).max_degree, r.access(AccessKind::CStore1).max_degree), 1);
}

TEST(BankModel, CorruptedMappingReportsConflict) {
  const GemmShape s{25, 5, 4};
  IndexMapping mp = hand_mapping();
  std::swap(mp.f_n[1], mp.f_n[2]);  // back to the identity order
  EXPECT_FALSE(verify_mapping(s, mp, cyclic_layouts(s)).conflict_free);
  mp.f_n[1] = mp.f_n[0];
  EXPECT_THROW(verify_mapping(s, mp, cyclic_layouts(s)), CoverageError);
}

TEST(BankModel, MiddleContractedLayoutConflicts) {
  // Contracting the middle index of a 5x4x5 tensor: stride 5 words between k.
  const GemmShape s{25, 5, 4};
  EXPECT_FALSE(verify_mapping(s, hand_mapping(), middle_contracted_layouts(s, 5)).conflict_free);
  const auto res = search_mapping(s, middle_contracted_layouts(s, 5));
  EXPECT_FALSE(res.found());
  EXPECT_FALSE(res.stats.exhausted);
}

TEST(BankModel, LayoutBoundsChecked) {
  const GemmShape s{25, 5, 4};
  EXPECT_THROW(verify_mapping(s, hand_mapping(), cyclic_layouts({8, 5, 4})), LayoutError);
  EXPECT_THROW(middle_contracted_layouts(s, 7), LayoutError);
}

TEST(BankModel, StridedMMaps) {
  EXPECT_EQ(strided_m_map(25, 4, 1), IndexMapping::blocked({25, 5, 4}).f_m);
  const auto f = strided_m_map(25, 4, 4);
  for (int w = 0; w < 4; ++w)
    for (int i = 0; i < 8; ++i) {
      const int row = i * 4 + w;
      EXPECT_EQ(f[w * 8 + i], row < 25 ? row : kPad);
    }
}

TEST(BankModel, SearchFindsAllReferenceShapes) {
  for (const auto& s : reference_shapes()) {
    const LayoutChoice c = choose_cyclic_layouts(s);
    ASSERT_TRUE(c.search.found()) << s.str();
    EXPECT_TRUE(verify_mapping(s, *c.search.mapping, c.layouts).conflict_free) << s.str();
    std::mt19937_64 rng(1);
    const Matrix A = oracle::random_matrix(s.m, s.k, rng), B = oracle::random_matrix(s.k, s.n, rng);
    const Matrix C = tiled_gemm(s, *c.search.mapping, A, B);
    const auto ref = oracle::gemm_ld(A, B);
    std::vector<double> refd(ref.begin(), ref.end());
    EXPECT_LE(oracle::rel_diff(C.data, refd), 1e-14);
  }
}

TEST(BankModel, UnpaddedCWithSixteenRowsIsImpossible) {
  for (GemmShape s : {GemmShape{16, 4, 5}, GemmShape{16, 5, 4}}) {
    const auto r = search_mapping(s, cyclic_layouts(s));
    EXPECT_FALSE(r.found()) << s.str();
    EXPECT_FALSE(r.stats.exhausted);
  }
  EXPECT_EQ(choose_cyclic_layouts({16, 4, 5}).c_pad, 1);
  EXPECT_EQ(choose_cyclic_layouts({16, 5, 4}).c_pad, 2);
}

TEST(BankModel, SquareInstructionShapeGetsIdentity) {
  const GemmShape s{8, 8, 4};
  const LayoutChoice c = choose_cyclic_layouts(s);
  ASSERT_TRUE(c.search.found());
  EXPECT_EQ(*c.search.mapping, IndexMapping::blocked(s));
}

TEST(BankModel, SearchBudgetExhaustion) {
  const GemmShape s{1000, 1000, 1000};
  const auto r = search_mapping(s, cyclic_layouts(s), {}, 1);
  EXPECT_FALSE(r.found());
  EXPECT_TRUE(r.stats.exhausted);
  EXPECT_EQ(r.stats.nodes, 1u);
}

TEST(BankModel, SearchIsDeterministic) {
  const GemmShape s{25, 5, 5};
  const auto a = choose_cyclic_layouts(s), b = choose_cyclic_layouts(s);
  EXPECT_EQ(*a.search.mapping, *b.search.mapping);
  EXPECT_EQ(a.search.stats.nodes, b.search.stats.nodes);
}

TEST(BankModel, BuildMappingSetFallsBackToBlocked) {
  const GemmShape big{64, 64, 64};
  const MappingSet set = build_mapping_set({{25, 5, 4}, big}, {}, 10);
  EXPECT_EQ(set.at(big), IndexMapping::blocked(big));
  EXPECT_TRUE(set.contains({25, 5, 4}));
}
