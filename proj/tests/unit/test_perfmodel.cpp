#include <gtest/gtest.h>

#include "mwd/error.hpp"
#include "mwd/perfmodel.hpp"

namespace mwd {
namespace {

constexpr double kMiB = 1024.0 * 1024.0;

TEST(Perfmodel, CodeBalanceTable) {
  const auto s7 = make_spec(StencilKind::k7ptConst);
  EXPECT_EQ(code_balance(s7, Regime::kLayersFit), 24.0);
  EXPECT_EQ(code_balance(s7, Regime::kRowsFit), 40.0);
  EXPECT_EQ(code_balance(s7, Regime::kNoneFit), 56.0);
  EXPECT_EQ(code_balance(make_spec(StencilKind::k25ptConst), Regime::kLayersFit), 32.0);
  EXPECT_EQ(code_balance(make_spec(StencilKind::k7ptVar), Regime::kLayersFit), 80.0);
  EXPECT_EQ(code_balance(make_spec(StencilKind::k25ptVar), Regime::kLayersFit), 128.0);
}

TEST(Perfmodel, UnsupportedRegimeThrows) {
  EXPECT_THROW(code_balance(make_spec(StencilKind::k25ptConst), Regime::kRowsFit), UsageError);
  EXPECT_THROW(code_balance(make_spec(StencilKind::k7ptVar), Regime::kNoneFit), UsageError);
}

TEST(Perfmodel, InterleavedLayerConditionViolatedAt960) {
  const auto lc = layer_condition(make_spec(StencilKind::k7ptConst), 960, 960, 10, 25 * kMiB,
                                  Schedule::kInterleaved);
  EXPECT_EQ(lc.lhs_bytes, 88473600.0);
  EXPECT_EQ(lc.rhs_bytes, 13107200.0);
  EXPECT_FALSE(lc.satisfied);
}

TEST(Perfmodel, ContiguousLayerConditionSatisfiedAt64) {
  const auto lc = layer_condition(make_spec(StencilKind::k7ptConst), 64, 64, 1, 25 * kMiB,
                                  Schedule::kContiguous);
  EXPECT_EQ(lc.lhs_bytes, 98304.0);
  EXPECT_EQ(lc.rhs_bytes, 13107200.0);
  EXPECT_TRUE(lc.satisfied);
}

TEST(Perfmodel, InterleavedFactorGrowsWithRadius) {
  const auto lc = layer_condition(make_spec(StencilKind::k25ptConst), 100, 100, 10, 25 * kMiB,
                                  Schedule::kInterleaved);
  EXPECT_EQ(lc.lhs_bytes, 18.0 * 100 * 100 * 8);
}

TEST(Perfmodel, Roofline) {
  EXPECT_NEAR(roofline(40e9, 24) / 1e9, 1.67, 0.005);
  EXPECT_EQ(roofline(40e9, 32), 1.25e9);
  EXPECT_EQ(roofline(7.5, 7.5), 1.0);
  EXPECT_EQ(roofline(80e9, 24), 2 * roofline(40e9, 24));
  EXPECT_THROW(roofline(0, 24), UsageError);
  EXPECT_THROW(roofline(40e9, -1), UsageError);
}

TEST(Perfmodel, WavefrontWidth) {
  EXPECT_EQ(wavefront_width(8, 0, 1), 7);
  EXPECT_EQ(wavefront_width(8, 3, 1), 10);
  EXPECT_EQ(wavefront_width(16, 0, 4), 9);
  for (int d = 4; d <= 32; d += 2) {
    for (int n = 0; n < 8; ++n) EXPECT_EQ(wavefront_width(d, n, 1), d + n - 1);
  }
}

TEST(Perfmodel, CacheBlockWorkedExamples) {
  EXPECT_EQ(cache_block_bytes({8, 3, 1, 1, 1}), 92);
  // Commonly quoted as 70 for this case; the formula gives 62.
  EXPECT_EQ(cache_block_bytes({8, 0, 1, 1, 1}), 62);
  const auto big = cache_block_bytes({16, 0, 4, 15, 480 * 8});
  EXPECT_EQ(big, 5376000);
  EXPECT_NEAR(10.0 * big / kMiB, 51.0, 2.0);
}

TEST(Perfmodel, RadiusOneRouteAgrees) {
  for (int d = 4; d <= 40; d += 2) {
    for (int n = 0; n <= 6; ++n) {
      for (int nd : {1, 2, 9}) {
        const FootprintQuery q{d, n, 1, nd, 512};
        EXPECT_EQ(cache_block_bytes(q), cache_block_bytes_r1(q));
      }
    }
  }
  EXPECT_THROW(cache_block_bytes_r1({16, 0, 4, 15, 8}), UsageError);
}

TEST(Perfmodel, CacheBlockStrictlyIncreasing) {
  for (int r : {1, 4}) {
    for (int d = 4 * r; d <= 48; d += 2 * r) {
      for (int n = 0; n < 5; ++n) {
        const FootprintQuery q{d, n, r, 3, 64};
        const auto base = cache_block_bytes(q);
        EXPECT_LT(base, cache_block_bytes({d + 2 * r, n, r, 3, 64}));
        EXPECT_LT(base, cache_block_bytes({d, n + 1, r, 3, 64}));
        EXPECT_LT(base, cache_block_bytes({d, n, r, 4, 64}));
        EXPECT_LT(base, cache_block_bytes({d, n, r, 3, 65}));
      }
    }
  }
}

TEST(Perfmodel, InvalidFootprintQueries) {
  EXPECT_THROW(cache_block_bytes({2, 0, 1, 1, 1}), UsageError);
  EXPECT_THROW(cache_block_bytes({7, 0, 1, 1, 1}), UsageError);
  EXPECT_THROW(cache_block_bytes({8, -1, 1, 1, 1}), UsageError);
  EXPECT_THROW(cache_block_bytes({8, 0, 4, 15, 1}), UsageError);
}

TEST(Perfmodel, RegimePrediction) {
  const auto s = make_spec(StencilKind::k7ptConst);
  // 3 layers of 64x64 doubles = 96 KiB; 3 rows = 1.5 KiB; half the cache is usable.
  EXPECT_EQ(predict_regime(s, 64, 64, 1, 400 * 1024), Regime::kLayersFit);
  EXPECT_EQ(predict_regime(s, 64, 64, 1, 24 * 1024), Regime::kRowsFit);
  EXPECT_EQ(predict_regime(s, 64, 64, 1, 1024), Regime::kNoneFit);
  EXPECT_EQ(predict_regime(s, 64, 64, 1, 400 * 1024, 1.0), Regime::kLayersFit);
}

TEST(Perfmodel, IvyBridgeProfile) {
  const auto m = ivy_bridge_profile();
  EXPECT_EQ(m.cache_bytes, 25 * kMiB);
  EXPECT_EQ(m.mem_bw, 40e9);
  EXPECT_EQ(m.n_threads, 10);
}

}  // namespace
}  // namespace mwd
