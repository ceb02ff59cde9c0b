#include <gtest/gtest.h>

#include <random>

#include "mwd/error.hpp"
#include "mwd/traffic.hpp"

namespace mwd {
namespace {

TEST(Lru, ColdMissesAndHits) {
  LruCache c(2, 8);
  c.read(0);
  c.read(1);
  c.read(0);
  EXPECT_EQ(c.misses(), 2u);
  c.read(2);  // evicts 1
  c.read(0);
  EXPECT_EQ(c.misses(), 3u);
  c.read(1);
  EXPECT_EQ(c.misses(), 4u);
  EXPECT_EQ(c.accesses(), 6u);
}

TEST(Lru, WriteBackOnEvictionAndFlush) {
  LruCache c(1, 4);
  c.write(0);
  c.read(1);  // evicts dirty 0
  EXPECT_EQ(c.writebacks(), 1u);
  c.write(1);
  c.flush();
  EXPECT_EQ(c.writebacks(), 2u);
  c.flush();
  EXPECT_EQ(c.writebacks(), 2u);
}

// LRU is a stack algorithm: on a fixed trace, a larger cache never misses more.
TEST(Lru, InclusionProperty) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> addr(0, 63);
  std::vector<std::pair<int, bool>> trace(4000);
  for (auto& t : trace) t = {addr(rng), rng() % 3 == 0};
  std::uint64_t prev_miss = ~0ull, prev_wb = ~0ull;
  for (std::size_t cap = 1; cap <= 64; ++cap) {
    LruCache c(cap, 64);
    for (auto [a, w] : trace) w ? c.write(a) : c.read(a);
    c.flush();
    EXPECT_LE(c.misses(), prev_miss);
    EXPECT_LE(c.writebacks(), prev_wb);
    prev_miss = c.misses();
    prev_wb = c.writebacks();
  }
}

TEST(Traffic, HugeCacheSeesCompulsoryTrafficOnly) {
  const auto s = make_spec(StencilKind::k7ptConst);
  const auto r = simulate_traffic(s, 16, 16, 16, {16, 16}, std::size_t{1} << 30);
  const double lups = 16.0 * 16 * 16;
  // Read both padded arrays once, write back the destination's interior lines.
  EXPECT_EQ(r.lups, 16 * 16 * 16);
  EXPECT_GE(r.bytes_per_lup, 16.0);
  EXPECT_LE(r.bytes_per_lup, 24.0 * 1.6);
  EXPECT_DOUBLE_EQ(r.bytes_per_lup, r.total_bytes / lups);
}

TEST(Traffic, SevenPointRegimes) {
  const auto s = make_spec(StencilKind::k7ptConst);
  const BlockSpec full{64, 64};
  const auto layers = simulate_traffic(s, 64, 64, 256, full, 384 * 1024);
  const auto rows = simulate_traffic(s, 64, 64, 256, full, 24 * 1024);
  const auto none = simulate_traffic(s, 64, 64, 256, full, 1024);
  EXPECT_NEAR(layers.bytes_per_lup, 24.0, 24.0 * 0.15);
  EXPECT_NEAR(rows.bytes_per_lup, 40.0, 40.0 * 0.15);
  EXPECT_NEAR(none.bytes_per_lup, 56.0, 56.0 * 0.15);
  EXPECT_EQ(layers.predicted_regime, Regime::kLayersFit);
  EXPECT_EQ(rows.predicted_regime, Regime::kRowsFit);
  EXPECT_EQ(none.predicted_regime, Regime::kNoneFit);
}

TEST(Traffic, SpatialBlockingRestoresLayerReuse) {
  const auto s = make_spec(StencilKind::k7ptConst);
  // 3 layers of the full 64x64 plane exceed 48 KiB; 64x8 blocks do not.
  const auto full = simulate_traffic(s, 64, 64, 64, {64, 64}, 48 * 1024);
  const auto blocked = simulate_traffic(s, 64, 64, 64, {64, 8}, 48 * 1024);
  EXPECT_GT(full.bytes_per_lup, 36.0);
  EXPECT_LT(blocked.bytes_per_lup, full.bytes_per_lup);
  EXPECT_LT(blocked.bytes_per_lup, 24.0 * 1.35);
}

TEST(Traffic, MonotoneInCacheSize) {
  for (auto k : kAllStencils) {
    const auto s = make_spec(k);
    double prev = 1e300;
    for (std::size_t kib : {1, 4, 16, 64, 256, 1024, 4096}) {
      const auto r = simulate_traffic(s, 24, 24, 24, {24, 24}, kib * 1024);
      EXPECT_LE(r.bytes_per_lup, prev) << to_string(k) << " at " << kib << " KiB";
      prev = r.bytes_per_lup;
    }
  }
}

TEST(Traffic, BudgetExceededIsResourceError) {
  TrafficOptions o;
  o.max_accesses = 1000;
  EXPECT_THROW(simulate_traffic(make_spec(StencilKind::k7ptConst), 16, 16, 16, {16, 16}, 4096, o),
               ResourceError);
}

}  // namespace
}  // namespace mwd
