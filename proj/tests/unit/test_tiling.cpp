#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "mwd/error.hpp"
#include "mwd/perfmodel.hpp"
#include "mwd/tiling.hpp"

namespace mwd {
namespace {

// Counts tile memberships of every (y, t) point by walking the tile levels.
std::vector<int> cover_counts(const Tessellation& tess) {
  std::vector<int> hits(static_cast<std::size_t>(tess.ny()) * tess.t_total(), 0);
  for (const auto& tile : tess.tiles()) {
    for (const auto& lv : tile.levels) {
      for (int y = lv.y_begin; y < lv.y_end; ++y) ++hits[lv.t * tess.ny() + y];
    }
  }
  return hits;
}

TEST(Tiling, SmallExample) {
  const auto tess = build_tessellation(8, 4, 4, 1);
  ASSERT_GE(tess.rows().size(), 2u);
  const auto& row0 = tess.rows()[0];
  const auto& row1 = tess.rows()[1];
  ASSERT_EQ(row0.size(), 2u);
  for (int id : row0) EXPECT_EQ(tess.tile(id).kind, TileKind::kFull);
  ASSERT_EQ(row1.size(), 3u);
  EXPECT_EQ(tess.tile(row1[0]).kind, TileKind::kLeftHalf);
  EXPECT_EQ(tess.tile(row1[1]).kind, TileKind::kFull);
  EXPECT_EQ(tess.tile(row1[2]).kind, TileKind::kRightHalf);
  for (int h : cover_counts(tess)) EXPECT_EQ(h, 1);
  // The interior tile of row 1 depends on both tiles of row 0; halves on one.
  EXPECT_EQ(tess.tile(row1[1]).parents.size(), 2u);
  EXPECT_EQ(tess.tile(row1[0]).parents.size(), 1u);
  EXPECT_EQ(tess.tile(row1[2]).parents.size(), 1u);
  EXPECT_EQ(tess.half_height(), 2);
}

TEST(Tiling, PreconditionsNamed) {
  try {
    build_tessellation(16, 4, 6, 4);
    FAIL();
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("multiple of 2R"), std::string::npos);
  }
  EXPECT_THROW(build_tessellation(10, 4, 4, 1), UsageError);
  EXPECT_THROW(build_tessellation(8, 0, 4, 1), UsageError);
}

TEST(Tiling, TilesPerRowAtScale) {
  const auto tess = build_tessellation(768, 8, 4, 1);
  // Even rows hold full tiles only.
  EXPECT_EQ(tess.rows()[2].size(), 192u);
  EXPECT_EQ(192 / 16, 12);
}

// Exhaustive cover and DAG structure over the whole precondition space.
TEST(Tiling, ExactCoverEnumeration) {
  int cases = 0;
  for (int r : {1, 4}) {
    for (int d = 2 * r; d <= 64; d += 2 * r) {
      for (int ny = d; ny <= 64; ny += d) {
        for (int T = 1; T <= 32; ++T) {
          const auto tess = build_tessellation(ny, T, d, r);
          for (int h : cover_counts(tess)) ASSERT_EQ(h, 1) << ny << " " << T << " " << d << " " << r;
          for (const auto& tile : tess.tiles()) {
            ASSERT_LE(tile.parents.size(), 2u);
            ASSERT_LE(tile.children.size(), 2u);
            for (int p : tile.parents) ASSERT_EQ(tess.tile(p).row, tile.row - 1);
            for (const auto& lv : tile.levels) {
              for (int y = lv.y_begin; y < lv.y_end; ++y) ASSERT_EQ(tess.owner(y, lv.t), tile.id);
            }
          }
          ++cases;
        }
      }
    }
  }
  EXPECT_GT(cases, 1000);
}

// Every point a tile reads at level t (y +- R at time t) was produced by the
// tile itself, by one of its parents, or is initial / boundary data.
TEST(Tiling, ReadsComeFromParentsOrSelf) {
  for (int r : {1, 4}) {
    for (int d = 2 * r; d <= 32; d += 2 * r) {
      for (int T : {1, 3, 7, 16}) {
        const int ny = 2 * d;
        const auto tess = build_tessellation(ny, T, d, r);
        for (const auto& tile : tess.tiles()) {
          for (const auto& lv : tile.levels) {
            if (lv.t == 0) continue;
            for (int y = std::max(0, lv.y_begin - r); y < std::min(ny, lv.y_end + r); ++y) {
              const int producer = tess.owner(y, lv.t - 1);
              const bool ok = producer == tile.id ||
                              std::count(tile.parents.begin(), tile.parents.end(), producer);
              ASSERT_TRUE(ok) << "tile " << tile.id << " t=" << lv.t << " y=" << y;
            }
          }
        }
      }
    }
  }
}

TEST(Tiling, RowsAreIndependent) {
  const auto tess = build_tessellation(32, 20, 8, 1);
  for (const auto& tile : tess.tiles()) {
    for (int c : tile.children) EXPECT_EQ(tess.tile(c).row, tile.row + 1);
  }
}

TEST(Tiling, EdgeSlopeIsRadius) {
  const auto tess = build_tessellation(64, 32, 16, 4);
  for (const auto& tile : tess.tiles()) {
    if (tile.kind != TileKind::kFull) continue;
    for (std::size_t i = 1; i < tile.levels.size(); ++i) {
      const int step = std::abs(tile.levels[i].width() - tile.levels[i - 1].width());
      if (step != 0) EXPECT_EQ(step, 8);
    }
  }
}

TEST(Tiling, PlanWidthsFromModel) {
  const auto tess = build_tessellation(16, 8, 8, 1);
  const auto& tile = tess.tile(tess.rows()[1][1]);
  ASSERT_EQ(tile.kind, TileKind::kFull);
  auto live_levels = [&](const WavefrontPlan& p) {
    int z_lo = 1 << 30, z_hi = -1;
    for (const auto& e : p.entries) {
      if (e.step != p.z_steps / 2) continue;
      z_lo = std::min(z_lo, e.z_begin);
      z_hi = std::max(z_hi, e.z_end);
    }
    return z_hi - z_lo;
  };
  const auto p0 = build_wavefront_plan(tile, tess, 64, 0, 1);
  EXPECT_EQ(live_levels(p0), wavefront_width(8, 0, 1));
  EXPECT_EQ(live_levels(p0), 7);
  const auto p3 = build_wavefront_plan(tile, tess, 64, 3, 2);
  EXPECT_EQ(p3.frontlines_per_thread, 2);
  EXPECT_EQ(live_levels(p3), 10);
}

TEST(Tiling, PlanZOffsetsShiftByRadius) {
  const auto tess = build_tessellation(32, 16, 16, 4);
  const auto& tile = tess.tile(tess.rows()[1][1]);
  const auto plan = build_wavefront_plan(tile, tess, 200, 2, 1);
  for (const auto& e : plan.entries) {
    const int level = e.t - tile.levels.front().t;
    if (e.z_begin > 0 && e.z_end < 200) EXPECT_EQ(e.z_begin, e.step * 3 - level * 4);
  }
}

// Each (t, y, z) of a tile appears exactly once across its plan.
TEST(Tiling, PlanVolumeConservation) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const int r = trial % 2 ? 4 : 1;
    const int d = 2 * r * (1 + rng() % 4);
    const int ny = d * (1 + rng() % 3);
    const int T = 1 + rng() % 12;
    const int nz = 1 + rng() % 20;
    const int nf = rng() % 4;
    const int gs = 1 + rng() % 4;
    const auto tess = build_tessellation(ny, T, d, r);
    std::int64_t total = 0, area = 0;
    for (const auto& tile : tess.tiles()) {
      const auto plan = build_wavefront_plan(tile, tess, nz, nf, gs);
      std::vector<int> hits(static_cast<std::size_t>(T) * ny * nz, 0);
      for (const auto& e : plan.entries) {
        for (int z = e.z_begin; z < e.z_end; ++z) {
          for (int y = e.y_begin; y < e.y_end; ++y) ++hits[(e.t * ny + y) * nz + z];
        }
        std::int64_t shares = 0;
        for (int m = 0; m < gs; ++m) {
          const auto s = member_share(e, gs, m);
          shares += s.last - s.first;
          EXPECT_LE(s.last - s.first, e.rows() / gs + 1);
        }
        EXPECT_EQ(shares, e.rows());
      }
      for (const auto& lv : tile.levels) {
        for (int y = lv.y_begin; y < lv.y_end; ++y) {
          for (int z = 0; z < nz; ++z) ASSERT_EQ(hits[(lv.t * ny + y) * nz + z], 1);
        }
      }
      total += plan.row_updates();
      area += tile.area();
    }
    EXPECT_EQ(total, area * nz);
    EXPECT_EQ(area, static_cast<std::int64_t>(ny) * T);
  }
}

TEST(Tiling, MemberShareRemainder) {
  const PlanEntry e{0, 0, 0, 7, 0, 1};
  EXPECT_EQ(member_share(e, 3, 0).first, 0);
  EXPECT_EQ(member_share(e, 3, 0).last, 3);
  EXPECT_EQ(member_share(e, 3, 1).last, 5);
  EXPECT_EQ(member_share(e, 3, 2).last, 7);
}

TEST(Tiling, PlanTextRoundTrip) {
  const auto tess = build_tessellation(16, 6, 8, 1);
  const auto plan = build_wavefront_plan(tess.tile(3), tess, 9, 2, 2);
  std::stringstream ss;
  write_plan(ss, plan);
  const auto back = read_plan(ss);
  EXPECT_EQ(back.tile, plan.tile);
  EXPECT_EQ(back.group_size, 2);
  EXPECT_EQ(back.n_f, 2);
  EXPECT_EQ(back.z_steps, plan.z_steps);
  EXPECT_EQ(back.frontlines_per_thread, plan.frontlines_per_thread);
  ASSERT_EQ(back.entries.size(), plan.entries.size());
  for (std::size_t i = 0; i < plan.entries.size(); ++i) {
    EXPECT_EQ(back.entries[i].t, plan.entries[i].t);
    EXPECT_EQ(back.entries[i].z_end, plan.entries[i].z_end);
  }
  std::stringstream bad("no header\n");
  EXPECT_THROW(read_plan(bad), ProtocolError);
}

std::vector<ScheduleEvent> random_schedule(const Tessellation& tess, std::mt19937& rng) {
  std::vector<int> remaining(tess.tile_count());
  std::vector<int> ready, running;
  for (const auto& t : tess.tiles()) {
    remaining[t.id] = static_cast<int>(t.parents.size());
    if (remaining[t.id] == 0) ready.push_back(t.id);
  }
  std::vector<ScheduleEvent> log;
  while (!ready.empty() || !running.empty()) {
    const bool start = !ready.empty() && (running.empty() || rng() % 2);
    if (start) {
      const auto i = rng() % ready.size();
      log.push_back({ready[i], EventType::kStart});
      running.push_back(ready[i]);
      ready.erase(ready.begin() + i);
    } else {
      const auto i = rng() % running.size();
      const int id = running[i];
      running.erase(running.begin() + i);
      log.push_back({id, EventType::kFinish});
      for (int c : tess.tile(id).children) {
        if (--remaining[c] == 0) ready.push_back(c);
      }
    }
  }
  return log;
}

TEST(Tiling, DependencyCheckAcceptsTopologicalSchedules) {
  std::mt19937 rng(99);
  const auto tess = build_tessellation(32, 12, 4, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto log = random_schedule(tess, rng);
    const auto rep = dependency_check(tess, log, true);
    ASSERT_TRUE(rep.ok) << rep.message;
  }
}

TEST(Tiling, DependencyCheckSerialRows) {
  const auto tess = build_tessellation(16, 9, 4, 1);
  std::vector<ScheduleEvent> log;
  for (const auto& row : tess.rows()) {
    for (int id : row) {
      log.push_back({id, EventType::kStart});
      log.push_back({id, EventType::kFinish});
    }
  }
  EXPECT_TRUE(dependency_check(tess, log, true).ok);
}

TEST(Tiling, DependencyCheckFlagsViolation) {
  const auto tess = build_tessellation(8, 4, 4, 1);
  const int child = tess.rows()[1][1];
  const int parent = tess.tile(child).parents[0];
  std::vector<ScheduleEvent> log = {{parent, EventType::kStart}, {child, EventType::kStart}};
  const auto rep = dependency_check(tess, log);
  EXPECT_FALSE(rep.ok);
  EXPECT_EQ(rep.tile, child);
  EXPECT_EQ(rep.parent, parent);
  std::vector<ScheduleEvent> twice = {{parent, EventType::kStart}, {parent, EventType::kStart}};
  EXPECT_FALSE(dependency_check(tess, twice).ok);
  EXPECT_FALSE(dependency_check(tess, {}, true).ok);
}

// Replays plans under random interleavings of concurrently runnable tiles
// while tracking the time level held by each (z, y) row in either buffer.
// A read of level t is valid if the row currently holds t or t + 1 (the
// latter sits in the other buffer, so t is still intact).
TEST(Tiling, ShadowVersionStamps) {
  std::mt19937 rng(1234);
  for (int trial = 0; trial < 30; ++trial) {
    const int r = trial % 3 == 2 ? 4 : 1;
    const int d = 4 * r * (1 + trial % 2);
    const int ny = d * 2;
    const int nz = 3 + trial % 7;
    const int T = 1 + trial % 11;
    const int nf = trial % 3;
    const auto tess = build_tessellation(ny, T, d, r);
    std::vector<WavefrontPlan> plans;
    for (const auto& t : tess.tiles()) plans.push_back(build_wavefront_plan(t, tess, nz, nf, 1));
    std::vector<int> stamp(static_cast<std::size_t>(ny) * nz, 0);
    std::vector<int> remaining(tess.tile_count());
    std::vector<int> ready;
    std::vector<std::pair<int, std::size_t>> running;
    for (const auto& t : tess.tiles()) {
      remaining[t.id] = static_cast<int>(t.parents.size());
      if (!remaining[t.id]) ready.push_back(t.id);
    }
    while (!ready.empty() || !running.empty()) {
      if (!ready.empty() && (running.empty() || rng() % 3 == 0)) {
        const auto i = rng() % ready.size();
        running.push_back({ready[i], 0});
        ready.erase(ready.begin() + i);
        continue;
      }
      const auto i = rng() % running.size();
      auto& [id, next] = running[i];
      const auto& e = plans[id].entries[next++];
      for (int z = e.z_begin; z < e.z_end; ++z) {
        for (int y = e.y_begin; y < e.y_end; ++y) {
          for (int k = -r; k <= r; ++k) {
            const int yy = y + k, zz = z + k;
            if (yy >= 0 && yy < ny) {
              const int s = stamp[z * ny + yy];
              ASSERT_TRUE(s == e.t || s == e.t + 1) << "y-read stale at t=" << e.t;
            }
            if (zz >= 0 && zz < nz) {
              const int s = stamp[zz * ny + y];
              ASSERT_TRUE(s == e.t || s == e.t + 1) << "z-read stale at t=" << e.t;
            }
          }
          ASSERT_EQ(stamp[z * ny + y], e.t);
        }
      }
      // Writes become visible after the whole entry, as with a group barrier.
      for (int z = e.z_begin; z < e.z_end; ++z) {
        for (int y = e.y_begin; y < e.y_end; ++y) stamp[z * ny + y] = e.t + 1;
      }
      if (next == plans[id].entries.size()) {
        for (int c : tess.tile(id).children) {
          if (--remaining[c] == 0) ready.push_back(c);
        }
        running.erase(running.begin() + i);
      }
    }
    for (int s : stamp) ASSERT_EQ(s, T);
  }
}

}  // namespace
}  // namespace mwd
