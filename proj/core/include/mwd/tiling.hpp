#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mwd {

enum class TileKind { kFull, kLeftHalf, kRightHalf };

const char* to_string(TileKind k);

/// Cross-section of a tile at one time level: y in [y_begin, y_end).
/// Level t means the update that produces time step t + 1 from t.
struct LevelSpan {
  int t;
  int y_begin;
  int y_end;
  int width() const { return y_end - y_begin; }
};

/// One diamond of the y-t tessellation, clipped to the domain and to [0, T).
struct DiamondTile {
  int id = -1;
  int row = 0;        ///< tiles of one row share a base time and are independent
  int col = 0;        ///< position within the row, ascending y
  int t_base = 0;     ///< first level updated (after clipping)
  int y_center = 0;   ///< apex y coordinate of the unclipped diamond
  TileKind kind = TileKind::kFull;
  std::vector<int> parents;
  std::vector<int> children;
  std::vector<LevelSpan> levels;  ///< bottom to top, all non-empty

  int y_min() const;
  int y_max() const;  ///< exclusive
  std::int64_t area() const;
  const LevelSpan* level(int t) const;
};

/// Diamond tiling of the (y, t) plane with edge slopes of +-1/R.
///
/// Tiles are the images of D_w x D_w squares under u = y + R t, v = y - R t.
/// Each tile owns the half-open square [i D_w, (i+1) D_w) x [j D_w, (j+1) D_w)
/// in (u, v), so points on a shared edge belong to exactly one tile (the
/// one whose lower-left edges contain them). A diamond spans D_w / R levels
/// and consecutive rows are offset by half_height = D_w / (2R) levels.
class Tessellation {
 public:
  int ny() const { return ny_; }
  int d_w() const { return d_w_; }
  int radius() const { return r_; }
  int t_total() const { return t_total_; }
  int half_height() const { return d_w_ / (2 * r_); }

  const std::vector<DiamondTile>& tiles() const { return tiles_; }
  const DiamondTile& tile(int id) const { return tiles_[id]; }
  int tile_count() const { return static_cast<int>(tiles_.size()); }
  const std::vector<std::vector<int>>& rows() const { return rows_; }

  /// Tile id covering (y, t); y in [0, ny), t in [0, T).
  int owner(int y, int t) const;

 private:
  friend Tessellation build_tessellation(int ny, int t_total, int d_w, int r);

  int ny_ = 0, d_w_ = 0, r_ = 1, t_total_ = 0;
  int first_row_ = 0;
  std::vector<DiamondTile> tiles_;
  std::vector<std::vector<int>> rows_;
  std::vector<int> row_first_j_;
};

/// Throws UsageError when d_w is not a multiple of 2r, ny is not a multiple
/// of d_w, or T < 1.
Tessellation build_tessellation(int ny, int t_total, int d_w, int r);

/// One wavefront stage: level t updated for y in [y_begin, y_end) and
/// z in [z_begin, z_end), full x range.
struct PlanEntry {
  int step;
  int t;
  int y_begin, y_end;
  int z_begin, z_end;
  std::int64_t rows() const {
    return static_cast<std::int64_t>(y_end - y_begin) * (z_end - z_begin);
  }
};

/// Traversal of one extruded diamond along z.
///
/// At wavefront step s the tile's l-th level updates z in
/// [s*W - l*R, s*W - l*R + W) clipped to [0, nz), where W = n_f + 1 is the
/// number of frontlines advanced per step. Entries are step-major with
/// levels bottom-to-top; empty (fully clipped) stages are omitted.
struct WavefrontPlan {
  int tile = -1;
  int group_size = 1;
  int n_f = 0;
  int frontlines_per_thread = 1;
  int z_steps = 0;
  int radius = 1;
  std::vector<PlanEntry> entries;

  std::int64_t row_updates() const;
};

WavefrontPlan build_wavefront_plan(const DiamondTile& tile, const Tessellation& tess, int nz,
                                   int n_f, int group_size);

/// Rows [first, last) of an entry handled by `member`, counting rows in
/// z-major order. The first (rows mod group_size) members get one extra row.
struct RowShare {
  std::int64_t first;
  std::int64_t last;
};
RowShare member_share(const PlanEntry& e, int group_size, int member);

/// Line-oriented text form: a header line followed by one
/// "step t y_begin y_end z_begin z_end" tuple per entry.
void write_plan(std::ostream& os, const WavefrontPlan& plan);
WavefrontPlan read_plan(std::istream& is);

enum class EventType { kStart, kFinish };

struct ScheduleEvent {
  int tile;
  EventType type;
};

struct DependencyReport {
  bool ok = true;
  int tile = -1;
  int parent = -1;
  std::string message;
};

/// Verifies an ordered start/finish log: each tile starts once, after all
/// its parents finished, and finishes after it started. A tile set subset
/// may be checked by passing only its events; tiles never started are not
/// an error unless `require_all` is set.
DependencyReport dependency_check(const Tessellation& tess,
                                  const std::vector<ScheduleEvent>& events,
                                  bool require_all = false);

}  // namespace mwd
