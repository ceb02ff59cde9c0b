#include "mwd/tiling.hpp"

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "mwd/error.hpp"

namespace mwd {

namespace {

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int ceil_div(int a, int b) { return -floor_div(-a, b); }

}  // namespace

const char* to_string(TileKind k) {
  switch (k) {
    case TileKind::kFull:
      return "full";
    case TileKind::kLeftHalf:
      return "left-half";
    case TileKind::kRightHalf:
      return "right-half";
  }
  return "?";
}

int DiamondTile::y_min() const {
  int m = levels.front().y_begin;
  for (const auto& l : levels) m = std::min(m, l.y_begin);
  return m;
}

int DiamondTile::y_max() const {
  int m = levels.front().y_end;
  for (const auto& l : levels) m = std::max(m, l.y_end);
  return m;
}

std::int64_t DiamondTile::area() const {
  std::int64_t a = 0;
  for (const auto& l : levels) a += l.width();
  return a;
}

const LevelSpan* DiamondTile::level(int t) const {
  if (levels.empty() || t < levels.front().t || t > levels.back().t) return nullptr;
  return &levels[t - levels.front().t];
}

Tessellation build_tessellation(int ny, int t_total, int d_w, int r) {
  if (r < 1) throw UsageError("stencil radius must be >= 1");
  if (d_w < 2 * r || d_w % (2 * r) != 0) {
    throw UsageError("diamond width " + std::to_string(d_w) + " must be a multiple of 2R = " +
                     std::to_string(2 * r));
  }
  if (ny < 1 || ny % d_w != 0) {
    throw UsageError("ny = " + std::to_string(ny) +
                     " must be a positive multiple of the diamond width " + std::to_string(d_w));
  }
  if (t_total < 1) throw UsageError("time step count must be >= 1");

  Tessellation tess;
  tess.ny_ = ny;
  tess.d_w_ = d_w;
  tess.r_ = r;
  tess.t_total_ = t_total;
  const int h = d_w / (2 * r);
  const int k_max = floor_div(t_total - 2 + h, h);

  for (int k = 0; k <= k_max; ++k) {
    const int j_lo = ceil_div(-1 - k, 2);
    const int j_hi = floor_div(2 * ny / d_w - 1 - k, 2);
    const int t_lo = std::max(0, k * h - h + 1);
    const int t_hi = std::min(t_total - 1, k * h + h - 1);
    std::vector<int> row;
    for (int j = j_lo; j <= j_hi; ++j) {
      const int c0 = (k + 2 * j) * d_w / 2;
      DiamondTile tile;
      tile.id = static_cast<int>(tess.tiles_.size());
      tile.row = k;
      tile.col = j - j_lo;
      tile.y_center = c0 + d_w / 2;
      tile.kind = c0 < 0 ? TileKind::kLeftHalf
                         : (c0 + d_w > ny ? TileKind::kRightHalf : TileKind::kFull);
      for (int t = t_lo; t <= t_hi; ++t) {
        const int s = std::abs(t - k * h);
        const int yb = std::max(0, c0 + r * s);
        const int ye = std::min(ny, c0 + d_w - r * s);
        if (yb < ye) tile.levels.push_back({t, yb, ye});
      }
      if (tile.levels.empty()) throw InternalError("empty diamond inside the tiled range");
      tile.t_base = tile.levels.front().t;
      row.push_back(tile.id);
      tess.tiles_.push_back(std::move(tile));
    }
    tess.row_first_j_.push_back(j_lo);
    tess.rows_.push_back(std::move(row));
  }

  // Parents of (k, j) are (k-1, j) and (k-1, j+1).
  auto lookup = [&](int k, int j) -> int {
    if (k < 0 || k >= static_cast<int>(tess.rows_.size())) return -1;
    const int c = j - tess.row_first_j_[k];
    if (c < 0 || c >= static_cast<int>(tess.rows_[k].size())) return -1;
    return tess.rows_[k][c];
  };
  for (auto& tile : tess.tiles_) {
    const int j = tile.col + tess.row_first_j_[tile.row];
    for (int pj : {j, j + 1}) {
      const int p = lookup(tile.row - 1, pj);
      if (p >= 0) tile.parents.push_back(p);
    }
  }
  for (const auto& tile : tess.tiles_) {
    for (int p : tile.parents) tess.tiles_[p].children.push_back(tile.id);
  }
  return tess;
}

int Tessellation::owner(int y, int t) const {
  if (y < 0 || y >= ny_ || t < 0 || t >= t_total_) {
    throw UsageError("point outside the tessellated domain");
  }
  const int i = floor_div(y + r_ * t, d_w_);
  const int j = floor_div(y - r_ * t, d_w_);
  const int k = i - j;
  return rows_[k][j - row_first_j_[k]];
}

WavefrontPlan build_wavefront_plan(const DiamondTile& tile, const Tessellation& tess, int nz,
                                   int n_f, int group_size) {
  if (nz < 1) throw UsageError("nz must be >= 1");
  if (n_f < 0) throw UsageError("extra frontline count must be >= 0");
  if (group_size < 1) throw UsageError("group size must be >= 1");
  WavefrontPlan plan;
  plan.tile = tile.id;
  plan.group_size = group_size;
  plan.n_f = n_f;
  plan.radius = tess.radius();
  const int width = n_f + 1;
  plan.frontlines_per_thread = (width + group_size - 1) / group_size;
  const int r = tess.radius();
  const int n_levels = static_cast<int>(tile.levels.size());
  plan.z_steps = ceil_div(nz + (n_levels - 1) * r, width);
  for (int s = 0; s < plan.z_steps; ++s) {
    for (int l = 0; l < n_levels; ++l) {
      const int zb = s * width - l * r;
      const int z0 = std::max(0, zb), z1 = std::min(nz, zb + width);
      if (z0 >= z1) continue;
      const auto& lv = tile.levels[l];
      plan.entries.push_back({s, lv.t, lv.y_begin, lv.y_end, z0, z1});
    }
  }
  return plan;
}

std::int64_t WavefrontPlan::row_updates() const {
  std::int64_t n = 0;
  for (const auto& e : entries) n += e.rows();
  return n;
}

RowShare member_share(const PlanEntry& e, int group_size, int member) {
  const std::int64_t n = e.rows();
  const std::int64_t base = n / group_size, extra = n % group_size;
  const std::int64_t first = member * base + std::min<std::int64_t>(member, extra);
  return {first, first + base + (member < extra ? 1 : 0)};
}

void write_plan(std::ostream& os, const WavefrontPlan& plan) {
  os << "# wavefront-plan tile=" << plan.tile << " group_size=" << plan.group_size
     << " n_f=" << plan.n_f << " radius=" << plan.radius << " z_steps=" << plan.z_steps
     << " entries=" << plan.entries.size() << '\n';
  for (const auto& e : plan.entries) {
    os << e.step << ' ' << e.t << ' ' << e.y_begin << ' ' << e.y_end << ' ' << e.z_begin << ' '
       << e.z_end << '\n';
  }
}

WavefrontPlan read_plan(std::istream& is) {
  WavefrontPlan plan;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# wavefront-plan", 0) != 0) {
    throw ProtocolError("missing wavefront-plan header");
  }
  std::size_t expected = 0;
  std::istringstream hs(line.substr(16));
  std::string kv;
  while (hs >> kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ProtocolError("bad header field '" + kv + "'");
    const auto key = kv.substr(0, eq);
    const long value = std::stol(kv.substr(eq + 1));
    if (key == "tile") plan.tile = static_cast<int>(value);
    else if (key == "group_size") plan.group_size = static_cast<int>(value);
    else if (key == "n_f") plan.n_f = static_cast<int>(value);
    else if (key == "radius") plan.radius = static_cast<int>(value);
    else if (key == "z_steps") plan.z_steps = static_cast<int>(value);
    else if (key == "entries") expected = static_cast<std::size_t>(value);
  }
  plan.frontlines_per_thread = (plan.n_f + plan.group_size) / plan.group_size;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    PlanEntry e{};
    if (!(ls >> e.step >> e.t >> e.y_begin >> e.y_end >> e.z_begin >> e.z_end)) {
      throw ProtocolError("malformed plan line '" + line + "'");
    }
    plan.entries.push_back(e);
  }
  if (plan.entries.size() != expected) throw ProtocolError("plan entry count mismatch");
  return plan;
}

DependencyReport dependency_check(const Tessellation& tess,
                                  const std::vector<ScheduleEvent>& events, bool require_all) {
  enum : std::uint8_t { kNone, kStarted, kFinished };
  std::vector<std::uint8_t> state(tess.tile_count(), kNone);
  auto fail = [](int tile, int parent, std::string msg) {
    return DependencyReport{false, tile, parent, std::move(msg)};
  };
  for (const auto& ev : events) {
    if (ev.tile < 0 || ev.tile >= tess.tile_count()) {
      return fail(ev.tile, -1, "unknown tile id " + std::to_string(ev.tile));
    }
    auto& st = state[ev.tile];
    if (ev.type == EventType::kStart) {
      if (st != kNone) return fail(ev.tile, -1, "tile started twice");
      for (int p : tess.tile(ev.tile).parents) {
        if (state[p] != kFinished) {
          return fail(ev.tile, p,
                      "tile " + std::to_string(ev.tile) + " started before parent " +
                          std::to_string(p) + " finished");
        }
      }
      st = kStarted;
    } else {
      if (st != kStarted) return fail(ev.tile, -1, "tile finished without a matching start");
      st = kFinished;
    }
  }
  if (require_all) {
    for (int id = 0; id < tess.tile_count(); ++id) {
      if (state[id] != kFinished) return fail(id, -1, "tile never finished");
    }
  }
  return {};
}

}  // namespace mwd
