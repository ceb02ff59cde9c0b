#include "mwd/distrib.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <thread>

#include "mwd/error.hpp"

namespace mwd {

int apex_owner(int y_center, int y_extent, int p) {
  if (y_center <= 0) return p - 1;
  const int r = (y_center + y_extent - 1) / y_extent - 1;
  return std::min(r, p - 1);
}

std::vector<Decomposition> decompose(int ny, int p, int d_w, int halo_width) {
  if (p < 1) throw UsageError("rank count must be >= 1");
  if (d_w < 1 || ny < 1 || ny % (static_cast<long>(p) * d_w) != 0) {
    throw UsageError("ny = " + std::to_string(ny) + " must be a positive multiple of p * d_w = " +
                     std::to_string(static_cast<long>(p) * d_w));
  }
  const int extent = ny / p;
  std::vector<Decomposition> out(p);
  for (int r = 0; r < p; ++r) {
    auto& d = out[r];
    d.p = p;
    d.rank = r;
    d.y_begin = r * extent;
    d.y_extent = extent;
    d.halo_width = halo_width;
    d.tiles_per_row = extent / d_w;
  }
  return out;
}

std::vector<int> tile_owners(const Tessellation& tess, int p) {
  if (p < 1) throw UsageError("rank count must be >= 1");
  if (tess.ny() % (static_cast<long>(p) * tess.d_w()) != 0) {
    throw UsageError("ny = " + std::to_string(tess.ny()) +
                     " must be a positive multiple of p * d_w = " +
                     std::to_string(static_cast<long>(p) * tess.d_w()));
  }
  const int extent = tess.ny() / p;
  std::vector<int> owner(tess.tile_count());
  for (const auto& t : tess.tiles()) owner[t.id] = apex_owner(t.y_center, extent, p);
  return owner;
}

std::vector<Decomposition> decompose(const Tessellation& tess, int p) {
  auto out = decompose(tess.ny(), p, tess.d_w(), tess.radius());
  const auto owner = tile_owners(tess, p);
  for (const auto& t : tess.tiles()) {
    auto& d = out[owner[t.id]];
    d.owned_tiles.push_back(t.id);
    bool crosses = false;
    for (int q : t.parents) crosses |= owner[q] != owner[t.id];
    for (int q : t.children) crosses |= owner[q] != owner[t.id];
    if (crosses) d.boundary_tiles.push_back(t.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regions and packing

std::int64_t HaloRegion::pencils() const {
  std::int64_t per_z = 0;
  for (const auto& s : segments) per_z += s.y_end - s.y_begin;
  return per_z * std::max(0, z_end - z_begin);
}

HaloRegion dependency_region(const Tessellation& tess, int parent, int child, int stencil_radius,
                             int nz, int start_parity) {
  const int ny = tess.ny();
  std::vector<std::uint8_t> mark[2] = {std::vector<std::uint8_t>(ny, 0),
                                       std::vector<std::uint8_t>(ny, 0)};
  for (const auto& lv : tess.tile(child).levels) {
    if (lv.t == 0) continue;
    const int b = (start_parity + lv.t) & 1;
    const int y0 = std::max(0, lv.y_begin - stencil_radius);
    const int y1 = std::min(ny, lv.y_end + stencil_radius);
    for (int y = y0; y < y1; ++y) {
      if (tess.owner(y, lv.t - 1) == parent) mark[b][y] = 1;
    }
  }
  HaloRegion region;
  region.z_begin = 0;
  region.z_end = nz;
  for (int b = 0; b < 2; ++b) {
    for (int y = 0; y < ny;) {
      if (!mark[b][y]) {
        ++y;
        continue;
      }
      const int y0 = y;
      while (y < ny && mark[b][y]) ++y;
      region.segments.push_back({b, y0, y});
    }
  }
  return region;
}

namespace {

void check_region(const Grid3D& g, const HaloRegion& region) {
  const int r = g.radius();
  if (region.z_begin < -r || region.z_end > g.nz() + r || region.z_begin > region.z_end) {
    throw UsageError("halo region z range leaves the grid");
  }
  for (const auto& s : region.segments) {
    if (s.buffer < 0 || s.buffer > 1 || s.y_begin < -r || s.y_end > g.ny() + r ||
        s.y_begin > s.y_end) {
      throw UsageError("halo segment leaves the grid");
    }
  }
}

struct ZShare {
  int z0, z1;
};

ZShare z_share(const HaloRegion& region, int member, int n_members) {
  const int n = region.z_end - region.z_begin;
  const int base = n / n_members, extra = n % n_members;
  const int z0 = region.z_begin + member * base + std::min(member, extra);
  return {z0, z0 + base + (member < extra ? 1 : 0)};
}

template <typename Copy>
void walk_part(const HaloRegion& region, int nx, int member, int n_members, Copy&& copy) {
  const auto [z0, z1] = z_share(region, member, n_members);
  std::int64_t per_z = 0;
  for (const auto& s : region.segments) per_z += s.y_end - s.y_begin;
  for (int z = z0; z < z1; ++z) {
    std::int64_t off = (z - region.z_begin) * per_z * nx;
    for (const auto& s : region.segments) {
      for (int y = s.y_begin; y < s.y_end; ++y) {
        copy(s.buffer, z, y, off);
        off += nx;
      }
    }
  }
}

}  // namespace

void pack_halo_part(const Grid3D& g, const HaloRegion& region, std::span<double> payload,
                    int member, int n_members) {
  const int nx = g.nx();
  walk_part(region, nx, member, n_members, [&](int b, int z, int y, std::int64_t off) {
    const double* src = g.buffer(b) + g.index(z, y, 0);
    std::copy(src, src + nx, payload.data() + off);
  });
}

void unpack_halo_part(Grid3D& g, const HaloRegion& region, std::span<const double> payload,
                      int member, int n_members) {
  const int nx = g.nx();
  walk_part(region, nx, member, n_members, [&](int b, int z, int y, std::int64_t off) {
    std::copy(payload.data() + off, payload.data() + off + nx, g.buffer(b) + g.index(z, y, 0));
  });
}

namespace {

template <typename Fn>
void run_members(int n_threads, Fn&& fn) {
  if (n_threads < 1) throw UsageError("thread count must be >= 1");
  if (n_threads == 1) {
    fn(0);
    return;
  }
  std::vector<std::jthread> pool;
  for (int m = 0; m < n_threads; ++m) pool.emplace_back([&fn, m] { fn(m); });
}

}  // namespace

HaloMessage pack_halo(const Grid3D& g, const HaloRegion& region, int n_threads) {
  check_region(g, region);
  HaloMessage msg;
  msg.payload.resize(region.doubles(g.nx()));
  run_members(n_threads, [&](int m) { pack_halo_part(g, region, msg.payload, m, n_threads); });
  return msg;
}

void unpack_halo(const HaloMessage& msg, Grid3D& g, const HaloRegion& region, int n_threads) {
  check_region(g, region);
  const auto want = region.doubles(g.nx());
  if (static_cast<std::int64_t>(msg.payload.size()) != want) {
    throw ProtocolError("halo payload holds " + std::to_string(msg.payload.size()) +
                        " doubles, region needs " + std::to_string(want));
  }
  run_members(n_threads, [&](int m) { unpack_halo_part(g, region, msg.payload, m, n_threads); });
}

// ---------------------------------------------------------------------------
// Distributed run

namespace {

struct Edge {
  int peer_tile;
  int peer_rank;
  std::uint64_t tag;
  HaloRegion region;
  std::vector<double> payload;
  /// Shared by both ends; set once the sender has handed the message over.
  std::shared_ptr<std::atomic<bool>> posted;
};

struct Rank {
  int id = 0;
  GridBundle bundle;
  std::unique_ptr<StencilOperator> op;
  std::vector<int> tiles;
  std::map<int, std::vector<Edge>> inbound, outbound;
  std::map<std::uint64_t, std::chrono::steady_clock::time_point> first_wait;
  std::atomic<std::int64_t> received{0}, sent{0}, bytes{0};
  ExecutionLog log;
};

void poison_foreign(Rank& rank, const Tessellation& tess, int radius) {
  auto& g = rank.bundle.grid;
  std::vector<std::uint8_t> keep(g.ny(), 0);
  for (int id : rank.tiles) {
    const auto& t = tess.tile(id);
    for (int y = std::max(0, t.y_min() - radius); y < std::min(g.ny(), t.y_max() + radius); ++y) {
      keep[y] = 1;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int b = 0; b < 2; ++b) {
    for (int z = 0; z < g.nz(); ++z) {
      for (int y = 0; y < g.ny(); ++y) {
        if (keep[y]) continue;
        double* row = g.buffer(b) + g.index(z, y, 0);
        std::fill(row, row + g.nx(), nan);
      }
    }
  }
}

void copy_row(const Grid3D& from, Grid3D& to, int b, int z, int y) {
  const double* src = from.buffer(b) + from.index(z, y, 0);
  std::copy(src, src + from.nx(), to.buffer(b) + to.index(z, y, 0));
}

}  // namespace

DistributedReport run_distributed(const StencilSpec& spec, GridBundle& global,
                                  const ScalarWeights& weights, int steps, int d_w, int n_f,
                                  const ThreadGroupConfig& cfg, int p, Transport& transport,
                                  const DistributedOptions& options) {
  if (!spec.wavefront_eligible()) {
    throw UsageError(std::string(to_string(spec.kind)) +
                     " is not supported by wavefront diamond blocking");
  }
  auto& gg = global.grid;
  const auto tess = build_tessellation(gg.ny(), steps, d_w, spec.radius);
  const auto owner = tile_owners(tess, p);
  const int sp = gg.newest();
  const int nz = gg.nz();

  std::vector<std::unique_ptr<Rank>> ranks;
  for (int r = 0; r < p; ++r) {
    auto rank = std::make_unique<Rank>();
    rank->id = r;
    rank->bundle = global;
    rank->op = std::make_unique<StencilOperator>(spec, rank->bundle.coeffs, weights);
    ranks.push_back(std::move(rank));
  }
  DistributedReport report;
  for (const auto& t : tess.tiles()) {
    ranks[owner[t.id]]->tiles.push_back(t.id);
    for (int c : t.children) {
      if (owner[c] == owner[t.id]) continue;
      auto region = dependency_region(tess, t.id, c, spec.radius, nz, sp);
      const auto n = region.doubles(gg.nx());
      const auto tag = halo_tag(t.id, c);
      auto posted = std::make_shared<std::atomic<bool>>(false);
      ranks[owner[t.id]]->outbound[t.id].push_back(
          {c, owner[c], tag, region, std::vector<double>(n), posted});
      ranks[owner[c]]->inbound[c].push_back(
          {t.id, owner[t.id], tag, std::move(region), {}, posted});
      ++report.cross_edges;
    }
  }
  if (options.poison_foreign) {
    for (auto& r : ranks) poison_foreign(*r, tess, spec.radius);
  }

  SequenceCounter sequence{0};
  AbortToken abort;
  const auto start = std::chrono::steady_clock::now();
  {
    std::vector<std::jthread> procs;
    for (auto& rp : ranks) {
      procs.emplace_back([&, rank = rp.get()] {
        TileHooks hooks;
        hooks.eligible = [&, rank](int tile) {
          auto it = rank->inbound.find(tile);
          if (it == rank->inbound.end()) return true;
          for (const auto& e : it->second) {
            if (!transport.probe(rank->id, e.peer_rank, e.tag)) {
              // Only a message already sent can be late; otherwise the
              // sender is itself still waiting upstream.
              if (!e.posted->load(std::memory_order_acquire)) return false;
              const auto now = std::chrono::steady_clock::now();
              auto [fw, fresh] = rank->first_wait.try_emplace(e.tag, now);
              if (!fresh && now - fw->second > options.receive_timeout) {
                throw TransportError("halo from rank " + std::to_string(e.peer_rank) +
                                         " never arrived",
                                     rank->id, tile);
              }
              return false;
            }
          }
          return true;
        };
        hooks.before = [&, rank](GroupContext& ctx, const DiamondTile& tile) {
          auto it = rank->inbound.find(tile.id);
          if (it == rank->inbound.end()) return;
          auto& g = rank->bundle.grid;
          if (ctx.leader()) {
            for (auto& e : it->second) {
              auto msg = transport.receive(rank->id, e.peer_rank, e.tag, options.receive_timeout);
              if (static_cast<std::int64_t>(msg.payload.size()) != e.region.doubles(g.nx())) {
                throw ProtocolError("halo for tile " + std::to_string(tile.id) +
                                    " has the wrong length");
              }
              e.payload = std::move(msg.payload);
              ++rank->received;
            }
          }
          ctx.sync();
          for (const auto& e : it->second) {
            unpack_halo_part(g, e.region, e.payload, ctx.member(), ctx.size());
          }
          ctx.sync();
        };
        hooks.after = [&, rank](GroupContext& ctx, const DiamondTile& tile) {
          auto it = rank->outbound.find(tile.id);
          if (it == rank->outbound.end()) return;
          for (auto& e : it->second) {
            pack_halo_part(rank->bundle.grid, e.region, e.payload, ctx.member(), ctx.size());
          }
          ctx.sync();
          if (!ctx.leader()) return;
          for (const auto& e : it->second) {
            HaloMessage msg;
            msg.src_rank = static_cast<std::uint32_t>(rank->id);
            msg.dst_rank = static_cast<std::uint32_t>(e.peer_rank);
            msg.tile = e.tag;
            msg.payload = e.payload;
            transport.send(msg);
            e.posted->store(true, std::memory_order_release);
            ++rank->sent;
            rank->bytes += static_cast<std::int64_t>(msg.byte_length());
          }
        };
        if (rank->tiles.empty()) return;
        try {
          rank->log = execute_tiles(*rank->op, rank->bundle.grid, tess, rank->tiles, cfg, n_f,
                                    options.run, &hooks, &sequence, &abort);
        } catch (const Aborted&) {
          abort.abort();
        } catch (...) {
          abort.abort(std::current_exception());
        }
      });
    }
  }
  report.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  if (abort.aborted()) {
    if (auto cause = abort.cause()) std::rethrow_exception(cause);
    throw InternalError("distributed run aborted without a recorded cause");
  }

  // Gather: each cell's final value of a buffer lives on the rank that wrote it last.
  const int b_new = (sp + steps) & 1;
  for (int y = 0; y < gg.ny(); ++y) {
    const auto& newest = ranks[owner[tess.owner(y, steps - 1)]]->bundle.grid;
    const Grid3D* older =
        steps >= 2 ? &ranks[owner[tess.owner(y, steps - 2)]]->bundle.grid : nullptr;
    for (int z = 0; z < nz; ++z) {
      copy_row(newest, gg, b_new, z, y);
      if (older) copy_row(*older, gg, 1 - b_new, z, y);
    }
  }
  gg.advance(steps);

  std::vector<std::pair<std::uint64_t, ScheduleEvent>> events;
  for (auto& r : ranks) {
    for (const auto& rec : r->log.records) {
      if (rec.event != LogEvent::kTile) continue;
      events.push_back({rec.seq_start, {rec.tile, EventType::kStart}});
      events.push_back({rec.seq_end, {rec.tile, EventType::kFinish}});
    }
    RankReport rr;
    rr.rank = r->id;
    rr.log = std::move(r->log);
    rr.messages_sent = r->sent.load();
    rr.messages_received = r->received.load();
    report.messages += rr.messages_sent;
    report.bytes += r->bytes.load();
    report.ranks.push_back(std::move(rr));
  }
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& e : events) report.schedule.push_back(e.second);
  return report;
}

}  // namespace mwd
