#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwd/grid.hpp"
#include "mwd/kernels.hpp"
#include "mwd/runtime.hpp"
#include "mwd/tiling.hpp"

namespace mwd {

/// One rank's share of a 1-D decomposition along y.
///
/// A tile belongs to the rank whose y-slab contains its apex y_center, with
/// apexes on a cut going left. The apex at y = 0 (the leftmost half-diamond
/// column) has no slab to its left and goes to the rightmost rank, so every
/// rank ends up with the same number of tiles per pair of rows.
struct Decomposition {
  int p = 1;
  int rank = 0;
  int y_begin = 0;
  int y_extent = 0;
  int halo_width = 0;
  int tiles_per_row = 0;            ///< apex columns owned (full-width equivalent)
  std::vector<int> owned_tiles;     ///< filled by the tessellation overload
  std::vector<int> boundary_tiles;  ///< owned tiles with a parent or child elsewhere
};

/// Rank owning a tile apex at `y_center` for slabs of `y_extent` cells.
int apex_owner(int y_center, int y_extent, int p);

/// Slab layout only; tile lists stay empty. Throws UsageError unless ny is a
/// positive multiple of p * d_w.
std::vector<Decomposition> decompose(int ny, int p, int d_w, int halo_width = 1);

/// Full decomposition of a tessellation, including tile ownership.
std::vector<Decomposition> decompose(const Tessellation& tess, int p);

/// Tile-to-rank map for decompose(tess, p).
std::vector<int> tile_owners(const Tessellation& tess, int p);

/// Contiguous y-range of one buffer.
struct HaloSegment {
  int buffer;
  int y_begin;
  int y_end;
};

/// Cells exchanged for one dependency: for every z in [z_begin, z_end) the
/// listed (buffer, y) pencils, each nx doubles long. Payload order is z,
/// then segment, then y, with x contiguous.
struct HaloRegion {
  int z_begin = 0;
  int z_end = 0;
  std::vector<HaloSegment> segments;

  std::int64_t pencils() const;
  std::int64_t doubles(int nx) const { return pencils() * nx; }
};

/// Region a child tile reads from cells last written by `parent`, in the
/// buffers used by a run that starts at `start_parity`.
HaloRegion dependency_region(const Tessellation& tess, int parent, int child, int stencil_radius,
                             int nz, int start_parity);

struct HaloMessage {
  std::uint32_t src_rank = 0;
  std::uint32_t dst_rank = 0;
  std::uint64_t tile = 0;  ///< (parent << 32) | child
  std::vector<double> payload;

  std::uint64_t byte_length() const { return payload.size() * sizeof(double); }
};

inline std::uint64_t halo_tag(int parent, int child) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(parent)) << 32) |
         static_cast<std::uint32_t>(child);
}

inline constexpr std::size_t kFrameHeaderBytes = 24;

/// Little-endian frame: src u32, dst u32, tile u64, len u64, then len bytes.
std::vector<std::uint8_t> encode(const HaloMessage& msg);
/// Throws ProtocolError on truncated frames or a length field that does not
/// match the payload.
HaloMessage decode(std::span<const std::uint8_t> frame);

/// Copies member's z-share of `region` into `payload`.
void pack_halo_part(const Grid3D& g, const HaloRegion& region, std::span<double> payload,
                    int member, int n_members);
void unpack_halo_part(Grid3D& g, const HaloRegion& region, std::span<const double> payload,
                      int member, int n_members);

/// Packs with `n_threads` workers splitting the z range. Throws UsageError
/// when the region leaves the grid.
HaloMessage pack_halo(const Grid3D& g, const HaloRegion& region, int n_threads);
/// Throws ProtocolError when the payload length does not match the region.
void unpack_halo(const HaloMessage& msg, Grid3D& g, const HaloRegion& region, int n_threads);

/// Failed or timed-out delivery, tagged with the rank and tile that waited.
class TransportError : public std::runtime_error {
 public:
  TransportError(const std::string& what, int rank, int tile)
      : std::runtime_error(what + " (rank " + std::to_string(rank) + ", tile " +
                           std::to_string(tile) + ")"),
        rank_(rank),
        tile_(tile) {}
  int rank() const noexcept { return rank_; }
  int tile() const noexcept { return tile_; }

 private:
  int rank_, tile_;
};

/// Reliable point-to-point channel, FIFO per (src, dst) pair. Must be safe
/// for concurrent use by every group of every rank.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const HaloMessage& msg) = 0;
  /// True when receive(dst, src, tag) would not block.
  virtual bool probe(int dst, int src, std::uint64_t tag) = 0;
  /// Throws TransportError after `timeout`.
  virtual HaloMessage receive(int dst, int src, std::uint64_t tag,
                              std::chrono::milliseconds timeout) = 0;
  virtual std::int64_t messages_sent() const = 0;
  virtual std::int64_t bytes_sent() const = 0;
};

struct LoopbackOptions {
  /// Random delivery delay in [0, max_jitter]; zero delivers immediately.
  std::chrono::microseconds max_jitter{0};
  std::uint64_t jitter_seed = 1;
  /// Test hook: frames for this tag are silently dropped.
  std::optional<std::uint64_t> drop_tag;
};

/// In-process transport. Messages travel as encoded frames, so every send
/// exercises the wire format.
std::unique_ptr<Transport> make_loopback_transport(int p, LoopbackOptions options = {});

struct DistributedOptions {
  RunOptions run;
  std::chrono::milliseconds receive_timeout{30000};
  /// Fill cells a rank neither owns nor needs with NaN so that any missing
  /// exchange shows up in the gathered result.
  bool poison_foreign = true;
};

struct RankReport {
  int rank = 0;
  ExecutionLog log;
  std::int64_t messages_sent = 0;
  std::int64_t messages_received = 0;
};

struct DistributedReport {
  std::vector<RankReport> ranks;
  std::int64_t messages = 0;
  std::int64_t bytes = 0;
  std::int64_t cross_edges = 0;
  /// Start/finish events of all ranks in one global order.
  std::vector<ScheduleEvent> schedule;
  std::int64_t wall_ns = 0;
};

/// Runs T steps of wavefront diamond blocking over p simulated ranks. Each
/// rank works on a private copy of the grid and coefficients; data crosses
/// ranks only through `transport`. The result is gathered back into
/// `global.grid` (parity advanced by T) and is bitwise identical to run_mwd.
/// Any failure aborts every rank; the first error is rethrown.
DistributedReport run_distributed(const StencilSpec& spec, GridBundle& global,
                                  const ScalarWeights& weights, int steps, int d_w, int n_f,
                                  const ThreadGroupConfig& cfg, int p, Transport& transport,
                                  const DistributedOptions& options = {});

}  // namespace mwd
