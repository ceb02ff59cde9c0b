#pragma once

#include <cstdint>
#include <vector>

#include "mwd/kernels.hpp"
#include "mwd/perfmodel.hpp"
#include "mwd/stencil.hpp"

namespace mwd {

/// Fully associative, write-allocate, write-back LRU cache over a dense line
/// address space [0, n_lines). Memory-side traffic is counted in lines.
class LruCache {
 public:
  LruCache(std::size_t capacity_lines, std::size_t n_lines);

  void read(std::size_t line) { touch(line, false); }
  void write(std::size_t line) { touch(line, true); }
  /// Writes back every dirty resident line (end-of-run accounting).
  void flush();

  std::uint64_t misses() const { return misses_; }
  std::uint64_t writebacks() const { return writebacks_; }
  std::uint64_t accesses() const { return accesses_; }

 private:
  void touch(std::size_t line, bool dirty);
  void unlink(std::int32_t n);
  void push_front(std::int32_t n);

  std::size_t capacity_;
  std::size_t resident_ = 0;
  std::vector<std::int32_t> prev_, next_;
  std::vector<std::uint8_t> state_;  // bit0 resident, bit1 dirty
  std::int32_t head_ = -1, tail_ = -1;
  std::uint64_t misses_ = 0, writebacks_ = 0, accesses_ = 0;
};

struct TrafficOptions {
  std::size_t line_bytes = 64;
  /// Share of the cache the regime predictor assumes holds stencil data.
  double effective_capacity_factor = 0.5;
  /// Upper bound on simulated accesses.
  std::uint64_t max_accesses = std::uint64_t{1} << 30;
};

struct TrafficReport {
  double total_bytes = 0;
  std::int64_t lups = 0;
  double bytes_per_lup = 0;
  std::uint64_t misses = 0;
  std::uint64_t writebacks = 0;
  Regime predicted_regime = Regime::kNoneFit;
};

/// Replays the exact single-thread address sequence of one sweep_spatial()
/// step through an LRU cache of `cache_bytes` and reports memory traffic.
/// Dirty lines left at the end are written back. Throws ResourceError if the
/// trace exceeds options.max_accesses.
TrafficReport simulate_traffic(const StencilSpec& spec, int nx, int ny, int nz,
                               const BlockSpec& block, std::size_t cache_bytes,
                               const TrafficOptions& options = {});

}  // namespace mwd
