#include "mwd/traffic.hpp"

#include <limits>
#include <string>

#include "mwd/error.hpp"

namespace mwd {

LruCache::LruCache(std::size_t capacity_lines, std::size_t n_lines)
    : capacity_(capacity_lines), prev_(n_lines, -1), next_(n_lines, -1), state_(n_lines, 0) {
  if (n_lines > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw ResourceError("address space too large for the LRU simulator", n_lines);
  }
}

void LruCache::unlink(std::int32_t n) {
  const auto p = prev_[n], x = next_[n];
  if (p >= 0) next_[p] = x; else head_ = x;
  if (x >= 0) prev_[x] = p; else tail_ = p;
  prev_[n] = next_[n] = -1;
}

void LruCache::push_front(std::int32_t n) {
  prev_[n] = -1;
  next_[n] = head_;
  if (head_ >= 0) prev_[head_] = n;
  head_ = n;
  if (tail_ < 0) tail_ = n;
}

void LruCache::touch(std::size_t line, bool dirty) {
  ++accesses_;
  const auto n = static_cast<std::int32_t>(line);
  if (state_[n] & 1) {
    if (head_ != n) {
      unlink(n);
      push_front(n);
    }
  } else {
    ++misses_;  // read miss or write-allocate fill
    if (capacity_ == 0) {
      if (dirty) ++writebacks_;
      return;
    }
    if (resident_ == capacity_) {
      const auto victim = tail_;
      unlink(victim);
      if (state_[victim] & 2) ++writebacks_;
      state_[victim] = 0;
      --resident_;
    }
    push_front(n);
    state_[n] = 1;
    ++resident_;
  }
  if (dirty) state_[n] |= 2;
}

void LruCache::flush() {
  for (auto n = head_; n >= 0; n = next_[n]) {
    if (state_[n] & 2) {
      ++writebacks_;
      state_[n] &= 1;
    }
  }
}

namespace {

int accesses_per_lup(const StencilSpec& spec) {
  // stencil-array reads + coefficient reads + one store (+ the t-1 read).
  const int neighbors = 6 * spec.radius + 1;
  return neighbors + spec.n_coeff_arrays + 1 + (spec.time_order == 2 ? 1 : 0);
}

}  // namespace

TrafficReport simulate_traffic(const StencilSpec& spec, int nx, int ny, int nz,
                               const BlockSpec& block, std::size_t cache_bytes,
                               const TrafficOptions& options) {
  if (nx < 1 || ny < 1 || nz < 1) throw UsageError("grid extents must be >= 1");
  if (block.bx < 1 || block.bx > nx || block.by < 1 || block.by > ny) {
    throw UsageError("block extents must satisfy 1 <= bx <= nx and 1 <= by <= ny");
  }
  const std::size_t line = options.line_bytes;
  if (line < sizeof(double) || line % sizeof(double) != 0) {
    throw UsageError("line size must be a positive multiple of 8 bytes");
  }
  const auto lups = static_cast<std::uint64_t>(nx) * ny * nz;
  const auto n_access = lups * static_cast<std::uint64_t>(accesses_per_lup(spec));
  if (n_access > options.max_accesses) {
    throw ResourceError("trace of " + std::to_string(n_access) +
                            " accesses exceeds the simulation budget",
                        n_access * sizeof(double));
  }

  // Only geometry is needed; the Grid3D layout defines every address.
  const int r = spec.radius;
  const std::size_t px = nx + 2 * r, py = ny + 2 * r, pz = nz + 2 * r;
  const std::size_t elems = px * py * pz;
  const std::size_t stream_lines = (elems * sizeof(double) + line - 1) / line + 1;
  const int n_streams = 2 + spec.n_coeff_arrays;
  const std::size_t total_lines = stream_lines * n_streams;
  const auto sy = static_cast<std::ptrdiff_t>(px);
  const auto sz = static_cast<std::ptrdiff_t>(px * py);
  const std::size_t doubles_per_line = line / sizeof(double);

  LruCache cache(cache_bytes / line, total_lines);
  // Stream 0 is read (time level t), stream 1 written, 2.. coefficients.
  auto line_of = [&](int stream, std::ptrdiff_t i) {
    return stream * stream_lines + static_cast<std::size_t>(i) / doubles_per_line;
  };
  auto index = [&](int z, int y, int x) {
    return (static_cast<std::ptrdiff_t>(z + r) * static_cast<std::ptrdiff_t>(py) + (y + r)) *
               static_cast<std::ptrdiff_t>(px) +
           (x + r);
  };
  auto rd = [&](std::ptrdiff_t i) { cache.read(line_of(0, i)); };
  auto coeff = [&](int k, std::ptrdiff_t i) { cache.read(line_of(2 + k, i)); };

  for_each_block_row(nx, ny, nz, block, 0, 1, [&](int z, int y, int x0, int x1) {
    for (int x = x0; x < x1; ++x) {
      const auto i = index(z, y, x);
      switch (spec.kind) {
        case StencilKind::k7ptConst:
          rd(i);
          rd(i - 1), rd(i + 1), rd(i - sy), rd(i + sy), rd(i - sz), rd(i + sz);
          break;
        case StencilKind::k7ptVar:
          coeff(0, i), rd(i);
          coeff(1, i), rd(i - 1), coeff(2, i), rd(i + 1);
          coeff(3, i), rd(i - sy), coeff(4, i), rd(i + sy);
          coeff(5, i), rd(i - sz), coeff(6, i), rd(i + sz);
          break;
        case StencilKind::k25ptVar:
          coeff(0, i), rd(i);
          for (int d = 1; d <= 4; ++d) {
            coeff(3 * d - 2, i), rd(i - d), rd(i + d);
            coeff(3 * d - 1, i), rd(i - d * sy), rd(i + d * sy);
            coeff(3 * d, i), rd(i - d * sz), rd(i + d * sz);
          }
          break;
        case StencilKind::k25ptConst:
          rd(i);
          cache.read(line_of(1, i));
          coeff(0, i);
          for (int d = 1; d <= 4; ++d) {
            rd(i - d), rd(i + d), rd(i - d * sy), rd(i + d * sy), rd(i - d * sz),
                rd(i + d * sz);
          }
          break;
      }
      cache.write(line_of(1, i));
    }
  });
  cache.flush();

  TrafficReport rep;
  rep.misses = cache.misses();
  rep.writebacks = cache.writebacks();
  rep.total_bytes = static_cast<double>((rep.misses + rep.writebacks) * line);
  rep.lups = static_cast<std::int64_t>(lups);
  rep.bytes_per_lup = rep.total_bytes / static_cast<double>(lups);
  rep.predicted_regime =
      predict_regime(spec, block.bx, block.by, 1, static_cast<double>(cache_bytes),
                     options.effective_capacity_factor);
  return rep;
}

}  // namespace mwd
