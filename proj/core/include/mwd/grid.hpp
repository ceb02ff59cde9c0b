#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mwd/stencil.hpp"

namespace mwd {

/// Double-buffered 3-D lattice with `radius` ghost layers on every face.
///
/// Coordinates passed to index()/at() are interior coordinates: the interior
/// spans [0, n) per axis and ghosts live in [-R, 0) and [n, n + R). Storage is
/// [buffer][z][y][x] with x unit-stride. `newest()` names the buffer holding
/// the most recent time level; an update reads it and writes the other one.
class Grid3D {
 public:
  Grid3D() = default;
  Grid3D(int nx, int ny, int nz, int radius);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  int radius() const { return radius_; }
  int padded_x() const { return nx_ + 2 * radius_; }
  int padded_y() const { return ny_ + 2 * radius_; }
  int padded_z() const { return nz_ + 2 * radius_; }
  std::ptrdiff_t stride_y() const { return padded_x(); }
  std::ptrdiff_t stride_z() const {
    return static_cast<std::ptrdiff_t>(padded_x()) * padded_y();
  }
  std::size_t padded_size() const { return buffers_[0].size(); }
  std::int64_t interior_points() const {
    return static_cast<std::int64_t>(nx_) * ny_ * nz_;
  }

  std::ptrdiff_t index(int z, int y, int x) const {
    return (static_cast<std::ptrdiff_t>(z + radius_) * padded_y() + (y + radius_)) *
               padded_x() +
           (x + radius_);
  }

  double* buffer(int b) { return buffers_[b].data(); }
  const double* buffer(int b) const { return buffers_[b].data(); }
  std::span<double> span(int b) { return buffers_[b]; }
  std::span<const double> span(int b) const { return buffers_[b]; }

  double& at(int b, int z, int y, int x) { return buffers_[b][index(z, y, x)]; }
  double at(int b, int z, int y, int x) const { return buffers_[b][index(z, y, x)]; }

  int newest() const { return newest_; }
  void set_newest(int b) { newest_ = b & 1; }
  /// Flip parity as if `steps` updates had been applied.
  void advance(int steps) { newest_ = (newest_ + steps) & 1; }

 private:
  int nx_ = 0, ny_ = 0, nz_ = 0, radius_ = 0;
  int newest_ = 0;
  std::vector<double> buffers_[2];
};

/// Domain-sized coefficient arrays sharing Grid3D's padded layout:
/// W_0..W_6 (7pt-var), W_0..W_12 (25pt-var) or alpha (25pt-const).
class CoefficientField {
 public:
  CoefficientField() = default;
  CoefficientField(int count, std::size_t padded_size);

  int count() const { return static_cast<int>(arrays_.size()); }
  double* array(int i) { return arrays_[i].data(); }
  const double* array(int i) const { return arrays_[i].data(); }

 private:
  std::vector<std::vector<double>> arrays_;
};

struct GridBundle {
  Grid3D grid;
  CoefficientField coeffs;
};

/// Zero-initialized grid and coefficient storage sized for `spec`.
/// Throws UsageError on non-positive extents and ResourceError (carrying the
/// requested byte count) when the allocation fails.
GridBundle allocate_grid(int nx, int ny, int nz, const StencilSpec& spec);

/// Bytes allocate_grid would request.
std::size_t allocation_bytes(int nx, int ny, int nz, const StencilSpec& spec);

/// Stream ids used by fill_value: 0 and 1 are the grid buffers, 2 + i is
/// coefficient array i.
inline constexpr std::uint64_t kCoeffStreamBase = 2;

/// Uniform double in [0, 1) as a pure function of its arguments. Coordinates
/// are padded (non-negative) indices.
double fill_value(std::uint64_t seed, std::uint64_t stream, std::uint64_t pz,
                  std::uint64_t py, std::uint64_t px);

/// Scale applied to raw fill values of coefficient arrays so that repeated
/// updates stay bounded.
double coefficient_scale(const StencilSpec& spec);

/// Reproducible initialization. Buffer newest() gets stream 0 everywhere;
/// the other buffer gets stream 1 in the interior and a copy of the ghost
/// layers, so boundary values are identical in both buffers.
void fill_deterministic(Grid3D& grid, CoefficientField& coeffs,
                        const StencilSpec& spec, std::uint64_t seed);

struct Mismatch {
  int z, y, x;
  double expected, actual;
};

struct Comparison {
  std::optional<Mismatch> first_mismatch;
  bool equal() const { return !first_mismatch.has_value(); }
};

/// Exact (bit-pattern) comparison of the newest time level's interior,
/// scanning in z, y, x order. Throws UsageError on extent mismatch.
Comparison compare_bitwise(const Grid3D& expected, const Grid3D& actual);

}  // namespace mwd
