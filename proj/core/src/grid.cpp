#include "mwd/grid.hpp"

#include <bit>
#include <cstring>
#include <limits>
#include <new>
#include <string>

#include "mwd/error.hpp"

namespace mwd {

std::string_view to_string(StencilKind kind) {
  switch (kind) {
    case StencilKind::k7ptConst:
      return "7pt-const";
    case StencilKind::k7ptVar:
      return "7pt-var";
    case StencilKind::k25ptConst:
      return "25pt-const";
    case StencilKind::k25ptVar:
      return "25pt-var";
  }
  return "?";
}

StencilKind parse_stencil_kind(std::string_view name) {
  for (auto k : kAllStencils) {
    if (to_string(k) == name) return k;
  }
  throw UsageError("unknown stencil '" + std::string(name) +
                   "' (expected 7pt-const, 7pt-var, 25pt-const or 25pt-var)");
}

namespace {

std::size_t padded_count(int nx, int ny, int nz, int r) {
  return static_cast<std::size_t>(nx + 2 * r) * static_cast<std::size_t>(ny + 2 * r) *
         static_cast<std::size_t>(nz + 2 * r);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Grid3D::Grid3D(int nx, int ny, int nz, int radius)
    : nx_(nx), ny_(ny), nz_(nz), radius_(radius) {
  if (nx < 1 || ny < 1 || nz < 1) throw UsageError("grid extents must be >= 1");
  if (radius < 1) throw UsageError("ghost radius must be >= 1");
  const auto n = padded_count(nx, ny, nz, radius);
  buffers_[0].assign(n, 0.0);
  buffers_[1].assign(n, 0.0);
}

CoefficientField::CoefficientField(int count, std::size_t padded_size)
    : arrays_(static_cast<std::size_t>(count), std::vector<double>(padded_size, 0.0)) {}

std::size_t allocation_bytes(int nx, int ny, int nz, const StencilSpec& spec) {
  return padded_count(nx, ny, nz, spec.radius) *
         static_cast<std::size_t>(2 + spec.n_coeff_arrays) * sizeof(double);
}

GridBundle allocate_grid(int nx, int ny, int nz, const StencilSpec& spec) {
  if (nx < 1 || ny < 1 || nz < 1) throw UsageError("grid extents must be >= 1");
  const auto limit = static_cast<double>(std::numeric_limits<std::ptrdiff_t>::max());
  const double approx = static_cast<double>(nx + 2 * spec.radius) *
                        (ny + 2 * spec.radius) * (nz + 2 * spec.radius) *
                        (2 + spec.n_coeff_arrays) * sizeof(double);
  if (approx >= limit) {
    throw ResourceError("grid allocation overflows the address space",
                        std::numeric_limits<std::size_t>::max());
  }
  const std::size_t bytes = allocation_bytes(nx, ny, nz, spec);
  try {
    GridBundle out{Grid3D(nx, ny, nz, spec.radius), {}};
    out.coeffs = CoefficientField(spec.n_coeff_arrays, out.grid.padded_size());
    return out;
  } catch (const std::bad_alloc&) {
    throw ResourceError("failed to allocate " + std::to_string(bytes) + " bytes", bytes);
  } catch (const std::length_error&) {
    throw ResourceError("failed to allocate " + std::to_string(bytes) + " bytes", bytes);
  }
}

double fill_value(std::uint64_t seed, std::uint64_t stream, std::uint64_t pz,
                  std::uint64_t py, std::uint64_t px) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ stream);
  h = splitmix64(h ^ pz);
  h = splitmix64(h ^ py);
  h = splitmix64(h ^ px);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double coefficient_scale(const StencilSpec& spec) {
  switch (spec.kind) {
    case StencilKind::k7ptVar:
      return 0.125;
    case StencilKind::k25ptVar:
    case StencilKind::k25ptConst:
      return 0.0625;
    case StencilKind::k7ptConst:
      break;
  }
  return 1.0;
}

void fill_deterministic(Grid3D& grid, CoefficientField& coeffs, const StencilSpec& spec,
                        std::uint64_t seed) {
  if (coeffs.count() != spec.n_coeff_arrays) {
    throw UsageError("coefficient field does not match the stencil");
  }
  const int r = grid.radius();
  const int newest = grid.newest();
  const int older = 1 - newest;
  double* cur = grid.buffer(newest);
  double* old = grid.buffer(older);
  const double scale = coefficient_scale(spec);
  std::ptrdiff_t i = 0;
  for (int pz = 0; pz < grid.padded_z(); ++pz) {
    const bool ghost_z = pz < r || pz >= grid.nz() + r;
    for (int py = 0; py < grid.padded_y(); ++py) {
      const bool ghost_y = ghost_z || py < r || py >= grid.ny() + r;
      for (int px = 0; px < grid.padded_x(); ++px, ++i) {
        const bool ghost = ghost_y || px < r || px >= grid.nx() + r;
        cur[i] = fill_value(seed, 0, pz, py, px);
        old[i] = ghost ? cur[i] : fill_value(seed, 1, pz, py, px);
        for (int c = 0; c < coeffs.count(); ++c) {
          coeffs.array(c)[i] = fill_value(seed, kCoeffStreamBase + c, pz, py, px) * scale;
        }
      }
    }
  }
}

Comparison compare_bitwise(const Grid3D& expected, const Grid3D& actual) {
  if (expected.nx() != actual.nx() || expected.ny() != actual.ny() ||
      expected.nz() != actual.nz() || expected.radius() != actual.radius()) {
    throw UsageError("compare_bitwise: grid extents differ");
  }
  const double* a = expected.buffer(expected.newest());
  const double* b = actual.buffer(actual.newest());
  for (int z = 0; z < expected.nz(); ++z) {
    for (int y = 0; y < expected.ny(); ++y) {
      const auto row = expected.index(z, y, 0);
      if (std::memcmp(a + row, b + row, sizeof(double) * expected.nx()) == 0) continue;
      for (int x = 0; x < expected.nx(); ++x) {
        if (std::bit_cast<std::uint64_t>(a[row + x]) !=
            std::bit_cast<std::uint64_t>(b[row + x])) {
          return {Mismatch{z, y, x, a[row + x], b[row + x]}};
        }
      }
    }
  }
  return {};
}

}  // namespace mwd
