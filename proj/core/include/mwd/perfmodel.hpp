#pragma once

#include <cstdint>

#include "mwd/kernels.hpp"
#include "mwd/stencil.hpp"

namespace mwd {

/// Outer-level cache size C, saturated memory bandwidth b_S and cores per
/// socket.
struct MachineModel {
  double cache_bytes = 0;
  double mem_bw = 0;
  int n_threads = 0;
};

/// 10-core socket with 25 MiB shared L3 and 40 GB/s STREAM bandwidth.
MachineModel ivy_bridge_profile();

/// Which part of the working set the cache retains during a sweep.
enum class Regime { kLayersFit, kRowsFit, kNoneFit };

const char* to_string(Regime r);

/// Main-memory bytes per lattice update. Only 7pt-const distinguishes the
/// rows-fit (40) and none-fit (56) regimes; other stencils support
/// kLayersFit only and return their ideal balance. Unsupported pairs throw
/// UsageError.
double code_balance(const StencilSpec& spec, Regime regime);

struct LayerCondition {
  bool satisfied;
  double lhs_bytes;
  double rhs_bytes;
};

/// Layer condition for a z-parallel sweep over nx-by-ny layers.
///
/// kContiguous: (2R + 1) * nx * ny * 8 < C / (2 * n_threads), which for R = 1
///   is the three-layer rule.
/// kInterleaved: (n_threads + 2R) * nx * ny * 8 < C / 2, i.e. the factor
///   (n_threads + 2) for R = 1 and (n_threads + 8) for R = 4.
LayerCondition layer_condition(const StencilSpec& spec, int nx, int ny, int n_threads,
                               double cache_bytes, Schedule schedule);

/// Regime the model predicts for a blocked sweep (bx-by-by blocks) when only
/// `capacity_factor` of the cache holds stencil-array data.
Regime predict_regime(const StencilSpec& spec, int bx, int by, int n_threads,
                      double cache_bytes, double capacity_factor = 0.5);

/// Roofline ceiling b_S / B_C in LUP/s. Both arguments must be positive.
double roofline(double mem_bw, double code_balance);

/// Wavefront width in z: D_w - 2R + N_F + 1.
int wavefront_width(int d_w, int n_f, int r);

struct FootprintQuery {
  int d_w;
  int n_f;
  int r;
  int n_d;
  std::int64_t n_xb;
};

/// Cache block bytes per thread group:
///   N_xb * [N_D * D_w * (D_w/2 - R + N_F + 1) + 2R * (D_w + W_w)].
/// Requires d_w >= 4r, d_w even and n_f >= 0 (UsageError otherwise).
std::int64_t cache_block_bytes(const FootprintQuery& q);

/// The R = 1 form N_xb * [N_D * (D_w^2/2 + D_w * N_F) + 2 * (D_w + W_w)],
/// kept as an independent route for cross-checking cache_block_bytes.
std::int64_t cache_block_bytes_r1(const FootprintQuery& q);

/// Query for a stencil on an nx-wide double-precision grid.
inline FootprintQuery footprint_for(const StencilSpec& spec, int d_w, int n_f, int nx) {
  return {d_w, n_f, spec.radius, spec.n_streams,
          static_cast<std::int64_t>(nx) * static_cast<std::int64_t>(sizeof(double))};
}

}  // namespace mwd
