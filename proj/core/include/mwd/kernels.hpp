#pragma once

#include <vector>

#include "mwd/grid.hpp"
#include "mwd/stencil.hpp"

namespace mwd {

/// Scalar weights of the constant-coefficient operators: {w1, w2} for
/// 7pt-const, {w0, ..., w4} for 25pt-const, empty otherwise.
struct ScalarWeights {
  std::vector<double> w;
};

ScalarWeights default_weights(StencilKind kind);

enum class Schedule { kContiguous, kInterleaved };

/// Spatial block extents in x and y plus the z-slab to thread mapping.
/// kInterleaved is the round-robin ("static,1") mapping.
struct BlockSpec {
  int bx = 0;
  int by = 0;
  Schedule schedule = Schedule::kContiguous;
};

/// Unblocked traversal of an nx-by-ny layer.
inline BlockSpec full_block(const Grid3D& g, Schedule s = Schedule::kContiguous) {
  return {g.nx(), g.ny(), s};
}

/// A stencil operator bound to its coefficients. Every execution scheme
/// funnels through update_row(), so the per-point expression (and thus the
/// floating-point result) is identical regardless of traversal order.
class StencilOperator {
 public:
  StencilOperator(const StencilSpec& spec, const CoefficientField& coeffs,
                  ScalarWeights weights);
  StencilOperator(const StencilSpec& spec, const CoefficientField& coeffs)
      : StencilOperator(spec, coeffs, default_weights(spec.kind)) {}

  const StencilSpec& spec() const { return spec_; }
  const ScalarWeights& weights() const { return weights_; }
  const CoefficientField& coeffs() const { return *coeffs_; }

  /// New value of interior point (z, y, x) given time level t in buffer
  /// `src` (and t-1 in the other buffer for the second-order operator).
  double update_point(const Grid3D& g, int src, int z, int y, int x) const;

  /// Writes updates for x in [x0, x1) of row (z, y) into buffer 1 - src.
  void update_row(Grid3D& g, int src, int z, int y, int x0, int x1) const;

 private:
  StencilSpec spec_;
  const CoefficientField* coeffs_;
  ScalarWeights weights_;
};

/// Invokes fn(z, y, x0, x1) for every row segment `thread` of `n_threads`
/// handles in one spatially blocked sweep. Loop order: y-block, x-block,
/// z (per schedule), y, with x innermost.
template <typename Fn>
void for_each_block_row(int nx, int ny, int nz, const BlockSpec& block, int thread,
                        int n_threads, Fn&& fn) {
  int z_begin = 0, z_end = nz, z_step = 1;
  if (block.schedule == Schedule::kInterleaved) {
    z_begin = thread;
    z_step = n_threads;
  } else {
    const int base = nz / n_threads, extra = nz % n_threads;
    z_begin = thread * base + (thread < extra ? thread : extra);
    z_end = z_begin + base + (thread < extra ? 1 : 0);
  }
  for (int yb = 0; yb < ny; yb += block.by) {
    const int ye = yb + block.by < ny ? yb + block.by : ny;
    for (int xb = 0; xb < nx; xb += block.bx) {
      const int xe = xb + block.bx < nx ? xb + block.bx : nx;
      for (int z = z_begin; z < z_end; z += z_step) {
        for (int y = yb; y < ye; ++y) fn(z, y, xb, xe);
      }
    }
  }
}

/// Reference sweep: T full-grid updates, one time step at a time, z-slabs
/// split over `n_threads` workers with a barrier per step.
void sweep_naive(const StencilOperator& op, Grid3D& g, int steps, int n_threads,
                 Schedule schedule = Schedule::kContiguous);

/// Same as sweep_naive but each step is traversed in bx-by-by blocks.
void sweep_spatial(const StencilOperator& op, Grid3D& g, int steps, int n_threads,
                   const BlockSpec& block);

}  // namespace mwd
