#include "mwd/kernels.hpp"

#include <barrier>
#include <string>
#include <thread>
#include <utility>

#include "mwd/error.hpp"

namespace mwd {

ScalarWeights default_weights(StencilKind kind) {
  switch (kind) {
    case StencilKind::k7ptConst:
      return {{0.25, 0.125}};
    case StencilKind::k25ptConst:
      return {{-0.75, 0.0625, 0.03125, 0.015625, 0.0078125}};
    case StencilKind::k7ptVar:
    case StencilKind::k25ptVar:
      break;
  }
  return {};
}

StencilOperator::StencilOperator(const StencilSpec& spec, const CoefficientField& coeffs,
                                 ScalarWeights weights)
    : spec_(spec), coeffs_(&coeffs), weights_(std::move(weights)) {
  if (coeffs.count() != spec.n_coeff_arrays) {
    throw UsageError("stencil " + std::string(to_string(spec.kind)) + " needs " +
                     std::to_string(spec.n_coeff_arrays) + " coefficient arrays, got " +
                     std::to_string(coeffs.count()));
  }
  if (static_cast<int>(weights_.w.size()) != spec.n_scalar_weights) {
    throw UsageError("stencil " + std::string(to_string(spec.kind)) + " needs " +
                     std::to_string(spec.n_scalar_weights) + " scalar weights");
  }
}

namespace {

// Each point function evaluates its operator in the textual operand order of
// the reference pseudo-code. Compiled with -ffp-contract=off so no FMA fusion.

inline double point_7pt_const(const double* c, std::ptrdiff_t sy, std::ptrdiff_t sz,
                              const double* w, std::ptrdiff_t i) {
  const double w1 = w[0], w2 = w[1];
  return w1 * c[i] + w2 * (c[i - 1] + c[i + 1]) + w2 * (c[i - sy] + c[i + sy]) +
         w2 * (c[i - sz] + c[i + sz]);
}

inline double point_7pt_var(const double* c, std::ptrdiff_t sy, std::ptrdiff_t sz,
                            const double* const* W, std::ptrdiff_t i) {
  return W[0][i] * c[i] + W[1][i] * c[i - 1] + W[2][i] * c[i + 1] +
         W[3][i] * c[i - sy] + W[4][i] * c[i + sy] + W[5][i] * c[i - sz] +
         W[6][i] * c[i + sz];
}

inline double point_25pt_var(const double* c, std::ptrdiff_t sy, std::ptrdiff_t sz,
                             const double* const* W, std::ptrdiff_t i) {
  return W[0][i] * c[i] + W[1][i] * (c[i - 1] + c[i + 1]) +
         W[2][i] * (c[i - sy] + c[i + sy]) + W[3][i] * (c[i - sz] + c[i + sz]) +
         W[4][i] * (c[i - 2] + c[i + 2]) + W[5][i] * (c[i - 2 * sy] + c[i + 2 * sy]) +
         W[6][i] * (c[i - 2 * sz] + c[i + 2 * sz]) + W[7][i] * (c[i - 3] + c[i + 3]) +
         W[8][i] * (c[i - 3 * sy] + c[i + 3 * sy]) +
         W[9][i] * (c[i - 3 * sz] + c[i + 3 * sz]) + W[10][i] * (c[i - 4] + c[i + 4]) +
         W[11][i] * (c[i - 4 * sy] + c[i + 4 * sy]) +
         W[12][i] * (c[i - 4 * sz] + c[i + 4 * sz]);
}

// `previous` is the t-1 value at i, which the caller then overwrites.
inline double point_25pt_const(const double* c, double previous, std::ptrdiff_t sy,
                               std::ptrdiff_t sz, const double* w, const double* alpha,
                               std::ptrdiff_t i) {
  return 2.0 * c[i] - previous +
         alpha[i] * (w[0] * c[i] +
                     w[1] * ((c[i - 1] + c[i + 1]) + (c[i - sy] + c[i + sy]) +
                             (c[i - sz] + c[i + sz])) +
                     w[2] * ((c[i - 2] + c[i + 2]) + (c[i - 2 * sy] + c[i + 2 * sy]) +
                             (c[i - 2 * sz] + c[i + 2 * sz])) +
                     w[3] * ((c[i - 3] + c[i + 3]) + (c[i - 3 * sy] + c[i + 3 * sy]) +
                             (c[i - 3 * sz] + c[i + 3 * sz])) +
                     w[4] * ((c[i - 4] + c[i + 4]) + (c[i - 4 * sy] + c[i + 4 * sy]) +
                             (c[i - 4 * sz] + c[i + 4 * sz])));
}

struct CoeffPointers {
  const double* p[13] = {};
  explicit CoeffPointers(const CoefficientField& k) {
    for (int j = 0; j < k.count() && j < 13; ++j) p[j] = k.array(j);
  }
};

}  // namespace

void StencilOperator::update_row(Grid3D& g, int src, int z, int y, int x0, int x1) const {
  const double* c = g.buffer(src);
  double* out = g.buffer(1 - src);
  const auto sy = g.stride_y(), sz = g.stride_z();
  const auto i0 = g.index(z, y, x0);
  const auto i1 = i0 + (x1 - x0);
  const double* w = weights_.w.data();
  switch (spec_.kind) {
    case StencilKind::k7ptConst:
      for (auto i = i0; i < i1; ++i) out[i] = point_7pt_const(c, sy, sz, w, i);
      break;
    case StencilKind::k7ptVar: {
      const CoeffPointers W(*coeffs_);
      for (auto i = i0; i < i1; ++i) out[i] = point_7pt_var(c, sy, sz, W.p, i);
      break;
    }
    case StencilKind::k25ptVar: {
      const CoeffPointers W(*coeffs_);
      for (auto i = i0; i < i1; ++i) out[i] = point_25pt_var(c, sy, sz, W.p, i);
      break;
    }
    case StencilKind::k25ptConst: {
      const double* alpha = coeffs_->array(0);
      for (auto i = i0; i < i1; ++i) {
        out[i] = point_25pt_const(c, out[i], sy, sz, w, alpha, i);
      }
      break;
    }
  }
}

double StencilOperator::update_point(const Grid3D& g, int src, int z, int y, int x) const {
  const double* c = g.buffer(src);
  const auto sy = g.stride_y(), sz = g.stride_z();
  const auto i = g.index(z, y, x);
  const double* w = weights_.w.data();
  switch (spec_.kind) {
    case StencilKind::k7ptConst:
      return point_7pt_const(c, sy, sz, w, i);
    case StencilKind::k7ptVar:
      return point_7pt_var(c, sy, sz, CoeffPointers(*coeffs_).p, i);
    case StencilKind::k25ptVar:
      return point_25pt_var(c, sy, sz, CoeffPointers(*coeffs_).p, i);
    case StencilKind::k25ptConst:
      return point_25pt_const(c, g.buffer(1 - src)[i], sy, sz, w, coeffs_->array(0), i);
  }
  return 0.0;
}

namespace {

void check_sweep_args(const StencilOperator& op, const Grid3D& g, int steps, int n_threads) {
  if (steps < 1) throw UsageError("time step count must be >= 1");
  if (n_threads < 1) throw UsageError("thread count must be >= 1");
  if (g.radius() < op.spec().radius) {
    throw UsageError("grid ghost width is smaller than the stencil radius");
  }
}

void run_sweeps(const StencilOperator& op, Grid3D& g, int steps, int n_threads,
                const BlockSpec& block) {
  const int start = g.newest();
  const int nx = g.nx(), ny = g.ny(), nz = g.nz();
  auto work = [&](int thread, auto&& sync) {
    for (int t = 0; t < steps; ++t) {
      const int src = (start + t) & 1;
      for_each_block_row(nx, ny, nz, block, thread, n_threads,
                         [&](int z, int y, int x0, int x1) {
                           op.update_row(g, src, z, y, x0, x1);
                         });
      sync();
    }
  };
  if (n_threads == 1) {
    work(0, [] {});
  } else {
    std::barrier step_barrier(n_threads);
    std::vector<std::jthread> workers;
    workers.reserve(n_threads - 1);
    for (int t = 1; t < n_threads; ++t) {
      workers.emplace_back([&, t] { work(t, [&] { step_barrier.arrive_and_wait(); }); });
    }
    work(0, [&] { step_barrier.arrive_and_wait(); });
  }
  g.advance(steps);
}

}  // namespace

void sweep_naive(const StencilOperator& op, Grid3D& g, int steps, int n_threads,
                 Schedule schedule) {
  check_sweep_args(op, g, steps, n_threads);
  run_sweeps(op, g, steps, n_threads, full_block(g, schedule));
}

void sweep_spatial(const StencilOperator& op, Grid3D& g, int steps, int n_threads,
                   const BlockSpec& block) {
  check_sweep_args(op, g, steps, n_threads);
  if (block.bx < 1 || block.bx > g.nx() || block.by < 1 || block.by > g.ny()) {
    throw UsageError("block extents must satisfy 1 <= bx <= nx and 1 <= by <= ny");
  }
  run_sweeps(op, g, steps, n_threads, block);
}

}  // namespace mwd
