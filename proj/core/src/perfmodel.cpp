#include "mwd/perfmodel.hpp"

#include <string>

#include "mwd/error.hpp"

namespace mwd {

MachineModel ivy_bridge_profile() { return {25.0 * 1024 * 1024, 40e9, 10}; }

const char* to_string(Regime r) {
  switch (r) {
    case Regime::kLayersFit:
      return "layers-fit";
    case Regime::kRowsFit:
      return "rows-fit";
    case Regime::kNoneFit:
      return "none-fit";
  }
  return "?";
}

double code_balance(const StencilSpec& spec, Regime regime) {
  if (spec.kind == StencilKind::k7ptConst) {
    switch (regime) {
      case Regime::kLayersFit:
        return 24.0;
      case Regime::kRowsFit:
        return 40.0;
      case Regime::kNoneFit:
        return 56.0;
    }
  }
  if (regime != Regime::kLayersFit) {
    throw UsageError(std::string("code balance for ") + std::string(to_string(spec.kind)) +
                     " is only modeled in the layers-fit regime");
  }
  return spec.ideal_code_balance;
}

LayerCondition layer_condition(const StencilSpec& spec, int nx, int ny, int n_threads,
                               double cache_bytes, Schedule schedule) {
  const double layer = static_cast<double>(nx) * ny * sizeof(double);
  const int r = spec.radius;
  LayerCondition lc{};
  if (schedule == Schedule::kContiguous) {
    lc.lhs_bytes = (2.0 * r + 1.0) * layer;
    lc.rhs_bytes = cache_bytes / (2.0 * n_threads);
  } else {
    lc.lhs_bytes = (n_threads + 2.0 * r) * layer;
    lc.rhs_bytes = cache_bytes / 2.0;
  }
  lc.satisfied = lc.lhs_bytes < lc.rhs_bytes;
  return lc;
}

Regime predict_regime(const StencilSpec& spec, int bx, int by, int n_threads,
                      double cache_bytes, double capacity_factor) {
  const double avail = cache_bytes * capacity_factor / n_threads;
  const double span = 2.0 * spec.radius + 1.0;
  if (span * bx * by * sizeof(double) < avail) return Regime::kLayersFit;
  if (span * bx * sizeof(double) < avail) return Regime::kRowsFit;
  return Regime::kNoneFit;
}

double roofline(double mem_bw, double balance) {
  if (!(mem_bw > 0) || !(balance > 0)) {
    throw UsageError("roofline needs positive bandwidth and code balance");
  }
  return mem_bw / balance;
}

int wavefront_width(int d_w, int n_f, int r) { return d_w - 2 * r + n_f + 1; }

namespace {

void check_query(const FootprintQuery& q) {
  if (q.r < 1 || q.d_w < 4 * q.r || q.d_w % 2 != 0) {
    throw UsageError("footprint query needs an even D_w >= 4R");
  }
  if (q.n_f < 0 || q.n_d < 1 || q.n_xb < 1) {
    throw UsageError("footprint query needs N_F >= 0, N_D >= 1, N_xb >= 1");
  }
}

}  // namespace

std::int64_t cache_block_bytes(const FootprintQuery& q) {
  check_query(q);
  const std::int64_t d = q.d_w, r = q.r;
  const std::int64_t w_w = wavefront_width(q.d_w, q.n_f, q.r);
  return q.n_xb * (q.n_d * d * (d / 2 - r + q.n_f + 1) + 2 * r * (d + w_w));
}

std::int64_t cache_block_bytes_r1(const FootprintQuery& q) {
  check_query(q);
  if (q.r != 1) throw UsageError("cache_block_bytes_r1 models R = 1 only");
  const std::int64_t d = q.d_w;
  const std::int64_t w_w = d + q.n_f - 1;
  return q.n_xb * (q.n_d * (d * d / 2 + d * q.n_f) + 2 * (d + w_w));
}

}  // namespace mwd
