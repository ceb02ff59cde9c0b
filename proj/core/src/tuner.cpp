#include "mwd/tuner.hpp"

#include <algorithm>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>

#include "mwd/error.hpp"
#include "mwd/grid.hpp"
#include "mwd/kernels.hpp"
#include "mwd/tiling.hpp"

namespace mwd {

TuneConstraints make_constraints(const MachineModel& machine, int nx, int ny, int nz,
                                 const ThreadGroupConfig& cfg, double capacity_factor) {
  if (cfg.n_groups < 1 || cfg.group_size < 1) throw UsageError("invalid thread group config");
  TuneConstraints c;
  c.cache_budget = machine.cache_bytes * capacity_factor / cfg.n_groups;
  c.ny = ny;
  c.nx_bytes = static_cast<std::int64_t>(nx) * static_cast<std::int64_t>(sizeof(double));
  c.nz = nz;
  c.group_size = cfg.group_size;
  c.n_groups = cfg.n_groups;
  return c;
}

const char* to_string(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::kDivisibility:
      return "divisibility";
    case BindingConstraint::kConcurrency:
      return "concurrency";
    case BindingConstraint::kCacheFit:
      return "cache-fit";
  }
  return "?";
}

namespace {

std::vector<int> width_candidates(const TuneConstraints& c, int r) {
  std::vector<int> out;
  const int cap = c.d_w_cap > 0 ? std::min(c.d_w_cap, c.ny) : c.ny;
  for (int d = 4 * r; d <= cap; d += 4 * r) {
    if (c.ny % d == 0) out.push_back(d);
  }
  return out;
}

bool fits(const TuneConstraints& c, std::int64_t bytes) {
  const auto b = static_cast<double>(bytes);
  return b <= c.cache_budget && b >= c.cache_floor;
}

}  // namespace

std::vector<TuneCandidate> enumerate_valid(const TuneConstraints& c, int r, int n_d) {
  std::vector<TuneCandidate> out;
  if (r < 1 || c.ny < 1 || c.n_groups < 1 || c.n_f_cap < 0) return out;
  for (int d : width_candidates(c, r)) {
    const int per_row = c.ny / d;
    if (per_row < c.n_groups) continue;
    for (int nf = 0; nf <= c.n_f_cap; ++nf) {
      const auto bytes = cache_block_bytes({d, nf, r, n_d, c.nx_bytes});
      if (fits(c, bytes)) out.push_back({d, nf, bytes, per_row});
    }
  }
  std::sort(out.begin(), out.end(), [](const TuneCandidate& a, const TuneCandidate& b) {
    if (a.predicted_bytes != b.predicted_bytes) return a.predicted_bytes > b.predicted_bytes;
    if (a.d_w != b.d_w) return a.d_w < b.d_w;
    return a.n_f < b.n_f;
  });
  return out;
}

std::optional<BindingConstraint> binding_constraint(const TuneConstraints& c, int r, int n_d) {
  const auto widths = width_candidates(c, r);
  if (widths.empty()) return BindingConstraint::kDivisibility;
  const bool any_concurrent =
      std::any_of(widths.begin(), widths.end(), [&](int d) { return c.ny / d >= c.n_groups; });
  if (!any_concurrent) return BindingConstraint::kConcurrency;
  if (enumerate_valid(c, r, n_d).empty()) return BindingConstraint::kCacheFit;
  return std::nullopt;
}

bool satisfies(const TuneResult& res, const TuneConstraints& c, int radius, int n_d) {
  if (res.d_w < 4 * radius || res.d_w % (2 * radius) != 0) return false;
  if (c.ny % res.d_w != 0) return false;
  if (c.ny / res.d_w < c.n_groups || res.tiles_per_row != c.ny / res.d_w) return false;
  if (res.n_f < 0) return false;
  const auto bytes = cache_block_bytes({res.d_w, res.n_f, radius, n_d, c.nx_bytes});
  return bytes == res.predicted_bytes && fits(c, bytes);
}

namespace {

double time_candidate(const StencilSpec& spec, int nx, const TuneConstraints& c,
                      const TuneCandidate& cand, const MeasureOptions& m) {
  const int nz = std::max(1, std::min(c.nz, m.max_nz));
  auto bundle = allocate_grid(nx, c.ny, nz, spec);
  fill_deterministic(bundle.grid, bundle.coeffs, spec, m.seed);
  StencilOperator op(spec, bundle.coeffs);
  // Two diamond rows.
  const int steps = cand.d_w / spec.radius;
  const auto tess = build_tessellation(c.ny, steps, cand.d_w, spec.radius);
  const ThreadGroupConfig cfg{c.group_size, c.n_groups};
  const auto t0 = std::chrono::steady_clock::now();
  run_mwd(op, bundle.grid, steps, tess, cfg, cand.n_f);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double lups = static_cast<double>(bundle.grid.interior_points()) * steps;
  return secs > 0 ? lups / secs : 0.0;
}

}  // namespace

TuneResult autotune(const StencilSpec& spec, int nx, const TuneConstraints& c, TuneMode mode,
                    const MeasureOptions& measure) {
  const auto cands = enumerate_valid(c, spec.radius, spec.n_streams);
  if (cands.empty()) {
    const auto b = binding_constraint(c, spec.radius, spec.n_streams)
                       .value_or(BindingConstraint::kCacheFit);
    std::string detail;
    switch (b) {
      case BindingConstraint::kDivisibility:
        detail = "no multiple of 4R = " + std::to_string(4 * spec.radius) + " divides ny = " +
                 std::to_string(c.ny);
        break;
      case BindingConstraint::kConcurrency:
        detail = "ny = " + std::to_string(c.ny) + " leaves fewer tiles per row than the " +
                 std::to_string(c.n_groups) + " thread groups";
        break;
      case BindingConstraint::kCacheFit:
        detail = "no diamond fits the per-group cache budget of " +
                 std::to_string(static_cast<std::int64_t>(c.cache_budget)) + " bytes";
        break;
    }
    throw InfeasibleError("infeasible tuning problem (" + std::string(to_string(b)) + "): " +
                              detail,
                          b);
  }
  auto pick = [](const TuneCandidate& k) {
    return TuneResult{k.d_w, k.n_f, k.predicted_bytes, k.tiles_per_row, std::nullopt};
  };
  if (mode == TuneMode::kModel) return pick(cands.front());

  std::optional<TuneResult> best;
  for (const auto& k : cands) {
    const double rate = time_candidate(spec, nx, c, k, measure);
    const bool better = !best || rate > *best->measured_lups_per_s ||
                        (rate == *best->measured_lups_per_s &&
                         (k.d_w < best->d_w || (k.d_w == best->d_w && k.n_f < best->n_f)));
    if (better) {
      best = pick(k);
      best->measured_lups_per_s = rate;
    }
  }
  return *best;
}

void write_tune_result(std::ostream& os, const TuneResult& r) {
  os << "d_w=" << r.d_w << '\n'
     << "n_f=" << r.n_f << '\n'
     << "predicted_bytes=" << r.predicted_bytes << '\n'
     << "tiles_per_row=" << r.tiles_per_row << '\n';
  if (r.measured_lups_per_s) os << "measured_lups_per_s=" << *r.measured_lups_per_s << '\n';
}

TuneResult read_tune_result(std::istream& is) {
  TuneResult r;
  bool have_dw = false, have_nf = false;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ProtocolError("expected key=value, got '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    try {
      if (key == "d_w") {
        r.d_w = std::stoi(value);
        have_dw = true;
      } else if (key == "n_f") {
        r.n_f = std::stoi(value);
        have_nf = true;
      } else if (key == "predicted_bytes") {
        r.predicted_bytes = std::stoll(value);
      } else if (key == "tiles_per_row") {
        r.tiles_per_row = std::stoi(value);
      } else if (key == "measured_lups_per_s") {
        r.measured_lups_per_s = std::stod(value);
      } else {
        throw ProtocolError("unknown tuning key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ProtocolError("bad value for '" + key + "': '" + value + "'");
    }
  }
  if (!have_dw || !have_nf) throw ProtocolError("tuning result needs d_w and n_f");
  return r;
}

}  // namespace mwd
