#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mwd/perfmodel.hpp"
#include "mwd/runtime.hpp"
#include "mwd/stencil.hpp"

namespace mwd {

/// Search space and limits for the diamond width / frontline search.
struct TuneConstraints {
  double cache_budget = 0;  ///< bytes available to one thread group
  double cache_floor = 0;   ///< candidates below this are skipped
  int ny = 0;
  std::int64_t nx_bytes = 0;
  int nz = 0;
  int group_size = 1;
  int n_groups = 1;
  int d_w_cap = 0;  ///< largest width tried; 0 means ny
  int n_f_cap = 15;
};

/// Per-group budget C * capacity_factor / n_groups for the given machine.
TuneConstraints make_constraints(const MachineModel& machine, int nx, int ny, int nz,
                                 const ThreadGroupConfig& cfg, double capacity_factor = 0.5);

struct TuneCandidate {
  int d_w;
  int n_f;
  std::int64_t predicted_bytes;
  int tiles_per_row;
};

/// All (d_w, n_f) with d_w a multiple of 4R dividing ny, ny / d_w >= n_groups
/// and a footprint inside [cache_floor, cache_budget]. Sorted by footprint,
/// largest first, then by smaller d_w and n_f.
std::vector<TuneCandidate> enumerate_valid(const TuneConstraints& c, int r, int n_d);

enum class BindingConstraint { kDivisibility, kConcurrency, kCacheFit };

const char* to_string(BindingConstraint b);

class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, BindingConstraint binding)
      : std::runtime_error(what), binding_(binding) {}
  BindingConstraint binding() const noexcept { return binding_; }

 private:
  BindingConstraint binding_;
};

/// First constraint, in the order divisibility, concurrency, cache fit, that
/// leaves no candidate. Empty when the candidate set is non-empty.
std::optional<BindingConstraint> binding_constraint(const TuneConstraints& c, int r, int n_d);

enum class TuneMode { kModel, kMeasure };

struct TuneResult {
  int d_w = 0;
  int n_f = 0;
  std::int64_t predicted_bytes = 0;
  int tiles_per_row = 0;
  std::optional<double> measured_lups_per_s;
};

/// True when `r` meets every constraint of `c`.
bool satisfies(const TuneResult& r, const TuneConstraints& c, int radius, int n_d);

struct MeasureOptions {
  int max_nz = 64;  ///< z extent of the timing sub-problem
  std::uint64_t seed = 1;
};

/// Model mode takes the largest footprint; measure mode times a two-row run
/// of every candidate and keeps the fastest. Ties go to the smaller d_w, then
/// the smaller n_f. Throws InfeasibleError naming the binding constraint.
TuneResult autotune(const StencilSpec& spec, int nx, const TuneConstraints& c, TuneMode mode,
                    const MeasureOptions& measure = {});

/// "key=value" lines: d_w, n_f, predicted_bytes, tiles_per_row and, when
/// measured, measured_lups_per_s.
void write_tune_result(std::ostream& os, const TuneResult& r);
/// Throws ProtocolError on unknown keys or missing d_w / n_f.
TuneResult read_tune_result(std::istream& is);

}  // namespace mwd
