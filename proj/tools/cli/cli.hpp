#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mwd/grid.hpp"
#include "mwd/perfmodel.hpp"
#include "mwd/runtime.hpp"
#include "mwd/stencil.hpp"
#include "mwd/tuner.hpp"

namespace mwd::cli {

enum class Mode { kNaive, kSpatial, kWd };

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

/// Everything one invocation needs. d_w == 0 asks the model tuner.
struct RunConfig {
  StencilKind stencil = StencilKind::k7ptConst;
  int nx = 64, ny = 64, nz = 64;
  int nt = 8;
  Mode mode = Mode::kWd;
  int group_size = 1;
  int n_groups = 1;
  int d_w = 0;
  int n_f = 0;
  std::uint64_t seed = 1;
  bool verify = true;
  bool tune = false;
  int ranks = 1;
  std::string csv_path;

  MachineModel machine = ivy_bridge_profile();
  std::string machine_name = "ivybridge";
  int reps = 3;
  int bx = 0, by = 0;  ///< spatial block; 0 picks from the layer condition
  bool simulate = false;
  std::int64_t verify_budget = std::int64_t{1} << 22;  ///< max interior points for verify
  int jitter_us = 0;
  std::optional<int> skip_tile;  ///< fault injection for verify

  ThreadGroupConfig groups() const { return {group_size, n_groups}; }
  std::int64_t points() const { return static_cast<std::int64_t>(nx) * ny * nz; }
};

/// "ivybridge" or a key=value file with cache_bytes, mem_bw, n_threads.
MachineModel load_machine(const std::string& profile_or_file);

/// Throws UsageError when the configuration cannot run.
void validate(const RunConfig& cfg);

/// Fills in d_w / n_f from the model tuner when d_w is unset or tuning is
/// forced. No-op for naive and spatial modes.
RunConfig resolve_tiling(RunConfig cfg);

/// Spatial block used for naive (full layers) and spatial mode.
BlockSpec block_for(const RunConfig& cfg);

struct ReportRow {
  RunConfig config;
  double seconds = 0;
  double lups_per_s = 0;
  double roofline_lups_per_s = 0;
  std::optional<std::int64_t> cache_block_bytes;
  std::optional<double> sim_bytes_per_lup;
  std::optional<GroupFractions> fractions;  ///< wd mode only
};

const std::vector<std::string>& csv_columns();
void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const ReportRow& row);
/// Appends rows, writing the header first when the file is new or empty.
void append_csv(const std::string& path, const std::vector<ReportRow>& rows);

struct VerifyResult {
  bool pass = false;
  std::optional<Mismatch> mismatch;
  std::optional<int> tile;  ///< wd mode: tile that wrote the mismatching cell last
};

/// Runs the naive reference and the configured scheme from the same seed.
VerifyResult verify(const RunConfig& cfg);

/// Config shrunk to a cheap grid that keeps d_w, n_f and the group shape.
RunConfig micro_config(const RunConfig& cfg);

/// Warm-up plus cfg.reps timed runs; reports the median.
ReportRow bench(const RunConfig& cfg);

void model_report(const RunConfig& cfg, std::ostream& os);

TuneResult tune(const RunConfig& cfg, TuneMode mode);

enum class SweepKind { kThreads, kGrid };

/// One config per thread-group count 1..max, or per cubic size
/// 64, 128, ... up to max.
std::vector<RunConfig> sweep_configs(const RunConfig& cfg, SweepKind kind, int max);

/// Entry point of mwdbench. Returns the process exit code: 0 ok,
/// 1 verification failure, 2 usage error, 3 infeasible or runtime failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mwd::cli
