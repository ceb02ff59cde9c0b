#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cli/cli.hpp"
#include "mwd/distrib.hpp"
#include "mwd/error.hpp"
#include "mwd/tiling.hpp"
#include "mwd/traffic.hpp"

namespace mwd::cli {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kNaive: return "naive";
    case Mode::kSpatial: return "spatial";
    case Mode::kWd: return "wd";
  }
  return "wd";
}

Mode parse_mode(std::string_view name) {
  if (name == "naive") return Mode::kNaive;
  if (name == "spatial") return Mode::kSpatial;
  if (name == "wd") return Mode::kWd;
  throw UsageError("unknown mode '" + std::string(name) + "'");
}

MachineModel load_machine(const std::string& profile_or_file) {
  if (profile_or_file == "ivybridge") return ivy_bridge_profile();
  std::ifstream in(profile_or_file);
  if (!in) throw UsageError("unknown machine profile or unreadable file '" + profile_or_file + "'");
  MachineModel m{};
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key == "cache_bytes") m.cache_bytes = std::stod(val);
    else if (key == "mem_bw") m.mem_bw = std::stod(val);
    else if (key == "n_threads") m.n_threads = std::stoi(val);
    else throw UsageError("unknown machine key '" + key + "'");
  }
  if (m.cache_bytes <= 0 || m.mem_bw <= 0) {
    throw UsageError("machine file needs positive cache_bytes and mem_bw");
  }
  return m;
}

void validate(const RunConfig& cfg) {
  if (cfg.nx < 1 || cfg.ny < 1 || cfg.nz < 1) throw UsageError("grid extents must be positive");
  if (cfg.nt < 1) throw UsageError("--nt must be at least 1");
  if (cfg.group_size < 1 || cfg.n_groups < 1) throw UsageError("thread groups must be positive");
  if (cfg.ranks < 1) throw UsageError("--ranks must be at least 1");
  if (cfg.reps < 1) throw UsageError("--reps must be at least 1");
  if (cfg.n_f < 0) throw UsageError("--nf must be non-negative");
  const StencilSpec spec = make_spec(cfg.stencil);
  if (cfg.mode == Mode::kWd) {
    if (!spec.wavefront_eligible()) {
      throw UsageError(std::string(mwd::to_string(cfg.stencil)) +
                       " is second order in time and has no wavefront mode");
    }
    if (cfg.d_w > 0) {
      if (cfg.d_w % (2 * spec.radius) != 0 || cfg.ny % cfg.d_w != 0) {
        throw UsageError("--dw must be a multiple of " + std::to_string(2 * spec.radius) +
                         " dividing ny = " + std::to_string(cfg.ny));
      }
      if (cfg.ranks > 1 && cfg.ny % (cfg.ranks * cfg.d_w) != 0) {
        throw UsageError("ny must be a multiple of ranks * dw");
      }
    }
  } else if (cfg.ranks > 1) {
    throw UsageError("--ranks needs --mode wd");
  }
}

RunConfig resolve_tiling(RunConfig cfg) {
  if (cfg.mode != Mode::kWd || (cfg.d_w > 0 && !cfg.tune)) return cfg;
  cfg.d_w = 0;
  const TuneResult r = tune(cfg, TuneMode::kModel);
  cfg.d_w = r.d_w;
  cfg.n_f = r.n_f;
  return cfg;
}

BlockSpec block_for(const RunConfig& cfg) {
  BlockSpec b{cfg.nx, cfg.ny, Schedule::kContiguous};
  if (cfg.mode != Mode::kSpatial) return b;
  if (cfg.bx > 0) b.bx = cfg.bx;
  if (cfg.by > 0) {
    b.by = cfg.by;
    return b;
  }
  const StencilSpec spec = make_spec(cfg.stencil);
  const int threads = cfg.groups().total_threads();
  while (b.by > 1 && predict_regime(spec, b.bx, b.by, threads, cfg.machine.cache_bytes) !=
                         Regime::kLayersFit) {
    b.by = (b.by + 1) / 2;
  }
  return b;
}

namespace {

GridBundle make_bundle(const RunConfig& cfg, const StencilSpec& spec) {
  GridBundle b = allocate_grid(cfg.nx, cfg.ny, cfg.nz, spec);
  fill_deterministic(b.grid, b.coeffs, spec, cfg.seed);
  return b;
}

struct SchemeRun {
  std::int64_t lups = 0;
  std::vector<GroupFractions> fractions;
};

SchemeRun run_scheme(const RunConfig& cfg, const StencilSpec& spec, GridBundle& b) {
  SchemeRun out;
  const ThreadGroupConfig groups = cfg.groups();
  if (cfg.mode != Mode::kWd) {
    const StencilOperator op(spec, b.coeffs);
    if (cfg.mode == Mode::kNaive) {
      sweep_naive(op, b.grid, cfg.nt, groups.total_threads());
    } else {
      sweep_spatial(op, b.grid, cfg.nt, groups.total_threads(), block_for(cfg));
    }
    out.lups = cfg.points() * cfg.nt;
    return out;
  }
  if (cfg.ranks == 1) {
    const StencilOperator op(spec, b.coeffs);
    const Tessellation tess = build_tessellation(cfg.ny, cfg.nt, cfg.d_w, spec.radius);
    RunOptions opts;
    opts.skip_tile = cfg.skip_tile;
    const ExecutionLog log = run_mwd(op, b.grid, cfg.nt, tess, groups, cfg.n_f, opts);
    out.lups = log.lups;
    out.fractions = log.group_fractions();
    return out;
  }
  LoopbackOptions lo;
  lo.max_jitter = std::chrono::microseconds(cfg.jitter_us);
  lo.jitter_seed = cfg.seed;
  auto transport = make_loopback_transport(cfg.ranks, lo);
  DistributedOptions opts;
  opts.run.skip_tile = cfg.skip_tile;
  const DistributedReport rep = run_distributed(spec, b, default_weights(spec.kind), cfg.nt,
                                                cfg.d_w, cfg.n_f, groups, cfg.ranks,
                                                *transport, opts);
  for (const auto& r : rep.ranks) {
    out.lups += r.log.lups;
    const auto f = r.log.group_fractions();
    out.fractions.insert(out.fractions.end(), f.begin(), f.end());
  }
  return out;
}

double balance_for(const StencilSpec& spec, Regime regime) {
  if (spec.kind != StencilKind::k7ptConst) return spec.ideal_code_balance;
  return code_balance(spec, regime);
}

GroupFractions mean_fractions(const std::vector<GroupFractions>& fs) {
  GroupFractions m;
  if (fs.empty()) return m;
  for (const auto& f : fs) {
    m.compute += f.compute;
    m.comm += f.comm;
    m.idle += f.idle;
  }
  const double n = static_cast<double>(fs.size());
  m.compute /= n;
  m.comm /= n;
  m.idle /= n;
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

VerifyResult verify(const RunConfig& cfg_in) {
  validate(cfg_in);
  const RunConfig cfg = resolve_tiling(cfg_in);
  if (cfg.points() > cfg.verify_budget) {
    throw UsageError("grid has " + std::to_string(cfg.points()) +
                     " points, above the verify budget of " + std::to_string(cfg.verify_budget));
  }
  const StencilSpec spec = make_spec(cfg.stencil);
  GridBundle ref = make_bundle(cfg, spec);
  GridBundle got = make_bundle(cfg, spec);
  sweep_naive(StencilOperator(spec, ref.coeffs), ref.grid, cfg.nt, 1);
  run_scheme(cfg, spec, got);
  const Comparison cmp = compare_bitwise(ref.grid, got.grid);
  VerifyResult v{cmp.equal(), cmp.first_mismatch, std::nullopt};
  if (!v.pass && cfg.mode == Mode::kWd) {
    v.tile = build_tessellation(cfg.ny, cfg.nt, cfg.d_w, spec.radius)
                 .owner(v.mismatch->y, cfg.nt - 1);
  }
  return v;
}

RunConfig micro_config(const RunConfig& cfg) {
  RunConfig m = cfg;
  m.nx = std::min(cfg.nx, 16);
  m.nz = std::min(cfg.nz, 16);
  if (cfg.ny > 64 && cfg.mode == Mode::kWd) {
    const int unit = cfg.d_w * cfg.ranks;
    const int need = cfg.d_w * cfg.n_groups;
    m.ny = std::min(cfg.ny, unit * std::max(1, (need + unit - 1) / unit));
  }
  const int tile_height = cfg.d_w > 0 ? cfg.d_w / make_spec(cfg.stencil).radius : 4;
  m.nt = std::min(cfg.nt, 2 * tile_height);
  m.skip_tile.reset();
  m.tune = false;
  return m;
}

ReportRow bench(const RunConfig& cfg_in) {
  validate(cfg_in);
  const RunConfig cfg = resolve_tiling(cfg_in);
  const StencilSpec spec = make_spec(cfg.stencil);

  if (cfg.mode == Mode::kWd && cfg.verify) {
    const VerifyResult v = verify(micro_config(cfg));
    if (!v.pass) {
      const auto& mm = *v.mismatch;
      throw InternalError("micro-verify failed at (z, y, x) = (" + std::to_string(mm.z) + ", " +
                          std::to_string(mm.y) + ", " + std::to_string(mm.x) + ")");
    }
  }

  GridBundle b = make_bundle(cfg, spec);
  run_scheme(cfg, spec, b);  // warm-up

  std::vector<double> secs;
  std::vector<GroupFractions> fractions;
  for (int rep = 0; rep < cfg.reps; ++rep) {
    const auto t0 = std::chrono::steady_clock::now();
    SchemeRun r = run_scheme(cfg, spec, b);
    const auto t1 = std::chrono::steady_clock::now();
    if (r.lups != cfg.points() * cfg.nt) {
      throw InternalError("update counter reports " + std::to_string(r.lups) +
                          " lattice updates, expected " + std::to_string(cfg.points() * cfg.nt));
    }
    secs.push_back(std::chrono::duration<double>(t1 - t0).count());
    fractions.insert(fractions.end(), r.fractions.begin(), r.fractions.end());
  }

  ReportRow row;
  row.config = cfg;
  row.seconds = median(secs);
  row.lups_per_s = static_cast<double>(cfg.points()) * cfg.nt / row.seconds;
  const BlockSpec block = block_for(cfg);
  const Regime regime =
      cfg.mode == Mode::kWd
          ? Regime::kLayersFit
          : predict_regime(spec, block.bx, block.by, cfg.groups().total_threads(),
                           cfg.machine.cache_bytes);
  row.roofline_lups_per_s = roofline(cfg.machine.mem_bw, balance_for(spec, regime));
  if (cfg.mode == Mode::kWd) {
    row.cache_block_bytes = cache_block_bytes(footprint_for(spec, cfg.d_w, cfg.n_f, cfg.nx));
    row.fractions = mean_fractions(fractions);
  } else if (cfg.simulate) {
    try {
      row.sim_bytes_per_lup =
          simulate_traffic(spec, cfg.nx, cfg.ny, cfg.nz, block,
                           static_cast<std::size_t>(cfg.machine.cache_bytes))
              .bytes_per_lup;
    } catch (const ResourceError&) {
      // trace too long for the simulator; column stays empty
    }
  }
  return row;
}

void model_report(const RunConfig& cfg, std::ostream& os) {
  const StencilSpec spec = make_spec(cfg.stencil);
  const int threads = cfg.groups().total_threads();
  const auto& m = cfg.machine;
  os << std::setprecision(6);
  os << "stencil      " << mwd::to_string(spec.kind) << "  radius " << spec.radius
     << "  streams " << spec.n_streams << "  flops/LUP " << spec.flops_per_lup << '\n';
  os << "machine      " << cfg.machine_name << "  cache " << m.cache_bytes << " B  bandwidth "
     << m.mem_bw / 1e9 << " GB/s  threads " << m.n_threads << '\n';

  os << "code balance";
  if (spec.kind == StencilKind::k7ptConst) {
    for (Regime r : {Regime::kLayersFit, Regime::kRowsFit, Regime::kNoneFit}) {
      os << "  " << mwd::to_string(r) << ' ' << code_balance(spec, r);
    }
  } else {
    os << "  " << mwd::to_string(Regime::kLayersFit) << ' ' << spec.ideal_code_balance;
  }
  os << " B/LUP\n";

  for (Schedule s : {Schedule::kContiguous, Schedule::kInterleaved}) {
    const LayerCondition lc = layer_condition(spec, cfg.nx, cfg.ny, threads, m.cache_bytes, s);
    os << "layer cond.  " << (s == Schedule::kContiguous ? "contiguous " : "interleaved")
       << "  " << lc.lhs_bytes << " < " << lc.rhs_bytes << "  "
       << (lc.satisfied ? "holds" : "violated") << '\n';
  }
  os << "regime       " << mwd::to_string(predict_regime(spec, cfg.nx, cfg.ny, threads,
                                                          m.cache_bytes))
     << " (unblocked " << cfg.nx << "x" << cfg.ny << ", " << threads << " threads)\n";

  const double bound = roofline(m.mem_bw, spec.ideal_code_balance);
  os << "roofline     " << std::fixed << std::setprecision(2) << bound / 1e9 << " GLUP/s"
     << std::defaultfloat << std::setprecision(6) << "  (" << bound << " LUP/s at "
     << spec.ideal_code_balance << " B/LUP)\n";

  if (cfg.d_w > 0) {
    const FootprintQuery q = footprint_for(spec, cfg.d_w, cfg.n_f, cfg.nx);
    os << "cache block  d_w " << cfg.d_w << "  n_f " << cfg.n_f << "  "
       << cache_block_bytes(q) << " B per group, " << cache_block_bytes(q) * cfg.n_groups
       << " B for " << cfg.n_groups << " groups\n";
  }

  if (!spec.wavefront_eligible()) {
    os << "candidates   none (second order in time)\n";
    return;
  }
  const TuneConstraints c = make_constraints(m, cfg.nx, cfg.ny, cfg.nz, cfg.groups());
  const auto cands = enumerate_valid(c, spec.radius, spec.n_streams);
  os << "candidates   " << cands.size() << " within " << c.cache_budget << " B per group\n";
  if (cands.empty()) {
    if (auto bind = binding_constraint(c, spec.radius, spec.n_streams)) {
      os << "  infeasible: " << mwd::to_string(*bind) << '\n';
    }
    return;
  }
  os << "  d_w   n_f   bytes        tiles/row\n";
  const std::size_t shown = std::min<std::size_t>(cands.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& t = cands[i];
    os << "  " << std::left << std::setw(6) << t.d_w << std::setw(6) << t.n_f << std::setw(13)
       << t.predicted_bytes << t.tiles_per_row << std::right << '\n';
  }
}

TuneResult tune(const RunConfig& cfg, TuneMode mode) {
  const StencilSpec spec = make_spec(cfg.stencil);
  if (!spec.wavefront_eligible()) {
    throw UsageError(std::string(mwd::to_string(cfg.stencil)) + " cannot be tuned");
  }
  TuneConstraints c = make_constraints(cfg.machine, cfg.nx, cfg.ny, cfg.nz, cfg.groups());
  if (cfg.ranks > 1) {
    // widths must divide each rank's slab
    c.ny = cfg.ny / cfg.ranks;
  }
  MeasureOptions mo;
  mo.seed = cfg.seed;
  return autotune(spec, cfg.nx, c, mode, mo);
}

std::vector<RunConfig> sweep_configs(const RunConfig& cfg, SweepKind kind, int max) {
  if (max < 1) throw UsageError("--sweep-max must be positive");
  std::vector<RunConfig> out;
  if (kind == SweepKind::kThreads) {
    for (int g = 1; g <= max; ++g) {
      RunConfig c = cfg;
      c.n_groups = g;
      out.push_back(c);
    }
  } else {
    for (int n = 64; n <= max; n += 64) {
      RunConfig c = cfg;
      c.nx = c.ny = c.nz = n;
      out.push_back(c);
    }
    if (out.empty()) throw UsageError("grid sweep needs --sweep-max of at least 64");
  }
  return out;
}

const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "stencil",      "nx",         "ny",        "nz",
      "nt",           "mode",       "group_size", "n_groups",
      "dw",           "nf",         "ranks",     "seconds",
      "lups_per_s",   "roofline_lups_per_s", "cache_block_bytes", "sim_bytes_per_lup",
      "compute_frac", "comm_frac",  "idle_frac"};
  return cols;
}

void write_csv_header(std::ostream& os) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
}

void write_csv_row(std::ostream& os, const ReportRow& r) {
  const RunConfig& c = r.config;
  std::ostringstream s;
  s << std::setprecision(9);
  s << mwd::to_string(c.stencil) << ',' << c.nx << ',' << c.ny << ',' << c.nz << ',' << c.nt
    << ',' << to_string(c.mode) << ',' << c.group_size << ',' << c.n_groups << ',';
  if (c.mode == Mode::kWd) s << c.d_w << ',' << c.n_f;
  else s << ',';
  s << ',' << c.ranks << ',' << r.seconds << ',' << r.lups_per_s << ','
    << r.roofline_lups_per_s << ',';
  if (r.cache_block_bytes) s << *r.cache_block_bytes;
  s << ',';
  if (r.sim_bytes_per_lup) s << *r.sim_bytes_per_lup;
  s << ',';
  if (r.fractions) s << r.fractions->compute << ',' << r.fractions->comm << ',' << r.fractions->idle;
  else s << ",,";
  os << s.str() << '\n';
}

void append_csv(const std::string& path, const std::vector<ReportRow>& rows) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const bool fresh = !fs::exists(path, ec) || fs::file_size(path, ec) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw UsageError("cannot open CSV file '" + path + "'");
  if (fresh) write_csv_header(out);
  for (const auto& r : rows) write_csv_row(out, r);
}

}  // namespace mwd::cli
