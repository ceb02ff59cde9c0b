#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <ostream>

#include "cli/cli.hpp"
#include "mwd/error.hpp"

namespace mwd::cli {
namespace {

void print_row(std::ostream& os, const ReportRow& r) {
  const RunConfig& c = r.config;
  os << std::left << std::setw(8) << to_string(c.mode) << std::setw(11)
     << mwd::to_string(c.stencil) << c.nx << 'x' << c.ny << 'x' << c.nz << "  T=" << c.nt
     << "  groups " << c.n_groups << 'x' << c.group_size;
  if (c.mode == Mode::kWd) os << "  d_w " << c.d_w << "  n_f " << c.n_f;
  if (c.ranks > 1) os << "  ranks " << c.ranks;
  os << std::right << std::setprecision(4) << "\n    " << r.seconds << " s  "
     << r.lups_per_s / 1e6 << " MLUP/s  roofline " << r.roofline_lups_per_s / 1e6 << " MLUP/s";
  if (r.sim_bytes_per_lup) os << "  sim " << *r.sim_bytes_per_lup << " B/LUP";
  if (r.fractions) {
    os << "  compute " << r.fractions->compute << " comm " << r.fractions->comm << " idle "
       << r.fractions->idle;
  }
  os << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wavefront diamond blocking stencil benchmark"};
  app.set_config("--config", "", "key=value file; command-line flags take precedence");

  std::string verb;
  app.add_option("verb", verb, "verify | bench | model | tune | sweep")
      ->required()
      ->check(CLI::IsMember({"verify", "bench", "model", "tune", "sweep"}));

  RunConfig cfg;
  std::string stencil = "7pt-const", mode = "wd", machine = "ivybridge";
  std::vector<int> dims{64, 64, 64};
  bool no_verify = false;
  int skip_tile = -1;
  double cache_bytes = 0, mem_bw = 0;
  std::string tune_mode = "model", params_path, out_path, sweep = "threads";
  int sweep_max = 4;

  app.add_option("--stencil", stencil)
      ->check(CLI::IsMember({"7pt-const", "7pt-var", "25pt-const", "25pt-var"}));
  app.add_option("--n", dims, "grid extents X,Y,Z")->delimiter(',')->expected(3);
  app.add_option("--nt", cfg.nt, "time steps");
  app.add_option("--mode", mode)->check(CLI::IsMember({"naive", "spatial", "wd"}));
  app.add_option("--group-size", cfg.group_size);
  app.add_option("--n-groups", cfg.n_groups);
  app.add_option("--dw", cfg.d_w, "diamond width; 0 picks it with the model tuner");
  app.add_option("--nf", cfg.n_f, "extra frontlines per thread");
  app.add_option("--seed", cfg.seed);
  app.add_option("--ranks", cfg.ranks, "simulated distributed ranks");
  app.add_option("--csv", cfg.csv_path, "append report rows to this file");
  app.add_option("--machine", machine, "ivybridge or a key=value machine file");
  app.add_option("--cache-bytes", cache_bytes, "override the machine cache size");
  app.add_option("--mem-bw", mem_bw, "override the machine bandwidth (bytes/s)");
  app.add_flag("--no-verify", no_verify, "skip the micro-verify before wd rows");
  app.add_flag("--tune", cfg.tune, "retune d_w and n_f even if given");
  app.add_option("--reps", cfg.reps, "timed repetitions (median is reported)");
  app.add_option("--bx", cfg.bx, "spatial block x extent");
  app.add_option("--by", cfg.by, "spatial block y extent");
  app.add_flag("--simulate", cfg.simulate, "add LRU-simulated bytes/LUP (naive, spatial)");
  app.add_option("--verify-budget", cfg.verify_budget, "largest grid (points) verify accepts");
  app.add_option("--jitter-us", cfg.jitter_us, "random delivery delay for --ranks > 1");
  app.add_option("--skip-tile", skip_tile, "fault injection: skip this tile's updates")
      ->group("");
  app.add_option("--tune-mode", tune_mode)->check(CLI::IsMember({"model", "measure"}));
  app.add_option("--params", params_path, "pin d_w and n_f from a tune result file");
  app.add_option("--out", out_path, "write the tune result here");
  app.add_option("--sweep", sweep)->check(CLI::IsMember({"threads", "grid"}));
  app.add_option("--sweep-max", sweep_max, "largest group count or cube edge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    cfg.stencil = parse_stencil_kind(stencil);
    cfg.mode = parse_mode(mode);
    cfg.nx = dims[0];
    cfg.ny = dims[1];
    cfg.nz = dims[2];
    cfg.verify = !no_verify;
    if (skip_tile >= 0) cfg.skip_tile = skip_tile;
    cfg.machine = load_machine(machine);
    cfg.machine_name = machine;
    if (cache_bytes > 0) cfg.machine.cache_bytes = cache_bytes;
    if (mem_bw > 0) cfg.machine.mem_bw = mem_bw;
    if (!params_path.empty()) {
      std::ifstream in(params_path);
      if (!in) throw UsageError("cannot read '" + params_path + "'");
      const TuneResult pinned = read_tune_result(in);
      cfg.d_w = pinned.d_w;
      cfg.n_f = pinned.n_f;
    }

    if (verb == "verify") {
      const VerifyResult v = verify(cfg);
      const RunConfig used = resolve_tiling(cfg);
      out << "verify " << to_string(used.mode) << ' ' << mwd::to_string(used.stencil) << ' '
          << used.nx << 'x' << used.ny << 'x' << used.nz << " T=" << used.nt;
      if (used.mode == Mode::kWd) out << " d_w=" << used.d_w << " n_f=" << used.n_f;
      if (used.ranks > 1) out << " ranks=" << used.ranks;
      if (v.pass) {
        out << ": PASS\n";
        return 0;
      }
      const Mismatch& m = *v.mismatch;
      out << ": FAIL at (z, y, x) = (" << m.z << ", " << m.y << ", " << m.x << ") expected "
          << std::hexfloat << m.expected << " got " << m.actual << std::defaultfloat;
      if (v.tile) out << " in tile " << *v.tile;
      out << '\n';
      return 1;
    }

    if (verb == "model") {
      model_report(cfg, out);
      return 0;
    }

    if (verb == "tune") {
      validate(cfg);
      const TuneResult r =
          tune(cfg, tune_mode == "measure" ? TuneMode::kMeasure : TuneMode::kModel);
      write_tune_result(out, r);
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw UsageError("cannot write '" + out_path + "'");
        write_tune_result(f, r);
      }
      return 0;
    }

    std::vector<RunConfig> configs;
    if (verb == "bench") {
      configs.push_back(cfg);
    } else {
      configs = sweep_configs(cfg, sweep == "grid" ? SweepKind::kGrid : SweepKind::kThreads,
                              sweep_max);
    }
    std::vector<ReportRow> rows;
    for (const auto& c : configs) {
      rows.push_back(bench(c));
      print_row(out, rows.back());
    }
    if (!cfg.csv_path.empty()) append_csv(cfg.csv_path, rows);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace mwd::cli
