#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli/cli.hpp"
#include "mwd/error.hpp"
#include "mwd/tiling.hpp"

namespace fs = std::filesystem;
using namespace mwd;
using namespace mwd::cli;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mwdbench");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mwd_cli_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  fs::remove(p);
  return p;
}

}  // namespace

TEST(Cli, VerifyWavefrontPasses) {
  const auto r = invoke({"verify", "--n", "16,16,16", "--nt", "8", "--dw", "8"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos) << r.out;
}

TEST(Cli, VerifyDistributedPasses) {
  const auto r = invoke({"verify", "--n", "16,16,16", "--nt", "8", "--dw", "4", "--ranks", "2",
                         "--jitter-us", "20"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("ranks=2: PASS"), std::string::npos) << r.out;
}

TEST(Cli, SkippedTileFailsInsideThatTile) {
  // A last-row tile has no children, so only its own cells go wrong.
  const auto tess = build_tessellation(16, 8, 8, 1);
  const int victim = tess.rows().back().front();
  RunConfig cfg;
  cfg.nx = cfg.ny = cfg.nz = 16;
  cfg.nt = 8;
  cfg.d_w = 8;
  cfg.skip_tile = victim;
  const VerifyResult v = verify(cfg);
  ASSERT_FALSE(v.pass);
  ASSERT_TRUE(v.tile.has_value());
  EXPECT_EQ(*v.tile, victim);
  const LevelSpan* top = tess.tile(victim).level(7);
  ASSERT_NE(top, nullptr);
  EXPECT_GE(v.mismatch->y, top->y_begin);
  EXPECT_LT(v.mismatch->y, top->y_end);

  const auto r = invoke({"verify", "--n", "16,16,16", "--nt", "8", "--dw", "8", "--skip-tile",
                         std::to_string(victim)});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAIL at"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("in tile " + std::to_string(victim)), std::string::npos) << r.out;
}

TEST(Cli, ConfigFileWithFlagsWinning) {
  const fs::path conf = scratch("run.conf");
  std::ofstream(conf) << "stencil=7pt-var\nnt=3\nn=8,8,8\ndw=4\n";
  const auto r = invoke({"verify", "--config", conf.string(), "--nt", "2"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("verify wd 7pt-var 8x8x8 T=2 d_w=4"), std::string::npos) << r.out;
}

TEST(Cli, ModelRooflineConstants) {
  auto r = invoke({"model", "--stencil", "7pt-const"});
  EXPECT_NE(r.out.find("roofline     1.67 GLUP/s"), std::string::npos) << r.out;
  r = invoke({"model", "--stencil", "25pt-const"});
  EXPECT_NE(r.out.find("roofline     1.25 GLUP/s"), std::string::npos) << r.out;
  r = invoke({"model", "--stencil", "7pt-const", "--mem-bw", "80e9"});
  EXPECT_NE(r.out.find("roofline     3.33 GLUP/s"), std::string::npos) << r.out;
}

TEST(Cli, ModelListsCandidates) {
  const auto r = invoke({"model", "--stencil", "7pt-var", "--n", "64,64,64", "--dw", "8"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("code balance"), std::string::npos);
  EXPECT_NE(r.out.find("layer cond."), std::string::npos);
  EXPECT_NE(r.out.find("cache block  d_w 8"), std::string::npos);
  EXPECT_NE(r.out.find("d_w   n_f"), std::string::npos);
}

TEST(Cli, CsvSchemaIsStable) {
  std::ostringstream os;
  write_csv_header(os);
  EXPECT_EQ(os.str(),
            "stencil,nx,ny,nz,nt,mode,group_size,n_groups,dw,nf,ranks,seconds,lups_per_s,"
            "roofline_lups_per_s,cache_block_bytes,sim_bytes_per_lup,compute_frac,comm_frac,"
            "idle_frac\n");
}

TEST(Cli, BenchRowIsConsistent) {
  RunConfig cfg;
  cfg.stencil = StencilKind::k7ptVar;
  cfg.nx = cfg.ny = cfg.nz = 32;
  cfg.nt = 4;
  cfg.d_w = 8;
  cfg.n_f = 1;
  cfg.group_size = 2;
  const ReportRow row = bench(cfg);
  EXPECT_DOUBLE_EQ(row.lups_per_s, 32.0 * 32 * 32 * 4 / row.seconds);
  EXPECT_DOUBLE_EQ(row.roofline_lups_per_s, 40e9 / 80.0);
  ASSERT_TRUE(row.cache_block_bytes.has_value());
  ASSERT_TRUE(row.fractions.has_value());
  EXPECT_NEAR(row.fractions->compute + row.fractions->comm + row.fractions->idle, 1.0, 0.02);

  const fs::path csv = scratch("rows.csv");
  append_csv(csv.string(), {row, row});
  std::ifstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST(Cli, MicroVerifyKeepsTiling) {
  RunConfig cfg;
  cfg.nx = cfg.ny = cfg.nz = 256;
  cfg.nt = 100;
  cfg.d_w = 16;
  cfg.n_f = 3;
  cfg.group_size = 2;
  cfg.n_groups = 3;
  const RunConfig m = micro_config(cfg);
  EXPECT_EQ(m.d_w, 16);
  EXPECT_EQ(m.n_f, 3);
  EXPECT_EQ(m.group_size, 2);
  EXPECT_EQ(m.n_groups, 3);
  EXPECT_EQ(m.ny % m.d_w, 0);
  EXPECT_GE(m.ny / m.d_w, 3);
  EXPECT_LE(m.points(), cfg.verify_budget);
  EXPECT_NO_THROW(validate(m));
}

TEST(Cli, SweepShapes) {
  RunConfig cfg;
  const auto threads = sweep_configs(cfg, SweepKind::kThreads, 3);
  ASSERT_EQ(threads.size(), 3u);
  EXPECT_EQ(threads[2].n_groups, 3);
  const auto grid = sweep_configs(cfg, SweepKind::kGrid, 200);
  ASSERT_EQ(grid.size(), 3u);
  for (const auto& c : grid) {
    EXPECT_EQ(c.nx % 64, 0);
    EXPECT_EQ(c.nx, c.nz);
  }
}

TEST(Cli, TuneResultPinsParameters) {
  const fs::path out = scratch("tune.kv");
  auto r = invoke({"tune", "--n", "16,16,16", "--cache-bytes", "200000", "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(out);
  const TuneResult t = read_tune_result(in);
  r = invoke({"verify", "--n", "16,16,16", "--nt", "4", "--params", out.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("d_w=" + std::to_string(t.d_w) + " n_f=" + std::to_string(t.n_f)),
            std::string::npos)
      << r.out;
}

TEST(Cli, MachineFile) {
  const fs::path m = scratch("machine.kv");
  std::ofstream(m) << "# small box\ncache_bytes = 1048576\nmem_bw = 10e9\nn_threads = 4\n";
  const MachineModel mm = load_machine(m.string());
  EXPECT_DOUBLE_EQ(mm.cache_bytes, 1048576);
  EXPECT_DOUBLE_EQ(mm.mem_bw, 10e9);
  EXPECT_EQ(mm.n_threads, 4);
  std::ofstream(m) << "cache_bytes=1\nfoo=2\n";
  EXPECT_THROW(load_machine(m.string()), UsageError);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({"verify", "--n", "16,16,16", "--dw", "6"}).code, 2);
  EXPECT_EQ(invoke({"verify", "--stencil", "25pt-const", "--n", "16,16,16"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"tune", "--n", "10,10,10"}).code, 3);
}
