#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ktopo/text_io.hpp"
#include "support.hpp"

#ifndef KTOPO_CLI_PATH
#error "KTOPO_CLI_PATH must name the ktopo executable"
#endif

namespace ktopo {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  test::TempDir dir;

  RunResult run(const std::string& args) {
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + KTOPO_CLI_PATH + "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  std::string p(const std::string& name) { return "\"" + (dir / name).string() + "\""; }

  void plane(const std::string& name = "plane") {
    const RunResult r = run("fixture plane --resolution 8 --out " + p(name));
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST_F(Cli, FixtureWritesInputs) {
  plane();
  for (const char* f : {"rest.obj", "target.obj", "patch.txt", "config.ini"}) {
    EXPECT_TRUE(fs::is_regular_file(dir / "plane" / f)) << f;
  }
  const RunResult r = run("fixture cylinder-bend --circumferential 12 --axial 20 --out " + p("cyl"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::is_regular_file(dir / "cyl" / "target.obj"));
  EXPECT_EQ(run("fixture torus --out " + p("torus")).code, 2);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("simulate").code, 2);
  EXPECT_EQ(run("simulate --out " + p("o") + " --bogus 1").code, 2);
  EXPECT_EQ(run("simulate --out " + p("o")).code, 2);  // no --config
  EXPECT_EQ(run("pulltest --out " + p("o") + " --strains 0:1").code, 2);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST_F(Cli, MissingPatchIsNamed) {
  plane();
  write_text_file(dir / "plane" / "bad.ini",
                  "[paths]\nbody_rest = rest.obj\nbody_target = target.obj\npatch = nowhere.txt\n");
  const RunResult r = run("simulate --config " + p("plane/bad.ini") + " --out " + p("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere.txt"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST_F(Cli, NonEmptyOutputDirectoryRefused) {
  plane();
  fs::create_directories(dir / "full");
  write_text_file(dir / "full" / "keep.txt", "x");
  const RunResult r = run("simulate --config " + p("plane/config.ini") + " --out " + p("full"));
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(read_text_file(dir / "full" / "keep.txt"), "x");
}

TEST_F(Cli, RestOnlySimulationHasZeroEnergy) {
  plane();
  write_text_file(dir / "plane" / "rest.ini", "[paths]\nbody_rest = rest.obj\npatch = patch.txt\n");
  const RunResult r = run("simulate --config " + p("plane/rest.ini") + " --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(read_text_file(dir / "o" / "energy.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], "frame,converged,iterations,grad_norm,E_total,E_body,E_garment,E_attach,E_garment_J");
  // frame 0, converged, no iterations; the energies are zero up to rounding.
  EXPECT_TRUE(rows[1].starts_with("0,1,0,")) << rows[1];
  std::istringstream row(rows[1].substr(6));
  for (std::string cell; std::getline(row, cell, ',');) EXPECT_LE(std::abs(std::stod(cell)), 1e-12) << rows[1];
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "frame_000.obj"));
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "penetration.csv"));
}

TEST_F(Cli, TargetPoseLoadsTheGarmentDeterministically) {
  plane();
  const RunResult a = run("simulate --config " + p("plane/config.ini") + " --out " + p("a"));
  ASSERT_EQ(a.code, 0) << a.err;
  const auto rows = lines(read_text_file(dir / "a" / "energy.csv"));
  ASSERT_EQ(rows.size(), 3u);
  const double e = std::stod(rows[2].substr(rows[2].rfind(',') + 1));
  EXPECT_GT(e, 0.0);
  const RunResult b = run("simulate --threads 1 --config " + p("plane/config.ini") + " --out " + p("b"));
  ASSERT_EQ(b.code, 0) << b.err;
  for (const char* f : {"energy.csv", "frame_000.obj", "frame_001.obj"}) {
    EXPECT_EQ(read_text_file(dir / "a" / f), read_text_file(dir / "b" / f)) << f;
  }
  // The effective configuration reproduces the run on its own.
  const RunResult c = run("simulate --config " + p("a/config.ini") + " --out " + p("c"));
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(read_text_file(dir / "a" / "energy.csv"), read_text_file(dir / "c" / "energy.csv"));
}

TEST_F(Cli, LabelsOverrideDesign) {
  plane();
  // The default design is fully reinforced; an all-zero label file turns it into plain cloth.
  write_labels(dir / "cloth.labels", std::vector<std::uint8_t>(128, 0));
  const RunResult r = run("simulate --config " + p("plane/config.ini") + " --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const RunResult c = run("simulate --config " + p("plane/config.ini") + " --labels " +
                          p("cloth.labels") + " --out " + p("c"));
  ASSERT_EQ(c.code, 0) << c.err;
  const auto reinforced = lines(read_text_file(dir / "o" / "energy.csv"));
  const auto cloth = lines(read_text_file(dir / "c" / "energy.csv"));
  const double er = std::stod(reinforced[2].substr(reinforced[2].rfind(',') + 1));
  const double ec = std::stod(cloth[2].substr(cloth[2].rfind(',') + 1));
  // Loading goes through soft attachment springs, so either design can store more energy;
  // the label file only has to change the result.
  EXPECT_GT(std::abs(er - ec), 1e-3 * std::max(er, ec));
  write_labels(dir / "short.labels", std::vector<std::uint8_t>(5, 1));
  EXPECT_EQ(run("simulate --config " + p("plane/config.ini") + " --labels " + p("short.labels") +
                " --out " + p("s")).code, 2);
}

TEST_F(Cli, OptimizeAtFullAreaStaysFull) {
  plane();
  write_text_file(dir / "plane" / "opt.ini",
                  "[paths]\nbody_rest = rest.obj\nbody_target = target.obj\npatch = patch.txt\n"
                  "[beso]\ntarget_area = 1\nwindow = 3\n");
  const RunResult r = run("optimize --config " + p("plane/opt.ini") + " --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(read_text_file(dir / "o" / "trace.csv"));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_LE(rows.size(), 5u);
  EXPECT_EQ(rows[0], "iteration,area_fraction,E_garment,density_norm,flips_in,flips_out");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_NE(rows[i].find(",1,"), std::string::npos) << rows[i];
    EXPECT_TRUE(rows[i].ends_with(",1,0,0")) << rows[i];
  }
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "final.labels"));
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "iter_0000.labels"));
  EXPECT_NE(r.out.find("iter 0 area 1"), std::string::npos);
}

TEST_F(Cli, PullTestCurve) {
  const RunResult r =
      run("pulltest --stencil line --strains 0:0.02:0.01 --resolution 10 --out " + p("o"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(read_text_file(dir / "o" / "force.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "strain,force_N,converged");
  EXPECT_EQ(rows[1], "0,0,1");
  EXPECT_TRUE(rows[3].starts_with("0.02,"));
  EXPECT_TRUE(rows[3].ends_with(",1"));
  EXPECT_TRUE(fs::is_regular_file(dir / "o" / "stencil.labels"));

  // The written stencil can be fed back as a label file.
  const RunResult f = run("pulltest --stencil " + p("o/stencil.labels") +
                          " --strains 0:0.02:0.01 --resolution 10 --out " + p("f"));
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_EQ(read_text_file(dir / "o" / "force.csv"), read_text_file(dir / "f" / "force.csv"));
  EXPECT_EQ(run("pulltest --stencil " + p("nope.labels") + " --out " + p("g")).code, 2);
  EXPECT_EQ(run("pulltest --stencil LINE --resolution 9 --out " + p("h")).code, 2);
}

}  // namespace
}  // namespace ktopo
