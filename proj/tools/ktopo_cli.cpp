#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "ktopo/errors.hpp"

namespace {

void add_common(CLI::App* cmd, ktopo::cli::CommonOptions& o, bool labels) {
  cmd->add_option("--config", o.config, "run configuration file");
  cmd->add_option("--out", o.out, "output directory (must not exist or be empty)")->required();
  cmd->add_option("--threads", o.threads, "worker threads (default: all cores)");
  if (labels) cmd->add_option("--labels", o.labels, "design label file (elementIndex value)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ktopo::cli;
  CLI::App app{"Reinforced garment simulation and two-material BESO design"};
  app.require_subcommand(1);

  CommonOptions common;
  PullOptions pull;
  FixtureOptions fixture;

  auto* simulate = app.add_subcommand("simulate", "equilibrium over the pose sequence for one design");
  add_common(simulate, common, true);
  auto* optimize = app.add_subcommand("optimize", "BESO reinforcement layout at the target pose");
  add_common(optimize, common, false);
  auto* pulltest = app.add_subcommand("pulltest", "uniaxial pull test of a clamped sample");
  add_common(pulltest, common, false);
  pulltest->add_option("--stencil", pull.stencil,
                       "FULL_CLOTH, FULL_REINFORCED, LINE, X or an element label file");
  pulltest->add_option("--strains", pull.strains, "start:stop:step or comma list");
  pulltest->add_option("--resolution", pull.resolution, "elements per side of the active square");
  auto* fix = app.add_subcommand("fixture", "generate a synthetic body pose pair and patch spec");
  add_common(fix, common, false);
  fix->add_option("name", fixture.name, "cylinder-bend or plane")->required();
  fix->add_option("--theta", fixture.theta, "target bend angle, degrees");
  fix->add_option("--rest-theta", fixture.rest_theta, "rest bend angle, degrees");
  fix->add_option("--radius", fixture.radius, "tube radius, m");
  fix->add_option("--length", fixture.length, "tube length, m");
  fix->add_option("--bend-length", fixture.bend_length, "arc length of the bend zone, m");
  fix->add_option("--circumferential", fixture.circumferential, "vertices around the tube");
  fix->add_option("--axial", fixture.axial, "segments along the tube");
  fix->add_option("--subdivisions", fixture.subdivisions, "garment subdivision levels");
  fix->add_option("--resolution", fixture.resolution, "plane cells per side");
  fix->add_option("--size", fixture.size, "plane side length, m");
  fix->add_option("--stretch", fixture.stretch, "plane target stretch along x");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*simulate) return cmd_simulate(common);
    if (*optimize) return cmd_optimize(common);
    if (*pulltest) return cmd_pulltest(common, pull);
    if (*fix) return cmd_fixture(common, fixture);
  } catch (const ktopo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ktopo::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ktopo::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ktopo::TopologyError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}
