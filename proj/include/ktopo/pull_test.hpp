#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktopo/equilibrium.hpp"
#include "ktopo/garment_energy.hpp"
#include "ktopo/surface_mesh.hpp"

namespace ktopo {

enum class Stencil { FullCloth, FullReinforced, Line, X, File };

std::string_view to_string(Stencil s);
/// Accepts FULL_CLOTH, FULL_REINFORCED, LINE, X (case-insensitive); anything else is a ConfigError.
Stencil parse_stencil(std::string_view name);

struct PullTestSpec {
  double active_length = 0.10;  ///< along the load direction (x), m
  double width = 0.10;          ///< across the load (y), m
  double clamp_length = 0.02;   ///< per end, m
  int resolution = 20;          ///< elements per side of the active square
  Stencil stencil = Stencil::FullCloth;
  std::filesystem::path stencil_file;  ///< labels over all fixture elements, for Stencil::File
  double line_height = 0.04;           ///< LINE band height, m
  double target_fraction = 0.40;       ///< X band coverage of the active area

  void validate() const;
};

struct PullFixture {
  GarmentPatch patch;  ///< planar, z = 0, design set from the stencil
  std::vector<std::uint8_t> fixed_dofs;
  std::vector<int> moving_clamp;  ///< vertices at x >= clamp + active_length
  std::vector<int> fixed_clamp;   ///< vertices at x <= clamp
  double active_length = 0.0;
  double active_area = 0.0;
  double reinforced_fraction = 0.0;  ///< of the active area
  double x_band_halfwidth = 0.0;     ///< perpendicular half-width of each X band (0 otherwise)
};

PullFixture build_pull_fixture(const PullTestSpec& spec);

/// Prescribed clamp positions for a given nominal strain of the active length.
Dofs pull_boundary_positions(const PullFixture& fixture, double strain);

struct ForcePoint {
  double strain = 0.0;
  double force = 0.0;           ///< reaction at the moving clamp, N
  double fixed_reaction = 0.0;  ///< x-reaction at the fixed clamp (signed), N
  double moving_reaction = 0.0; ///< x-reaction at the moving clamp (signed), N
  double energy = 0.0;          ///< equilibrium garment energy, J
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::string status;  ///< solver status, or the error text
};

struct ForceCurve {
  std::vector<ForcePoint> points;
  Dofs final_positions;
};

/// Strains must start at or above zero and increase; each step is warm-started from the previous.
ForceCurve run_pull_test(const PullFixture& fixture, const MaterialPair& materials,
                         const std::vector<double>& strains, const SolveSettings& settings);

/// Parses "a:b:step" (inclusive of b up to rounding) or a comma list.
std::vector<double> parse_strain_schedule(std::string_view text);

void write_force_curve_csv(const std::filesystem::path& path, const ForceCurve& curve);

}  // namespace ktopo
