#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktopo/beso.hpp"
#include "ktopo/equilibrium.hpp"
#include "ktopo/garment_energy.hpp"
#include "ktopo/pull_test.hpp"

namespace ktopo {

/// Sectioned key-value run configuration:
///
///   [paths]    body_rest, body_target, motion (comma list), patch, material, labels
///   [material] E1_pa, E2_pa, nu, t1_m, t2_m, attach_k   (override the material file)
///   [solver]   grad_tol, max_iterations, history, c1, c2, w_body, w_garment, w_attach, log
///   [beso]     target_area, er, ar_max, d_min, p, tau, window, max_iterations, reinit_every
///   [run]      threads, seed
///   [pulltest] resolution, stencil, strains, line_height, x_fraction, grad_tol, max_iterations
///
/// Relative paths are resolved against the directory of the config file.
struct RunConfig {
  std::filesystem::path body_rest;
  std::filesystem::path body_target;
  std::vector<std::filesystem::path> motion;
  std::filesystem::path patch;
  std::filesystem::path labels;

  MaterialPair materials;
  SolveSettings solver;
  EnergyWeights weights;
  BesoSettings beso;
  int threads = 0;
  std::uint64_t seed = 1;

  PullTestSpec pull;
  std::string stencil = "LINE";  ///< stencil name or label file
  std::string strains = "0:0.1:0.01";
  SolveSettings pull_solver;

  RunConfig();
  void validate() const;
};

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Effective configuration with every default spelled out and absolute paths.
std::string to_string(const RunConfig& config);

bool is_stencil_name(std::string_view text);

/// Throws ConfigError naming the first listed file that does not exist.
void require_files(const std::vector<std::filesystem::path>& paths);

}  // namespace ktopo
