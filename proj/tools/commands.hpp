#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace ktopo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;

struct CommonOptions {
  std::filesystem::path config;
  std::filesystem::path out;
  std::optional<int> threads;
  std::filesystem::path labels;
};

struct PullOptions {
  std::string stencil;
  std::string strains;
  std::optional<int> resolution;
};

struct FixtureOptions {
  std::string name;
  std::optional<double> theta;
  std::optional<double> rest_theta;
  std::optional<double> radius;
  std::optional<double> length;
  std::optional<double> bend_length;
  std::optional<int> circumferential;
  std::optional<int> axial;
  std::optional<int> subdivisions;
  std::optional<int> resolution;
  std::optional<double> size;
  std::optional<double> stretch;
};

int cmd_simulate(const CommonOptions& opts);
int cmd_optimize(const CommonOptions& opts);
int cmd_pulltest(const CommonOptions& opts, const PullOptions& pull);
int cmd_fixture(const CommonOptions& opts, const FixtureOptions& fixture);

}  // namespace ktopo::cli
