#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ktopo/equilibrium.hpp"
#include "ktopo/garment_energy.hpp"
#include "ktopo/surface_mesh.hpp"

namespace ktopo {

struct BesoSettings {
  double target_area = 0.15;  ///< A*, fraction of total patch rest area
  double er = 0.015;          ///< evolutionary ratio
  double ar_max = 0.015;      ///< admission cap, fraction of element count
  double d_min = 0.001;
  double penalty = 1.6;       ///< p
  double tau = 1e-3;          ///< relative energy change for convergence
  int window = 5;             ///< N previous iterations
  int max_iterations = 300;
  int reinit_every = 25;      ///< cold re-initialization period of the warm start

  void validate() const;
};

/// Multipliers of W^e in the two-material sensitivity: {reinforced, cloth}.
struct SensitivityCoefficients {
  double reinforced = 0.0;
  double cloth = 0.0;
};
SensitivityCoefficients sensitivity_coefficients(const MaterialPair& materials,
                                                 const BesoSettings& settings);

std::vector<double> element_sensitivities(std::span<const double> density,
                                          std::span<const std::uint8_t> design,
                                          const MaterialPair& materials,
                                          const BesoSettings& settings);

/// Area-weighted element-to-node transfer, node-to-element averaging, then (when `previous` is
/// given) averaging with the previous iteration's filtered values.
std::vector<double> filter_sensitivities(const SurfaceMesh& mesh, std::span<const double> areas,
                                         std::span<const double> sensitivities,
                                         const std::optional<std::vector<double>>& previous);

struct ThresholdResult {
  std::vector<std::uint8_t> design;
  int flips_in = 0;   ///< 0 -> 1
  int flips_out = 0;  ///< 1 -> 0
  bool capped = false;
  /// Elements the uncapped ranking would have admitted but the cap rejected.
  std::vector<int> deferred_admissions;
  double area = 0.0;
};

/// Admission cap in elements: ceil(ar_max * element_count).
int admission_cap(double ar_max, int element_count);

/// Ranks by filtered sensitivity (descending, ties by ascending index) and reinforces the shortest
/// prefix whose cumulative area reaches `target_area` (absolute, m^2). If more than the admission
/// cap would switch 0 -> 1, only the best-ranked admissions are applied and the lowest-ranked
/// currently reinforced elements are released until the area is back at the target.
ThresholdResult apply_threshold(std::span<const double> filtered, std::span<const double> areas,
                                double target_area, std::span<const std::uint8_t> current,
                                double ar_max);

/// Scheduled area fraction after one step: max(A*, A (1 - ER)).
double next_area_fraction(double current, const BesoSettings& settings);
/// A_i of the schedule starting at A_0 = 1.
double scheduled_area_fraction(int iteration, const BesoSettings& settings);

struct BesoIteration {
  int iteration = 0;
  std::vector<std::uint8_t> design;  ///< design analysed in this iteration
  double scheduled_fraction = 1.0;
  double area_fraction = 1.0;        ///< actual reinforced rest area / total
  double garment_energy = 0.0;       ///< J
  double reinforced_energy = 0.0;    ///< J, d = 1 elements only
  double density = 0.0;              ///< reinforced_energy / reinforced area, J/m^2
  double density_norm = 1.0;         ///< density / density at iteration 0
  int flips_in = 0;                  ///< flips that produced this design
  int flips_out = 0;
  double sens_min = 0.0;
  double sens_max = 0.0;
  double sens_mean = 0.0;
  bool solve_converged = false;
  int solve_iterations = 0;
  double solve_grad_norm = 0.0;
  int compressed_elements = 0;
};

struct BesoTrace {
  std::vector<BesoIteration> iterations;
  bool converged = false;
  bool aborted = false;
  std::string message;
  std::vector<std::uint8_t> final_design;
  Dofs final_positions;
  std::vector<double> final_filtered;  ///< filtered sensitivities of the last iteration
};

using BesoObserver = std::function<void(const BesoIteration&)>;

/// Soft-kill two-material BESO at the target pose of `poses`.
BesoTrace run_beso(const GarmentPatch& patch, const PoseSequence& poses,
                   const MaterialPair& materials, const SolveSettings& solve_settings,
                   const BesoSettings& settings, const EnergyWeights& weights = {},
                   const BesoObserver& observer = {});

void write_trace_csv(const std::string& path, const BesoTrace& trace);

/// True when the reinforced elements contain an edge-connected cycle that winds once around the
/// axis through `axis_point` along `axis_dir` (evaluated on element centroids of `mesh`).
bool has_encircling_loop(const SurfaceMesh& mesh, std::span<const std::uint8_t> design,
                         const Vec3& axis_point, const Vec3& axis_dir);

}  // namespace ktopo
