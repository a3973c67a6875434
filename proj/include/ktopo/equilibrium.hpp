#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ktopo/body_field.hpp"
#include "ktopo/garment_energy.hpp"
#include "ktopo/lbfgs.hpp"
#include "ktopo/surface_mesh.hpp"

namespace ktopo {

struct EnergyWeights {
  double body = 1.0;
  double garment = 1.0;
  double attach = 1.0;
};

struct SolveSettings {
  double grad_tol = 1e-7;
  int max_iterations = 20000;
  int history = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  bool record_log = false;
  bool precondition = true;  ///< per-vertex block preconditioner for L-BFGS

  void validate() const;  ///< tolerance > 0, history >= 1, 0 < c1 < c2 < 1
};

/// Energies in solver units (divided by E2 * t2 * A_total); the body term is
/// w_body * sum Phi^2 / l^2 with l the mean garment rest edge length.
struct EnergyBreakdown {
  double total = 0.0;
  double body = 0.0;
  double garment = 0.0;
  double attach = 0.0;
};

struct IterationLogRow {
  int iteration = 0;
  EnergyBreakdown energy;
  double grad_norm = 0.0;
  double step = 0.0;
};

struct Evaluation {
  EnergyBreakdown energy;
  Dofs gradient;             ///< of energy.total, fixed DOFs zeroed
  double garment_joules = 0.0;
  std::optional<ElementEnergyReport> report;
  std::vector<double> phi;   ///< per vertex, NaN where unsupported (empty without a body)
  std::vector<Vec3> contact_grad;  ///< grad Phi at supported vertices (empty without a body)
  int penetrating = 0;
  int unsupported = 0;
  double min_phi = 0.0;
};

/// One quasi-static energy: garment membrane + unilateral body penalty + attachment springs.
/// Holds references; the patch and field must outlive it.
class EquilibriumProblem {
 public:
  EquilibriumProblem(const GarmentPatch& patch, const ImlsField* field, MaterialPair materials,
                     std::vector<Vec3> attachment_targets, EnergyWeights weights = {});

  /// One flag per DOF (3 per vertex); fixed DOFs keep their initial value.
  void set_fixed_dofs(std::vector<std::uint8_t> fixed);
  const std::vector<std::uint8_t>& fixed_dofs() const { return fixed_; }

  double energy_scale() const { return energy_scale_; }    ///< J per solver unit
  double length_scale() const { return length_scale_; }    ///< sqrt(A_total), m
  double penalty_length() const { return penalty_length_; }
  const GarmentPatch& patch() const { return *patch_; }
  const ImlsField* field() const { return field_; }
  const MaterialPair& materials() const { return materials_; }
  const EnergyWeights& weights() const { return weights_; }
  const std::vector<Vec3>& attachment_targets() const { return targets_; }

  Evaluation evaluate(const Dofs& x, bool want_report = false) const;

  /// Convergence measure: length_scale * |g_free| / sqrt(#free DOFs), i.e. the RMS residual per
  /// free DOF in units of E2 t2 sqrt(A_total).
  double residual_norm(const Dofs& gradient) const;

  double max_step_displacement() const;
  double initial_step_displacement() const;

  /// In place v <- M^-1 v with M a per-vertex 3x3 block: an isotropic membrane/attachment
  /// stiffness estimate plus the penalty curvature 2 s grad(Phi) grad(Phi)^T at contact vertices.
  /// Fixed DOFs are zeroed.
  void apply_preconditioner(Eigen::VectorXd& v, const std::vector<Vec3>& contact_grad) const;

 private:
  const GarmentPatch* patch_;
  const ImlsField* field_;
  MaterialPair materials_;
  std::vector<Vec3> targets_;
  EnergyWeights weights_;
  std::vector<std::uint8_t> fixed_;
  std::vector<double> vertex_stiffness_;  // solver units
  double energy_scale_ = 1.0;
  double length_scale_ = 1.0;
  double penalty_length_ = 1.0;
  int free_dofs_ = 0;
};

struct TotalEnergy {
  double value = 0.0;
  Dofs gradient;
};

/// Sum of the three energies and gradients in solver units.
TotalEnergy total_energy_and_gradient(const Dofs& positions, const GarmentPatch& patch,
                                      const ImlsField* field, const MaterialPair& materials,
                                      std::span<const Vec3> attachment_targets,
                                      const EnergyWeights& weights);

struct EquilibriumState {
  Dofs positions;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double grad_norm = 0.0;
  EnergyBreakdown energy;          ///< solver units
  double garment_joules = 0.0;
  std::string status;
  int penetrating = 0;
  int unsupported = 0;
  /// Vertices without kernel support whose last supported Phi during the solve was negative.
  int unsupported_after_penetration = 0;
  double min_phi = 0.0;
  std::vector<IterationLogRow> log;
};

/// Minimizes the problem energy from `initial` with L-BFGS. Throws NumericalError if the initial
/// energy is not finite.
EquilibriumState solve(const EquilibriumProblem& problem, const SolveSettings& settings,
                       const Dofs& initial);

/// Simulates every frame of `poses`; frame 0 starts from the pose-mapped garment, later frames
/// from the previous solution's offset relative to its own pose-mapped garment. Solver exceptions are recorded in the state's status and the
/// sequence continues.
std::vector<EquilibriumState> evaluate_sequence(const GarmentPatch& patch,
                                                const PoseSequence& poses,
                                                const MaterialPair& materials,
                                                const SolveSettings& settings,
                                                const EnergyWeights& weights = {});

void write_iteration_log(const std::filesystem::path& path, const std::vector<IterationLogRow>& log);

void set_thread_count(int threads);  ///< <= 0 selects all cores

}  // namespace ktopo
