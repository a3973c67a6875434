#include "ktopo/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ktopo/errors.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

namespace {

// Vertices within this many mean edge lengths outside the body get the contact block.
constexpr double kContactBand = 0.01;

}  // namespace

void set_thread_count(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads > 0 ? threads : omp_get_num_procs());
#else
  (void)threads;
#endif
}

void SolveSettings::validate() const {
  if (!(grad_tol > 0.0)) throw ConfigError("solver: gradient tolerance must be > 0");
  if (history < 1) throw ConfigError("solver: history must be >= 1");
  if (max_iterations < 0) throw ConfigError("solver: max_iterations must be >= 0");
  if (!(c1 > 0.0 && c1 < c2 && c2 < 1.0)) throw ConfigError("solver: need 0 < c1 < c2 < 1");
}

EquilibriumProblem::EquilibriumProblem(const GarmentPatch& patch, const ImlsField* field,
                                       MaterialPair materials, std::vector<Vec3> attachment_targets,
                                       EnergyWeights weights)
    : patch_(&patch),
      field_(field),
      materials_(materials),
      targets_(std::move(attachment_targets)),
      weights_(weights) {
  materials_.validate();
  if (targets_.empty()) targets_.assign(patch.element_count(), Vec3::Zero());
  if (static_cast<int>(targets_.size()) != patch.element_count()) {
    throw TopologyError("attachment targets must have one entry per element");
  }
  const double area = patch.total_rest_area();
  energy_scale_ = materials_.E2 * materials_.t2 * area;
  length_scale_ = std::sqrt(area);
  penalty_length_ = patch.mean_edge_length();
  fixed_.assign(3 * static_cast<std::size_t>(patch.vertex_count()), 0);
  free_dofs_ = 3 * patch.vertex_count();

  // Diagonal of the linearized membrane stiffness at rest, t A (lambda + 2 mu) |grad N|^2.
  vertex_stiffness_.assign(static_cast<std::size_t>(patch.vertex_count()), 0.0);
  const Lame l1 = plane_stress_lame(materials_.E1, materials_.nu);
  const Lame l2 = plane_stress_lame(materials_.E2, materials_.nu);
  const double k_attach = materials_.attach_k * materials_.E2 * materials_.t2 / 9.0;
  for (int e = 0; e < patch.element_count(); ++e) {
    const bool r = patch.design[e] != 0;
    const Lame& l = r ? l1 : l2;
    const double c = materials_.thickness(r) * patch.rest_areas[e] * (l.lambda + 2.0 * l.mu);
    const Eigen::Vector2d g1 = patch.rest_frames_inv[e].row(0).transpose();
    const Eigen::Vector2d g2 = patch.rest_frames_inv[e].row(1).transpose();
    const Face& f = patch.mesh.faces()[e];
    vertex_stiffness_[f[0]] += c * (g1 + g2).squaredNorm();
    vertex_stiffness_[f[1]] += c * g1.squaredNorm();
    vertex_stiffness_[f[2]] += c * g2.squaredNorm();
    if (patch.attached[e]) {
      for (int v : f) vertex_stiffness_[v] += k_attach;
    }
  }
  for (double& k : vertex_stiffness_) k /= energy_scale_;
}

void EquilibriumProblem::apply_preconditioner(Eigen::VectorXd& v,
                                              const std::vector<Vec3>& contact_grad) const {
  const double c = 2.0 * weights_.body / (penalty_length_ * penalty_length_);
  const bool contact = field_ != nullptr && !contact_grad.empty();
  for (int i = 0; i < patch_->vertex_count(); ++i) {
    auto seg = v.segment<3>(3 * i);
    const double k = weights_.garment * vertex_stiffness_[i] + 1e-300;
    if (contact) {
      // Sherman-Morrison inverse of k I + c g g^T.
      const Vec3& g = contact_grad[i];
      const double gg = g.squaredNorm();
      if (gg > 0.0) seg -= (c * g.dot(seg) / (k + c * gg)) * g;
    }
    seg /= k;
  }
  for (std::size_t i = 0; i < fixed_.size(); ++i) {
    if (fixed_[i]) v[static_cast<Eigen::Index>(i)] = 0.0;
  }
}

void EquilibriumProblem::set_fixed_dofs(std::vector<std::uint8_t> fixed) {
  if (fixed.size() != fixed_.size()) throw TopologyError("fixed DOF mask has the wrong size");
  fixed_ = std::move(fixed);
  free_dofs_ = static_cast<int>(std::count(fixed_.begin(), fixed_.end(), 0));
}

Evaluation EquilibriumProblem::evaluate(const Dofs& x, bool want_report) const {
  Evaluation ev;
  GarmentEnergy g = garment_total_energy(*patch_, x, materials_, want_report);
  ev.garment_joules = g.energy;
  const double inv_scale = 1.0 / energy_scale_;
  ev.energy.garment = weights_.garment * g.energy * inv_scale;
  ev.gradient = (weights_.garment * inv_scale) * g.gradient;
  if (want_report) ev.report = std::move(g.report);

  // k_SI = attach_k * E2 * t2 (N/m), so in solver units k = attach_k / A_total.
  const double k_si = materials_.attach_k * materials_.E2 * materials_.t2;
  const AttachmentEnergy a = attachment_energy(*patch_, x, targets_, k_si);
  ev.energy.attach = weights_.attach * a.energy * inv_scale;
  ev.gradient += (weights_.attach * inv_scale) * a.gradient;

  if (field_ != nullptr) {
    PenaltyResult p = body_penalty(*field_, x);
    const double s = weights_.body / (penalty_length_ * penalty_length_);
    ev.energy.body = s * p.energy;
    ev.gradient += s * p.gradient;
    ev.penetrating = p.penetrating;
    ev.unsupported = p.unsupported;
    ev.min_phi = p.min_phi;
    ev.phi = std::move(p.phi);
    ev.contact_grad = std::move(p.contact_grad);
  }
  ev.energy.total = ev.energy.body + ev.energy.garment + ev.energy.attach;
  for (std::size_t i = 0; i < fixed_.size(); ++i) {
    if (fixed_[i]) ev.gradient[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return ev;
}

double EquilibriumProblem::residual_norm(const Dofs& gradient) const {
  if (free_dofs_ == 0) return 0.0;
  return length_scale_ * gradient.norm() / std::sqrt(static_cast<double>(free_dofs_));
}

double EquilibriumProblem::max_step_displacement() const {
  if (field_ != nullptr) {
    const auto& h = field_->support_radii();
    return 0.25 * *std::min_element(h.begin(), h.end());
  }
  return 5.0 * penalty_length_;
}

double EquilibriumProblem::initial_step_displacement() const { return 0.1 * penalty_length_; }

TotalEnergy total_energy_and_gradient(const Dofs& positions, const GarmentPatch& patch,
                                      const ImlsField* field, const MaterialPair& materials,
                                      std::span<const Vec3> attachment_targets,
                                      const EnergyWeights& weights) {
  EquilibriumProblem problem(patch, field, materials,
                             std::vector<Vec3>(attachment_targets.begin(), attachment_targets.end()),
                             weights);
  Evaluation ev = problem.evaluate(positions);
  if (!std::isfinite(ev.energy.total)) throw NumericalError("total energy is not finite");
  return {ev.energy.total, std::move(ev.gradient)};
}

EquilibriumState solve(const EquilibriumProblem& problem, const SolveSettings& settings,
                       const Dofs& initial) {
  settings.validate();
  if (initial.size() != 3 * problem.patch().vertex_count()) {
    throw TopologyError("solve: initial positions do not match the patch");
  }
  {
    const Evaluation ev0 = problem.evaluate(initial);
    if (!std::isfinite(ev0.energy.total) || !ev0.gradient.allFinite()) {
      throw NumericalError("initial energy is not finite");
    }
  }

  const int nv = problem.patch().vertex_count();
  std::vector<double> last_phi(static_cast<std::size_t>(nv), 0.0);
  EquilibriumState state;

  // The latest evaluation is cached; accepted iterates are almost always the last point the line
  // search evaluated, so contact data for the preconditioner and Phi tracking come for free.
  struct Cache {
    Dofs x;
    Evaluation ev;
  } cache;
  std::vector<Vec3> contact_grad;

  LbfgsSettings ls;
  ls.grad_tol = settings.grad_tol;
  ls.max_iterations = settings.max_iterations;
  ls.history = settings.history;
  ls.c1 = settings.c1;
  ls.c2 = settings.c2;
  ls.max_displacement = problem.max_step_displacement();
  ls.initial_displacement = problem.initial_step_displacement();
  ls.grad_norm = [&](const Eigen::VectorXd& g) { return problem.residual_norm(g); };
  if (settings.precondition) {
    ls.precondition = [&](Eigen::VectorXd& v) { problem.apply_preconditioner(v, contact_grad); };
  }

  const Objective objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    cache.x = x;
    cache.ev = problem.evaluate(x);
    g = cache.ev.gradient;
    return std::isfinite(cache.ev.energy.total) ? cache.ev.energy.total
                                                : std::numeric_limits<double>::infinity();
  };

  const auto on_accept = [&](const LbfgsStep& step, const Eigen::VectorXd& x) {
    if (cache.x.size() != x.size() || cache.x != x) {
      Dofs g;
      objective(x, g);
    }
    const Evaluation& ev = cache.ev;
    for (int i = 0; i < static_cast<int>(ev.phi.size()); ++i) {
      if (!std::isnan(ev.phi[i])) last_phi[i] = ev.phi[i];
    }
    contact_grad = ev.contact_grad;
    const double band = kContactBand * problem.penalty_length();
    for (int i = 0; i < static_cast<int>(ev.phi.size()); ++i) {
      if (std::isnan(ev.phi[i]) || ev.phi[i] > band) contact_grad[i].setZero();
    }
    if (settings.record_log) state.log.push_back({step.iteration, ev.energy, step.grad_norm, step.step});
  };
  LbfgsResult res = minimize_lbfgs(objective, initial, ls, on_accept);

  state.positions = std::move(res.x);
  state.iterations = res.iterations;
  state.evaluations = res.evaluations;
  state.grad_norm = res.grad_norm;
  state.converged = res.converged();
  state.status = std::string(to_string(res.status));
  const Evaluation fin = problem.evaluate(state.positions);
  state.energy = fin.energy;
  state.garment_joules = fin.garment_joules;
  state.penetrating = fin.penetrating;
  state.unsupported = fin.unsupported;
  state.min_phi = fin.min_phi;
  if (problem.field() != nullptr && fin.unsupported > 0) {
    for (int i = 0; i < nv; ++i) {
      const auto s = problem.field()->eval(state.positions.segment<3>(3 * i));
      if (!s.supported && last_phi[i] < 0.0) ++state.unsupported_after_penetration;
    }
  }
  return state;
}

std::vector<EquilibriumState> evaluate_sequence(const GarmentPatch& patch,
                                                const PoseSequence& poses,
                                                const MaterialPair& materials,
                                                const SolveSettings& settings,
                                                const EnergyWeights& weights) {
  std::vector<EquilibriumState> out;
  out.reserve(poses.frames.size());
  std::optional<Dofs> prev_positions, prev_mapped;
  for (const SurfaceMesh& frame : poses.frames) {
    try {
      const ImlsField field = build_field(frame);
      EquilibriumProblem problem(patch, &field, materials, mapped_centroids(patch, frame), weights);
      const Dofs mapped = map_patch_to_pose(patch, frame);
      // Carry the previous solution's offset from its mapped pose, not its world positions.
      // Written as a pose delta so an unchanged pose restarts from exactly the previous state.
      const Dofs init =
          prev_positions ? Dofs(*prev_positions + (mapped - *prev_mapped)) : mapped;
      out.push_back(solve(problem, settings, init));
      if (out.back().positions.size() == mapped.size()) {
        prev_positions = out.back().positions;
        prev_mapped = mapped;
      }
    } catch (const std::exception& e) {
      EquilibriumState failed;
      failed.status = std::string("error: ") + e.what();
      out.push_back(std::move(failed));
    }
  }
  return out;
}

void write_iteration_log(const std::filesystem::path& path, const std::vector<IterationLogRow>& log) {
  std::ostringstream out;
  out << "iteration,E_total,E_body,E_garment,E_attach,grad_norm,step_length\n";
  for (const auto& r : log) {
    out << r.iteration << ',' << format_double(r.energy.total) << ',' << format_double(r.energy.body)
        << ',' << format_double(r.energy.garment) << ',' << format_double(r.energy.attach) << ','
        << format_double(r.grad_norm) << ',' << format_double(r.step) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace ktopo
