#include "ktopo/beso.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>

#include <Eigen/Geometry>
#include <sstream>

#include "ktopo/body_field.hpp"
#include "ktopo/errors.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

void BesoSettings::validate() const {
  if (!(target_area > 0.0 && target_area <= 1.0)) throw ConfigError("beso: need 0 < A* <= 1");
  if (!(er > 0.0 && er < 1.0)) throw ConfigError("beso: need 0 < ER < 1");
  if (!(ar_max > 0.0 && ar_max <= 1.0)) throw ConfigError("beso: need 0 < AR_max <= 1");
  if (!(d_min > 0.0 && d_min < 1.0)) throw ConfigError("beso: need 0 < d_min < 1");
  if (!(penalty >= 1.0)) throw ConfigError("beso: need p >= 1");
  if (!(tau > 0.0)) throw ConfigError("beso: need tau > 0");
  if (window < 1) throw ConfigError("beso: need N >= 1");
  if (max_iterations < 1) throw ConfigError("beso: need max_iterations >= 1");
  if (reinit_every < 1) throw ConfigError("beso: need reinit_every >= 1");
}

SensitivityCoefficients sensitivity_coefficients(const MaterialPair& m, const BesoSettings& s) {
  const double dp = std::pow(s.d_min, s.penalty);
  const double dp1 = std::pow(s.d_min, s.penalty - 1.0);
  return {0.5 * (1.0 - m.E2 / m.E1), 0.5 * dp1 * (m.E1 - m.E2) / (dp * m.E1 + (1.0 - dp) * m.E2)};
}

std::vector<double> element_sensitivities(std::span<const double> density,
                                          std::span<const std::uint8_t> design,
                                          const MaterialPair& materials,
                                          const BesoSettings& settings) {
  if (density.size() != design.size()) throw TopologyError("sensitivities: size mismatch");
  const auto c = sensitivity_coefficients(materials, settings);
  std::vector<double> out(density.size());
  for (std::size_t e = 0; e < density.size(); ++e) {
    out[e] = (design[e] ? c.reinforced : c.cloth) * density[e];
  }
  return out;
}

std::vector<double> filter_sensitivities(const SurfaceMesh& mesh, std::span<const double> areas,
                                         std::span<const double> sensitivities,
                                         const std::optional<std::vector<double>>& previous) {
  const int ne = mesh.face_count();
  if (static_cast<int>(areas.size()) != ne || static_cast<int>(sensitivities.size()) != ne) {
    throw TopologyError("filter_sensitivities: size mismatch");
  }
  std::vector<double> num(mesh.vertex_count(), 0.0), den(mesh.vertex_count(), 0.0);
  for (int e = 0; e < ne; ++e) {
    for (int v : mesh.faces()[e]) {
      num[v] += areas[e] * sensitivities[e];
      den[v] += areas[e];
    }
  }
  std::vector<double> out(ne);
  for (int e = 0; e < ne; ++e) {
    double s = 0.0;
    for (int v : mesh.faces()[e]) s += num[v] / den[v];
    out[e] = s / 3.0;
  }
  if (previous) {
    if (static_cast<int>(previous->size()) != ne) throw TopologyError("filter history size mismatch");
    for (int e = 0; e < ne; ++e) out[e] = 0.5 * (out[e] + (*previous)[e]);
  }
  return out;
}

int admission_cap(double ar_max, int element_count) {
  // Guard against ar_max * n landing a hair above an integer.
  return static_cast<int>(std::ceil(ar_max * element_count - 1e-9));
}

ThresholdResult apply_threshold(std::span<const double> filtered, std::span<const double> areas,
                                double target_area, std::span<const std::uint8_t> current,
                                double ar_max) {
  const int n = static_cast<int>(filtered.size());
  if (static_cast<int>(areas.size()) != n || static_cast<int>(current.size()) != n) {
    throw TopologyError("apply_threshold: size mismatch");
  }
  std::vector<int> rank(n);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return filtered[a] > filtered[b]; });

  // Relative slack so a target equal to the total area is reached despite summation order.
  const double reach = target_area * (1.0 - 1e-12);
  ThresholdResult r;
  r.design.assign(n, 0);
  double cum = 0.0;
  for (int k = 0; k < n && cum < reach; ++k) {
    r.design[rank[k]] = 1;
    cum += areas[rank[k]];
  }

  std::vector<int> admissions;  // in rank order
  for (int e : rank) {
    if (r.design[e] && !current[e]) admissions.push_back(e);
  }
  const int cap = admission_cap(ar_max, n);
  if (static_cast<int>(admissions.size()) > cap) {
    r.capped = true;
    r.deferred_admissions.assign(admissions.begin() + cap, admissions.end());
    std::sort(r.deferred_admissions.begin(), r.deferred_admissions.end());
    std::vector<std::uint8_t> d(current.begin(), current.end());
    std::vector<std::uint8_t> admitted(n, 0);
    double area = 0.0;
    for (int e = 0; e < n; ++e) {
      if (d[e]) area += areas[e];
    }
    for (int i = 0; i < cap; ++i) {
      d[admissions[i]] = 1;
      admitted[admissions[i]] = 1;
      area += areas[admissions[i]];
    }
    // Release the lowest-ranked previously reinforced elements while the area stays >= target.
    for (int k = n - 1; k >= 0; --k) {
      const int e = rank[k];
      if (!d[e] || admitted[e]) continue;
      if (area - areas[e] < reach) break;
      d[e] = 0;
      area -= areas[e];
    }
    r.design = std::move(d);
  }
  for (int e = 0; e < n; ++e) {
    if (r.design[e] && !current[e]) ++r.flips_in;
    if (!r.design[e] && current[e]) ++r.flips_out;
    if (r.design[e]) r.area += areas[e];
  }
  return r;
}

double next_area_fraction(double current, const BesoSettings& settings) {
  if (current <= settings.target_area) return settings.target_area;
  return std::max(settings.target_area, current * (1.0 - settings.er));
}

double scheduled_area_fraction(int iteration, const BesoSettings& settings) {
  double a = 1.0;
  for (int i = 0; i < iteration; ++i) a = next_area_fraction(a, settings);
  return a;
}

namespace {

struct Analysis {
  EquilibriumState state;
  ElementEnergyReport report;
};

}  // namespace

BesoTrace run_beso(const GarmentPatch& patch_in, const PoseSequence& poses,
                   const MaterialPair& materials, const SolveSettings& solve_settings,
                   const BesoSettings& settings, const EnergyWeights& weights,
                   const BesoObserver& observer) {
  settings.validate();
  solve_settings.validate();
  GarmentPatch patch = patch_in;
  patch.design.assign(patch.element_count(), 1);
  const double total_area = patch.total_rest_area();
  const SurfaceMesh& pose = poses.target();
  const ImlsField field = build_field(pose);
  const std::vector<Vec3> targets = mapped_centroids(patch, pose);
  const Dofs cold = map_patch_to_pose(patch, pose);

  BesoTrace trace;
  std::optional<Dofs> warm;
  std::optional<std::vector<double>> history;
  double fraction = 1.0;
  int pending_in = 0, pending_out = 0;
  double density0 = 0.0;

  for (int it = 0; it < settings.max_iterations; ++it) {
    EquilibriumProblem problem(patch, &field, materials, targets, weights);
    const bool use_warm = warm.has_value() && it % settings.reinit_every != 0;
    EquilibriumState state;
    bool ok = false;
    std::string failure;
    for (int attempt = 0; attempt < 2 && !ok; ++attempt) {
      const Dofs& init = (attempt == 0 && use_warm) ? *warm : cold;
      if (attempt == 1 && !use_warm) {
        // The first attempt already started cold; a retry from the same point is pointless.
        break;
      }
      try {
        state = solve(problem, solve_settings, init);
        ok = state.converged;
        if (!ok) failure = "equilibrium did not converge (" + state.status + ")";
      } catch (const std::exception& e) {
        failure = e.what();
      }
    }

    const Evaluation ev = problem.evaluate(state.positions.size() ? state.positions : cold, true);
    const ElementEnergyReport& rep = *ev.report;
    BesoIteration row;
    row.iteration = it;
    row.design = patch.design;
    row.scheduled_fraction = fraction;
    row.area_fraction = patch.reinforced_area() / total_area;
    row.garment_energy = ev.garment_joules;
    double reinforced_area = 0.0;
    for (int e = 0; e < patch.element_count(); ++e) {
      if (!patch.design[e]) continue;
      row.reinforced_energy += rep.energy[e];
      reinforced_area += patch.rest_areas[e];
    }
    row.density = reinforced_area > 0.0 ? row.reinforced_energy / reinforced_area : 0.0;
    if (it == 0) density0 = row.density;
    row.density_norm = density0 > 0.0 ? row.density / density0 : 0.0;
    row.flips_in = pending_in;
    row.flips_out = pending_out;
    row.solve_converged = state.converged;
    row.solve_iterations = state.iterations;
    row.solve_grad_norm = state.grad_norm;
    row.compressed_elements = rep.compressed_count();

    if (!ok) {
      row.sens_min = row.sens_max = row.sens_mean = 0.0;
      trace.iterations.push_back(row);
      if (observer) observer(row);
      trace.aborted = true;
      trace.message = "iteration " + std::to_string(it) + ": " + failure;
      trace.final_design = patch.design;
      trace.final_positions = state.positions;
      return trace;
    }

    const auto alpha = element_sensitivities(rep.density, patch.design, materials, settings);
    std::vector<double> filtered = filter_sensitivities(patch.mesh, patch.rest_areas, alpha, history);
    const auto [mn, mx] = std::minmax_element(filtered.begin(), filtered.end());
    row.sens_min = *mn;
    row.sens_max = *mx;
    row.sens_mean = std::accumulate(filtered.begin(), filtered.end(), 0.0) / filtered.size();
    trace.iterations.push_back(row);
    if (observer) observer(row);
    warm = state.positions;
    trace.final_positions = state.positions;
    trace.final_design = patch.design;
    trace.final_filtered = filtered;

    // Converged once the budget is reached and E_garment has settled over the last N iterations.
    if (fraction == settings.target_area && it >= settings.window) {
      const auto& rows = trace.iterations;
      double worst = 0.0;
      const double ref = std::abs(rows.back().garment_energy);
      for (int j = it - settings.window + 1; j <= it; ++j) {
        const double change = std::abs(rows[j].garment_energy - rows[j - 1].garment_energy);
        worst = std::max(worst, ref > 0.0 ? change / ref : change);
      }
      if (worst < settings.tau) {
        trace.converged = true;
        trace.message = "converged at iteration " + std::to_string(it);
        return trace;
      }
    }

    fraction = next_area_fraction(fraction, settings);
    ThresholdResult th =
        apply_threshold(filtered, patch.rest_areas, fraction * total_area, patch.design, settings.ar_max);
    pending_in = th.flips_in;
    pending_out = th.flips_out;
    patch.design = std::move(th.design);
    history = std::move(filtered);
  }
  trace.message = "reached max iterations";
  return trace;
}

void write_trace_csv(const std::string& path, const BesoTrace& trace) {
  std::ostringstream out;
  out << "iteration,area_fraction,E_garment,density_norm,flips_in,flips_out\n";
  for (const auto& r : trace.iterations) {
    out << r.iteration << ',' << format_double(r.area_fraction) << ','
        << format_double(r.garment_energy) << ',' << format_double(r.density_norm) << ','
        << r.flips_in << ',' << r.flips_out << '\n';
  }
  write_text_file(path, out.str());
}

bool has_encircling_loop(const SurfaceMesh& mesh, std::span<const std::uint8_t> design,
                         const Vec3& axis_point, const Vec3& axis_dir) {
  const int ne = mesh.face_count();
  const Vec3 a = axis_dir.normalized();
  Vec3 u = a.unitOrthogonal();
  Vec3 v = a.cross(u);
  std::vector<double> angle(ne);
  for (int e = 0; e < ne; ++e) {
    const Vec3 r = mesh.face_centroid(e) - axis_point;
    angle[e] = std::atan2(r.dot(v), r.dot(u));
  }
  const auto wrap = [](double d) {
    while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
    while (d < -std::numbers::pi) d += 2.0 * std::numbers::pi;
    return d;
  };
  const auto nbrs = element_neighbors(mesh);
  std::vector<double> unwrapped(ne, 0.0);
  std::vector<std::uint8_t> seen(ne, 0);
  for (int root = 0; root < ne; ++root) {
    if (!design[root] || seen[root]) continue;
    std::queue<int> q;
    q.push(root);
    seen[root] = 1;
    unwrapped[root] = angle[root];
    while (!q.empty()) {
      const int e = q.front();
      q.pop();
      for (int f : nbrs[e]) {
        if (!design[f]) continue;
        const double expect = unwrapped[e] + wrap(angle[f] - angle[e]);
        if (!seen[f]) {
          seen[f] = 1;
          unwrapped[f] = expect;
          q.push(f);
        } else if (std::abs(expect - unwrapped[f]) > std::numbers::pi) {
          return true;
        }
      }
    }
  }
  return false;
}

}  // namespace ktopo
