#include "ktopo/garment_energy.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ktopo/errors.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

void MaterialPair::validate() const {
  if (!(E2 > 0.0) || !(E1 > E2)) throw ConfigError("materials: require E1 > E2 > 0");
  if (!(nu >= 0.0 && nu < 0.5)) throw ConfigError("materials: require 0 <= nu < 0.5");
  if (!(t2 > 0.0) || !(t1 >= t2)) throw ConfigError("materials: require t1 >= t2 > 0");
  if (!(attach_k >= 0.0)) throw ConfigError("materials: require attach_k >= 0");
}

MaterialPair parse_material(const std::string& text) {
  const KeyValues kv = parse_key_values(text);
  MaterialPair m;
  for (const auto& [key, value] : kv) {
    if (key == "E1_pa") m.E1 = parse_number(key, value);
    else if (key == "E2_pa") m.E2 = parse_number(key, value);
    else if (key == "nu") m.nu = parse_number(key, value);
    else if (key == "t1_m") m.t1 = parse_number(key, value);
    else if (key == "t2_m") m.t2 = parse_number(key, value);
    else if (key == "attach_k") m.attach_k = parse_number(key, value);
    else throw ConfigError("material file: unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

MaterialPair load_material(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open material file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_material(buf.str());
}

std::string to_string(const MaterialPair& m) {
  std::ostringstream out;
  out << "E1_pa = " << format_double(m.E1) << '\n'
      << "E2_pa = " << format_double(m.E2) << '\n'
      << "nu = " << format_double(m.nu) << '\n'
      << "t1_m = " << format_double(m.t1) << '\n'
      << "t2_m = " << format_double(m.t2) << '\n'
      << "attach_k = " << format_double(m.attach_k) << '\n';
  return out.str();
}

Lame plane_stress_lame(double youngs, double poisson) {
  return {youngs / (2.0 * (1.0 + poisson)), youngs * poisson / (1.0 - poisson * poisson)};
}

DeformationGradient deformation_gradient(const Mat2& rest_inv, const Vec3& x0, const Vec3& x1,
                                         const Vec3& x2) {
  Mat32 ds;
  ds.col(0) = x1 - x0;
  ds.col(1) = x2 - x0;
  DeformationGradient out;
  out.F = ds * rest_inv;
  out.C = out.F.transpose() * out.F;
  return out;
}

double neo_hookean_density(double stretch1, double stretch2, const Lame& lame) {
  const double logJ = std::log(stretch1 * stretch2);
  return 0.5 * lame.mu * (stretch1 * stretch1 + stretch2 * stretch2 - 2.0) - lame.mu * logJ +
         0.5 * lame.lambda * logJ * logJ;
}

double natural_width(double stretch1, const Lame& lame) {
  // f(u) = mu e^u + (lambda/2) u - mu + lambda log(stretch1), u = log(stretch2^2).
  // f is convex and increasing, and f(0) = lambda log(stretch1) >= 0 for stretch1 >= 1, so Newton
  // from u = 0 decreases monotonically onto the root.
  const double c = lame.mu - lame.lambda * std::log(stretch1);
  const double b = 0.5 * lame.lambda;
  double u = 0.0;
  if (lame.mu * std::exp(u) + b * u - c < 0.0) {
    // stretch1 < 1: bracket from the right first.
    while (lame.mu * std::exp(u) + b * u - c < 0.0) u += 1.0;
  }
  for (int it = 0; it < 100; ++it) {
    const double eu = lame.mu * std::exp(u);
    const double f = eu + b * u - c;
    const double step = f / (eu + b);
    u -= step;
    if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(u))) break;
  }
  return std::exp(0.5 * u);
}

namespace {

Eigen::Vector2d major_eigenvector(const Mat2& C, double sigma1) {
  const double c11 = C(0, 0), c12 = C(0, 1), c22 = C(1, 1);
  const Eigen::Vector2d a(c12, sigma1 - c11);
  const Eigen::Vector2d b(sigma1 - c22, c12);
  const Eigen::Vector2d v = a.squaredNorm() >= b.squaredNorm() ? a : b;
  const double n = v.norm();
  if (n == 0.0) return c11 >= c22 ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
  return v / n;
}

}  // namespace

DensityResult element_energy_density(const Mat2& C, const Lame& lame) {
  DensityResult r;
  const double c11 = C(0, 0), c12 = 0.5 * (C(0, 1) + C(1, 0)), c22 = C(1, 1);
  const double mean = 0.5 * (c11 + c22);
  const double half_diff = 0.5 * (c11 - c22);
  const double radius = std::hypot(half_diff, c12);
  const double sigma1 = mean + radius;
  const double det = c11 * c22 - c12 * c12;
  // sigma2 from det/sigma1 avoids cancellation when sigma2 << sigma1.
  const double sigma2 = sigma1 > 0.0 ? std::max(det, 0.0) / sigma1 : 0.0;
  r.stretch1 = std::sqrt(std::max(sigma1, 0.0));
  r.stretch2 = std::sqrt(sigma2);

  if (r.stretch1 <= 1.0) {
    r.regime = StrainRegime::Slack;
    return r;
  }
  // Transverse stress at the current stretch2 has the sign of f(log stretch2^2), f as in
  // natural_width; f is increasing, so f >= 0 is exactly stretch2 >= natural width.
  const bool taut = sigma2 > 0.0 && lame.mu * sigma2 + 0.5 * lame.lambda * std::log(sigma2) -
                                            lame.mu + lame.lambda * std::log(r.stretch1) >= 0.0;
  if (taut) {
    r.regime = StrainRegime::Taut;
    const double logJ = 0.5 * std::log(det);
    r.W = 0.5 * lame.mu * (c11 + c22 - 2.0) - lame.mu * logJ + 0.5 * lame.lambda * logJ * logJ;
    Mat2 Cinv;
    Cinv << c22, -c12, -c12, c11;
    Cinv /= det;
    r.dW_dC = 0.5 * lame.mu * Mat2::Identity() + 0.5 * (lame.lambda * logJ - lame.mu) * Cinv;
    return r;
  }
  r.regime = StrainRegime::Wrinkled;
  const double width = natural_width(r.stretch1, lame);
  r.W = neo_hookean_density(r.stretch1, width, lame);
  // Envelope: dW/dstretch2 = 0 at the natural width, so only the stretch1 partial survives.
  const double logJ = std::log(r.stretch1 * width);
  const double dW_dl1 = lame.mu * r.stretch1 - lame.mu / r.stretch1 + lame.lambda * logJ / r.stretch1;
  const Eigen::Vector2d v = major_eigenvector(C, sigma1);
  r.dW_dC = (dW_dl1 / (2.0 * r.stretch1)) * (v * v.transpose());
  return r;
}

int ElementEnergyReport::compressed_count() const {
  int n = 0;
  for (auto c : compressed) n += c ? 1 : 0;
  return n;
}

GarmentEnergy garment_total_energy(const GarmentPatch& patch, const Dofs& positions,
                                   const MaterialPair& materials, bool want_report) {
  const int ne = patch.element_count();
  if (positions.size() != 3 * patch.vertex_count()) {
    throw TopologyError("garment_total_energy: position count does not match patch");
  }
  const Lame lame_reinforced = plane_stress_lame(materials.E1, materials.nu);
  const Lame lame_cloth = plane_stress_lame(materials.E2, materials.nu);

  std::vector<double> element_energy(ne);
  std::vector<Mat32> element_grad(ne);
  ElementEnergyReport rep;
  if (want_report) {
    rep.density.resize(ne);
    rep.energy.resize(ne);
    rep.stretch1.resize(ne);
    rep.stretch2.resize(ne);
    rep.regime.resize(ne);
    rep.compressed.resize(ne);
  }
  std::vector<std::uint8_t> degenerate(ne, 0);
  const auto& faces = patch.mesh.faces();

#pragma omp parallel for schedule(static)
  for (int e = 0; e < ne; ++e) {
    const Face& f = faces[e];
    const bool reinforced = patch.design[e] != 0;
    const Lame& lame = reinforced ? lame_reinforced : lame_cloth;
    const double scale = materials.thickness(reinforced) * patch.rest_areas[e];
    const auto dg = deformation_gradient(patch.rest_frames_inv[e], positions.segment<3>(3 * f[0]),
                                         positions.segment<3>(3 * f[1]),
                                         positions.segment<3>(3 * f[2]));
    const DensityResult d = element_energy_density(dg.C, lame);
    element_energy[e] = scale * d.W;
    // dE/d[e1 e2] = t A (2 F dW/dC) Dm^-T; columns are the gradients at x1 and x2.
    element_grad[e] = scale * (2.0 * dg.F * d.dW_dC) * patch.rest_frames_inv[e].transpose();
    if (d.stretch1 > 1.0 && d.stretch2 <= 1e-8) degenerate[e] = 1;
    if (want_report) {
      rep.density[e] = d.W;
      rep.energy[e] = element_energy[e];
      rep.stretch1[e] = d.stretch1;
      rep.stretch2[e] = d.stretch2;
      rep.regime[e] = d.regime;
      rep.compressed[e] = d.regime != StrainRegime::Taut && d.stretch2 < 1.0 - 1e-9;
    }
  }

  GarmentEnergy out;
  out.gradient = Dofs::Zero(positions.size());
  for (int e = 0; e < ne; ++e) {
    const Face& f = faces[e];
    out.energy += element_energy[e];
    const Vec3 g1 = element_grad[e].col(0);
    const Vec3 g2 = element_grad[e].col(1);
    out.gradient.segment<3>(3 * f[0]) -= g1 + g2;
    out.gradient.segment<3>(3 * f[1]) += g1;
    out.gradient.segment<3>(3 * f[2]) += g2;
    rep.degenerate += degenerate[e];
  }
  out.report = std::move(rep);
  return out;
}

AttachmentEnergy attachment_energy(const GarmentPatch& patch, const Dofs& positions,
                                   std::span<const Vec3> targets, double k) {
  if (static_cast<int>(targets.size()) != patch.element_count()) {
    throw TopologyError("attachment_energy: one target per element required");
  }
  AttachmentEnergy out;
  out.gradient = Dofs::Zero(positions.size());
  const auto& faces = patch.mesh.faces();
  for (int e = 0; e < patch.element_count(); ++e) {
    if (!patch.attached[e]) continue;
    const Face& f = faces[e];
    const Vec3 c = (positions.segment<3>(3 * f[0]) + positions.segment<3>(3 * f[1]) +
                    positions.segment<3>(3 * f[2])) / 3.0;
    const Vec3 r = c - targets[e];
    out.energy += 0.5 * k * r.squaredNorm();
    const Vec3 g = (k / 3.0) * r;
    for (int v : f) out.gradient.segment<3>(3 * v) += g;
  }
  return out;
}

}  // namespace ktopo
