#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ktopo/surface_mesh.hpp"

namespace ktopo {

/// Reinforced (1) and base (2) cloth. SI units.
struct MaterialPair {
  double E1 = 5.7e6;   ///< Pa
  double E2 = 0.5e6;   ///< Pa
  double nu = 0.33;
  double t1 = 0.35e-3; ///< m
  double t2 = 0.27e-3; ///< m
  double attach_k = 0.002;  ///< attachment stiffness relative to E2*t2 (per metre)

  /// Throws ConfigError unless E1 > E2 > 0, 0 <= nu < 0.5, t1 >= t2 > 0, attach_k >= 0.
  void validate() const;
  double modulus(bool reinforced) const { return reinforced ? E1 : E2; }
  double thickness(bool reinforced) const { return reinforced ? t1 : t2; }
};

MaterialPair parse_material(const std::string& text);
MaterialPair load_material(const std::filesystem::path& path);
std::string to_string(const MaterialPair& m);

struct Lame {
  double mu = 0.0;
  double lambda = 0.0;
};

/// mu = E / (2(1+nu)), lambda = E nu / (1 - nu^2).
Lame plane_stress_lame(double youngs, double poisson);

struct DeformationGradient {
  Mat32 F;
  Mat2 C;
};

/// F = [x1-x0, x2-x0] * rest_inv, C = F^T F.
DeformationGradient deformation_gradient(const Mat2& rest_inv, const Vec3& x0, const Vec3& x1,
                                         const Vec3& x2);

enum class StrainRegime : std::uint8_t { Slack, Wrinkled, Taut };

struct DensityResult {
  double W = 0.0;             ///< J/m^3
  Mat2 dW_dC = Mat2::Zero();  ///< symmetric
  double stretch1 = 1.0;      ///< principal stretches, stretch1 >= stretch2
  double stretch2 = 1.0;
  StrainRegime regime = StrainRegime::Slack;
};

/// Transverse stretch at which the transverse neo-Hookean stress vanishes for a given
/// stretch1 > 0: the root of mu s + (lambda/2) log s = mu - lambda log(stretch1), s = stretch^2.
double natural_width(double stretch1, const Lame& lame);

/// Unrelaxed compressible neo-Hookean density in principal stretches.
double neo_hookean_density(double stretch1, double stretch2, const Lame& lame);

/// Tension-field relaxed neo-Hookean density: zero when stretch1 <= 1; in the wrinkled band the
/// transverse stretch is replaced by natural_width(stretch1); otherwise the plain density.
DensityResult element_energy_density(const Mat2& C, const Lame& lame);

struct ElementEnergyReport {
  std::vector<double> density;     ///< W^e, J/m^3
  std::vector<double> energy;      ///< t^e A^e W^e, J
  std::vector<double> stretch1;
  std::vector<double> stretch2;
  std::vector<StrainRegime> regime;
  std::vector<std::uint8_t> compressed;  ///< relaxation active and some direction shortened
  int degenerate = 0;  ///< elements with (near) zero deformed area under tension

  int compressed_count() const;
};

struct GarmentEnergy {
  double energy = 0.0;  ///< J
  Dofs gradient;        ///< J/m
  ElementEnergyReport report;
};

/// E = sum_e t^e A^e W^e with (E1, t1) where d^e = 1 and (E2, t2) otherwise.
GarmentEnergy garment_total_energy(const GarmentPatch& patch, const Dofs& positions,
                                   const MaterialPair& materials, bool want_report = true);

struct AttachmentEnergy {
  double energy = 0.0;
  Dofs gradient;
};

/// Zero-length springs between attached element centroids and their targets:
/// E = sum_e 1/2 k |c_e - target_e|^2, with k in N/m.
AttachmentEnergy attachment_energy(const GarmentPatch& patch, const Dofs& positions,
                                   std::span<const Vec3> targets, double k);

}  // namespace ktopo
