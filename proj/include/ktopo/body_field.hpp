#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "ktopo/surface_mesh.hpp"

namespace ktopo {

/// Implicit moving-least-squares signed distance over a posed body mesh.
///
/// Phi(x) = sum_k n_k.(x - v_k) w_k(x) / sum_k w_k(x), w_k = (1 - |x - v_k|^2 / h_k^2)^4 inside
/// the support |x - v_k| < h_k and zero outside. Each h_k is twice the mean one-ring edge length
/// of v_k. Sources are stored structure-of-arrays, sorted by cell of a uniform grid whose cell
/// size is max_k h_k, so a query visits nine contiguous runs of three cells.
class ImlsField {
 public:
  const std::vector<double>& support_radii() const { return radius_; }
  int source_count() const { return static_cast<int>(radius_.size()); }
  double max_radius() const { return cell_; }
  /// Position/normal of the i-th source in original body-vertex order.
  Vec3 source_position(int i) const;
  Vec3 source_normal(int i) const;

  struct Sample {
    bool supported = false;  ///< false when every kernel weight vanishes
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
    int support = 0;
  };
  Sample eval(const Vec3& x) const;

  friend ImlsField build_field(const SurfaceMesh& body);

 private:
  // Sorted SoA arrays.
  std::vector<double> px_, py_, pz_, nx_, ny_, nz_, inv_h2_;
  std::vector<int> order_;   // sorted slot -> body vertex
  std::vector<int> slot_;    // body vertex -> sorted slot
  std::vector<double> radius_;  // per body vertex
  std::vector<int> cell_start_;
  Vec3 origin_ = Vec3::Zero();
  std::array<int, 3> dims_{0, 0, 0};
  double cell_ = 0.0;
};

/// Throws TopologyError for vertices with an empty one-ring.
ImlsField build_field(const SurfaceMesh& body);

/// Twice the mean length of the edges incident to each vertex; zero for isolated vertices.
std::vector<double> one_ring_support_radii(const SurfaceMesh& body);

inline ImlsField::Sample phi(const ImlsField& field, const Vec3& x) { return field.eval(x); }

struct PenaltyResult {
  double energy = 0.0;  ///< sum of Phi^2 over vertices with Phi <= 0 (m^2)
  Dofs gradient;
  int penetrating = 0;   ///< vertices with Phi < 0
  int unsupported = 0;   ///< vertices outside every kernel support
  double min_phi = 0.0;  ///< over supported vertices
  std::vector<double> phi;        ///< per vertex, NaN where unsupported
  std::vector<Vec3> contact_grad; ///< grad Phi at supported vertices, zero elsewhere
};

/// Unilateral penetration penalty. Unsupported vertices contribute nothing.
PenaltyResult body_penalty(const ImlsField& field, const Dofs& positions);

/// Debug dump: Phi sampled on an n^3 lattice spanning [lo, hi]; rows x,y,z,phi (unsupported rows
/// are skipped).
void dump_phi_csv(const ImlsField& field, const Vec3& lo, const Vec3& hi, int n,
                  const std::filesystem::path& path);

}  // namespace ktopo
