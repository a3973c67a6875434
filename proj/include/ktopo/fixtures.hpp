#pragma once

#include <string>

#include "ktopo/patch_spec.hpp"
#include "ktopo/surface_mesh.hpp"

namespace ktopo {

/// Open tube along +z, bent about the y axis over a zone centred at mid-length. The inner
/// (concave) side of a positive bend is the +x side.
struct CylinderBendParams {
  double radius = 0.04;
  double length = 0.3;
  int circumferential = 40;    ///< vertices around
  int axial = 60;              ///< segments along the length
  double bend_length = 0.12;   ///< arc length of the curved zone
  double rest_angle_deg = 0.0;
  double target_angle_deg = 90.0;
  int margin_rows = 5;         ///< body rows left uncovered at each end
  int attachment_rows = 1;     ///< garment rows pinned at each end
  int subdivisions = 0;

  void validate() const;
};

struct Fixture {
  SurfaceMesh rest;
  SurfaceMesh target;
  PatchSpec patch;
};

/// Straight tube geometry (no bend).
SurfaceMesh make_cylinder(const CylinderBendParams& params);
/// Maps a point of the straight tube to the tube bent by `angle_deg`.
Vec3 bend_point(const Vec3& p, const CylinderBendParams& params, double angle_deg);
Fixture make_cylinder_bend(const CylinderBendParams& params);

/// Flat square plate in z = 0; the target pose stretches it uniformly along x.
struct PlaneParams {
  double size = 0.1;
  int resolution = 20;
  double stretch = 1.1;
  int subdivisions = 0;

  void validate() const;
};
Fixture make_plane(const PlaneParams& params);

}  // namespace ktopo
