#include "ktopo/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ktopo/errors.hpp"

namespace ktopo {

void CylinderBendParams::validate() const {
  if (!(radius > 0.0 && length > 0.0)) throw ConfigError("cylinder: radius and length must be > 0");
  if (circumferential < 3 || axial < 1) throw ConfigError("cylinder: mesh too coarse");
  if (!(bend_length > 0.0 && bend_length <= length)) throw ConfigError("cylinder: bad bend length");
  if (margin_rows < 0 || attachment_rows < 0 || subdivisions < 0) {
    throw ConfigError("cylinder: negative row or subdivision count");
  }
  if (axial - 2 * margin_rows < std::max(1, 2 * attachment_rows)) {
    throw ConfigError("cylinder: margins leave no garment rows");
  }
}

SurfaceMesh make_cylinder(const CylinderBendParams& p) {
  p.validate();
  const int nc = p.circumferential;
  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>((p.axial + 1) * nc));
  for (int i = 0; i <= p.axial; ++i) {
    const double z = p.length * i / p.axial;
    for (int j = 0; j < nc; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / nc;
      verts.emplace_back(p.radius * std::cos(phi), p.radius * std::sin(phi), z);
    }
  }
  const auto id = [&](int i, int j) { return i * nc + (j % nc); };
  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(2 * p.axial * nc));
  for (int i = 0; i < p.axial; ++i) {
    for (int j = 0; j < nc; ++j) {
      const int a = id(i, j), b = id(i, j + 1), c = id(i + 1, j + 1), d = id(i + 1, j);
      if ((i + j) % 2 == 0) {
        faces.push_back({a, b, c});
        faces.push_back({a, c, d});
      } else {
        faces.push_back({a, b, d});
        faces.push_back({b, c, d});
      }
    }
  }
  return SurfaceMesh(std::move(verts), std::move(faces));
}

Vec3 bend_point(const Vec3& p, const CylinderBendParams& params, double angle_deg) {
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double s0 = 0.5 * (params.length - params.bend_length);
  const double sigma = p.z() - s0;
  if (theta == 0.0 || sigma <= 0.0) return p;
  const double kappa = theta / params.bend_length;
  const double R = 1.0 / kappa;
  const double psi = kappa * std::min(sigma, params.bend_length);
  Vec3 c(R * (1.0 - std::cos(psi)), 0.0, s0 + R * std::sin(psi));
  if (sigma > params.bend_length) {
    c += (sigma - params.bend_length) * Vec3(std::sin(theta), 0.0, std::cos(theta));
  }
  return c + p.x() * Vec3(std::cos(psi), 0.0, -std::sin(psi)) + p.y() * Vec3::UnitY();
}

namespace {

SurfaceMesh bent(const SurfaceMesh& straight, const CylinderBendParams& p, double angle_deg) {
  std::vector<Vec3> v;
  v.reserve(straight.vertices().size());
  for (const Vec3& x : straight.vertices()) v.push_back(bend_point(x, p, angle_deg));
  return straight.with_vertices(std::move(v));
}

}  // namespace

Fixture make_cylinder_bend(const CylinderBendParams& p) {
  const SurfaceMesh straight = make_cylinder(p);
  Fixture f;
  f.rest = bent(straight, p, p.rest_angle_deg);
  f.target = bent(straight, p, p.target_angle_deg);
  const int nc = p.circumferential;
  const int first = p.margin_rows, last = p.axial - p.margin_rows;  // garment rows [first, last)
  for (int i = first; i < last; ++i) {
    const bool ring = i < first + p.attachment_rows || i >= last - p.attachment_rows;
    for (int j = 0; j < nc; ++j) {
      for (int k = 0; k < 2; ++k) {
        const int fid = 2 * (i * nc + j) + k;
        f.patch.faces.push_back(fid);
        if (ring) f.patch.attachments.push_back(fid);
      }
    }
  }
  f.patch.subdivisions = p.subdivisions;
  return f;
}

void PlaneParams::validate() const {
  if (!(size > 0.0)) throw ConfigError("plane: size must be > 0");
  if (resolution < 1) throw ConfigError("plane: resolution must be >= 1");
  if (!(stretch > 0.0)) throw ConfigError("plane: stretch must be > 0");
  if (subdivisions < 0) throw ConfigError("plane: negative subdivisions");
}

Fixture make_plane(const PlaneParams& p) {
  p.validate();
  const int n = p.resolution;
  const double h = p.size / n;
  std::vector<Vec3> rest, target;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const double x = i * h, y = j * h;
      rest.emplace_back(x, y, 0.0);
      target.emplace_back(0.5 * p.size + (x - 0.5 * p.size) * p.stretch, y, 0.0);
    }
  }
  std::vector<Face> faces;
  const auto id = [&](int i, int j) { return j * (n + 1) + i; };
  Fixture f;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      const int fid = static_cast<int>(faces.size());
      faces.push_back({a, b, c});
      faces.push_back({a, c, d});
      f.patch.faces.push_back(fid);
      f.patch.faces.push_back(fid + 1);
      if (i == 0 || i == n - 1) {
        f.patch.attachments.push_back(fid);
        f.patch.attachments.push_back(fid + 1);
      }
    }
  }
  std::sort(f.patch.attachments.begin(), f.patch.attachments.end());
  f.rest = SurfaceMesh(std::move(rest), faces);
  f.target = SurfaceMesh(std::move(target), std::move(faces));
  f.patch.subdivisions = p.subdivisions;
  return f;
}

}  // namespace ktopo
