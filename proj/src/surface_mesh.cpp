#include "ktopo/surface_mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "ktopo/errors.hpp"
#include "ktopo/text_io.hpp"

namespace ktopo {

Dofs flatten(std::span<const Vec3> points) {
  Dofs x(3 * static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) x.segment<3>(3 * i) = points[i];
  return x;
}

std::vector<Vec3> unflatten(const Dofs& x) {
  std::vector<Vec3> out(static_cast<std::size_t>(x.size() / 3));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.segment<3>(3 * i);
  return out;
}

namespace {

Vec3 face_cross(const std::vector<Vec3>& v, const Face& f) {
  return (v[f[1]] - v[f[0]]).cross(v[f[2]] - v[f[0]]);
}

}  // namespace

SurfaceMesh::SurfaceMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const int n = vertex_count();
  normals_.assign(vertices_.size(), Vec3::Zero());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (int idx : faces_[f]) {
      if (idx < 0 || idx >= n) {
        throw TopologyError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(idx) + " (vertex count " + std::to_string(n) + ")");
      }
    }
    const Vec3 c = face_cross(vertices_, faces_[f]);
    if (0.5 * c.norm() <= kMinFaceArea) {
      throw TopologyError("face " + std::to_string(f) + " is degenerate (area <= 1e-12 m^2)");
    }
    // |c| = 2 * area, so summing raw cross products weights by area.
    for (int idx : faces_[f]) normals_[idx] += c;
  }
  for (auto& nrm : normals_) {
    const double len = nrm.norm();
    if (len > 0.0) nrm /= len;
  }
}

double SurfaceMesh::face_area(int f) const { return 0.5 * face_cross(vertices_, faces_[f]).norm(); }

Vec3 SurfaceMesh::face_centroid(int f) const {
  const Face& fc = faces_[f];
  return (vertices_[fc[0]] + vertices_[fc[1]] + vertices_[fc[2]]) / 3.0;
}

double SurfaceMesh::total_area() const {
  double a = 0.0;
  for (int f = 0; f < face_count(); ++f) a += face_area(f);
  return a;
}

bool SurfaceMesh::same_topology(const SurfaceMesh& other) const {
  return vertex_count() == other.vertex_count() && faces_ == other.faces_;
}

SurfaceMesh SurfaceMesh::with_vertices(std::vector<Vec3> vertices) const {
  if (vertices.size() != vertices_.size()) {
    throw TopologyError("with_vertices: vertex count mismatch");
  }
  return SurfaceMesh(std::move(vertices), faces_);
}

namespace {

double parse_coord(const std::string& token, const std::string& where) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError(where + ": invalid coordinate '" + token + "'");
  }
  return value;
}

int parse_face_index(const std::string& token, int vertex_count, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  long value = 0;
  auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
  if (ec != std::errc{} || ptr != head.data() + head.size() || value == 0) {
    throw ParseError(where + ": invalid face index '" + token + "'");
  }
  const long idx = value > 0 ? value - 1 : vertex_count + value;
  if (idx < 0 || idx >= vertex_count) {
    throw TopologyError(where + ": face index " + std::to_string(value) + " out of range");
  }
  return static_cast<int>(idx);
}

}  // namespace

SurfaceMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open OBJ file " + path.string());
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      std::string a, b, c;
      if (!(ls >> a >> b >> c)) throw ParseError(where + ": vertex needs three coordinates");
      vertices.emplace_back(parse_coord(a, where), parse_coord(b, where), parse_coord(c, where));
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      for (std::string t; ls >> t;) tokens.push_back(t);
      if (tokens.size() != 3) {
        throw TopologyError(where + ": face has " + std::to_string(tokens.size()) +
                            " vertices; only triangles are supported");
      }
      const int n = static_cast<int>(vertices.size());
      faces.push_back({parse_face_index(tokens[0], n, where), parse_face_index(tokens[1], n, where),
                       parse_face_index(tokens[2], n, where)});
    }
    // vn, vt, o, g, s, usemtl, mtllib: ignored
  }
  return SurfaceMesh(std::move(vertices), std::move(faces));
}

void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices,
               std::span<const Face> faces) {
  std::ostringstream out;
  for (const Vec3& v : vertices) {
    out << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
        << format_double(v.z()) << '\n';
  }
  for (const Face& f : faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  write_text_file(path, out.str());
}

void write_obj(const std::filesystem::path& path, const SurfaceMesh& mesh) {
  write_obj(path, mesh.vertices(), mesh.faces());
}

PoseSequence::PoseSequence(std::vector<SurfaceMesh> frames_in, int rest, int target)
    : frames(std::move(frames_in)), rest_index(rest), target_index(target) {
  if (frames.empty()) throw ConfigError("pose sequence is empty");
  const int n = static_cast<int>(frames.size());
  if (rest < 0 || rest >= n || target < 0 || target >= n) {
    throw ConfigError("pose sequence labels out of range");
  }
  for (const auto& f : frames) {
    if (!f.same_topology(frames.front())) {
      throw TopologyError("pose sequence frames do not share one topology");
    }
  }
}

double GarmentPatch::total_rest_area() const {
  double a = 0.0;
  for (double ae : rest_areas) a += ae;
  return a;
}

double GarmentPatch::reinforced_area() const {
  double a = 0.0;
  for (std::size_t e = 0; e < rest_areas.size(); ++e) {
    if (design[e]) a += rest_areas[e];
  }
  return a;
}

double GarmentPatch::mean_edge_length() const {
  double sum = 0.0;
  const auto& v = mesh.vertices();
  for (const Face& f : mesh.faces()) {
    sum += (v[f[1]] - v[f[0]]).norm() + (v[f[2]] - v[f[1]]).norm() + (v[f[0]] - v[f[2]]).norm();
  }
  return sum / (3.0 * std::max(1, mesh.face_count()));
}

Mat2 flatten_triangle(const Vec3& x0, const Vec3& x1, const Vec3& x2) {
  const Vec3 e1 = x1 - x0;
  const Vec3 e2 = x2 - x0;
  const double l1 = e1.norm();
  Mat2 m;
  m(0, 0) = l1;
  m(1, 0) = 0.0;
  m(0, 1) = e1.dot(e2) / l1;
  m(1, 1) = e1.cross(e2).norm() / l1;
  return m;
}

GarmentPatch make_patch(SurfaceMesh rest_mesh, std::vector<std::uint8_t> attached) {
  const int ne = rest_mesh.face_count();
  if (ne == 0) throw TopologyError("garment patch has no elements");
  if (static_cast<int>(attached.size()) != ne) {
    throw TopologyError("attachment flags do not match element count");
  }
  GarmentPatch p;
  p.rest_frames.resize(ne);
  p.rest_frames_inv.resize(ne);
  p.rest_areas.resize(ne);
  const auto& v = rest_mesh.vertices();
  for (int e = 0; e < ne; ++e) {
    const Face& f = rest_mesh.faces()[e];
    const Mat2 dm = flatten_triangle(v[f[0]], v[f[1]], v[f[2]]);
    const double det = dm.determinant();
    if (std::abs(det) <= 1e-14) {
      throw TopologyError("rest frame of element " + std::to_string(e) + " is singular");
    }
    p.rest_frames[e] = dm;
    p.rest_frames_inv[e] = dm.inverse();
    p.rest_areas[e] = 0.5 * std::abs(det);
  }
  p.mesh = std::move(rest_mesh);
  p.attached = std::move(attached);
  p.design.assign(static_cast<std::size_t>(ne), 1);
  return p;
}

namespace {

using SparseAnchor = std::map<int, double>;

BodyAnchor to_body_anchor(const SparseAnchor& a) {
  if (a.empty() || a.size() > 3) throw std::logic_error("anchor support must have 1..3 vertices");
  BodyAnchor out{};
  int k = 0;
  for (auto [id, w] : a) {
    out.body_vertices[k] = id;
    out.weights[k] = w;
    ++k;
  }
  for (; k < 3; ++k) {
    out.body_vertices[k] = out.body_vertices[0];
    out.weights[k] = 0.0;
  }
  return out;
}

Vec3 apply_anchor(const BodyAnchor& a, const std::vector<Vec3>& body) {
  // Fixed evaluation order keeps rest mapping bitwise-identical to extraction.
  return a.weights[0] * body[a.body_vertices[0]] + a.weights[1] * body[a.body_vertices[1]] +
         a.weights[2] * body[a.body_vertices[2]];
}

}  // namespace

GarmentPatch extract_patch(const SurfaceMesh& body, std::span<const int> face_ids, int subdivisions,
                           std::span<const int> attachment_face_ids) {
  if (face_ids.empty()) throw ConfigError("patch selection is empty");
  if (subdivisions < 0) throw ConfigError("subdivisions must be >= 0");
  std::vector<int> faces_sorted(face_ids.begin(), face_ids.end());
  std::sort(faces_sorted.begin(), faces_sorted.end());
  faces_sorted.erase(std::unique(faces_sorted.begin(), faces_sorted.end()), faces_sorted.end());
  for (int f : faces_sorted) {
    if (f < 0 || f >= body.face_count()) {
      throw TopologyError("patch face id " + std::to_string(f) + " outside body mesh");
    }
  }
  std::vector<std::uint8_t> is_attached_face(static_cast<std::size_t>(body.face_count()), 0);
  for (int f : attachment_face_ids) {
    if (!std::binary_search(faces_sorted.begin(), faces_sorted.end(), f)) {
      throw ConfigError("attachment face " + std::to_string(f) + " is not part of the patch");
    }
    is_attached_face[f] = 1;
  }

  // Level 0: garment vertices are the body vertices touched by the selection.
  std::vector<SparseAnchor> anchors;
  std::map<int, int> body_to_garment;
  std::vector<Face> faces;
  std::vector<int> parents;
  for (int f : faces_sorted) {
    Face gf{};
    for (int k = 0; k < 3; ++k) {
      const int bv = body.faces()[f][k];
      auto [it, inserted] = body_to_garment.try_emplace(bv, static_cast<int>(anchors.size()));
      if (inserted) anchors.push_back(SparseAnchor{{bv, 1.0}});
      gf[k] = it->second;
    }
    faces.push_back(gf);
    parents.push_back(f);
  }

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoints.try_emplace({key.first, key.second},
                                                  static_cast<int>(anchors.size()));
      if (inserted) {
        SparseAnchor m;
        for (auto [id, w] : anchors[a]) m[id] += 0.5 * w;
        for (auto [id, w] : anchors[b]) m[id] += 0.5 * w;
        anchors.push_back(std::move(m));
      }
      return it->second;
    };
    std::vector<Face> next_faces;
    std::vector<int> next_parents;
    next_faces.reserve(faces.size() * 4);
    for (std::size_t i = 0; i < faces.size(); ++i) {
      const auto [a, b, c] = faces[i];
      const int ab = midpoint(a, b);
      const int bc = midpoint(b, c);
      const int ca = midpoint(c, a);
      next_faces.push_back({a, ab, ca});
      next_faces.push_back({ab, b, bc});
      next_faces.push_back({ca, bc, c});
      next_faces.push_back({ab, bc, ca});
      for (int k = 0; k < 4; ++k) next_parents.push_back(parents[i]);
    }
    faces = std::move(next_faces);
    parents = std::move(next_parents);
  }

  std::vector<BodyAnchor> body_anchors;
  body_anchors.reserve(anchors.size());
  std::vector<Vec3> rest_positions;
  rest_positions.reserve(anchors.size());
  for (const auto& a : anchors) {
    body_anchors.push_back(to_body_anchor(a));
    rest_positions.push_back(apply_anchor(body_anchors.back(), body.vertices()));
  }

  std::vector<std::uint8_t> attached(faces.size());
  for (std::size_t e = 0; e < faces.size(); ++e) attached[e] = is_attached_face[parents[e]];

  GarmentPatch patch = make_patch(SurfaceMesh(std::move(rest_positions), std::move(faces)),
                                  std::move(attached));
  patch.parent_faces = std::move(parents);
  patch.anchors = std::move(body_anchors);
  patch.body_vertex_count = body.vertex_count();
  patch.body_face_count = body.face_count();
  return patch;
}

Dofs map_patch_to_pose(const GarmentPatch& patch, const SurfaceMesh& pose) {
  if (patch.anchors.empty()) {
    throw TopologyError("patch has no body correspondence (not extracted from a body)");
  }
  if (pose.vertex_count() != patch.body_vertex_count || pose.face_count() != patch.body_face_count) {
    throw TopologyError("pose topology does not match the patch's parent body");
  }
  Dofs x(3 * patch.vertex_count());
  for (int i = 0; i < patch.vertex_count(); ++i) {
    x.segment<3>(3 * i) = apply_anchor(patch.anchors[i], pose.vertices());
  }
  return x;
}

std::vector<Vec3> mapped_centroids(const GarmentPatch& patch, const SurfaceMesh& pose) {
  const Dofs x = map_patch_to_pose(patch, pose);
  std::vector<Vec3> out(patch.element_count());
  for (int e = 0; e < patch.element_count(); ++e) {
    const Face& f = patch.mesh.faces()[e];
    out[e] = (vertex_of(x, f[0]) + vertex_of(x, f[1]) + vertex_of(x, f[2])) / 3.0;
  }
  return out;
}

std::vector<std::vector<int>> element_neighbors(const SurfaceMesh& mesh) {
  std::map<std::pair<int, int>, std::vector<int>> edge_faces;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& fc = mesh.faces()[f];
    for (int k = 0; k < 3; ++k) {
      const auto key = std::minmax(fc[k], fc[(k + 1) % 3]);
      edge_faces[{key.first, key.second}].push_back(f);
    }
  }
  std::vector<std::vector<int>> nbrs(mesh.face_count());
  for (const auto& [edge, fs] : edge_faces) {
    for (int a : fs) {
      for (int b : fs) {
        if (a != b) nbrs[a].push_back(b);
      }
    }
  }
  for (auto& n : nbrs) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return nbrs;
}

}  // namespace ktopo
