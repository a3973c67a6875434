#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace ktopo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat32 = Eigen::Matrix<double, 3, 2>;
using Face = std::array<int, 3>;

/// Flat DOF vector: vertex i occupies entries [3i, 3i+3).
using Dofs = Eigen::VectorXd;

inline auto vertex_of(const Dofs& x, int i) { return x.segment<3>(3 * i); }
inline auto vertex_of(Dofs& x, int i) { return x.segment<3>(3 * i); }

Dofs flatten(std::span<const Vec3> points);
std::vector<Vec3> unflatten(const Dofs& x);

inline constexpr double kMinFaceArea = 1e-12;

/// Triangle mesh with area-weighted vertex normals. Immutable after construction.
/// Vertices referenced by no face keep a zero normal; consumers that need a one-ring
/// (the IMLS field) reject them.
class SurfaceMesh {
 public:
  SurfaceMesh() = default;
  /// Validates indices and rejects faces with area <= kMinFaceArea.
  SurfaceMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int face_count() const { return static_cast<int>(faces_.size()); }

  double face_area(int f) const;
  Vec3 face_centroid(int f) const;
  double total_area() const;
  bool same_topology(const SurfaceMesh& other) const;

  /// Copy with vertex positions replaced; topology is kept.
  SurfaceMesh with_vertices(std::vector<Vec3> vertices) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Face> faces_;
  std::vector<Vec3> normals_;
};

SurfaceMesh load_obj(const std::filesystem::path& path);
void write_obj(const std::filesystem::path& path, const SurfaceMesh& mesh);
void write_obj(const std::filesystem::path& path, std::span<const Vec3> vertices,
               std::span<const Face> faces);

/// Body poses sharing one topology; `rest` carries zero energy, `target` is the optimized pose.
struct PoseSequence {
  std::vector<SurfaceMesh> frames;
  int rest_index = 0;
  int target_index = 0;

  PoseSequence() = default;
  PoseSequence(std::vector<SurfaceMesh> frames, int rest_index, int target_index);

  const SurfaceMesh& rest() const { return frames.at(rest_index); }
  const SurfaceMesh& target() const { return frames.at(target_index); }
};

/// Garment vertex expressed as a fixed barycentric combination of three body vertices.
struct BodyAnchor {
  std::array<int, 3> body_vertices;
  std::array<double, 3> weights;
};

/// Garment submesh lifted off a body mesh. Vertices are duplicated from the body; only the
/// anchor table links them back for pose mapping.
struct GarmentPatch {
  std::vector<int> parent_faces;       ///< body face id per garment element
  SurfaceMesh mesh;                    ///< rest embedding of the garment
  std::vector<BodyAnchor> anchors;     ///< per garment vertex
  std::vector<Mat2> rest_frames;       ///< flattened rest edge matrix [e1 e2] per element
  std::vector<Mat2> rest_frames_inv;
  std::vector<double> rest_areas;      ///< A^e in m^2
  std::vector<std::uint8_t> attached;  ///< per element
  std::vector<std::uint8_t> design;    ///< d^e in {0,1}
  int body_vertex_count = 0;
  int body_face_count = 0;

  int element_count() const { return static_cast<int>(rest_areas.size()); }
  int vertex_count() const { return mesh.vertex_count(); }
  double total_rest_area() const;
  double reinforced_area() const;
  double mean_edge_length() const;
};

/// Builds rest frames, areas and the all-ones design for an already assembled garment mesh.
/// Used directly by fixtures that do not originate on a body (the planar pull-test rig).
GarmentPatch make_patch(SurfaceMesh rest_mesh, std::vector<std::uint8_t> attached);

/// Isometric flattening of one triangle: columns are the 2D rest edge vectors.
Mat2 flatten_triangle(const Vec3& x0, const Vec3& x1, const Vec3& x2);

GarmentPatch extract_patch(const SurfaceMesh& body, std::span<const int> face_ids,
                           int subdivisions, std::span<const int> attachment_face_ids);

Dofs map_patch_to_pose(const GarmentPatch& patch, const SurfaceMesh& pose);

/// Element centroids of the garment mapped onto `pose` (attachment targets).
std::vector<Vec3> mapped_centroids(const GarmentPatch& patch, const SurfaceMesh& pose);

/// Element adjacency through shared edges.
std::vector<std::vector<int>> element_neighbors(const SurfaceMesh& mesh);

}  // namespace ktopo
