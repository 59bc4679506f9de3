#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace neoprint {

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Triangle mesh with named per-vertex scalar feature channels.
// Faces are counter-clockwise; validation enforces index bounds,
// non-degenerate areas and consistent orientation.
struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::map<std::string, std::vector<double>> features;

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_faces() const { return static_cast<int>(faces.size()); }

  const std::vector<double>& feature(const std::string& name) const;
  bool has_feature(const std::string& name) const {
    return features.count(name) > 0;
  }
};

struct TopologyReport {
  int euler_characteristic = 0;
  int n_boundary_loops = 0;
  bool is_closed = false;
  int n_components = 0;
  int genus = -1;  // closed surfaces only, -1 otherwise
};

// Throws MeshError on out-of-range indices, repeated vertices in a face,
// near-zero face areas or inconsistent orientation.
void validate_mesh(const TriMesh& mesh);

// OBJ subset ("v x y z" / "f i j k", 1-based) plus an optional CSV
// feature sidecar with header "vertex,<name>,...".
TriMesh load_mesh(const std::string& path,
                  const std::optional<std::string>& feature_path = {});
void save_mesh(const TriMesh& mesh, const std::string& path);
void save_features(const TriMesh& mesh, const std::string& path);

TopologyReport mesh_topology(const TriMesh& mesh);

double face_area(const TriMesh& mesh, int f);
Eigen::Vector3d face_normal(const TriMesh& mesh, int f);
// Area-weighted outward vertex normals.
std::vector<Eigen::Vector3d> vertex_normals(const TriMesh& mesh);
// Barycentric vertex areas (one third of incident face areas).
std::vector<double> vertex_areas(const TriMesh& mesh);

// Symmetric cotangent Laplacian, positive semi-definite convention:
// off-diagonal w_ij = -(cot a + cot b)/2, diagonal = -sum of off-diagonals.
// Angles are clamped to [1, 179] degrees before taking cotangents.
Eigen::SparseMatrix<double> cotangent_laplacian(const TriMesh& mesh);

// Signed mean curvature H_i = sign * |(L x)_i| / (2 A_i); convex regions
// positive. Boundary vertices get 0.
std::vector<double> mean_curvature(const TriMesh& mesh);

struct InflateResult {
  TriMesh mesh;
  std::vector<double> depth;  // accumulated signed normal displacement
};

// Iterative uniform-Laplacian smoothing with per-step surface-area
// renormalization (so a sphere is a fixed point). depth is positive where
// the surface moved outward, i.e. in sulcal regions.
InflateResult inflate_surface(const TriMesh& mesh, int n_iters, double step);

// Center on the centroid and normalize all vertices to unit length.
// Throws if any face flips (input not star-shaped about its centroid).
TriMesh project_to_sphere(const TriMesh& mesh);

// Icosphere by repeated 1-to-4 subdivision of an icosahedron.
TriMesh make_icosphere(int level, double radius = 1.0);

}  // namespace neoprint
