#pragma once

#include <complex>
#include <utility>

#include "neoprint/mesh.hpp"

namespace neoprint {

struct FlattenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-vertex 2D coordinates of an open mesh flattened into the plane.
struct PlanarMap {
  std::vector<Eigen::Vector2d> uv;
};

// Per-face complex dilatation of a piecewise-linear map.
struct BeltramiField {
  std::vector<std::complex<double>> mu;
  double k = 0.0;  // mean |mu| over faces

  double mean_abs() const;
  double std_abs() const;
  double max_abs() const;
};

// Fixed positions for every boundary vertex; four designated corners.
struct BoundaryCondition {
  std::vector<int> vertices;                // boundary loop order
  std::vector<Eigen::Vector2d> positions;   // matching fixed positions
  std::array<int, 4> corners = {-1, -1, -1, -1};
};

struct DistortionReport {
  std::vector<double> conformal_factor;  // per-face mapped/source area ratio
  double angle_distortion_mean = 0.0;    // mean |mapped angle - source angle|
  double angle_distortion_max = 0.0;
  double mu_mean = 0.0;
  double mu_std = 0.0;
  double mu_max = 0.0;
  int flipped_faces = 0;
};

struct TeichmullerResult {
  PlanarMap map;
  BeltramiField mu;
  DistortionReport report;
  bool converged = false;
  int iterations = 0;
  std::vector<double> std_history;  // accepted std(|mu|) sequence, non-increasing
};

// Assign each face to the hemisphere of its centroid's x sign, duplicating
// cut vertices. Each output is a topological disk with features carried over.
std::pair<TriMesh, TriMesh> split_sphere(const TriMesh& sphere);

// Ordered single boundary loop, starting at its lowest vertex index.
std::vector<int> extract_boundary(const TriMesh& open_mesh);

// Map the loop onto the unit-square perimeter: corners are the loop
// vertices nearest to +y, +z, -y, -z within the cut plane, segments are
// parameterized by normalized arc length.
BoundaryCondition rectangle_boundary_conditions(
    const std::vector<int>& loop, const std::vector<Eigen::Vector3d>& positions);

// Cotangent-Laplacian Dirichlet solve per coordinate.
PlanarMap harmonic_map(const TriMesh& open_mesh, const BoundaryCondition& bc);

// mu = f_zbar / f_z of the piecewise-linear map, per face, computed in an
// isometric local frame of the source triangle.
BeltramiField beltrami_coefficient(const TriMesh& open_mesh, const PlanarMap& map);

// Reconstruct the map with prescribed mu by solving div(A grad u) = 0 with
// the mu-dependent anisotropic coefficient matrix, Dirichlet bc applied.
PlanarMap linear_beltrami_solver(const TriMesh& open_mesh, const BeltramiField& mu,
                                 const BoundaryCondition& bc);

// Fixed-point iteration toward uniform |mu|: project mu to k*mu/|mu| with
// k = mean |mu|, smooth the phase over face adjacency, reconstruct via the
// linear Beltrami solver. Accepted iterates never increase std(|mu|).
TeichmullerResult teichmuller_map(const TriMesh& open_mesh, const BoundaryCondition& bc,
                                  double tol = 0.05, int max_iter = 50);

DistortionReport distortion_report(const TriMesh& open_mesh, const PlanarMap& map);

void save_planar_map(const PlanarMap& map, const std::string& path);
void save_beltrami(const BeltramiField& mu, const std::string& path);
void save_distortion_report(const DistortionReport& rep, const std::string& path);

}  // namespace neoprint
