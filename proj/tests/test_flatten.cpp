#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <set>

#include "doctest.h"
#include "neoprint/flatten.hpp"
#include "test_meshes.hpp"

using namespace neoprint;
using namespace neoprint::testing;

namespace {

// Identity-style boundary condition for a yz-plane mesh: every boundary
// vertex fixed at its own (y, z) position mapped through `f`.
template <typename F>
BoundaryCondition planar_bc(const TriMesh& mesh, F f) {
  auto loop = extract_boundary(mesh);
  BoundaryCondition bc;
  for (int v : loop) {
    bc.vertices.push_back(v);
    bc.positions.push_back(f(mesh.vertices[v].y(), mesh.vertices[v].z()));
  }
  return bc;
}

PlanarMap apply_planar(const TriMesh& mesh,
                       const std::function<Eigen::Vector2d(double, double)>& f) {
  PlanarMap map;
  for (const auto& v : mesh.vertices) map.uv.push_back(f(v.y(), v.z()));
  return map;
}

}  // namespace

TEST_CASE("split_sphere: icosphere level 3 splits into two disks") {
  TriMesh sphere = make_icosphere(3);
  sphere.features["curvature"] = std::vector<double>(sphere.n_vertices(), 1.0);
  REQUIRE(sphere.n_faces() == 1280);
  auto [pos, neg] = split_sphere(sphere);
  CHECK(pos.n_faces() + neg.n_faces() == 1280);
  for (const TriMesh* h : {&pos, &neg}) {
    auto rep = mesh_topology(*h);
    CHECK(rep.euler_characteristic == 1);
    CHECK(rep.n_boundary_loops == 1);
    CHECK(h->has_feature("curvature"));
  }
  // symmetric construction: face counts nearly balanced
  CHECK(std::abs(pos.n_faces() - neg.n_faces()) <= 0.03 * 1280);
}

TEST_CASE("split_sphere rejects a mesh entirely on one side") {
  TriMesh tet = make_tetrahedron();
  for (auto& v : tet.vertices) v.x() += 10.0;
  CHECK_THROWS_WITH_AS(split_sphere(tet), doctest::Contains("empty hemisphere"),
                       FlattenError);
}

TEST_CASE("extract_boundary: single triangle, hemisphere, closed mesh") {
  TriMesh tri;
  tri.vertices = {{0, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  tri.faces = {{0, 1, 2}};
  auto loop = extract_boundary(tri);
  CHECK(loop.size() == 3);
  CHECK(loop[0] == 0);  // starts at lowest index

  TriMesh sphere = make_icosphere(2);
  auto [pos, neg] = split_sphere(sphere);
  // loop length equals the number of vertices duplicated into both outputs
  std::set<std::array<double, 3>> pos_set;
  for (const auto& v : pos.vertices) pos_set.insert({v.x(), v.y(), v.z()});
  int shared = 0;
  for (const auto& v : neg.vertices)
    if (pos_set.count({v.x(), v.y(), v.z()})) ++shared;
  CHECK(static_cast<int>(extract_boundary(pos).size()) == shared);

  CHECK_THROWS_WITH_AS(extract_boundary(sphere), doctest::Contains("no boundary"),
                       FlattenError);
}

TEST_CASE("rectangle_boundary_conditions: diamond corners hit square corners") {
  // diamond in the yz plane with vertices exactly at +y, +z, -y, -z
  std::vector<int> loop = {0, 1, 2, 3};
  std::vector<Eigen::Vector3d> pos = {
      {0, 1, 0}, {0, 0, 1}, {0, -1, 0}, {0, 0, -1}};
  auto bc = rectangle_boundary_conditions(loop, pos);
  REQUIRE(bc.vertices.size() == 4);
  CHECK(bc.corners[0] == 0);
  std::map<int, Eigen::Vector2d> fixed;
  for (size_t i = 0; i < bc.vertices.size(); ++i) fixed[bc.vertices[i]] = bc.positions[i];
  CHECK((fixed[0] - Eigen::Vector2d(0, 0)).norm() < 1e-15);
  CHECK((fixed[1] - Eigen::Vector2d(1, 0)).norm() < 1e-15);
  CHECK((fixed[2] - Eigen::Vector2d(1, 1)).norm() < 1e-15);
  CHECK((fixed[3] - Eigen::Vector2d(0, 1)).norm() < 1e-15);
}

TEST_CASE("rectangle_boundary_conditions: uniform circle gives uniform spacing") {
  const int n = 32;  // 4n boundary points with n per quadrant
  std::vector<int> loop(4 * n);
  std::vector<Eigen::Vector3d> pos;
  for (int i = 0; i < 4 * n; ++i) {
    loop[i] = i;
    double a = 2.0 * M_PI * i / (4 * n);
    pos.emplace_back(0.0, std::cos(a), std::sin(a));
  }
  auto bc = rectangle_boundary_conditions(loop, pos);
  // consecutive boundary spacing along the perimeter is uniform
  std::map<int, Eigen::Vector2d> fixed;
  for (size_t i = 0; i < bc.vertices.size(); ++i) fixed[bc.vertices[i]] = bc.positions[i];
  for (int i = 0; i + 1 < 4 * n; ++i) {
    double d = (fixed[loop[i + 1]] - fixed[loop[i]]).norm();
    CHECK(d == doctest::Approx(4.0 / (4 * n)).epsilon(1e-9));
  }
}

TEST_CASE("rectangle_boundary_conditions: positions follow cumulative arc length") {
  // 8-vertex loop: the four corners at +y,+z,-y,-z plus midpoints, one of
  // which is displaced so its two sub-edges have unequal length
  std::vector<int> loop = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<Eigen::Vector3d> pos = {
      {0, 1, 0},  {0, 0.8, 0.8}, {0, 0, 1},  {0, -0.5, 0.5},
      {0, -1, 0}, {0, -0.5, -0.5}, {0, 0, -1}, {0, 0.5, -0.5}};
  auto bc = rectangle_boundary_conditions(loop, pos);
  std::map<int, Eigen::Vector2d> fixed;
  for (size_t i = 0; i < bc.vertices.size(); ++i) fixed[bc.vertices[i]] = bc.positions[i];
  // side 0 runs from vertex 0 (+y corner) to vertex 2 (+z corner) via vertex 1
  double l01 = (pos[1] - pos[0]).norm();
  double l12 = (pos[2] - pos[1]).norm();
  double expect = l01 / (l01 + l12);
  CHECK(fixed[1].x() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(fixed[1].y() == doctest::Approx(0.0));
}

TEST_CASE("harmonic_map: identity boundary reproduces the identity") {
  TriMesh grid = make_grid_yz(10);
  auto bc = planar_bc(grid, [](double y, double z) { return Eigen::Vector2d(y, z); });
  auto map = harmonic_map(grid, bc);
  for (int i = 0; i < grid.n_vertices(); ++i) {
    CHECK((map.uv[i] - Eigen::Vector2d(grid.vertices[i].y(), grid.vertices[i].z()))
              .norm() < 1e-9);
  }
}

TEST_CASE("harmonic_map: interior obeys the discrete maximum principle") {
  TriMesh sphere = make_icosphere(2);
  auto [pos, neg] = split_sphere(sphere);
  auto loop = extract_boundary(pos);
  std::vector<Eigen::Vector3d> lp;
  for (int v : loop) lp.push_back(pos.vertices[v]);
  auto bc = rectangle_boundary_conditions(loop, lp);
  auto map = harmonic_map(pos, bc);
  std::set<int> on_boundary(loop.begin(), loop.end());
  for (int i = 0; i < pos.n_vertices(); ++i) {
    if (on_boundary.count(i)) continue;
    CHECK(map.uv[i].x() > 0.0);
    CHECK(map.uv[i].x() < 1.0);
    CHECK(map.uv[i].y() > 0.0);
    CHECK(map.uv[i].y() < 1.0);
  }
  CHECK(distortion_report(pos, map).flipped_faces == 0);
}

TEST_CASE("beltrami_coefficient: identity, anti-conformal shear, pure scaling") {
  TriMesh grid = make_grid_yz(6);
  auto id = apply_planar(grid, [](double y, double z) { return Eigen::Vector2d(y, z); });
  for (const auto& m : beltrami_coefficient(grid, id).mu) CHECK(std::abs(m) < 1e-12);

  // f(z) = z + 0.5 zbar  ->  mu = 0.5 exactly
  auto shear = apply_planar(grid, [](double y, double z) {
    return Eigen::Vector2d(1.5 * y, 0.5 * z);
  });
  for (const auto& m : beltrami_coefficient(grid, shear).mu)
    CHECK(std::abs(m - std::complex<double>(0.5, 0.0)) < 1e-12);

  auto scaled = apply_planar(grid, [](double y, double z) {
    return Eigen::Vector2d(2 * y, 2 * z);
  });
  for (const auto& m : beltrami_coefficient(grid, scaled).mu) CHECK(std::abs(m) < 1e-12);
}

TEST_CASE("beltrami_coefficient invariant under uv similarity transforms") {
  TriMesh sphere = make_icosphere(2);
  auto [pos, neg] = split_sphere(sphere);
  auto loop = extract_boundary(pos);
  std::vector<Eigen::Vector3d> lp;
  for (int v : loop) lp.push_back(pos.vertices[v]);
  auto map = harmonic_map(pos, rectangle_boundary_conditions(loop, lp));
  auto mu0 = beltrami_coefficient(pos, map);

  double ang = 0.7, s = 2.3;
  Eigen::Matrix2d R;
  R << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
  PlanarMap moved = map;
  for (auto& p : moved.uv) p = s * (R * p) + Eigen::Vector2d(0.3, -1.1);
  auto mu1 = beltrami_coefficient(pos, moved);
  for (size_t f = 0; f < mu0.mu.size(); ++f)
    CHECK(std::abs(mu0.mu[f] - mu1.mu[f]) < 1e-10);
}

TEST_CASE("linear_beltrami_solver with mu = 0 equals the harmonic map") {
  TriMesh grid = make_grid_yz(8);
  auto bc = planar_bc(grid, [](double y, double z) {
    return Eigen::Vector2d(y, 0.5 * z);
  });
  auto harm = harmonic_map(grid, bc);
  BeltramiField zero;
  zero.mu.assign(grid.n_faces(), 0.0);
  auto lbs = linear_beltrami_solver(grid, zero, bc);
  for (int i = 0; i < grid.n_vertices(); ++i)
    CHECK((harm.uv[i] - lbs.uv[i]).norm() < 1e-9);
}

TEST_CASE("linear_beltrami_solver roundtrip reconstructs a known map") {
  TriMesh grid = make_grid_yz(14);  // 225 vertices
  REQUIRE(grid.n_vertices() <= 500);
  auto g = [](double y, double z) {
    return Eigen::Vector2d(y + 0.10 * y * y + 0.05 * z, z + 0.07 * y * z);
  };
  auto target = apply_planar(grid, g);
  auto mu = beltrami_coefficient(grid, target);
  CHECK(mu.max_abs() < 1.0);
  auto bc = planar_bc(grid, g);
  auto rec = linear_beltrami_solver(grid, mu, bc);
  double max_err = 0;
  for (int i = 0; i < grid.n_vertices(); ++i)
    max_err = std::max(max_err, (rec.uv[i] - target.uv[i]).norm());
  CHECK(max_err < 1e-6);
}

TEST_CASE("linear_beltrami_solver rejects |mu| >= 1") {
  TriMesh grid = make_grid_yz(3);
  BeltramiField bad;
  bad.mu.assign(grid.n_faces(), std::complex<double>(1.2, 0.0));
  auto bc = planar_bc(grid, [](double y, double z) { return Eigen::Vector2d(y, z); });
  CHECK_THROWS_WITH_AS(linear_beltrami_solver(grid, bad, bc),
                       doctest::Contains("|mu| >= 1"), FlattenError);
}

TEST_CASE("beltrami/LBS roundtrip property on several smooth maps") {
  TriMesh grid = make_grid_yz(10);
  std::vector<std::function<Eigen::Vector2d(double, double)>> maps = {
      [](double y, double z) { return Eigen::Vector2d(1.2 * y + 0.2 * z, 0.9 * z); },
      [](double y, double z) { return Eigen::Vector2d(y + 0.08 * std::sin(M_PI * z), z); },
      [](double y, double z) { return Eigen::Vector2d(y, z + 0.05 * y * y + 0.03 * z * z); },
  };
  for (const auto& g : maps) {
    auto target = apply_planar(grid, g);
    auto mu = beltrami_coefficient(grid, target);
    auto rec = linear_beltrami_solver(grid, mu, planar_bc(grid, g));
    auto mu2 = beltrami_coefficient(grid, rec);
    for (size_t f = 0; f < mu.mu.size(); ++f)
      CHECK(std::abs(mu.mu[f] - mu2.mu[f]) < 1e-4);
  }
}

TEST_CASE("teichmuller_map: identity square converges immediately") {
  TriMesh grid = make_grid_yz(8);
  auto bc = planar_bc(grid, [](double y, double z) { return Eigen::Vector2d(y, z); });
  auto res = teichmuller_map(grid, bc);
  CHECK(res.converged);
  CHECK(res.mu.k <= 1e-9);
  CHECK(res.report.flipped_faces == 0);
}

TEST_CASE("teichmuller_map: 2:1 rectangle stretch gives |mu| = 1/3") {
  TriMesh grid = make_grid_yz(8);
  auto bc = planar_bc(grid, [](double y, double z) {
    return Eigen::Vector2d(y, 0.5 * z);
  });
  auto res = teichmuller_map(grid, bc, 0.05, 50);
  CHECK(res.converged);
  for (const auto& m : res.mu.mu)
    CHECK(std::abs(m) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("teichmuller_map: split icosphere hemispheres converge") {
  TriMesh sphere = make_icosphere(3);
  auto [pos, neg] = split_sphere(sphere);
  for (const TriMesh* h : {&pos, &neg}) {
    auto loop = extract_boundary(*h);
    std::vector<Eigen::Vector3d> lp;
    for (int v : loop) lp.push_back(h->vertices[v]);
    auto res = teichmuller_map(*h, rectangle_boundary_conditions(loop, lp), 0.05, 50);
    CHECK(res.converged);
    CHECK(res.mu.std_abs() <= 0.05);
    CHECK(res.mu.k < 1.0);
    CHECK(res.report.flipped_faces == 0);
    // accepted sequence is non-increasing
    for (size_t i = 1; i < res.std_history.size(); ++i)
      CHECK(res.std_history[i] <= res.std_history[i - 1]);
    // boundary sits exactly on the unit-square perimeter
    for (int v : loop) {
      const auto& p = res.map.uv[v];
      bool on_edge = std::abs(p.x()) < 1e-12 || std::abs(p.x() - 1) < 1e-12 ||
                     std::abs(p.y()) < 1e-12 || std::abs(p.y() - 1) < 1e-12;
      CHECK(on_edge);
    }
  }
}

TEST_CASE("distortion_report: identity, scaling, flip") {
  TriMesh grid = make_grid_yz(5);
  auto id = apply_planar(grid, [](double y, double z) { return Eigen::Vector2d(y, z); });
  auto rep = distortion_report(grid, id);
  for (double l : rep.conformal_factor) CHECK(l == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.angle_distortion_max < 1e-9);
  CHECK(rep.mu_max < 1e-12);
  CHECK(rep.flipped_faces == 0);

  auto scaled = apply_planar(grid, [](double y, double z) {
    return Eigen::Vector2d(2 * y, 2 * z);
  });
  auto rep2 = distortion_report(grid, scaled);
  for (double l : rep2.conformal_factor) CHECK(l == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(rep2.mu_max < 1e-12);

  auto flipped = id;
  std::swap(flipped.uv[grid.faces[0][1]], flipped.uv[grid.faces[0][2]]);
  // swapping two uv positions inverts the triangles sharing that edge
  CHECK(distortion_report(grid, flipped).flipped_faces > 0);
}
