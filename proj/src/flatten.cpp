#include "neoprint/flatten.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace neoprint {

double BeltramiField::mean_abs() const {
  if (mu.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : mu) s += std::abs(m);
  return s / mu.size();
}

double BeltramiField::std_abs() const {
  if (mu.empty()) return 0.0;
  const double mean = mean_abs();
  double s = 0.0;
  for (const auto& m : mu) {
    double d = std::abs(m) - mean;
    s += d * d;
  }
  return std::sqrt(s / mu.size());
}

double BeltramiField::max_abs() const {
  double mx = 0.0;
  for (const auto& m : mu) mx = std::max(mx, std::abs(m));
  return mx;
}

namespace {

// Isometric layout of a 3D triangle in a local 2D frame:
// p0 -> (0,0), p1 -> (|p1-p0|, 0), p2 in the upper half plane.
std::array<Eigen::Vector2d, 3> local_frame(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  const Eigen::Vector3d& p0 = mesh.vertices[t[0]];
  Eigen::Vector3d e01 = mesh.vertices[t[1]] - p0;
  Eigen::Vector3d e02 = mesh.vertices[t[2]] - p0;
  double len = e01.norm();
  if (len <= 0.0) throw FlattenError("degenerate source triangle " + std::to_string(f));
  Eigen::Vector3d ex = e01 / len;
  Eigen::Vector3d n = e01.cross(e02);
  double nlen = n.norm();
  if (nlen <= 0.0) throw FlattenError("degenerate source triangle " + std::to_string(f));
  Eigen::Vector3d ey = (n / nlen).cross(ex);
  return {Eigen::Vector2d(0, 0), Eigen::Vector2d(len, 0),
          Eigen::Vector2d(e02.dot(ex), e02.dot(ey))};
}

// Hat-function gradients of a triangle given its 2D layout.
// grad_i is the gradient of the basis function that is 1 at vertex i.
std::array<Eigen::Vector2d, 3> hat_gradients(const std::array<Eigen::Vector2d, 3>& p,
                                             double& area) {
  Eigen::Vector2d e0 = p[2] - p[1];
  Eigen::Vector2d e1 = p[0] - p[2];
  Eigen::Vector2d e2 = p[1] - p[0];
  double twice_area = e2.x() * (-e1.y()) - e2.y() * (-e1.x());
  area = 0.5 * twice_area;
  if (area <= 0.0) throw FlattenError("degenerate local frame");
  auto rot90 = [](const Eigen::Vector2d& v) { return Eigen::Vector2d(-v.y(), v.x()); };
  return {rot90(e0) / twice_area, rot90(e1) / twice_area, rot90(e2) / twice_area};
}

std::set<int> boundary_vertex_set(const TriMesh& mesh) {
  std::set<std::pair<int, int>> directed;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) directed.insert({f[k], f[(k + 1) % 3]});
  std::set<int> boundary;
  for (const auto& [a, b] : directed)
    if (!directed.count({b, a})) {
      boundary.insert(a);
      boundary.insert(b);
    }
  return boundary;
}

// Dirichlet solve of L x = 0 for each uv coordinate given fixed boundary values.
PlanarMap dirichlet_solve(const Eigen::SparseMatrix<double>& L, int nv,
                          const BoundaryCondition& bc,
                          const std::set<int>& boundary) {
  std::vector<int> interior_index(nv, -1);
  std::vector<int> interior;
  std::map<int, Eigen::Vector2d> fixed;
  for (size_t i = 0; i < bc.vertices.size(); ++i) fixed[bc.vertices[i]] = bc.positions[i];
  for (int v : boundary)
    if (!fixed.count(v))
      throw FlattenError("boundary condition does not cover vertex " + std::to_string(v));
  for (int v = 0; v < nv; ++v) {
    if (!fixed.count(v)) {
      interior_index[v] = static_cast<int>(interior.size());
      interior.push_back(v);
    }
  }
  PlanarMap map;
  map.uv.assign(nv, Eigen::Vector2d::Zero());
  for (const auto& [v, p] : fixed) map.uv[v] = p;
  const int ni = static_cast<int>(interior.size());
  if (ni == 0) return map;

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, 2);
  for (int c = 0; c < L.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(L, c); it; ++it) {
      int i = static_cast<int>(it.row()), j = static_cast<int>(it.col());
      if (interior_index[i] < 0) continue;
      if (interior_index[j] >= 0) {
        trips.emplace_back(interior_index[i], interior_index[j], it.value());
      } else {
        rhs.row(interior_index[i]) -= it.value() * fixed.at(j).transpose();
      }
    }
  }
  Eigen::SparseMatrix<double> Lii(ni, ni);
  Lii.setFromTriplets(trips.begin(), trips.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  solver.compute(Lii);
  if (solver.info() != Eigen::Success)
    throw FlattenError("singular Dirichlet system (disconnected interior?)");
  Eigen::MatrixXd sol = solver.solve(rhs);
  if (solver.info() != Eigen::Success) throw FlattenError("Dirichlet solve failed");
  for (int i = 0; i < ni; ++i) map.uv[interior[i]] = sol.row(i).transpose();
  return map;
}

double signed_uv_area(const TriMesh& mesh, const PlanarMap& map, int f) {
  const auto& t = mesh.faces[f];
  Eigen::Vector2d a = map.uv[t[1]] - map.uv[t[0]];
  Eigen::Vector2d b = map.uv[t[2]] - map.uv[t[0]];
  return 0.5 * (a.x() * b.y() - a.y() * b.x());
}

int count_flipped(const TriMesh& mesh, const PlanarMap& map) {
  int n = 0;
  for (int f = 0; f < mesh.n_faces(); ++f)
    if (signed_uv_area(mesh, map, f) <= 0.0) ++n;
  return n;
}

}  // namespace

std::pair<TriMesh, TriMesh> split_sphere(const TriMesh& sphere) {
  auto topo = mesh_topology(sphere);
  if (!topo.is_closed || topo.genus != 0 || topo.n_components != 1)
    throw FlattenError("split_sphere requires a closed connected genus-0 mesh");

  auto extract = [&](bool positive) {
    TriMesh out;
    std::map<int, int> remap;
    for (int f = 0; f < sphere.n_faces(); ++f) {
      const auto& t = sphere.faces[f];
      double cx = (sphere.vertices[t[0]].x() + sphere.vertices[t[1]].x() +
                   sphere.vertices[t[2]].x()) / 3.0;
      bool side = (cx >= 0.0);
      if (side != positive) continue;
      std::array<int, 3> nt;
      for (int k = 0; k < 3; ++k) {
        auto it = remap.find(t[k]);
        if (it == remap.end()) {
          it = remap.emplace(t[k], static_cast<int>(out.vertices.size())).first;
          out.vertices.push_back(sphere.vertices[t[k]]);
        }
        nt[k] = it->second;
      }
      out.faces.push_back(nt);
    }
    for (const auto& [name, vals] : sphere.features) {
      std::vector<double> sub(out.n_vertices());
      for (const auto& [orig, nidx] : remap) sub[nidx] = vals[orig];
      out.features[name] = std::move(sub);
    }
    return out;
  };

  TriMesh pos = extract(true), neg = extract(false);
  if (pos.faces.empty() || neg.faces.empty()) throw FlattenError("empty hemisphere");
  for (const TriMesh* h : {&pos, &neg}) {
    auto t = mesh_topology(*h);
    if (t.euler_characteristic != 1 || t.n_boundary_loops != 1)
      throw FlattenError("hemisphere is not a topological disk");
  }
  return {std::move(pos), std::move(neg)};
}

std::vector<int> extract_boundary(const TriMesh& open_mesh) {
  std::set<std::pair<int, int>> directed;
  for (const auto& f : open_mesh.faces)
    for (int k = 0; k < 3; ++k) directed.insert({f[k], f[(k + 1) % 3]});
  std::map<int, int> next;
  for (const auto& [a, b] : directed)
    if (!directed.count({b, a})) {
      if (next.count(a)) throw FlattenError("non-manifold boundary at vertex " + std::to_string(a));
      next[a] = b;
    }
  if (next.empty()) throw FlattenError("no boundary");

  int start = next.begin()->first;  // lowest index on some loop
  std::vector<int> loop;
  int v = start;
  do {
    loop.push_back(v);
    auto it = next.find(v);
    if (it == next.end()) throw FlattenError("broken boundary loop");
    v = it->second;
  } while (v != start);
  if (loop.size() != next.size())
    throw FlattenError("mesh has more than one boundary loop");
  return loop;
}

BoundaryCondition rectangle_boundary_conditions(
    const std::vector<int>& loop, const std::vector<Eigen::Vector3d>& positions) {
  const int n = static_cast<int>(loop.size());
  if (n < 4) throw FlattenError("boundary loop needs at least 4 vertices");
  if (positions.size() != loop.size())
    throw FlattenError("loop/position length mismatch");

  // project onto the cut plane (x = 0): use (y, z) relative to the loop centroid
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : positions) centroid += Eigen::Vector2d(p.y(), p.z());
  centroid /= n;
  const std::array<Eigen::Vector2d, 4> dirs = {
      Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1),
      Eigen::Vector2d(-1, 0), Eigen::Vector2d(0, -1)};  // +y, +z, -y, -z
  std::array<int, 4> corner_pos;  // index into the loop
  for (int d = 0; d < 4; ++d) {
    double best = -2.0;
    int best_i = -1;
    for (int i = 0; i < n; ++i) {
      Eigen::Vector2d q(positions[i].y() - centroid.x(), positions[i].z() - centroid.y());
      double qn = q.norm();
      if (qn <= 0.0) continue;
      double score = q.dot(dirs[d]) / qn;
      if (score > best) {
        best = score;
        best_i = i;
      }
    }
    corner_pos[d] = best_i;
  }
  std::set<int> distinct(corner_pos.begin(), corner_pos.end());
  if (distinct.size() != 4) throw FlattenError("corner selection collapsed");

  // order corners along the loop, starting from the +y corner
  std::array<int, 4> ordered = corner_pos;
  std::sort(ordered.begin() + 1, ordered.end(), [&](int a, int b) {
    auto off = [&](int i) { return (i - corner_pos[0] + n) % n; };
    return off(a) < off(b);
  });

  const std::array<Eigen::Vector2d, 4> square = {
      Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
      Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 1)};

  BoundaryCondition bc;
  bc.vertices.reserve(n);
  bc.positions.reserve(n);
  for (int s = 0; s < 4; ++s) {
    int from = ordered[s], to = ordered[(s + 1) % 4];
    int seg_len = (to - from + n) % n;
    // cumulative 3D arc length along the segment
    std::vector<double> arc(seg_len + 1, 0.0);
    for (int k = 0; k < seg_len; ++k) {
      int i = (from + k) % n, j = (from + k + 1) % n;
      arc[k + 1] = arc[k] + (positions[j] - positions[i]).norm();
    }
    for (int k = 0; k < seg_len; ++k) {  // endpoint belongs to the next segment
      double t = arc[k] / arc[seg_len];
      bc.vertices.push_back(loop[(from + k) % n]);
      bc.positions.push_back(square[s] + t * (square[(s + 1) % 4] - square[s]));
    }
    bc.corners[s] = loop[ordered[s]];
  }
  return bc;
}

PlanarMap harmonic_map(const TriMesh& open_mesh, const BoundaryCondition& bc) {
  auto L = cotangent_laplacian(open_mesh);
  return dirichlet_solve(L, open_mesh.n_vertices(), bc, boundary_vertex_set(open_mesh));
}

BeltramiField beltrami_coefficient(const TriMesh& open_mesh, const PlanarMap& map) {
  if (map.uv.size() != open_mesh.vertices.size())
    throw FlattenError("map not defined on all vertices");
  BeltramiField field;
  field.mu.reserve(open_mesh.n_faces());
  for (int f = 0; f < open_mesh.n_faces(); ++f) {
    auto frame = local_frame(open_mesh, f);
    double area;
    auto g = hat_gradients(frame, area);
    const auto& t = open_mesh.faces[f];
    double ux = 0, uy = 0, vx = 0, vy = 0;
    for (int k = 0; k < 3; ++k) {
      ux += map.uv[t[k]].x() * g[k].x();
      uy += map.uv[t[k]].x() * g[k].y();
      vx += map.uv[t[k]].y() * g[k].x();
      vy += map.uv[t[k]].y() * g[k].y();
    }
    std::complex<double> fz(0.5 * (ux + vy), 0.5 * (vx - uy));
    std::complex<double> fzbar(0.5 * (ux - vy), 0.5 * (vx + uy));
    field.mu.push_back(fzbar / fz);
  }
  field.k = field.mean_abs();
  return field;
}

PlanarMap linear_beltrami_solver(const TriMesh& open_mesh, const BeltramiField& mu,
                                 const BoundaryCondition& bc) {
  if (static_cast<int>(mu.mu.size()) != open_mesh.n_faces())
    throw FlattenError("Beltrami field size mismatch");
  const int nv = open_mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(open_mesh.n_faces() * 9);
  for (int f = 0; f < open_mesh.n_faces(); ++f) {
    const std::complex<double>& m = mu.mu[f];
    double rho = m.real(), tau = m.imag();
    double norm2 = rho * rho + tau * tau;
    if (norm2 >= 1.0)
      throw FlattenError("|mu| >= 1 on face " + std::to_string(f));
    double denom = 1.0 - norm2;
    double a1 = ((rho - 1) * (rho - 1) + tau * tau) / denom;
    double a2 = -2.0 * tau / denom;
    double a3 = ((1 + rho) * (1 + rho) + tau * tau) / denom;
    Eigen::Matrix2d A;
    A << a1, a2, a2, a3;

    auto frame = local_frame(open_mesh, f);
    double area;
    auto g = hat_gradients(frame, area);
    const auto& t = open_mesh.faces[f];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trips.emplace_back(t[i], t[j], area * g[i].dot(A * g[j]));
  }
  Eigen::SparseMatrix<double> L(nv, nv);
  L.setFromTriplets(trips.begin(), trips.end());
  return dirichlet_solve(L, nv, bc, boundary_vertex_set(open_mesh));
}

TeichmullerResult teichmuller_map(const TriMesh& open_mesh, const BoundaryCondition& bc,
                                  double tol, int max_iter) {
  if (tol <= 0.0) throw FlattenError("tolerance must be positive");
  // face adjacency over shared edges
  const int nf = open_mesh.n_faces();
  std::vector<std::vector<int>> adjacent(nf);
  {
    std::map<std::pair<int, int>, int> edge_face;
    for (int f = 0; f < nf; ++f) {
      const auto& t = open_mesh.faces[f];
      for (int k = 0; k < 3; ++k) {
        int a = t[k], b = t[(k + 1) % 3];
        if (a > b) std::swap(a, b);
        auto it = edge_face.find({a, b});
        if (it == edge_face.end()) {
          edge_face[{a, b}] = f;
        } else {
          adjacent[f].push_back(it->second);
          adjacent[it->second].push_back(f);
        }
      }
    }
  }

  // mu phases live in per-face local frames; to smooth them across faces
  // they are re-expressed in frames aligned with a global direction
  // projected onto each face plane (mu picks up e^{-2i theta} under a frame
  // rotation by theta). phase2[f] = e^{2i theta_f} of the aligned axis in
  // the face's own frame.
  std::vector<std::complex<double>> phase2(nf);
  for (int f = 0; f < nf; ++f) {
    const auto& t = open_mesh.faces[f];
    Eigen::Vector3d p0 = open_mesh.vertices[t[0]];
    Eigen::Vector3d e1 = (open_mesh.vertices[t[1]] - p0).normalized();
    Eigen::Vector3d n =
        (open_mesh.vertices[t[1]] - p0).cross(open_mesh.vertices[t[2]] - p0).normalized();
    Eigen::Vector3d e2 = n.cross(e1);
    Eigen::Vector3d g(0, 1, 0);
    Eigen::Vector3d proj = g - g.dot(n) * n;
    if (proj.norm() < 1e-6) {
      g = Eigen::Vector3d(0, 0, 1);
      proj = g - g.dot(n) * n;
    }
    proj.normalize();
    std::complex<double> u(proj.dot(e1), proj.dot(e2));
    phase2[f] = u * u;
  }

  TeichmullerResult res;
  res.map = harmonic_map(open_mesh, bc);
  res.mu = beltrami_coefficient(open_mesh, res.map);
  double accepted_std = res.mu.std_abs();
  res.std_history.push_back(accepted_std);

  PlanarMap current = res.map;
  for (int it = 0; it < max_iter; ++it) {
    if (accepted_std <= tol) {
      res.converged = true;
      break;
    }
    BeltramiField cur_mu = beltrami_coefficient(open_mesh, current);
    double k = cur_mu.mean_abs();
    // project: uniform magnitude k, phase smoothed once over face adjacency
    std::vector<std::complex<double>> unit(nf);
    for (int f = 0; f < nf; ++f) {
      double a = std::abs(cur_mu.mu[f]);
      unit[f] = (a < 1e-12) ? 0.0 : cur_mu.mu[f] / a * std::conj(phase2[f]);
    }
    BeltramiField target;
    target.mu.resize(nf);
    for (int f = 0; f < nf; ++f) {
      if (unit[f] == std::complex<double>(0.0)) {
        target.mu[f] = 0.0;  // near-conformal faces stay conformal
        continue;
      }
      std::complex<double> avg = unit[f];
      for (int g : adjacent[f]) avg += unit[g];
      double an = std::abs(avg);
      target.mu[f] = (an < 1e-12) ? 0.0 : k * avg / an * phase2[f];
    }
    target.k = k;

    current = linear_beltrami_solver(open_mesh, target, bc);
    BeltramiField new_mu = beltrami_coefficient(open_mesh, current);
    double new_std = new_mu.std_abs();
    ++res.iterations;
    if (new_std <= accepted_std && count_flipped(open_mesh, current) == 0) {
      accepted_std = new_std;
      res.std_history.push_back(new_std);
      res.map = current;
      res.mu = new_mu;
    }
  }
  if (accepted_std <= tol) res.converged = true;
  res.mu.k = res.mu.mean_abs();
  res.report = distortion_report(open_mesh, res.map);
  if (res.report.flipped_faces > 0)
    throw FlattenError("flipped faces in final map");
  return res;
}

DistortionReport distortion_report(const TriMesh& open_mesh, const PlanarMap& map) {
  DistortionReport rep;
  rep.conformal_factor.reserve(open_mesh.n_faces());
  double angle_sum = 0.0;
  int angle_count = 0;
  for (int f = 0; f < open_mesh.n_faces(); ++f) {
    double src_area = face_area(open_mesh, f);
    double uv_area = signed_uv_area(open_mesh, map, f);
    rep.conformal_factor.push_back(uv_area / src_area);
    if (uv_area <= 0.0) ++rep.flipped_faces;

    auto frame = local_frame(open_mesh, f);
    const auto& t = open_mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      auto ang = [](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
        return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
      };
      int i = k, j = (k + 1) % 3, l = (k + 2) % 3;
      double src = ang(frame[j] - frame[i], frame[l] - frame[i]);
      double dst = ang(map.uv[t[j]] - map.uv[t[i]], map.uv[t[l]] - map.uv[t[i]]);
      double d = std::abs(dst - src);
      angle_sum += d;
      rep.angle_distortion_max = std::max(rep.angle_distortion_max, d);
      ++angle_count;
    }
  }
  auto mu = beltrami_coefficient(open_mesh, map);
  rep.mu_mean = mu.mean_abs();
  rep.mu_std = mu.std_abs();
  rep.mu_max = mu.max_abs();
  rep.angle_distortion_mean = angle_count ? angle_sum / angle_count : 0.0;
  return rep;
}

void save_planar_map(const PlanarMap& map, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FlattenError("cannot write planar map: " + path);
  out.precision(17);
  out << "vertex,u,v\n";
  for (size_t i = 0; i < map.uv.size(); ++i)
    out << i << "," << map.uv[i].x() << "," << map.uv[i].y() << "\n";
}

void save_beltrami(const BeltramiField& mu, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FlattenError("cannot write Beltrami field: " + path);
  out.precision(17);
  out << "face,mu_re,mu_im\n";
  for (size_t f = 0; f < mu.mu.size(); ++f)
    out << f << "," << mu.mu[f].real() << "," << mu.mu[f].imag() << "\n";
}

void save_distortion_report(const DistortionReport& rep, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FlattenError("cannot write distortion report: " + path);
  out.precision(17);
  double lmin = 0, lmax = 0, lmean = 0;
  if (!rep.conformal_factor.empty()) {
    lmin = *std::min_element(rep.conformal_factor.begin(), rep.conformal_factor.end());
    lmax = *std::max_element(rep.conformal_factor.begin(), rep.conformal_factor.end());
    for (double v : rep.conformal_factor) lmean += v;
    lmean /= rep.conformal_factor.size();
  }
  out << "lambda_min=" << lmin << "\n"
      << "lambda_max=" << lmax << "\n"
      << "lambda_mean=" << lmean << "\n"
      << "angle_distortion_mean=" << rep.angle_distortion_mean << "\n"
      << "angle_distortion_max=" << rep.angle_distortion_max << "\n"
      << "mu_mean=" << rep.mu_mean << "\n"
      << "mu_std=" << rep.mu_std << "\n"
      << "mu_max=" << rep.mu_max << "\n"
      << "flipped_faces=" << rep.flipped_faces << "\n";
}

}  // namespace neoprint
