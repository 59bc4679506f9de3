#include "neoprint/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace neoprint {

const std::vector<double>& TriMesh::feature(const std::string& name) const {
  auto it = features.find(name);
  if (it == features.end()) throw MeshError("missing feature channel: " + name);
  return it->second;
}

void validate_mesh(const TriMesh& mesh) {
  const int nv = mesh.n_vertices();
  if (mesh.faces.empty()) throw MeshError("mesh has no faces");
  double total_area = 0.0;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      if (f[k] < 0 || f[k] >= nv)
        throw MeshError("face index out of range: " + std::to_string(f[k]));
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw MeshError("face repeats a vertex");
  }
  for (int i = 0; i < mesh.n_faces(); ++i) total_area += face_area(mesh, i);
  const double mean_area = total_area / mesh.n_faces();
  for (int i = 0; i < mesh.n_faces(); ++i) {
    if (face_area(mesh, i) <= 1e-12 * mean_area)
      throw MeshError("zero-area face " + std::to_string(i));
  }
  // manifoldness first (an edge on >2 faces necessarily repeats a direction),
  // then orientation: every interior edge appears exactly once per direction
  std::map<std::pair<int, int>, int> undirected;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++undirected[{a, b}];
    }
  }
  for (const auto& [e, count] : undirected) {
    if (count > 2)
      throw MeshError("non-manifold edge (" + std::to_string(e.first) + "," +
                      std::to_string(e.second) + ") shared by " +
                      std::to_string(count) + " faces");
  }
  std::map<std::pair<int, int>, int> directed;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      auto e = std::make_pair(f[k], f[(k + 1) % 3]);
      if (++directed[e] > 1)
        throw MeshError("inconsistent orientation: directed edge repeated");
    }
  }
  for (const auto& [name, vals] : mesh.features) {
    if (static_cast<int>(vals.size()) != nv)
      throw MeshError("feature/vertex count mismatch for channel " + name);
  }
}

TriMesh load_mesh(const std::string& path,
                  const std::optional<std::string>& feature_path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  TriMesh mesh;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z))
        throw MeshError("parse failure at line " + std::to_string(lineno));
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // accept "i", "i/...", "i//..."
        size_t slash = tok.find('/');
        idx.push_back(std::stoi(tok.substr(0, slash)));
      }
      if (idx.size() != 3)
        throw MeshError("non-triangular face at line " + std::to_string(lineno));
      mesh.faces.push_back({idx[0] - 1, idx[1] - 1, idx[2] - 1});
    }
    // other OBJ directives (vn, vt, ...) are ignored
  }
  if (feature_path) {
    std::ifstream fin(*feature_path);
    if (!fin) throw MeshError("cannot open feature file: " + *feature_path);
    std::string header;
    if (!std::getline(fin, header)) throw MeshError("empty feature file");
    std::vector<std::string> cols;
    {
      std::istringstream hs(header);
      std::string c;
      while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    if (cols.empty() || cols[0] != "vertex")
      throw MeshError("feature header must start with 'vertex'");
    std::vector<std::vector<double>> data(cols.size() - 1);
    while (std::getline(fin, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string cell;
      int c = 0;
      while (std::getline(ls, cell, ',')) {
        if (c > 0) {
          if (c - 1 >= static_cast<int>(data.size()))
            throw MeshError("feature row has too many columns");
          data[c - 1].push_back(std::stod(cell));
        }
        ++c;
      }
    }
    for (size_t i = 0; i < data.size(); ++i) {
      if (static_cast<int>(data[i].size()) != mesh.n_vertices())
        throw MeshError("feature/vertex count mismatch for channel " + cols[i + 1]);
      mesh.features[cols[i + 1]] = std::move(data[i]);
    }
  }
  validate_mesh(mesh);
  return mesh;
}

void save_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write mesh file: " + path);
  out.precision(17);
  for (const auto& v : mesh.vertices)
    out << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

void save_features(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot write feature file: " + path);
  out.precision(17);
  out << "vertex,thickness,curvature,sulc\n";
  const auto& t = mesh.feature("thickness");
  const auto& c = mesh.feature("curvature");
  const auto& s = mesh.feature("sulc");
  for (int i = 0; i < mesh.n_vertices(); ++i)
    out << i << "," << t[i] << "," << c[i] << "," << s[i] << "\n";
}

namespace {

// undirected edge set and manifoldness check
std::map<std::pair<int, int>, int> undirected_edge_counts(const TriMesh& mesh) {
  std::map<std::pair<int, int>, int> edges;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edges[{a, b}];
    }
  }
  return edges;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

}  // namespace

TopologyReport mesh_topology(const TriMesh& mesh) {
  validate_mesh(mesh);
  auto edges = undirected_edge_counts(mesh);
  for (const auto& [e, count] : edges) {
    if (count > 2)
      throw MeshError("non-manifold edge (" + std::to_string(e.first) + "," +
                      std::to_string(e.second) + ") shared by " +
                      std::to_string(count) + " faces");
  }
  TopologyReport rep;
  const int V = mesh.n_vertices();
  const int E = static_cast<int>(edges.size());
  const int F = mesh.n_faces();
  rep.euler_characteristic = V - E + F;

  // boundary half-edges: directed edges whose reverse is absent
  std::map<int, int> boundary_next;  // vertex -> next vertex along boundary
  std::set<std::pair<int, int>> directed;
  for (const auto& f : mesh.faces)
    for (int k = 0; k < 3; ++k) directed.insert({f[k], f[(k + 1) % 3]});
  int n_boundary_edges = 0;
  for (const auto& [a, b] : directed) {
    if (!directed.count({b, a})) {
      boundary_next[a] = b;
      ++n_boundary_edges;
    }
  }
  rep.is_closed = (n_boundary_edges == 0);
  // count loops by traversal
  std::set<int> visited;
  int loops = 0;
  for (const auto& [start, next] : boundary_next) {
    if (visited.count(start)) continue;
    int v = start;
    while (!visited.count(v)) {
      visited.insert(v);
      v = boundary_next.at(v);
    }
    ++loops;
  }
  rep.n_boundary_loops = loops;

  UnionFind uf(V);
  for (const auto& f : mesh.faces) {
    uf.unite(f[0], f[1]);
    uf.unite(f[1], f[2]);
  }
  std::set<int> roots;
  for (int v = 0; v < V; ++v) roots.insert(uf.find(v));
  rep.n_components = static_cast<int>(roots.size());
  rep.genus = rep.is_closed ? (2 * rep.n_components - rep.euler_characteristic) / 2 : -1;
  return rep;
}

double face_area(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  return 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                   .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                   .norm();
}

Eigen::Vector3d face_normal(const TriMesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  Eigen::Vector3d n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                          .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
  double len = n.norm();
  return len > 0 ? Eigen::Vector3d(n / len) : Eigen::Vector3d::Zero();
}

std::vector<Eigen::Vector3d> vertex_normals(const TriMesh& mesh) {
  std::vector<Eigen::Vector3d> normals(mesh.n_vertices(), Eigen::Vector3d::Zero());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const auto& t = mesh.faces[f];
    Eigen::Vector3d n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                            .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    for (int k = 0; k < 3; ++k) normals[t[k]] += n;  // area weighting
  }
  for (auto& n : normals) {
    double len = n.norm();
    if (len > 0) n /= len;
  }
  return normals;
}

std::vector<double> vertex_areas(const TriMesh& mesh) {
  std::vector<double> areas(mesh.n_vertices(), 0.0);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    double a = face_area(mesh, f) / 3.0;
    for (int k = 0; k < 3; ++k) areas[mesh.faces[f][k]] += a;
  }
  return areas;
}

namespace {

// Mixed Voronoi vertex areas (Meyer et al. style): Voronoi cell area for
// non-obtuse triangles, area/2 at the obtuse corner and area/4 elsewhere.
// Far more accurate than barycentric areas at irregular-valence vertices.
std::vector<double> mixed_voronoi_areas(const TriMesh& mesh) {
  std::vector<double> areas(mesh.n_vertices(), 0.0);
  for (const auto& f : mesh.faces) {
    const Eigen::Vector3d p[3] = {mesh.vertices[f[0]], mesh.vertices[f[1]],
                                  mesh.vertices[f[2]]};
    double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
    double cot[3];
    bool obtuse = false;
    int obtuse_at = -1;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d a = p[(k + 1) % 3] - p[k], b = p[(k + 2) % 3] - p[k];
      double cosv = a.dot(b);
      double sinv = a.cross(b).norm();
      cot[k] = sinv > 0 ? cosv / sinv : 0.0;
      if (cosv < 0) {
        obtuse = true;
        obtuse_at = k;
      }
    }
    if (!obtuse) {
      for (int k = 0; k < 3; ++k) {
        double l1 = (p[(k + 1) % 3] - p[k]).squaredNorm();
        double l2 = (p[(k + 2) % 3] - p[k]).squaredNorm();
        areas[f[k]] += (l1 * cot[(k + 2) % 3] + l2 * cot[(k + 1) % 3]) / 8.0;
      }
    } else {
      for (int k = 0; k < 3; ++k)
        areas[f[k]] += (k == obtuse_at) ? area / 2.0 : area / 4.0;
    }
  }
  return areas;
}

}  // namespace

Eigen::SparseMatrix<double> cotangent_laplacian(const TriMesh& mesh) {
  const int nv = mesh.n_vertices();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.n_faces() * 12);
  constexpr double kMinAngle = 1.0 * M_PI / 180.0;
  constexpr double kMaxAngle = 179.0 * M_PI / 180.0;
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const int i = f[k], j = f[(k + 1) % 3], o = f[(k + 2) % 3];
      // angle at o, opposite edge (i, j)
      Eigen::Vector3d a = mesh.vertices[i] - mesh.vertices[o];
      Eigen::Vector3d b = mesh.vertices[j] - mesh.vertices[o];
      double cosang = a.dot(b) / (a.norm() * b.norm());
      double ang = std::acos(std::clamp(cosang, -1.0, 1.0));
      ang = std::clamp(ang, kMinAngle, kMaxAngle);
      double w = 0.5 / std::tan(ang);
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  }
  Eigen::SparseMatrix<double> L(nv, nv);
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

std::vector<double> mean_curvature(const TriMesh& mesh) {
  const int nv = mesh.n_vertices();
  auto L = cotangent_laplacian(mesh);
  Eigen::MatrixXd X(nv, 3);
  for (int i = 0; i < nv; ++i) X.row(i) = mesh.vertices[i].transpose();
  Eigen::MatrixXd LX = L * X;
  auto areas = mixed_voronoi_areas(mesh);
  auto normals = vertex_normals(mesh);

  // boundary vertices get 0
  std::set<int> boundary;
  {
    std::set<std::pair<int, int>> directed;
    for (const auto& f : mesh.faces)
      for (int k = 0; k < 3; ++k) directed.insert({f[k], f[(k + 1) % 3]});
    for (const auto& [a, b] : directed)
      if (!directed.count({b, a})) {
        boundary.insert(a);
        boundary.insert(b);
      }
  }

  std::vector<double> H(nv, 0.0);
  for (int i = 0; i < nv; ++i) {
    if (boundary.count(i)) continue;
    if (areas[i] <= 0.0) throw MeshError("zero vertex area at " + std::to_string(i));
    Eigen::Vector3d lv = LX.row(i).transpose();
    double mag = lv.norm() / (2.0 * areas[i]);
    double sign = lv.dot(normals[i]) >= 0 ? 1.0 : -1.0;
    H[i] = sign * mag;
  }
  return H;
}

InflateResult inflate_surface(const TriMesh& mesh, int n_iters, double step) {
  InflateResult result;
  result.mesh = mesh;
  result.depth.assign(mesh.n_vertices(), 0.0);
  if (n_iters == 0) return result;

  const int nv = mesh.n_vertices();
  std::vector<std::vector<int>> neighbors(nv);
  {
    std::set<std::pair<int, int>> seen;
    for (const auto& f : mesh.faces) {
      for (int k = 0; k < 3; ++k) {
        int a = f[k], b = f[(k + 1) % 3];
        if (seen.insert({a, b}).second) neighbors[a].push_back(b);
        if (seen.insert({b, a}).second) neighbors[b].push_back(a);
      }
    }
  }
  double area0 = 0.0;
  for (int f = 0; f < mesh.n_faces(); ++f) area0 += face_area(result.mesh, f);

  for (int it = 0; it < n_iters; ++it) {
    // Normal motion follows the mean-curvature normal, so a round sphere only
    // shrinks uniformly and the area renormalization below restores it
    // exactly. Tangential motion follows the uniform umbrella, relaxing edge
    // lengths without moving off the surface.
    auto L = cotangent_laplacian(result.mesh);
    Eigen::MatrixXd X(nv, 3);
    for (int i = 0; i < nv; ++i) X.row(i) = result.mesh.vertices[i].transpose();
    Eigen::MatrixXd LX = L * X;
    auto areas = mixed_voronoi_areas(result.mesh);

    double mean_sq_edge = 0.0;
    int n_edges = 0;
    for (const auto& f : result.mesh.faces) {
      for (int k = 0; k < 3; ++k) {
        int a = f[k], b = f[(k + 1) % 3];
        if (a < b) {
          mean_sq_edge +=
              (result.mesh.vertices[a] - result.mesh.vertices[b]).squaredNorm();
          ++n_edges;
        }
      }
    }
    mean_sq_edge /= n_edges;
    const double tau = step * mean_sq_edge / 2.0;
    const double max_disp = 0.5 * std::sqrt(mean_sq_edge);  // stability clamp

    auto normals = vertex_normals(result.mesh);
    std::vector<Eigen::Vector3d> old = result.mesh.vertices;
    for (int i = 0; i < nv; ++i) {
      Eigen::Vector3d umbrella = Eigen::Vector3d::Zero();
      for (int j : neighbors[i]) umbrella += old[j];
      umbrella = umbrella / static_cast<double>(neighbors[i].size()) - old[i];
      Eigen::Vector3d tangential = umbrella - umbrella.dot(normals[i]) * normals[i];
      Eigen::Vector3d disp =
          -tau * LX.row(i).transpose() / (2.0 * areas[i]) + step * tangential;
      double n = disp.norm();
      if (n > max_disp) disp *= max_disp / n;
      result.mesh.vertices[i] = old[i] + disp;
    }
    // renormalize total surface area about the centroid
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& v : result.mesh.vertices) centroid += v;
    centroid /= nv;
    double area = 0.0;
    for (int f = 0; f < mesh.n_faces(); ++f) area += face_area(result.mesh, f);
    double scale = std::sqrt(area0 / area);
    for (auto& v : result.mesh.vertices) v = centroid + scale * (v - centroid);
    for (int i = 0; i < nv; ++i)
      result.depth[i] += (result.mesh.vertices[i] - old[i]).dot(normals[i]);
  }
  return result;
}

TriMesh project_to_sphere(const TriMesh& mesh) {
  TriMesh out = mesh;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& v : out.vertices) centroid += v;
  centroid /= out.n_vertices();
  for (auto& v : out.vertices) {
    v -= centroid;
    double len = v.norm();
    if (len <= 0.0) throw MeshError("vertex coincides with centroid");
    v /= len;
  }
  for (int f = 0; f < out.n_faces(); ++f) {
    const auto& t = out.faces[f];
    Eigen::Vector3d c = (out.vertices[t[0]] + out.vertices[t[1]] + out.vertices[t[2]]) / 3.0;
    if (face_normal(out, f).dot(c) <= 0.0)
      throw MeshError("face " + std::to_string(f) +
                      " flipped during sphere projection; inflate the surface "
                      "further before projecting");
  }
  return out;
}

TriMesh make_icosphere(int level, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Eigen::Vector3d m = (verts[a] + verts[b]).normalized();
      verts.push_back(m);
      int idx = static_cast<int>(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }

  TriMesh mesh;
  mesh.vertices = std::move(verts);
  for (auto& v : mesh.vertices) v *= radius;
  mesh.faces = std::move(faces);
  return mesh;
}

}  // namespace neoprint
