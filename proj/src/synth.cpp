#include "neoprint/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "neoprint/raster.hpp"
#include "neoprint/rng.hpp"

namespace neoprint {

namespace {

void validate_scan_spec(const ScanSpec& scan) {
  if (scan.jitter < 0) throw SynthError("scan spec: jitter must be >= 0");
  if (scan.develop_scale <= 0) throw SynthError("scan spec: develop scale must be > 0");
  if (scan.feature_noise < 0) throw SynthError("scan spec: feature noise must be >= 0");
}

std::vector<std::vector<int>> vertex_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.n_vertices());
  for (const auto& f : mesh.faces)
    for (int e = 0; e < 3; ++e) {
      adj[f[e]].push_back(f[(e + 1) % 3]);
      adj[f[e]].push_back(f[(e + 2) % 3]);
    }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

// standardized (zero mean, unit variance) smooth random field: white
// gaussian noise relaxed by repeated neighbor averaging
std::vector<double> smooth_field(const TriMesh& mesh, uint64_t seed, int passes = 12) {
  Rng rng(seed);
  std::vector<double> x(mesh.n_vertices());
  for (auto& v : x) v = rng.gaussian();
  auto adj = vertex_adjacency(mesh);
  std::vector<double> next(x.size());
  for (int p = 0; p < passes; ++p) {
    for (size_t i = 0; i < x.size(); ++i) {
      double acc = 0;
      for (int j : adj[i]) acc += x[j];
      next[i] = 0.5 * x[i] + 0.5 * acc / double(adj[i].size());
    }
    x.swap(next);
  }
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= double(x.size());
  double s = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
  for (auto& v : x) v = (v - mean) * s;
  return x;
}

std::vector<double> thickness_field(const TriMesh& mesh, uint64_t seed) {
  auto field = smooth_field(mesh, seed);
  for (auto& v : field) v = 2.5 + 0.5 * v;  // plausible cortical range, mm
  return field;
}

void compute_geometry_features(TriMesh& mesh) {
  mesh.features["curvature"] = mean_curvature(mesh);
  mesh.features["sulc"] = inflate_surface(mesh, 30, 0.1).depth;
}

TriMesh generate_hemisphere(const IdentitySpec& spec, const std::string& side) {
  if (spec.n_bumps < 0) throw SynthError("identity spec: bump count must be >= 0");
  if (spec.amp_min > spec.amp_max || spec.width_min > spec.width_max ||
      spec.width_min <= 0)
    throw SynthError("identity spec: invalid bump amplitude/width range");

  TriMesh mesh = make_icosphere(spec.icosphere_level);
  Rng rng(subseed(spec.subject_seed, "bumps." + side));
  Eigen::Vector3d axis = spec.bump_axis.normalized();

  std::vector<Eigen::Vector3d> centers;
  std::vector<double> amps, widths;
  for (int b = 0; b < spec.n_bumps; ++b) {
    Eigen::Vector3d c;
    do {
      c = Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
    } while (c.norm() < 1e-6 ||
             std::acos(std::clamp(c.normalized().dot(axis), -1.0, 1.0)) > spec.bump_cone);
    centers.push_back(c.normalized());
    amps.push_back(rng.uniform(spec.amp_min, spec.amp_max));
    widths.push_back(rng.uniform(spec.width_min, spec.width_max));
  }

  for (auto& v : mesh.vertices) {
    Eigen::Vector3d dir = v.normalized();
    double r = 1.0;
    for (size_t b = 0; b < centers.size(); ++b) {
      double theta = std::acos(std::clamp(dir.dot(centers[b]), -1.0, 1.0));
      r += amps[b] * std::exp(-0.5 * theta * theta / (widths[b] * widths[b]));
    }
    v = dir * r;
  }

  compute_geometry_features(mesh);
  mesh.features["thickness"] =
      thickness_field(mesh, subseed(spec.thickness_seed, "thickness." + side));
  return mesh;
}

void perturb_scan(TriMesh& mesh, const IdentitySpec& spec, const ScanSpec& scan,
                  uint64_t seed, const std::string& side) {
  for (auto& v : mesh.vertices) v *= scan.develop_scale;
  if (scan.jitter > 0) {
    double amp = scan.jitter * 0.5 * (spec.amp_min + spec.amp_max) * scan.develop_scale;
    auto field = smooth_field(mesh, subseed(seed, side + ".jitter"));
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
      mesh.vertices[i] += mesh.vertices[i].normalized() * (amp * field[i]);
  }
  compute_geometry_features(mesh);
  // thickness is redrawn per scan: by construction it carries no identity
  mesh.features["thickness"] =
      thickness_field(mesh, subseed(seed, side + ".thickness"));
  if (scan.feature_noise > 0) {
    for (const auto& name : feature_channels()) {
      auto& f = mesh.features.at(name);
      double mean = 0, var = 0;
      for (double v : f) mean += v;
      mean /= double(f.size());
      for (double v : f) var += (v - mean) * (v - mean);
      double sd = std::sqrt(var / double(f.size()));
      Rng rng(subseed(seed, side + ".noise." + name));
      for (auto& v : f) v += scan.feature_noise * sd * rng.gaussian();
    }
  }
}

std::string scan_stem(const std::string& subject_id, int scan_index,
                      const std::string& side) {
  return subject_id + "_t" + std::to_string(scan_index) + "_" + side;
}

struct SubjectSeeds {
  IdentitySpec identity;
  uint64_t scan_seed(int index) const {
    return subseed(identity.subject_seed, "scan" + std::to_string(index));
  }
};

SubjectSeeds subject_spec(const CohortSpec& spec, uint64_t master_seed,
                          const std::string& subject_id) {
  SubjectSeeds s{spec.identity};
  s.identity.subject_seed = subseed(master_seed, "subject." + subject_id);
  s.identity.thickness_seed = subseed(master_seed, "thickness." + subject_id);
  return s;
}

template <typename Fn>
void for_each_scan(const CohortSpec& spec, uint64_t master_seed, Fn&& fn) {
  if (spec.n_singles < 0 || spec.n_pairs < 0 || spec.n_singles + spec.n_pairs < 3)
    throw SynthError("cohort spec: need at least 3 subjects");
  char buf[16];
  for (int i = 0; i < spec.n_singles; ++i) {
    std::snprintf(buf, sizeof buf, "s%03d", i);
    SubjectSeeds s = subject_spec(spec, master_seed, buf);
    HemiPair ind = generate_individual(s.identity);
    fn(std::string(buf), 0, generate_scan(ind, s.identity, spec.scan0, s.scan_seed(0)));
  }
  for (int i = 0; i < spec.n_pairs; ++i) {
    std::snprintf(buf, sizeof buf, "p%03d", i);
    SubjectSeeds s = subject_spec(spec, master_seed, buf);
    HemiPair ind = generate_individual(s.identity);
    fn(std::string(buf), 0, generate_scan(ind, s.identity, spec.scan0, s.scan_seed(0)));
    fn(std::string(buf), 1, generate_scan(ind, s.identity, spec.scan1, s.scan_seed(1)));
  }
}

double partition_distance(const PartitionSet& a, const PartitionSet& b) {
  double acc = 0;
  for (int p = 0; p < 4; ++p) {
    const auto& x = a.images[p].data;
    const auto& y = b.images[p].data;
    if (x.size() != y.size())
      throw SynthError("raster_separability: image sizes differ");
    for (size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  }
  return std::sqrt(acc);
}

}  // namespace

HemiPair generate_individual(const IdentitySpec& spec) {
  return {generate_hemisphere(spec, "left"), generate_hemisphere(spec, "right")};
}

HemiPair generate_scan(const HemiPair& individual, const IdentitySpec& spec,
                       const ScanSpec& scan, uint64_t scan_seed) {
  validate_scan_spec(scan);
  HemiPair out = individual;
  perturb_scan(out.left, spec, scan, scan_seed, "left");
  perturb_scan(out.right, spec, scan, scan_seed, "right");
  return out;
}

CohortManifest generate_cohort(const CohortSpec& spec, uint64_t master_seed,
                               const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw SynthError("generate_cohort: cannot create " + out_dir);

  CohortManifest manifest;
  for_each_scan(spec, master_seed,
                [&](const std::string& id, int index, const HemiPair& scan) {
                  for (int side = 0; side < 2; ++side) {
                    const TriMesh& mesh = side == 0 ? scan.left : scan.right;
                    std::string name = side == 0 ? "left" : "right";
                    std::string stem = scan_stem(id, index, name);
                    save_mesh(mesh, out_dir + "/" + stem + ".obj");
                    save_features(mesh, out_dir + "/" + stem + ".csv");
                    manifest.rows.push_back(
                        {id, index, name, stem + ".obj", stem + ".csv"});
                  }
                });

  std::string text = "subject_id,scan_index,side,mesh_path,feature_path\n";
  for (const auto& r : manifest.rows)
    text += r.subject_id + "," + std::to_string(r.scan_index) + "," + r.side + "," +
            r.mesh_path + "," + r.feature_path + "\n";
  std::ofstream out(out_dir + "/manifest.csv", std::ios::binary);
  if (!out) throw SynthError("generate_cohort: cannot write manifest");
  out << text;

  // chain the written file bytes into the hash so it is a pure function of
  // every seed and spec, not just of the (seed-independent) path layout
  manifest.hash = fnv1a(text);
  for (const auto& r : manifest.rows)
    for (const std::string& p : {r.mesh_path, r.feature_path}) {
      std::ifstream f(out_dir + "/" + p, std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
      manifest.hash = fnv1a(bytes, manifest.hash);
    }
  return manifest;
}

Cohort build_cohort(const CohortSpec& spec, uint64_t master_seed, int H, int W) {
  Cohort cohort;
  cohort.pairs.resize(spec.n_pairs);
  for_each_scan(spec, master_seed,
                [&](const std::string& id, int index, const HemiPair& scan) {
                  Scan s{id, index, rasterize_scan(scan, H, W)};
                  if (id[0] == 's')
                    cohort.singles.push_back(std::move(s));
                  else
                    cohort.pairs[std::stoi(id.substr(1))][index] = std::move(s);
                });
  return cohort;
}

PartitionSet rasterize_scan(const HemiPair& scan, int H, int W) {
  return build_partitions(scan.left, scan.right, H, W);
}

SeparabilityReport raster_separability(const Cohort& cohort) {
  const auto& pairs = cohort.pairs;
  if (pairs.size() < 2)
    throw SynthError("raster_separability: need at least 2 two-scan subjects");
  SeparabilityReport rep;
  for (const auto& pr : pairs)
    rep.within_mean += partition_distance(pr[0].partitions, pr[1].partitions);
  rep.within_mean /= double(pairs.size());
  int n = 0;
  for (size_t i = 0; i < pairs.size(); ++i)
    for (size_t j = i + 1; j < pairs.size(); ++j) {
      rep.between_mean +=
          partition_distance(pairs[i][0].partitions, pairs[j][1].partitions);
      ++n;
    }
  rep.between_mean /= double(n);
  return rep;
}

}  // namespace neoprint
