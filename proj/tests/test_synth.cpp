#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "neoprint/synth.hpp"

using namespace neoprint;

namespace {

IdentitySpec quick_spec(uint64_t seed) {
  IdentitySpec spec;
  spec.subject_seed = seed;
  spec.thickness_seed = seed + 1;
  spec.icosphere_level = 3;  // 642 vertices, plenty for unit checks
  return spec;
}

bool same_mesh(const TriMesh& a, const TriMesh& b) {
  if (a.vertices.size() != b.vertices.size()) return false;
  for (size_t i = 0; i < a.vertices.size(); ++i)
    if (a.vertices[i] != b.vertices[i]) return false;
  return a.features == b.features;
}

}  // namespace

TEST_CASE("generate_individual: deterministic, identity in the seed") {
  auto spec = quick_spec(10);
  HemiPair a = generate_individual(spec);
  HemiPair b = generate_individual(spec);
  CHECK(same_mesh(a.left, b.left));
  CHECK(same_mesh(a.right, b.right));

  auto other = quick_spec(11);
  HemiPair c = generate_individual(other);
  double max_disp = 0;
  for (size_t i = 0; i < a.left.vertices.size(); ++i)
    max_disp = std::max(max_disp, (a.left.vertices[i] - c.left.vertices[i]).norm());
  CHECK(max_disp > 0.0);

  // left and right hemispheres are distinct surfaces
  double lr = 0;
  for (size_t i = 0; i < a.left.vertices.size(); ++i)
    lr = std::max(lr, (a.left.vertices[i] - a.right.vertices[i]).norm());
  CHECK(lr > 0.0);
}

TEST_CASE("generate_individual: default resolution and topology") {
  auto spec = quick_spec(20);
  spec.icosphere_level = 4;
  HemiPair hp = generate_individual(spec);
  CHECK(hp.left.n_vertices() == 2562);
  CHECK(hp.left.n_faces() == 5120);
  validate_mesh(hp.left);
  validate_mesh(hp.right);
  for (const TriMesh* m : {&hp.left, &hp.right}) {
    auto top = mesh_topology(*m);
    CHECK(top.is_closed);
    CHECK(top.genus == 0);
    for (const auto& name : {"thickness", "curvature", "sulc"})
      CHECK(m->feature(name).size() == size_t(m->n_vertices()));
  }
}

TEST_CASE("generate_individual: zero bumps degenerate to a sphere") {
  auto spec = quick_spec(30);
  spec.n_bumps = 0;
  HemiPair hp = generate_individual(spec);
  for (const auto& v : hp.left.vertices) CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
  const auto& curv = hp.left.feature("curvature");
  double lo = curv[0], hi = curv[0];
  for (double v : curv) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo < 0.05 * std::abs(hi));  // approximately constant curvature
}

TEST_CASE("generate_scan: zero noise is pure development scaling") {
  auto spec = quick_spec(40);
  HemiPair ind = generate_individual(spec);

  ScanSpec quiet{0.0, 1.25, 0.0};
  HemiPair scan = generate_scan(ind, spec, quiet, 5);
  for (size_t i = 0; i < ind.left.vertices.size(); ++i) {
    Eigen::Vector3d expected = 1.25 * ind.left.vertices[i];
    CHECK((scan.left.vertices[i] - expected).norm() == 0.0);
  }

  // at scale 1 the recomputed geometry features are bit-identical; the
  // thickness field is redrawn per scan by design
  ScanSpec unit{0.0, 1.0, 0.0};
  HemiPair same = generate_scan(ind, spec, unit, 5);
  CHECK(same.left.feature("curvature") == ind.left.feature("curvature"));
  CHECK(same.left.feature("sulc") == ind.left.feature("sulc"));
  CHECK(same.left.feature("thickness") != ind.left.feature("thickness"));
}

TEST_CASE("generate_scan: seed determinism and spec validation") {
  auto spec = quick_spec(50);
  HemiPair ind = generate_individual(spec);
  ScanSpec sc;
  HemiPair a = generate_scan(ind, spec, sc, 7);
  HemiPair b = generate_scan(ind, spec, sc, 7);
  CHECK(same_mesh(a.left, b.left));
  HemiPair c = generate_scan(ind, spec, sc, 8);
  CHECK(!same_mesh(a.left, c.left));

  CHECK_THROWS_AS(generate_scan(ind, spec, ScanSpec{-0.1, 1.0, 0.0}, 1), SynthError);
  CHECK_THROWS_AS(generate_scan(ind, spec, ScanSpec{0.0, 0.0, 0.0}, 1), SynthError);
  CHECK_THROWS_AS(generate_scan(ind, spec, ScanSpec{0.0, 1.0, -1.0}, 1), SynthError);
}

TEST_CASE("generate_cohort: files, manifest, reproducible hash") {
  namespace fs = std::filesystem;
  CohortSpec cs;
  cs.n_singles = 1;
  cs.n_pairs = 2;
  cs.identity = quick_spec(0);
  std::string dir = (fs::temp_directory_path() / "neoprint_cohort_test").string();
  fs::remove_all(dir);

  CohortManifest m = generate_cohort(cs, 123, dir);
  // 1 single scan + 2*2 pair scans, two hemispheres each
  REQUIRE(m.rows.size() == 10);
  for (const auto& r : m.rows) {
    CHECK(fs::exists(dir + "/" + r.mesh_path));
    CHECK(fs::exists(dir + "/" + r.feature_path));
    CHECK((r.side == "left" || r.side == "right"));
  }
  std::ifstream in(dir + "/manifest.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "subject_id,scan_index,side,mesh_path,feature_path");

  // a written mesh loads back with all three feature channels
  TriMesh loaded = load_mesh(dir + "/" + m.rows[0].mesh_path,
                             dir + "/" + m.rows[0].feature_path);
  CHECK(loaded.n_vertices() == 642);
  for (const auto& name : {"thickness", "curvature", "sulc"})
    CHECK(loaded.has_feature(name));

  CohortManifest m2 = generate_cohort(cs, 123, dir);
  CHECK(m.hash == m2.hash);
  CohortManifest m3 = generate_cohort(cs, 124, dir);
  CHECK(m.hash != m3.hash);
  fs::remove_all(dir);

  CohortSpec tiny = cs;
  tiny.n_singles = 1;
  tiny.n_pairs = 1;
  CHECK_THROWS_AS(generate_cohort(tiny, 1, dir), SynthError);
}

TEST_CASE("build_cohort: structure and determinism") {
  CohortSpec cs;
  cs.n_singles = 2;
  cs.n_pairs = 2;
  cs.identity = quick_spec(0);
  Cohort c = build_cohort(cs, 55, 32, 32);
  REQUIRE(c.singles.size() == 2);
  REQUIRE(c.pairs.size() == 2);
  CHECK(c.singles[0].subject_id == "s000");
  CHECK(c.pairs[1][0].subject_id == "p001");
  CHECK(c.pairs[1][0].scan_index == 0);
  CHECK(c.pairs[1][1].scan_index == 1);
  for (int p = 0; p < 4; ++p) {
    CHECK(c.singles[0].partitions.images[p].H == 32);
    CHECK(c.singles[0].partitions.images[p].coverage() > 0.9);
  }

  Cohort c2 = build_cohort(cs, 55, 32, 32);
  for (int p = 0; p < 4; ++p)
    CHECK(c.pairs[0][1].partitions.images[p].data == c2.pairs[0][1].partitions.images[p].data);
}

TEST_CASE("raster_separability: within-subject beats between-subject") {
  CohortSpec cs;
  cs.n_singles = 0;
  cs.n_pairs = 6;
  cs.identity = quick_spec(0);
  cs.scan1.develop_scale = 1.05;
  Cohort c = build_cohort(cs, 77, 48, 48);
  auto rep = raster_separability(c);
  CHECK(rep.within_mean > 0.0);
  CHECK(rep.within_mean < rep.between_mean);

  Cohort small;
  small.pairs.push_back(c.pairs[0]);
  CHECK_THROWS_AS(raster_separability(small), SynthError);
}
