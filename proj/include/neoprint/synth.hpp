#pragma once

#include <string>
#include <vector>

#include "neoprint/mesh.hpp"
#include "neoprint/train.hpp"

namespace neoprint {

struct SynthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A subject's base anatomy. Identity lives in the placement of the folding
// bumps; the thickness field is deliberately independent of identity (it is
// redrawn per scan), so the channel-contribution ordering is a designed
// property of the generator rather than an empirical accident.
struct IdentitySpec {
  uint64_t subject_seed = 0;
  int n_bumps = 12;
  double amp_min = 0.05, amp_max = 0.10;    // bump amplitude, radius fraction
  double width_min = 0.18, width_max = 0.35;  // angular bump width, radians
  uint64_t thickness_seed = 0;
  int icosphere_level = 4;  // 2562 vertices per hemisphere
  // bumps are drawn within this cone; the default concentrates identity on the
  // lateral (+x) side of each hemisphere so the four flattened partitions are
  // deliberately unequal in information content, giving the fusion stage a
  // designed reason to weight them differently
  Eigen::Vector3d bump_axis = Eigen::Vector3d(1, 0, 0);
  double bump_cone = 1.7;
};

struct ScanSpec {
  double jitter = 0.09;        // radial jitter, fraction of mean bump amplitude
  double develop_scale = 1.0;  // uniform radial growth between timepoints
  double feature_noise = 0.035;  // additive sigma, units of per-channel std
};

struct HemiPair {
  TriMesh left, right;
};

// Folded spheres with thickness/curvature/sulc vertex features.
HemiPair generate_individual(const IdentitySpec& spec);

// Development scaling + smooth radial jitter + feature noise; curvature and
// sulc are recomputed on the perturbed geometry, thickness is redrawn.
HemiPair generate_scan(const HemiPair& individual, const IdentitySpec& spec,
                       const ScanSpec& scan, uint64_t scan_seed);

struct CohortSpec {
  int n_singles = 60;
  int n_pairs = 30;
  IdentitySpec identity;  // template; per-subject seeds are derived
  ScanSpec scan0, scan1;  // first and second timepoint
};

struct ManifestRow {
  std::string subject_id;
  int scan_index = 0;
  std::string side, mesh_path, feature_path;
};

struct CohortManifest {
  std::vector<ManifestRow> rows;
  uint64_t hash = 0;  // FNV-1a over the manifest text
};

// Writes OBJ meshes + feature sidecars + manifest.csv under out_dir.
CohortManifest generate_cohort(const CohortSpec& spec, uint64_t master_seed,
                               const std::string& out_dir);

// In-memory pipeline: generate every scan and rasterize its partitions.
Cohort build_cohort(const CohortSpec& spec, uint64_t master_seed, int H = 224,
                    int W = 224);

// One scan end-to-end (shared by build_cohort and the CLI).
PartitionSet rasterize_scan(const HemiPair& scan, int H = 224, int W = 224);

struct SeparabilityReport {
  double within_mean = 0;   // mean raster distance between a subject's scans
  double between_mean = 0;  // mean cross-subject raster distance
};

// Raw-feature identity separability over the two-scan subjects.
SeparabilityReport raster_separability(const Cohort& cohort);

}  // namespace neoprint
