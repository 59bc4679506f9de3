#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neoprint/flatten.hpp"
#include "neoprint/mesh.hpp"

namespace neoprint {

struct RasterError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// C x H x W raster of feature channels plus a coverage mask. data is
// row-major per channel; masked-out pixels hold 0.
struct FeatureImage {
  int C = 0, H = 0, W = 0;
  std::vector<double> data;   // C*H*W
  std::vector<uint8_t> mask;  // H*W, 0/1

  double& at(int c, int i, int j) { return data[(c * H + i) * W + j]; }
  double at(int c, int i, int j) const { return data[(c * H + i) * W + j]; }
  bool covered(int i, int j) const { return mask[i * W + j] != 0; }
  double coverage() const;
};

// Canonical channel order for rasterized morphological features.
inline const std::vector<std::string>& feature_channels() {
  static const std::vector<std::string> names = {"thickness", "curvature", "sulc"};
  return names;
}

// The four brain partitions, one flattened image each.
struct PartitionSet {
  // order: left-lateral, left-medial, right-lateral, right-medial
  std::array<FeatureImage, 4> images;

  static const std::array<std::string, 4>& labels();
};

struct AugmentPolicy {
  double rotate_min = -15.0, rotate_max = 15.0;  // degrees
  double noise_min = 0.01, noise_max = 0.05;     // sigma, units of channel std
  double blur_min = 0.5, blur_max = 1.5;         // gaussian sigma, pixels
  bool shared_across_partitions = false;         // one draw reused for all 4

  bool is_identity() const {
    return rotate_min == 0 && rotate_max == 0 && noise_min == 0 && noise_max == 0 &&
           blur_min == 0 && blur_max == 0;
  }
};

struct ChannelStats {
  std::vector<double> mean, stdev;  // one per channel
};

// Barycentric interpolation of vertex features at pixel centers
// ((j+0.5)/W, (i+0.5)/H). Pixels covered by several faces take the lowest
// face index.
FeatureImage rasterize(const PlanarMap& map, const TriMesh& mesh, int H, int W);

// split_sphere + teichmuller_map + rasterize for each of the four halves.
PartitionSet build_partitions(const TriMesh& left_sphere, const TriMesh& right_sphere,
                              int H = 224, int W = 224);

// Rotation about the image center with bilinear resampling; out-of-frame
// or uncovered source pixels become masked-out zeros.
FeatureImage rotate_image(const FeatureImage& img, double degrees);

// Adds N(0, (sigma * per-channel masked std)^2) noise to covered pixels.
FeatureImage add_noise(const FeatureImage& img, double sigma, uint64_t seed);

// Separable Gaussian blur, radius ceil(3 sigma), kernel renormalized over
// in-mask support; mask unchanged.
FeatureImage gaussian_blur(const FeatureImage& img, double sigma);

// Two independently augmented views with deterministic sub-seeds.
std::pair<PartitionSet, PartitionSet> augment_pair(const PartitionSet& partitions,
                                                   const AugmentPolicy& policy,
                                                   uint64_t seed);

// Per-channel z-score over masked pixels across the whole dataset.
ChannelStats compute_channel_stats(const std::vector<PartitionSet>& dataset);
void apply_channel_stats(PartitionSet& partitions, const ChannelStats& stats);

void save_feature_image(const FeatureImage& img, const std::string& path);
FeatureImage load_feature_image(const std::string& path);

}  // namespace neoprint
