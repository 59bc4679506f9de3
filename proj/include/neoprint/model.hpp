#pragma once

#include <Eigen/Dense>
#include <array>

#include "neoprint/autodiff.hpp"
#include "neoprint/raster.hpp"

namespace neoprint {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Plain conv blocks: 3x3 kernels, stride 1, zero-pad 1, relu, 2x2 max pool.
struct EncoderConfig {
  std::vector<int> channels = {16, 32, 64, 128};
  int in_channels = 3;
  int input_hw = 224;
  int fingerprint_dim = 512;

  int feature_channels() const { return channels.back(); }
  int feature_hw() const { return input_hw >> int(channels.size()); }
};

struct ExcitationConfig {
  int reduction = 4;
  double weight_scale = 1.0;
};

enum class FusionStrategy { excitation, voting, mlp };

// Parameter initialization (He-style, deterministic per seed). Encoder
// names: enc.b<i>.{ker,bias}; excitation: exc.{fc1,fc2,head}.{W,b};
// MLP fusion: mlp.{fc1,fc2}.{W,b}.
ad::ParamSet init_encoder_params(const EncoderConfig& cfg, uint64_t seed);
void add_excitation_params(ad::ParamSet& params, const EncoderConfig& cfg,
                           const ExcitationConfig& exc, uint64_t seed);
void add_mlp_params(ad::ParamSet& params, int dim, uint64_t seed);

ad::Value image_to_tensor(const FeatureImage& img);

// Shared-parameter conv encoder; returns the C_f x h x w feature map.
ad::Value encode_partition(const ad::Value& img, const ad::ParamSet& params,
                           const EncoderConfig& cfg);

struct FusedOutput {
  ad::Value fingerprint;  // length fingerprint_dim
  ad::Value weights;      // 4*C_f channel weights, mean exactly weight_scale
};

// concat -> gap -> fc1 -> relu -> fc2 -> sigmoid -> rescale to mean
// weight_scale -> channel scaling -> gap -> head projection.
// bypass = true skips the attention pathway (uniform weights), used for
// stage-1 training and the no-excitation ablation. weight_override, when
// given, replaces the computed weights (post-hoc analysis hook).
FusedOutput excitation_fuse(const std::array<ad::Value, 4>& maps,
                            const ad::ParamSet& params, const ExcitationConfig& exc,
                            bool bypass = false,
                            const std::vector<double>* weight_override = nullptr);

// Elementwise mean of the four per-partition similarity matrices.
Eigen::MatrixXd voting_identify(const std::array<Eigen::MatrixXd, 4>& sims);

// concat(4 x D) -> 2D -> relu -> D
ad::Value mlp_fuse(const std::array<ad::Value, 4>& pooled, const ad::ParamSet& params);

// L = -(1/N) sum_i log[ exp(-||z_i - z_i+||/tau) / sum_{j!=i} exp(-||z_i - z_j+||/tau) ]
ad::Value nt_xent_loss(const std::vector<ad::Value>& z, const std::vector<ad::Value>& z_pos,
                       double tau);

// L = sum_i (1-y_i) d_i^2 + y_i max(m - d_i, 0)^2; y=0 positive pair.
ad::Value margin_contrastive_loss(const std::vector<ad::Value>& dist,
                                  const std::vector<int>& y, double m);

}  // namespace neoprint
