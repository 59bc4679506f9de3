#pragma once

#include <string>

#include "neoprint/synth.hpp"
#include "neoprint/train.hpp"

namespace neoprint {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Plain-text key = value configuration in sections [data], [flatten],
// [augment], [model], [train], [eval]. Unknown sections or keys are
// rejected; the resolved dump always contains every key with its
// effective value.
struct RunConfig {
  // [data]
  int singles = 60;
  int pairs = 30;
  int icosphere_level = 4;
  int n_bumps = 12;
  double amp_min = 0.05, amp_max = 0.10;
  double width_min = 0.18, width_max = 0.35;
  double jitter = 0.09;
  double develop_scale = 1.04;  // second-timepoint radial growth
  double feature_noise = 0.035;
  int image_size = 224;

  // [flatten]
  double tol = 0.05;
  int max_iter = 50;

  // [augment]
  AugmentPolicy augment;

  // [model]
  std::vector<int> channels = {16, 32, 64, 128};
  int fingerprint_dim = 512;
  int reduction = 4;
  double weight_scale = 1.0;
  FusionStrategy fusion = FusionStrategy::excitation;

  // [train]
  double lr = 5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int epochs_per_stage = 8;
  int batch_pretrain = 16;
  int batch_finetune = 8;
  double margin = 1.0;
  double tau = 0.5;
  bool use_ntxent = false;
  bool ordered_negatives = false;

  // [eval]
  int folds = 3;
  int rounds = 1;
  int patch = 56;

  uint64_t seed = 0;  // set by --seed, not part of the config file
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
// Resolved INI text: every key printed with its effective value.
std::string dump_config(const RunConfig& cfg);
// FNV-1a of the resolved dump (seed excluded; it is recorded separately).
uint64_t config_hash(const RunConfig& cfg);

CohortSpec to_cohort_spec(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);
FoldPlan to_fold_plan(const RunConfig& cfg);

}  // namespace neoprint
