#pragma once

#include <array>
#include <string>
#include <vector>

#include "neoprint/model.hpp"
#include "neoprint/raster.hpp"

namespace neoprint {

struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One rasterized scan: the four partition images of a subject at one
// timepoint.
struct Scan {
  std::string subject_id;
  int scan_index = 0;
  PartitionSet partitions;
};

struct Cohort {
  std::vector<Scan> singles;                  // single-scan subjects
  std::vector<std::array<Scan, 2>> pairs;     // two-scan subjects
};

struct TrainConfig {
  double lr = 5e-4;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int epochs_per_stage = 8;
  int batch_pretrain = 16;
  int batch_finetune = 8;
  double margin = 1.0;
  double tau = 0.5;
  uint64_t seed = 0;
  FusionStrategy fusion = FusionStrategy::excitation;
  bool use_ntxent = false;           // stage-1 loss selector (default margin)
  bool ordered_negatives = false;    // margin-loss negative pair direction
  AugmentPolicy augment;
  EncoderConfig encoder;
  ExcitationConfig excitation;
  std::array<bool, 3> channel_mask = {true, true, true};  // post-normalization
  ChannelStats stats;  // applied before every forward; empty = raw images
};

struct FoldPlan {
  int folds = 3;
  int rounds = 1;  // the paper's 30-round protocol is available by config
};

struct Metrics {
  std::vector<double> round_top1, round_top5;  // one entry per round
  double top1 = 0, top5 = 0;                   // test-size-weighted means
};

struct TrainingBatch {
  std::vector<PartitionSet> view_a, view_b;          // aligned per subject
  std::vector<std::pair<int, int>> positive_pairs;   // (i, i): a_i vs b_i
  std::vector<std::pair<int, int>> negative_pairs;   // (i, j), i != j: a_i vs b_j
};

// Subjects = augmented views of singles plus the two real scans of each
// two-scan subject; shuffled and chunked into batches. Negatives are
// cross-subject combinations within a batch (unordered by default).
std::vector<TrainingBatch> make_training_pairs(const std::vector<Scan>& singles,
                                               const std::vector<std::array<Scan, 2>>& pairs,
                                               const AugmentPolicy& policy, int batch_size,
                                               bool ordered_negatives, uint64_t seed);

// Stage 1: contrastive pre-training on augmented singles followed by
// fine-tuning on real pairs; excitation bypassed (plain pooled head).
// Returns the per-epoch mean loss history. Split entry points exist so the
// fold-independent pre-training can be cached across folds.
std::vector<double> pretrain_encoder(ad::ParamSet& params,
                                     const std::vector<Scan>& singles,
                                     const TrainConfig& cfg);
std::vector<double> finetune_encoder(ad::ParamSet& params,
                                     const std::vector<std::array<Scan, 2>>& real_pairs,
                                     const TrainConfig& cfg);
std::vector<double> train_stage1(ad::ParamSet& params, const std::vector<Scan>& singles,
                                 const std::vector<std::array<Scan, 2>>& real_pairs,
                                 const TrainConfig& cfg);

// Stage 2: frozen encoder (asserted byte-identical), only excitation and
// head parameters update; works on cached encoder features.
std::vector<double> train_stage2(ad::ParamSet& params,
                                 const std::vector<std::array<Scan, 2>>& real_pairs,
                                 const TrainConfig& cfg);

// Deterministic partitions -> encode -> fuse -> fingerprint.
Eigen::VectorXd fingerprint(const PartitionSet& partitions, const ad::ParamSet& params,
                            const TrainConfig& cfg, bool bypass_excitation = false);

// Per-partition pooled feature vectors (voting pathway).
std::array<Eigen::VectorXd, 4> partition_features(const PartitionSet& partitions,
                                                  const ad::ParamSet& params,
                                                  const TrainConfig& cfg);

// entry (i, j) = Euclidean distance(F1_i, F2_j)
Eigen::MatrixXd similarity_matrix(const std::vector<Eigen::VectorXd>& F1,
                                  const std::vector<Eigen::VectorXd>& F2);

// Row correct iff the diagonal entry ranks among the k smallest of its
// row with ties counted against self.
double topk_accuracy(const Eigen::MatrixXd& sim, int k);

Metrics cross_validate(const Cohort& cohort, const TrainConfig& cfg, const FoldPlan& plan);

struct AblationRow {
  std::string label;
  double top1 = 0, top5 = 0;
};

// A: full pipeline; B: untrained random encoder; C: fine-tuning only
// (no augmented pre-training); D: no excitation (plain concatenation head).
std::vector<AblationRow> ablation_suite(const Cohort& cohort, const TrainConfig& cfg,
                                        const FoldPlan& plan = {});

// curvature-only / thickness-only / sulc-only / all, by channel masking.
std::vector<AblationRow> channel_contribution(const Cohort& cohort, const TrainConfig& cfg,
                                              const FoldPlan& plan = {});

struct SaliencyResult {
  std::array<std::vector<double>, 4> maps;   // H*W per partition
  std::array<double, 4> partition_weight_means = {0, 0, 0, 0};
};

// Slide a zeroing patch; saliency = fingerprint displacement caused by the
// occlusion, written over the patch footprint.
SaliencyResult occlusion_saliency(const ad::ParamSet& params, const TrainConfig& cfg,
                                  const PartitionSet& partitions, int patch);

void save_metrics_csv(const Metrics& m, const std::string& path);
void save_table_csv(const std::vector<AblationRow>& rows, const std::string& path);

}  // namespace neoprint
