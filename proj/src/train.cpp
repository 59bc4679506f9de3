#include "neoprint/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "neoprint/rng.hpp"

namespace neoprint {

using ad::Value;

namespace {

bool has_prefix(const std::string& s, const std::string& p) {
  return s.rfind(p, 0) == 0;
}

// view over a subset of parameters (shared tensors, not copies)
ad::ParamSet param_subset(const ad::ParamSet& params,
                          const std::vector<std::string>& prefixes) {
  ad::ParamSet sub;
  for (const auto& [name, v] : params.params)
    for (const auto& p : prefixes)
      if (has_prefix(name, p)) {
        sub.params[name] = v;
        break;
      }
  return sub;
}

ad::ParamSet deep_copy(const ad::ParamSet& params) {
  ad::ParamSet out;
  for (const auto& [name, v] : params.params) out.add(name, v->shape, v->data);
  return out;
}

void apply_channel_mask(PartitionSet& parts, const std::array<bool, 3>& mask) {
  if (mask[0] && mask[1] && mask[2]) return;
  for (auto& img : parts.images)
    for (int c = 0; c < img.C; ++c)
      if (c < 3 && !mask[c])
        std::fill(img.data.begin() + size_t(c) * img.H * img.W,
                  img.data.begin() + size_t(c + 1) * img.H * img.W, 0.0);
}

// normalization + channel masking right before tensor conversion, so the
// raw cohort is never modified in place
std::array<Value, 4> view_tensors(const PartitionSet& parts, const TrainConfig& cfg) {
  PartitionSet copy = parts;
  if (!cfg.stats.mean.empty()) apply_channel_stats(copy, cfg.stats);
  apply_channel_mask(copy, cfg.channel_mask);
  std::array<Value, 4> t;
  for (int p = 0; p < 4; ++p) t[p] = image_to_tensor(copy.images[p]);
  return t;
}

std::array<Value, 4> encode_views(const std::array<Value, 4>& imgs,
                                  const ad::ParamSet& params, const TrainConfig& cfg) {
  std::array<Value, 4> maps;
  for (int p = 0; p < 4; ++p) maps[p] = encode_partition(imgs[p], params, cfg.encoder);
  return maps;
}

FusedOutput forward_fingerprint(const PartitionSet& parts, const ad::ParamSet& params,
                                const TrainConfig& cfg, bool bypass) {
  auto maps = encode_views(view_tensors(parts, cfg), params, cfg);
  return excitation_fuse(maps, params, cfg.excitation, bypass);
}

Value batch_loss_graph(const TrainingBatch& batch, const std::vector<Value>& fa,
                       const std::vector<Value>& fb, const TrainConfig& cfg) {
  if (cfg.use_ntxent) return nt_xent_loss(fa, fb, cfg.tau);
  std::vector<Value> dist;
  std::vector<int> labels;
  for (auto [i, j] : batch.positive_pairs) {
    dist.push_back(ad::euclidean_distance(fa[i], fb[j]));
    labels.push_back(0);
  }
  for (auto [i, j] : batch.negative_pairs) {
    dist.push_back(ad::euclidean_distance(fa[i], fb[j]));
    labels.push_back(1);
  }
  return margin_contrastive_loss(dist, labels, cfg.margin);
}

// Detached stage-1 step: forward every view once to collect fingerprint
// values, run the loss over leaf copies, then re-forward each view and
// seed its graph with the leaf gradient. Exact gradients with only one
// encoder graph alive at a time.
double stage1_step(ad::ParamSet& params, const TrainingBatch& batch,
                   const TrainConfig& cfg) {
  const int n = int(batch.view_a.size());
  const int D = cfg.encoder.fingerprint_dim;

  std::vector<Value> fa(n), fb(n);
  for (int s = 0; s < n; ++s) {
    auto za = forward_fingerprint(batch.view_a[s], params, cfg, true);
    fa[s] = ad::make_tensor({D}, za.fingerprint->data, true);
    auto zb = forward_fingerprint(batch.view_b[s], params, cfg, true);
    fb[s] = ad::make_tensor({D}, zb.fingerprint->data, true);
  }

  Value loss = batch_loss_graph(batch, fa, fb, cfg);
  double lval = loss->data[0];
  ad::backward(loss);

  for (int s = 0; s < n; ++s) {
    for (int half = 0; half < 2; ++half) {
      const Value& leaf = half == 0 ? fa[s] : fb[s];
      leaf->ensure_grad();
      bool nonzero = false;
      for (double g : leaf->grad)
        if (g != 0) {
          nonzero = true;
          break;
        }
      if (!nonzero) continue;
      const PartitionSet& view = half == 0 ? batch.view_a[s] : batch.view_b[s];
      auto out = forward_fingerprint(view, params, cfg, true);
      ad::backward_seeded(out.fingerprint, leaf->grad);
    }
  }
  return lval;
}

void check_finite(double loss, const char* where) {
  if (!std::isfinite(loss))
    throw TrainError(std::string(where) + ": non-finite loss, aborting");
}

std::vector<double> run_stage1(ad::ParamSet& params, const std::vector<Scan>& singles,
                               const std::vector<std::array<Scan, 2>>& real_pairs,
                               const TrainConfig& cfg, int batch_size,
                               const std::string& tag) {
  ad::ParamSet trainable = param_subset(params, {"enc.", "exc.head."});
  if (trainable.params.empty()) throw TrainError("stage1: no encoder parameters");
  ad::SgdState sgd;
  std::vector<double> history;
  for (int e = 0; e < cfg.epochs_per_stage; ++e) {
    auto batches =
        make_training_pairs(singles, real_pairs, cfg.augment, batch_size,
                            cfg.ordered_negatives, subseed(cfg.seed, tag + std::to_string(e)));
    double total = 0;
    for (const auto& b : batches) {
      params.zero_grad();
      total += stage1_step(params, b, cfg);
      ad::sgd_step(trainable, sgd, cfg.lr, cfg.momentum, cfg.weight_decay);
    }
    double mean = batches.empty() ? 0.0 : total / double(batches.size());
    check_finite(mean, "stage1");
    history.push_back(mean);
  }
  return history;
}

double eval_split(const std::vector<const std::array<Scan, 2>*>& test,
                  const ad::ParamSet& params, const TrainConfig& cfg, bool bypass,
                  double* top5) {
  std::vector<Eigen::VectorXd> F1, F2;
  for (const auto* pr : test) {
    std::array<std::vector<Eigen::VectorXd>*, 2> dst = {&F1, &F2};
    for (int s = 0; s < 2; ++s) {
      auto out = forward_fingerprint((*pr)[s].partitions, params, cfg, bypass);
      dst[s]->push_back(
          Eigen::Map<const Eigen::VectorXd>(out.fingerprint->data.data(),
                                            long(out.fingerprint->data.size())));
    }
  }
  Eigen::MatrixXd sim = similarity_matrix(F1, F2);
  if (top5 != nullptr) *top5 = topk_accuracy(sim, 5);
  return topk_accuracy(sim, 1);
}

struct FoldSplit {
  std::vector<const std::array<Scan, 2>*> train_ptrs, test_ptrs;
  std::vector<std::array<Scan, 2>> train;  // materialized for the train APIs
};

FoldSplit make_fold(const std::vector<std::array<Scan, 2>>& pairs,
                    const std::vector<int>& order, int fold, int folds) {
  FoldSplit fs;
  for (size_t k = 0; k < order.size(); ++k) {
    const auto& pr = pairs[order[k]];
    if (int(k) % folds == fold)
      fs.test_ptrs.push_back(&pr);
    else {
      fs.train_ptrs.push_back(&pr);
      fs.train.push_back(pr);
    }
  }
  return fs;
}

std::vector<int> shuffled_indices(size_t n, uint64_t seed) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(int(i))]);
  return idx;
}

// dataset statistics come from the pre-training singles only, so they never
// touch test scans; cohorts without singles run on raw images
ChannelStats cohort_stats(const Cohort& cohort) {
  if (cohort.singles.empty()) return {};
  std::vector<PartitionSet> ds;
  for (const auto& s : cohort.singles) ds.push_back(s.partitions);
  return compute_channel_stats(ds);
}

void validate_plan(const Cohort& cohort, const FoldPlan& plan) {
  if (plan.folds < 2) throw TrainError("cross_validate: need at least 2 folds");
  if (plan.rounds < 1) throw TrainError("cross_validate: need at least 1 round");
  if (int(cohort.pairs.size()) < plan.folds + 1)
    throw TrainError("cross_validate: too few two-scan subjects for the fold plan");
}

}  // namespace

std::vector<TrainingBatch> make_training_pairs(const std::vector<Scan>& singles,
                                               const std::vector<std::array<Scan, 2>>& pairs,
                                               const AugmentPolicy& policy, int batch_size,
                                               bool ordered_negatives, uint64_t seed) {
  if (batch_size < 2) throw TrainError("make_training_pairs: batch size must be >= 2");
  const size_t n = singles.size() + pairs.size();
  if (n < 2) throw TrainError("make_training_pairs: need at least 2 subjects");

  auto order = shuffled_indices(n, subseed(seed, "shuffle"));
  std::vector<TrainingBatch> batches;
  for (size_t at = 0; at < n;) {
    size_t take = std::min(size_t(batch_size), n - at);
    if (n - at - take == 1) ++take;  // never leave a 1-subject remainder
    TrainingBatch b;
    for (size_t k = 0; k < take; ++k) {
      int idx = order[at + k];
      if (idx < int(singles.size())) {
        auto views = augment_pair(singles[idx].partitions, policy,
                                  subseed(seed, "aug." + std::to_string(idx)));
        b.view_a.push_back(std::move(views.first));
        b.view_b.push_back(std::move(views.second));
      } else {
        const auto& pr = pairs[idx - singles.size()];
        b.view_a.push_back(pr[0].partitions);
        b.view_b.push_back(pr[1].partitions);
      }
    }
    int m = int(b.view_a.size());
    for (int i = 0; i < m; ++i) b.positive_pairs.push_back({i, i});
    for (int i = 0; i < m; ++i)
      for (int j = ordered_negatives ? 0 : i + 1; j < m; ++j)
        if (j != i) b.negative_pairs.push_back({i, j});
    batches.push_back(std::move(b));
    at += take;
  }
  return batches;
}

std::vector<double> pretrain_encoder(ad::ParamSet& params,
                                     const std::vector<Scan>& singles,
                                     const TrainConfig& cfg) {
  return run_stage1(params, singles, {}, cfg, cfg.batch_pretrain, "stage1.pre.e");
}

std::vector<double> finetune_encoder(ad::ParamSet& params,
                                     const std::vector<std::array<Scan, 2>>& real_pairs,
                                     const TrainConfig& cfg) {
  return run_stage1(params, {}, real_pairs, cfg, cfg.batch_finetune, "stage1.ft.e");
}

std::vector<double> train_stage1(ad::ParamSet& params, const std::vector<Scan>& singles,
                                 const std::vector<std::array<Scan, 2>>& real_pairs,
                                 const TrainConfig& cfg) {
  auto hist = pretrain_encoder(params, singles, cfg);
  auto ft = finetune_encoder(params, real_pairs, cfg);
  hist.insert(hist.end(), ft.begin(), ft.end());
  return hist;
}

std::vector<double> train_stage2(ad::ParamSet& params,
                                 const std::vector<std::array<Scan, 2>>& real_pairs,
                                 const TrainConfig& cfg) {
  if (real_pairs.size() < 2) throw TrainError("stage2: need at least 2 subject pairs");
  ad::ParamSet enc = param_subset(params, {"enc."});
  ad::ParamSet trainable = param_subset(params, {"exc."});
  if (trainable.params.empty()) throw TrainError("stage2: no excitation parameters");
  const uint64_t frozen = enc.checksum();

  // the encoder is frozen, so its feature maps can be computed once
  const int n = int(real_pairs.size());
  std::vector<std::array<std::array<Value, 4>, 2>> cached(n);
  for (int s = 0; s < n; ++s)
    for (int half = 0; half < 2; ++half) {
      auto maps =
          encode_views(view_tensors(real_pairs[s][half].partitions, cfg), params, cfg);
      for (int p = 0; p < 4; ++p)
        cached[s][half][p] = ad::make_tensor(maps[p]->shape, maps[p]->data);
    }

  ad::SgdState sgd;
  std::vector<double> history;
  for (int e = 0; e < cfg.epochs_per_stage; ++e) {
    auto order = shuffled_indices(n, subseed(cfg.seed, "stage2.e" + std::to_string(e)));
    double total = 0;
    int steps = 0;
    for (int at = 0; at < n;) {
      int take = std::min(cfg.batch_finetune, n - at);
      if (n - at - take == 1) ++take;
      std::vector<Value> fa, fb;
      for (int k = 0; k < take; ++k) {
        int idx = order[at + k];
        fa.push_back(excitation_fuse(cached[idx][0], params, cfg.excitation).fingerprint);
        fb.push_back(excitation_fuse(cached[idx][1], params, cfg.excitation).fingerprint);
      }
      TrainingBatch b;
      for (int i = 0; i < take; ++i) b.positive_pairs.push_back({i, i});
      for (int i = 0; i < take; ++i)
        for (int j = cfg.ordered_negatives ? 0 : i + 1; j < take; ++j)
          if (j != i) b.negative_pairs.push_back({i, j});
      params.zero_grad();
      Value loss = batch_loss_graph(b, fa, fb, cfg);
      total += loss->data[0];
      ++steps;
      ad::backward(loss);
      ad::sgd_step(trainable, sgd, cfg.lr, cfg.momentum, cfg.weight_decay);
      at += take;
    }
    double mean = steps == 0 ? 0.0 : total / steps;
    check_finite(mean, "stage2");
    history.push_back(mean);
  }

  if (enc.checksum() != frozen)
    throw TrainError("stage2: frozen encoder parameters changed");
  return history;
}

Eigen::VectorXd fingerprint(const PartitionSet& partitions, const ad::ParamSet& params,
                            const TrainConfig& cfg, bool bypass_excitation) {
  if (cfg.fusion == FusionStrategy::voting)
    throw TrainError("fingerprint: voting fusion has no single fingerprint");
  auto maps = encode_views(view_tensors(partitions, cfg), params, cfg);
  Value f;
  if (cfg.fusion == FusionStrategy::mlp) {
    std::array<Value, 4> pooled;
    for (int p = 0; p < 4; ++p) pooled[p] = ad::global_avg_pool(maps[p]);
    f = mlp_fuse(pooled, params);
  } else {
    f = excitation_fuse(maps, params, cfg.excitation, bypass_excitation).fingerprint;
  }
  return Eigen::Map<const Eigen::VectorXd>(f->data.data(), long(f->data.size()));
}

std::array<Eigen::VectorXd, 4> partition_features(const PartitionSet& partitions,
                                                  const ad::ParamSet& params,
                                                  const TrainConfig& cfg) {
  auto maps = encode_views(view_tensors(partitions, cfg), params, cfg);
  std::array<Eigen::VectorXd, 4> out;
  for (int p = 0; p < 4; ++p) {
    Value v = ad::global_avg_pool(maps[p]);
    out[p] = Eigen::Map<const Eigen::VectorXd>(v->data.data(), long(v->data.size()));
  }
  return out;
}

Eigen::MatrixXd similarity_matrix(const std::vector<Eigen::VectorXd>& F1,
                                  const std::vector<Eigen::VectorXd>& F2) {
  if (F1.empty() || F2.empty()) throw TrainError("similarity_matrix: empty fingerprint set");
  Eigen::MatrixXd sim(F1.size(), F2.size());
  for (size_t i = 0; i < F1.size(); ++i)
    for (size_t j = 0; j < F2.size(); ++j) {
      if (F1[i].size() != F2[j].size())
        throw TrainError("similarity_matrix: fingerprint lengths differ");
      sim(long(i), long(j)) = (F1[i] - F2[j]).norm();
    }
  return sim;
}

double topk_accuracy(const Eigen::MatrixXd& sim, int k) {
  if (sim.rows() != sim.cols() || sim.rows() == 0)
    throw TrainError("topk_accuracy: matrix must be square and non-empty");
  if (k < 1) throw TrainError("topk_accuracy: k must be >= 1");
  int correct = 0;
  for (long i = 0; i < sim.rows(); ++i) {
    double self = sim(i, i);
    int ahead = 0;  // entries ranked before self, ties counted against us
    for (long j = 0; j < sim.cols(); ++j)
      if (j != i && sim(i, j) <= self) ++ahead;
    if (ahead <= k - 1) ++correct;
  }
  return double(correct) / double(sim.rows());
}

Metrics cross_validate(const Cohort& cohort, const TrainConfig& cfg, const FoldPlan& plan) {
  validate_plan(cohort, plan);
  Metrics m;
  double w1 = 0, w5 = 0, wsum = 0;
  for (int r = 0; r < plan.rounds; ++r) {
    TrainConfig rcfg = cfg;
    rcfg.seed = subseed(cfg.seed, "cv.r" + std::to_string(r));
    rcfg.stats = cohort_stats(cohort);

    // stage-1 pre-training only sees the singles, so it is shared by the
    // folds of a round
    ad::ParamSet pre = init_encoder_params(cfg.encoder, subseed(rcfg.seed, "init"));
    add_excitation_params(pre, cfg.encoder, cfg.excitation, subseed(rcfg.seed, "init.exc"));
    if (!cohort.singles.empty())
      run_stage1(pre, cohort.singles, {}, rcfg, rcfg.batch_pretrain, "stage1.pre.e");

    auto order = shuffled_indices(cohort.pairs.size(), subseed(rcfg.seed, "folds"));
    double r1 = 0, r5 = 0, rw = 0;
    for (int f = 0; f < plan.folds; ++f) {
      FoldSplit fs = make_fold(cohort.pairs, order, f, plan.folds);
      if (fs.test_ptrs.empty() || fs.train.size() < 2)
        throw TrainError("cross_validate: degenerate fold split");
      TrainConfig fcfg = rcfg;
      fcfg.seed = subseed(rcfg.seed, "fold" + std::to_string(f));
      ad::ParamSet params = deep_copy(pre);
      run_stage1(params, {}, fs.train, fcfg, fcfg.batch_finetune, "stage1.ft.e");
      bool bypass = cfg.fusion != FusionStrategy::excitation;
      if (!bypass) train_stage2(params, fs.train, fcfg);
      double t5 = 0;
      double t1 = eval_split(fs.test_ptrs, params, fcfg, bypass, &t5);
      double w = double(fs.test_ptrs.size());
      r1 += w * t1;
      r5 += w * t5;
      rw += w;
    }
    m.round_top1.push_back(r1 / rw);
    m.round_top5.push_back(r5 / rw);
    w1 += r1;
    w5 += r5;
    wsum += rw;
  }
  m.top1 = w1 / wsum;
  m.top5 = w5 / wsum;
  return m;
}

std::vector<AblationRow> ablation_suite(const Cohort& cohort, const TrainConfig& cfg,
                                        const FoldPlan& plan) {
  validate_plan(cohort, plan);
  std::vector<AblationRow> rows = {{"A-full", 0, 0},
                                   {"B-random-encoder", 0, 0},
                                   {"C-no-pretraining", 0, 0},
                                   {"D-no-excitation", 0, 0}};
  std::array<double, 4> a1 = {0, 0, 0, 0}, a5 = {0, 0, 0, 0};
  double wsum = 0;

  for (int r = 0; r < plan.rounds; ++r) {
    TrainConfig rcfg = cfg;
    rcfg.seed = subseed(cfg.seed, "cv.r" + std::to_string(r));
    rcfg.stats = cohort_stats(cohort);

    ad::ParamSet pre = init_encoder_params(cfg.encoder, subseed(rcfg.seed, "init"));
    add_excitation_params(pre, cfg.encoder, cfg.excitation, subseed(rcfg.seed, "init.exc"));
    if (!cohort.singles.empty())
      run_stage1(pre, cohort.singles, {}, rcfg, rcfg.batch_pretrain, "stage1.pre.e");
    ad::ParamSet random = init_encoder_params(cfg.encoder, subseed(rcfg.seed, "init"));
    add_excitation_params(random, cfg.encoder, cfg.excitation, subseed(rcfg.seed, "init.exc"));

    auto order = shuffled_indices(cohort.pairs.size(), subseed(rcfg.seed, "folds"));
    for (int f = 0; f < plan.folds; ++f) {
      FoldSplit fs = make_fold(cohort.pairs, order, f, plan.folds);
      if (fs.test_ptrs.empty() || fs.train.size() < 2)
        throw TrainError("ablation_suite: degenerate fold split");
      TrainConfig fcfg = rcfg;
      fcfg.seed = subseed(rcfg.seed, "fold" + std::to_string(f));
      double w = double(fs.test_ptrs.size());
      wsum += w;

      // A and D share stage 1
      ad::ParamSet stage1 = deep_copy(pre);
      run_stage1(stage1, {}, fs.train, fcfg, fcfg.batch_finetune, "stage1.ft.e");

      ad::ParamSet full = deep_copy(stage1);
      train_stage2(full, fs.train, fcfg);
      double t5 = 0;
      a1[0] += w * eval_split(fs.test_ptrs, full, fcfg, false, &t5);
      a5[0] += w * t5;

      a1[1] += w * eval_split(fs.test_ptrs, random, fcfg, true, &t5);
      a5[1] += w * t5;

      ad::ParamSet scratch = deep_copy(random);
      run_stage1(scratch, {}, fs.train, fcfg, fcfg.batch_finetune, "stage1.ft.e");
      train_stage2(scratch, fs.train, fcfg);
      a1[2] += w * eval_split(fs.test_ptrs, scratch, fcfg, false, &t5);
      a5[2] += w * t5;

      a1[3] += w * eval_split(fs.test_ptrs, stage1, fcfg, true, &t5);
      a5[3] += w * t5;
    }
  }
  for (int c = 0; c < 4; ++c) {
    rows[c].top1 = a1[c] / wsum;
    rows[c].top5 = a5[c] / wsum;
  }
  return rows;
}

std::vector<AblationRow> channel_contribution(const Cohort& cohort, const TrainConfig& cfg,
                                              const FoldPlan& plan) {
  // channel order in the images: thickness, curvature, sulc
  const std::vector<std::pair<std::string, std::array<bool, 3>>> conditions = {
      {"curvature-only", {false, true, false}},
      {"thickness-only", {true, false, false}},
      {"sulc-only", {false, false, true}},
      {"all", {true, true, true}}};
  std::vector<AblationRow> rows;
  for (const auto& [label, mask] : conditions) {
    TrainConfig c = cfg;
    c.channel_mask = mask;
    Metrics m = cross_validate(cohort, c, plan);
    rows.push_back({label, m.top1, m.top5});
  }
  return rows;
}

SaliencyResult occlusion_saliency(const ad::ParamSet& params, const TrainConfig& cfg,
                                  const PartitionSet& partitions, int patch) {
  const int H = partitions.images[0].H, W = partitions.images[0].W;
  if (patch < 1 || patch > H || patch > W)
    throw TrainError("occlusion_saliency: patch must fit inside the image");

  bool bypass = cfg.fusion != FusionStrategy::excitation;
  auto base_maps = encode_views(view_tensors(partitions, cfg), params, cfg);
  std::array<Value, 4> cached;
  for (int p = 0; p < 4; ++p)
    cached[p] = ad::make_tensor(base_maps[p]->shape, base_maps[p]->data);
  FusedOutput base = excitation_fuse(cached, params, cfg.excitation, bypass);
  Eigen::Map<const Eigen::VectorXd> z0(base.fingerprint->data.data(),
                                       long(base.fingerprint->data.size()));

  SaliencyResult res;
  const int Cf = cfg.encoder.feature_channels();
  for (int p = 0; p < 4; ++p) {
    double acc = 0;
    for (int c = 0; c < Cf; ++c) acc += base.weights->data[p * Cf + c];
    res.partition_weight_means[p] = acc / Cf;
  }

  // same preprocessing as the base pass, then occlude
  PartitionSet prepared = partitions;
  if (!cfg.stats.mean.empty()) apply_channel_stats(prepared, cfg.stats);
  apply_channel_mask(prepared, cfg.channel_mask);

  for (int p = 0; p < 4; ++p) {
    res.maps[p].assign(size_t(H) * W, 0.0);
    for (int i0 = 0; i0 < H; i0 += patch)
      for (int j0 = 0; j0 < W; j0 += patch) {
        int i1 = std::min(i0 + patch, H), j1 = std::min(j0 + patch, W);
        FeatureImage occ = prepared.images[p];
        for (int c = 0; c < occ.C; ++c)
          for (int i = i0; i < i1; ++i)
            for (int j = j0; j < j1; ++j) occ.at(c, i, j) = 0.0;
        auto maps = cached;
        maps[p] = encode_partition(image_to_tensor(occ), params, cfg.encoder);
        FusedOutput out = excitation_fuse(maps, params, cfg.excitation, bypass);
        Eigen::Map<const Eigen::VectorXd> z(out.fingerprint->data.data(),
                                            long(out.fingerprint->data.size()));
        double d = (z - z0).norm();
        for (int i = i0; i < i1; ++i)
          for (int j = j0; j < j1; ++j) res.maps[p][size_t(i) * W + j] = d;
      }
  }
  return res;
}

void save_metrics_csv(const Metrics& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TrainError("save_metrics_csv: cannot open " + path);
  out << "round,top1,top5\n";
  for (size_t r = 0; r < m.round_top1.size(); ++r)
    out << r << "," << m.round_top1[r] << "," << m.round_top5[r] << "\n";
  out << "mean," << m.top1 << "," << m.top5 << "\n";
}

void save_table_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw TrainError("save_table_csv: cannot open " + path);
  out << "condition,top1,top5\n";
  for (const auto& r : rows) out << r.label << "," << r.top1 << "," << r.top5 << "\n";
}

}  // namespace neoprint
