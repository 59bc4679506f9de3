// neoprint: synthetic cortical cohorts, quasi-conformal flattening,
// contrastive fingerprint training and evaluation from one binary.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "neoprint/config.hpp"
#include "neoprint/flatten.hpp"
#include "neoprint/rng.hpp"
#include "neoprint/synth.hpp"
#include "neoprint/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace neoprint;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Ctx {
  std::string config_path;
  std::string out = "out";
  uint64_t seed = 0;
  int threads = 1;
};

RunConfig resolve_config(const Ctx& ctx) {
  RunConfig cfg = ctx.config_path.empty() ? RunConfig{} : load_config(ctx.config_path);
  cfg.seed = ctx.seed;
  return cfg;
}

uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open input file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a(ss.str());
}

std::string timestamp() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// resolved config + run manifest next to every command's outputs
void persist_run(const Ctx& ctx, const RunConfig& cfg, const std::string& command,
                 const json& inputs, const json& outputs) {
  fs::create_directories(ctx.out);
  std::ofstream rc(ctx.out + "/config.resolved.ini", std::ios::binary);
  rc << dump_config(cfg);
  json manifest = {{"command", command},
                   {"version", kVersion},
                   {"config_hash", config_hash(cfg)},
                   {"seed", cfg.seed},
                   {"threads", ctx.threads},
                   {"inputs", inputs},
                   {"outputs", outputs},
                   {"timestamp", timestamp()}};
  std::ofstream rm(ctx.out + "/run_manifest.json", std::ios::binary);
  rm << manifest.dump(2) << "\n";
}

void save_channel_stats(const ChannelStats& stats, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "channel,mean,stdev\n";
  out.precision(17);
  for (size_t c = 0; c < stats.mean.size(); ++c)
    out << feature_channels()[c] << "," << stats.mean[c] << "," << stats.stdev[c] << "\n";
}

ChannelStats load_channel_stats(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stats file '" + path + "'");
  ChannelStats stats;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string name, mean, sd;
    std::getline(ss, name, ',');
    std::getline(ss, mean, ',');
    std::getline(ss, sd, ',');
    stats.mean.push_back(std::stod(mean));
    stats.stdev.push_back(std::stod(sd));
  }
  return stats;
}

Cohort load_cohort_dir(const std::string& dir, int hw) {
  std::ifstream in(dir + "/manifest.csv");
  if (!in) throw std::runtime_error("cannot open manifest '" + dir + "/manifest.csv'");
  std::string line;
  std::getline(in, line);
  if (line != "subject_id,scan_index,side,mesh_path,feature_path")
    throw std::runtime_error("manifest header mismatch in '" + dir + "'");

  // subject -> scan index -> (left, right)
  std::map<std::string, std::map<int, HemiPair>> scans;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, idx, side, mesh, feat;
    std::getline(ss, id, ',');
    std::getline(ss, idx, ',');
    std::getline(ss, side, ',');
    std::getline(ss, mesh, ',');
    std::getline(ss, feat, ',');
    TriMesh m = load_mesh(dir + "/" + mesh, dir + "/" + feat);
    (side == "left" ? scans[id][std::stoi(idx)].left : scans[id][std::stoi(idx)].right) =
        std::move(m);
  }
  Cohort cohort;
  for (auto& [id, by_scan] : scans) {
    if (by_scan.size() == 1) {
      cohort.singles.push_back({id, 0, rasterize_scan(by_scan.begin()->second, hw, hw)});
    } else if (by_scan.size() == 2) {
      cohort.pairs.push_back({Scan{id, 0, rasterize_scan(by_scan.at(0), hw, hw)},
                              Scan{id, 1, rasterize_scan(by_scan.at(1), hw, hw)}});
    } else {
      throw std::runtime_error("subject '" + id + "' has " +
                               std::to_string(by_scan.size()) + " scans (expected 1 or 2)");
    }
  }
  return cohort;
}

Cohort obtain_cohort(const RunConfig& cfg, const std::string& manifest_dir) {
  if (!manifest_dir.empty()) return load_cohort_dir(manifest_dir, cfg.image_size);
  return build_cohort(to_cohort_spec(cfg), cfg.seed, cfg.image_size, cfg.image_size);
}

void write_loss_history(const std::vector<double>& hist, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "epoch,loss\n";
  out.precision(17);
  for (size_t e = 0; e < hist.size(); ++e) out << e << "," << hist[e] << "\n";
}

ad::ParamSet init_params(const TrainConfig& t, uint64_t seed) {
  ad::ParamSet params = init_encoder_params(t.encoder, subseed(seed, "init"));
  add_excitation_params(params, t.encoder, t.excitation, subseed(seed, "init.exc"));
  if (t.fusion == FusionStrategy::mlp)
    add_mlp_params(params, t.encoder.feature_channels(), subseed(seed, "init.mlp"));
  return params;
}

// ---- subcommand bodies ----

int cmd_synth(const Ctx& ctx, int subjects, int singles) {
  RunConfig cfg = resolve_config(ctx);
  if (subjects >= 0) cfg.pairs = subjects;
  if (singles >= 0) cfg.singles = singles;
  CohortManifest m = generate_cohort(to_cohort_spec(cfg), cfg.seed, ctx.out);
  std::printf("cohort: %d singles + %d pairs, %zu manifest rows\n", cfg.singles, cfg.pairs,
              m.rows.size());
  std::printf("manifest_hash: %llu\n", (unsigned long long)m.hash);
  persist_run(ctx, cfg, "synth", json::object(),
              {{"manifest", "manifest.csv"}, {"manifest_hash", m.hash}});
  return 0;
}

int cmd_flatten(const Ctx& ctx, const std::string& mesh_path,
                const std::string& feature_path, bool no_split) {
  RunConfig cfg = resolve_config(ctx);
  std::optional<std::string> sidecar;
  if (!feature_path.empty()) sidecar = feature_path;
  TriMesh mesh = load_mesh(mesh_path, sidecar);
  fs::create_directories(ctx.out);
  std::string stem = fs::path(mesh_path).stem().string();

  auto flatten_one = [&](const TriMesh& open_mesh, const std::string& tag) {
    auto loop = extract_boundary(open_mesh);
    std::vector<Eigen::Vector3d> lp;
    for (int v : loop) lp.push_back(open_mesh.vertices[v]);
    auto bc = rectangle_boundary_conditions(loop, lp);
    TeichmullerResult res = teichmuller_map(open_mesh, bc, cfg.tol, cfg.max_iter);
    std::string base = ctx.out + "/" + stem + (tag.empty() ? "" : "_" + tag);
    save_planar_map(res.map, base + ".uv.csv");
    save_beltrami(res.mu, base + ".mu.csv");
    save_distortion_report(res.report, base + ".distortion.txt");
    std::printf("%s: converged=%d iterations=%d std(|mu|)=%.4f flips=%d\n",
                tag.empty() ? stem.c_str() : tag.c_str(), int(res.converged),
                res.iterations, res.mu.std_abs(), res.report.flipped_faces);
  };

  if (no_split) {
    flatten_one(mesh, "");
  } else {
    auto [pos, neg] = split_sphere(mesh);
    flatten_one(pos, "pos");
    flatten_one(neg, "neg");
  }
  persist_run(ctx, cfg, "flatten", {{"mesh", mesh_path}, {"mesh_hash", file_hash(mesh_path)}},
              {{"stem", stem}});
  return 0;
}

int cmd_rasterize(const Ctx& ctx, const std::string& left, const std::string& left_feat,
                  const std::string& right, const std::string& right_feat) {
  RunConfig cfg = resolve_config(ctx);
  HemiPair scan{load_mesh(left, left_feat), load_mesh(right, right_feat)};
  PartitionSet parts = rasterize_scan(scan, cfg.image_size, cfg.image_size);
  fs::create_directories(ctx.out);
  json outputs;
  for (int p = 0; p < 4; ++p) {
    std::string path = ctx.out + "/" + PartitionSet::labels()[p] + ".fimg";
    save_feature_image(parts.images[p], path);
    outputs[PartitionSet::labels()[p]] = path;
  }
  persist_run(ctx, cfg, "rasterize",
              {{"left", left},
               {"left_hash", file_hash(left)},
               {"right", right},
               {"right_hash", file_hash(right)}},
              outputs);
  return 0;
}

int cmd_augment(const Ctx& ctx, const std::string& image_path) {
  RunConfig cfg = resolve_config(ctx);
  FeatureImage img = load_feature_image(image_path);
  PartitionSet parts;
  for (int p = 0; p < 4; ++p) parts.images[p] = img;
  auto views = augment_pair(parts, cfg.augment, cfg.seed);
  fs::create_directories(ctx.out);
  std::string stem = fs::path(image_path).stem().string();
  save_feature_image(views.first.images[0], ctx.out + "/" + stem + ".view0.fimg");
  save_feature_image(views.second.images[0], ctx.out + "/" + stem + ".view1.fimg");
  persist_run(ctx, cfg, "augment",
              {{"image", image_path}, {"image_hash", file_hash(image_path)}},
              {{"view0", stem + ".view0.fimg"}, {"view1", stem + ".view1.fimg"}});
  return 0;
}

int cmd_train(const Ctx& ctx, const std::string& manifest_dir) {
  RunConfig cfg = resolve_config(ctx);
  Cohort cohort = obtain_cohort(cfg, manifest_dir);
  TrainConfig t = to_train_config(cfg);
  if (!cohort.singles.empty()) {
    std::vector<PartitionSet> ds;
    for (const auto& s : cohort.singles) ds.push_back(s.partitions);
    t.stats = compute_channel_stats(ds);
  }
  ad::ParamSet params = init_params(t, cfg.seed);
  auto hist = train_stage1(params, cohort.singles, cohort.pairs, t);
  if (t.fusion == FusionStrategy::excitation) {
    auto h2 = train_stage2(params, cohort.pairs, t);
    hist.insert(hist.end(), h2.begin(), h2.end());
  }
  fs::create_directories(ctx.out);
  ad::save_pset(params, ctx.out + "/params.pset");
  write_loss_history(hist, ctx.out + "/loss_history.csv");
  if (!t.stats.mean.empty()) save_channel_stats(t.stats, ctx.out + "/channel_stats.csv");
  if (!hist.empty()) std::printf("final_loss: %.6g\n", hist.back());
  std::printf("params: %s\n", (ctx.out + "/params.pset").c_str());
  persist_run(ctx, cfg, "train", {{"manifest_dir", manifest_dir}},
              {{"params", "params.pset"}, {"loss_history", "loss_history.csv"}});
  return 0;
}

int cmd_eval(const Ctx& ctx, const std::string& manifest_dir, const std::string& params_path,
             const std::string& stats_path, bool cross_validation) {
  RunConfig cfg = resolve_config(ctx);
  Cohort cohort = obtain_cohort(cfg, manifest_dir);
  TrainConfig t = to_train_config(cfg);
  fs::create_directories(ctx.out);

  if (cross_validation) {
    Metrics m = cross_validate(cohort, t, to_fold_plan(cfg));
    save_metrics_csv(m, ctx.out + "/metrics.csv");
    std::printf("top1: %.4f\ntop5: %.4f\n", m.top1, m.top5);
    persist_run(ctx, cfg, "eval", {{"manifest_dir", manifest_dir}, {"cv", true}},
                {{"metrics", "metrics.csv"}});
    return 0;
  }

  if (params_path.empty()) throw std::runtime_error("eval: --params required (or use --cv)");
  ad::ParamSet params = ad::load_pset(params_path);
  if (!stats_path.empty()) t.stats = load_channel_stats(stats_path);
  bool bypass = t.fusion != FusionStrategy::excitation;
  std::vector<Eigen::VectorXd> F1, F2;
  for (const auto& pr : cohort.pairs) {
    F1.push_back(fingerprint(pr[0].partitions, params, t, bypass));
    F2.push_back(fingerprint(pr[1].partitions, params, t, bypass));
  }
  if (F1.empty()) throw std::runtime_error("eval: cohort has no two-scan subjects");
  Eigen::MatrixXd sim = similarity_matrix(F1, F2);
  std::ofstream out(ctx.out + "/similarity.csv", std::ios::binary);
  out.precision(17);
  for (long i = 0; i < sim.rows(); ++i)
    for (long j = 0; j < sim.cols(); ++j) out << sim(i, j) << (j + 1 < sim.cols() ? ',' : '\n');
  double top1 = topk_accuracy(sim, 1), top5 = topk_accuracy(sim, 5);
  std::printf("top1: %.4f\ntop5: %.4f\n", top1, top5);
  Metrics m;
  m.round_top1 = {top1};
  m.round_top5 = {top5};
  m.top1 = top1;
  m.top5 = top5;
  save_metrics_csv(m, ctx.out + "/metrics.csv");
  persist_run(ctx, cfg, "eval",
              {{"manifest_dir", manifest_dir},
               {"params", params_path},
               {"params_hash", file_hash(params_path)}},
              {{"metrics", "metrics.csv"}, {"similarity", "similarity.csv"}});
  return 0;
}

int cmd_ablate(const Ctx& ctx, const std::string& manifest_dir) {
  RunConfig cfg = resolve_config(ctx);
  Cohort cohort = obtain_cohort(cfg, manifest_dir);
  auto rows = ablation_suite(cohort, to_train_config(cfg), to_fold_plan(cfg));
  fs::create_directories(ctx.out);
  save_table_csv(rows, ctx.out + "/ablation.csv");
  for (const auto& r : rows)
    std::printf("%-18s top1=%.4f top5=%.4f\n", r.label.c_str(), r.top1, r.top5);
  persist_run(ctx, cfg, "ablate", {{"manifest_dir", manifest_dir}},
              {{"table", "ablation.csv"}});
  return 0;
}

int cmd_channels(const Ctx& ctx, const std::string& manifest_dir) {
  RunConfig cfg = resolve_config(ctx);
  Cohort cohort = obtain_cohort(cfg, manifest_dir);
  auto rows = channel_contribution(cohort, to_train_config(cfg), to_fold_plan(cfg));
  fs::create_directories(ctx.out);
  save_table_csv(rows, ctx.out + "/channels.csv");
  for (const auto& r : rows)
    std::printf("%-16s top1=%.4f top5=%.4f\n", r.label.c_str(), r.top1, r.top5);
  persist_run(ctx, cfg, "channels", {{"manifest_dir", manifest_dir}},
              {{"table", "channels.csv"}});
  return 0;
}

int cmd_saliency(const Ctx& ctx, const std::string& manifest_dir,
                 const std::string& params_path, const std::string& stats_path,
                 const std::string& subject) {
  RunConfig cfg = resolve_config(ctx);
  Cohort cohort = obtain_cohort(cfg, manifest_dir);
  if (cohort.pairs.empty()) throw std::runtime_error("saliency: cohort has no two-scan subjects");
  const std::array<Scan, 2>* target = &cohort.pairs[0];
  if (!subject.empty()) {
    target = nullptr;
    for (const auto& pr : cohort.pairs)
      if (pr[0].subject_id == subject) target = &pr;
    if (target == nullptr)
      throw std::runtime_error("saliency: subject '" + subject + "' not in cohort");
  }
  TrainConfig t = to_train_config(cfg);
  if (!stats_path.empty()) t.stats = load_channel_stats(stats_path);
  ad::ParamSet params = ad::load_pset(params_path);

  SaliencyResult res = occlusion_saliency(params, t, (*target)[0].partitions, cfg.patch);
  fs::create_directories(ctx.out);
  json outputs;
  for (int p = 0; p < 4; ++p) {
    const FeatureImage& src = (*target)[0].partitions.images[p];
    FeatureImage map;
    map.C = 1;
    map.H = src.H;
    map.W = src.W;
    map.data = res.maps[p];
    map.mask = src.mask;
    std::string path = ctx.out + "/saliency_" + PartitionSet::labels()[p] + ".fimg";
    save_feature_image(map, path);
    outputs[PartitionSet::labels()[p]] = path;
    std::printf("%-14s weight_mean=%.6f\n", PartitionSet::labels()[p].c_str(),
                res.partition_weight_means[p]);
  }
  persist_run(ctx, cfg, "saliency",
              {{"manifest_dir", manifest_dir},
               {"params", params_path},
               {"subject", (*target)[0].subject_id}},
              outputs);
  return 0;
}

int cmd_gradcheck(const Ctx& ctx) {
  RunConfig cfg = resolve_config(ctx);
  Rng rng(subseed(cfg.seed, "gradcheck"));
  auto rand_vec = [&](size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.0);
    return v;
  };
  const double eps = 1e-5;
  struct Case {
    std::string name;
    std::function<double()> run;
  };
  auto check = [&](ad::ParamSet& ps, const std::function<ad::Value(const ad::ParamSet&)>& f) {
    return ad::grad_check(f, ps, eps);
  };
  std::vector<Case> cases;
  auto add_case = [&](const std::string& name, std::vector<std::pair<std::string, std::vector<int>>> shapes,
                      std::function<ad::Value(const ad::ParamSet&)> f) {
    cases.push_back({name, [=, &rng, this_rand = rand_vec]() mutable {
                       ad::ParamSet ps;
                       for (const auto& [n, shape] : shapes) {
                         size_t sz = 1;
                         for (int d : shape) sz *= size_t(d);
                         ps.add(n, shape, this_rand(sz));
                       }
                       return check(ps, f);
                     }});
  };
  using ad::Value;
  add_case("conv2d", {{"x", {2, 5, 5}}, {"k", {3, 2, 3, 3}}, {"b", {3}}},
           [](const ad::ParamSet& p) {
             return ad::sum(ad::conv2d(p.at("x"), p.at("k"), p.at("b"), 2, 1));
           });
  add_case("relu", {{"x", {6}}}, [](const ad::ParamSet& p) { return ad::sum(ad::relu(p.at("x"))); });
  add_case("sigmoid", {{"x", {6}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::sigmoid(p.at("x"))); });
  add_case("linear", {{"W", {3, 4}}, {"x", {4}}, {"b", {3}}}, [](const ad::ParamSet& p) {
    return ad::sum(ad::linear(p.at("W"), p.at("x"), p.at("b")));
  });
  add_case("max_pool", {{"x", {2, 4, 4}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::max_pool(p.at("x"))); });
  add_case("global_avg_pool", {{"x", {3, 4, 4}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::global_avg_pool(p.at("x"))); });
  add_case("concat", {{"x", {2, 3, 3}}, {"y", {1, 3, 3}}}, [](const ad::ParamSet& p) {
    return ad::sum(ad::concat({p.at("x"), p.at("y")}));
  });
  add_case("flatten", {{"x", {2, 3, 3}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::flatten(p.at("x"))); });
  add_case("add", {{"x", {5}}, {"y", {5}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::add(p.at("x"), p.at("y"))); });
  add_case("scalar_mul", {{"x", {5}}},
           [](const ad::ParamSet& p) { return ad::sum(ad::scalar_mul(p.at("x"), -1.7)); });
  add_case("elementwise_mul", {{"x", {5}}, {"y", {5}}}, [](const ad::ParamSet& p) {
    return ad::sum(ad::elementwise_mul(p.at("x"), p.at("y")));
  });
  add_case("euclidean_distance", {{"x", {5}}, {"y", {5}}}, [](const ad::ParamSet& p) {
    return ad::euclidean_distance(p.at("x"), p.at("y"));
  });
  add_case("sum", {{"x", {7}}},
           [](const ad::ParamSet& p) { return ad::scalar_mul(ad::sum(p.at("x")), 0.5); });
  add_case("channel_scale", {{"x", {3, 3, 3}}, {"w", {3}}}, [](const ad::ParamSet& p) {
    return ad::sum(ad::channel_scale(p.at("x"), p.at("w")));
  });
  add_case("margin_loss", {{"a", {4}}, {"b", {4}}, {"c", {4}}}, [](const ad::ParamSet& p) {
    std::vector<Value> d = {ad::euclidean_distance(p.at("a"), p.at("b")),
                            ad::euclidean_distance(p.at("a"), p.at("c"))};
    return margin_contrastive_loss(d, {0, 1}, 2.5);
  });
  add_case("nt_xent_loss", {{"a", {4}}, {"b", {4}}, {"c", {4}}, {"d", {4}}},
           [](const ad::ParamSet& p) {
             return nt_xent_loss({p.at("a"), p.at("c")}, {p.at("b"), p.at("d")}, 0.7);
           });

  bool all_ok = true;
  for (auto& c : cases) {
    double worst = 0;
    for (int s = 0; s < 5; ++s) worst = std::max(worst, c.run());
    bool ok = worst < 1e-4;
    all_ok = all_ok && ok;
    std::printf("%-20s max_rel_err=%.3e %s\n", c.name.c_str(), worst, ok ? "ok" : "FAIL");
  }
  persist_run(ctx, cfg, "gradcheck", json::object(), {{"passed", all_ok}});
  if (!all_ok) throw std::runtime_error("gradcheck: at least one operator exceeded 1e-4");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neoprint: morphological fingerprinting pipeline"};
  app.require_subcommand(1);

  Ctx ctx;
  app.add_option("--config", ctx.config_path, "configuration file (INI)");
  app.add_option("--seed", ctx.seed, "master seed");
  app.add_option("--out", ctx.out, "output directory");
  app.add_option("--threads", ctx.threads, "internal parallelism cap");

  int subjects = -1, singles = -1;
  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--subjects", subjects, "number of two-scan subjects");
  synth->add_option("--singles", singles, "number of single-scan subjects");

  std::string mesh_path, feature_path;
  bool no_split = false;
  auto* flat = app.add_subcommand("flatten", "flatten a mesh to the plane");
  flat->add_option("--mesh", mesh_path, "OBJ mesh")->required();
  flat->add_option("--features", feature_path, "feature sidecar CSV");
  flat->add_flag("--no-split", no_split, "flatten as-is instead of splitting the sphere");

  std::string left, left_feat, right, right_feat;
  auto* rast = app.add_subcommand("rasterize", "rasterize a scan's four partitions");
  rast->add_option("--left", left, "left hemisphere OBJ")->required();
  rast->add_option("--left-features", left_feat, "left feature CSV")->required();
  rast->add_option("--right", right, "right hemisphere OBJ")->required();
  rast->add_option("--right-features", right_feat, "right feature CSV")->required();

  std::string image_path;
  auto* aug = app.add_subcommand("augment", "produce two augmented views of an image");
  aug->add_option("--image", image_path, "FIMG input")->required();

  std::string manifest_dir;
  auto* train = app.add_subcommand("train", "two-stage training on a cohort");
  train->add_option("--manifest", manifest_dir, "cohort directory (default: generate)");

  std::string params_path, stats_path;
  bool cv = false;
  auto* eval = app.add_subcommand("eval", "fingerprints, similarity, Top-k");
  eval->add_option("--manifest", manifest_dir, "cohort directory (default: generate)");
  eval->add_option("--params", params_path, "trained PSET checkpoint");
  eval->add_option("--stats", stats_path, "channel stats CSV from training");
  eval->add_flag("--cv", cv, "run the full cross-validation protocol instead");

  auto* abl = app.add_subcommand("ablate", "four-condition ablation table");
  abl->add_option("--manifest", manifest_dir, "cohort directory (default: generate)");

  auto* chn = app.add_subcommand("channels", "per-channel contribution table");
  chn->add_option("--manifest", manifest_dir, "cohort directory (default: generate)");

  std::string subject;
  auto* sal = app.add_subcommand("saliency", "occlusion saliency maps");
  sal->add_option("--manifest", manifest_dir, "cohort directory (default: generate)");
  sal->add_option("--params", params_path, "trained PSET checkpoint")->required();
  sal->add_option("--stats", stats_path, "channel stats CSV from training");
  sal->add_option("--subject", subject, "two-scan subject id (default: first)");

  app.add_subcommand("gradcheck", "central-difference check of every operator");

  // global flags may be given after the subcommand name
  for (CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; }))
    s->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("synth")) return cmd_synth(ctx, subjects, singles);
    if (app.got_subcommand("flatten")) return cmd_flatten(ctx, mesh_path, feature_path, no_split);
    if (app.got_subcommand("rasterize"))
      return cmd_rasterize(ctx, left, left_feat, right, right_feat);
    if (app.got_subcommand("augment")) return cmd_augment(ctx, image_path);
    if (app.got_subcommand("train")) return cmd_train(ctx, manifest_dir);
    if (app.got_subcommand("eval"))
      return cmd_eval(ctx, manifest_dir, params_path, stats_path, cv);
    if (app.got_subcommand("ablate")) return cmd_ablate(ctx, manifest_dir);
    if (app.got_subcommand("channels")) return cmd_channels(ctx, manifest_dir);
    if (app.got_subcommand("saliency"))
      return cmd_saliency(ctx, manifest_dir, params_path, stats_path, subject);
    if (app.got_subcommand("gradcheck")) return cmd_gradcheck(ctx);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
