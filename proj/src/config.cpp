#include "neoprint/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "neoprint/rng.hpp"

namespace neoprint {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t at = 0;
    double d = std::stod(v, &at);
    if (at != v.size()) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

int parse_int(const std::string& v, const std::string& key) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_int(trim(item), key));
  if (out.empty()) throw ConfigError("config: key '" + key + "' expects a list");
  return out;
}

FusionStrategy parse_fusion(const std::string& v, const std::string& key) {
  if (v == "excitation") return FusionStrategy::excitation;
  if (v == "voting") return FusionStrategy::voting;
  if (v == "mlp") return FusionStrategy::mlp;
  throw ConfigError("config: key '" + key + "' expects excitation/voting/mlp, got '" + v +
                    "'");
}

std::string fusion_name(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::excitation: return "excitation";
    case FusionStrategy::voting: return "voting";
    default: return "mlp";
  }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  auto dbl = [](double RunConfig::* m) {
    return Setter([m](RunConfig& c, const std::string& v, const std::string& k) {
      c.*m = parse_double(v, k);
    });
  };
  auto itg = [](int RunConfig::* m) {
    return Setter([m](RunConfig& c, const std::string& v, const std::string& k) {
      c.*m = parse_int(v, k);
    });
  };
  auto bol = [](bool RunConfig::* m) {
    return Setter([m](RunConfig& c, const std::string& v, const std::string& k) {
      c.*m = parse_bool(v, k);
    });
  };
  auto adbl = [](double AugmentPolicy::* m) {
    return Setter([m](RunConfig& c, const std::string& v, const std::string& k) {
      c.augment.*m = parse_double(v, k);
    });
  };
  static const std::map<std::string, Setter> table = {
      {"data.singles", itg(&RunConfig::singles)},
      {"data.pairs", itg(&RunConfig::pairs)},
      {"data.icosphere_level", itg(&RunConfig::icosphere_level)},
      {"data.n_bumps", itg(&RunConfig::n_bumps)},
      {"data.amp_min", dbl(&RunConfig::amp_min)},
      {"data.amp_max", dbl(&RunConfig::amp_max)},
      {"data.width_min", dbl(&RunConfig::width_min)},
      {"data.width_max", dbl(&RunConfig::width_max)},
      {"data.jitter", dbl(&RunConfig::jitter)},
      {"data.develop_scale", dbl(&RunConfig::develop_scale)},
      {"data.feature_noise", dbl(&RunConfig::feature_noise)},
      {"data.image_size", itg(&RunConfig::image_size)},
      {"flatten.tol", dbl(&RunConfig::tol)},
      {"flatten.max_iter", itg(&RunConfig::max_iter)},
      {"augment.rotate_min", adbl(&AugmentPolicy::rotate_min)},
      {"augment.rotate_max", adbl(&AugmentPolicy::rotate_max)},
      {"augment.noise_min", adbl(&AugmentPolicy::noise_min)},
      {"augment.noise_max", adbl(&AugmentPolicy::noise_max)},
      {"augment.blur_min", adbl(&AugmentPolicy::blur_min)},
      {"augment.blur_max", adbl(&AugmentPolicy::blur_max)},
      {"augment.shared",
       Setter([](RunConfig& c, const std::string& v, const std::string& k) {
         c.augment.shared_across_partitions = parse_bool(v, k);
       })},
      {"model.channels",
       Setter([](RunConfig& c, const std::string& v, const std::string& k) {
         c.channels = parse_int_list(v, k);
       })},
      {"model.fingerprint_dim", itg(&RunConfig::fingerprint_dim)},
      {"model.reduction", itg(&RunConfig::reduction)},
      {"model.weight_scale", dbl(&RunConfig::weight_scale)},
      {"model.fusion",
       Setter([](RunConfig& c, const std::string& v, const std::string& k) {
         c.fusion = parse_fusion(v, k);
       })},
      {"train.lr", dbl(&RunConfig::lr)},
      {"train.momentum", dbl(&RunConfig::momentum)},
      {"train.weight_decay", dbl(&RunConfig::weight_decay)},
      {"train.epochs_per_stage", itg(&RunConfig::epochs_per_stage)},
      {"train.batch_pretrain", itg(&RunConfig::batch_pretrain)},
      {"train.batch_finetune", itg(&RunConfig::batch_finetune)},
      {"train.margin", dbl(&RunConfig::margin)},
      {"train.tau", dbl(&RunConfig::tau)},
      {"train.use_ntxent", bol(&RunConfig::use_ntxent)},
      {"train.ordered_negatives", bol(&RunConfig::ordered_negatives)},
      {"eval.folds", itg(&RunConfig::folds)},
      {"eval.rounds", itg(&RunConfig::rounds)},
      {"eval.patch", itg(&RunConfig::patch)},
  };
  return table;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": malformed section");
      section = trim(s.substr(1, s.size() - 2));
      static const char* known[] = {"data", "flatten", "augment", "model", "train", "eval"};
      bool ok = false;
      for (const char* k : known) ok = ok || section == k;
      if (!ok)
        throw ConfigError("config line " + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config line " + std::to_string(lineno) + ": key '" + key +
                        "' outside any section");
    std::string full = section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end())
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + full +
                        "'");
    it->second(cfg, value, full);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[data]\n"
    << "singles = " << c.singles << "\n"
    << "pairs = " << c.pairs << "\n"
    << "icosphere_level = " << c.icosphere_level << "\n"
    << "n_bumps = " << c.n_bumps << "\n"
    << "amp_min = " << fmt(c.amp_min) << "\n"
    << "amp_max = " << fmt(c.amp_max) << "\n"
    << "width_min = " << fmt(c.width_min) << "\n"
    << "width_max = " << fmt(c.width_max) << "\n"
    << "jitter = " << fmt(c.jitter) << "\n"
    << "develop_scale = " << fmt(c.develop_scale) << "\n"
    << "feature_noise = " << fmt(c.feature_noise) << "\n"
    << "image_size = " << c.image_size << "\n"
    << "[flatten]\n"
    << "tol = " << fmt(c.tol) << "\n"
    << "max_iter = " << c.max_iter << "\n"
    << "[augment]\n"
    << "rotate_min = " << fmt(c.augment.rotate_min) << "\n"
    << "rotate_max = " << fmt(c.augment.rotate_max) << "\n"
    << "noise_min = " << fmt(c.augment.noise_min) << "\n"
    << "noise_max = " << fmt(c.augment.noise_max) << "\n"
    << "blur_min = " << fmt(c.augment.blur_min) << "\n"
    << "blur_max = " << fmt(c.augment.blur_max) << "\n"
    << "shared = " << (c.augment.shared_across_partitions ? "true" : "false") << "\n"
    << "[model]\n"
    << "channels = ";
  for (size_t i = 0; i < c.channels.size(); ++i) o << (i ? "," : "") << c.channels[i];
  o << "\n"
    << "fingerprint_dim = " << c.fingerprint_dim << "\n"
    << "reduction = " << c.reduction << "\n"
    << "weight_scale = " << fmt(c.weight_scale) << "\n"
    << "fusion = " << fusion_name(c.fusion) << "\n"
    << "[train]\n"
    << "lr = " << fmt(c.lr) << "\n"
    << "momentum = " << fmt(c.momentum) << "\n"
    << "weight_decay = " << fmt(c.weight_decay) << "\n"
    << "epochs_per_stage = " << c.epochs_per_stage << "\n"
    << "batch_pretrain = " << c.batch_pretrain << "\n"
    << "batch_finetune = " << c.batch_finetune << "\n"
    << "margin = " << fmt(c.margin) << "\n"
    << "tau = " << fmt(c.tau) << "\n"
    << "use_ntxent = " << (c.use_ntxent ? "true" : "false") << "\n"
    << "ordered_negatives = " << (c.ordered_negatives ? "true" : "false") << "\n"
    << "[eval]\n"
    << "folds = " << c.folds << "\n"
    << "rounds = " << c.rounds << "\n"
    << "patch = " << c.patch << "\n";
  return o.str();
}

uint64_t config_hash(const RunConfig& cfg) { return fnv1a(dump_config(cfg)); }

CohortSpec to_cohort_spec(const RunConfig& c) {
  CohortSpec spec;
  spec.n_singles = c.singles;
  spec.n_pairs = c.pairs;
  spec.identity.icosphere_level = c.icosphere_level;
  spec.identity.n_bumps = c.n_bumps;
  spec.identity.amp_min = c.amp_min;
  spec.identity.amp_max = c.amp_max;
  spec.identity.width_min = c.width_min;
  spec.identity.width_max = c.width_max;
  spec.scan0 = {c.jitter, 1.0, c.feature_noise};
  spec.scan1 = {c.jitter, c.develop_scale, c.feature_noise};
  return spec;
}

TrainConfig to_train_config(const RunConfig& c) {
  TrainConfig t;
  t.lr = c.lr;
  t.momentum = c.momentum;
  t.weight_decay = c.weight_decay;
  t.epochs_per_stage = c.epochs_per_stage;
  t.batch_pretrain = c.batch_pretrain;
  t.batch_finetune = c.batch_finetune;
  t.margin = c.margin;
  t.tau = c.tau;
  t.seed = c.seed;
  t.fusion = c.fusion;
  t.use_ntxent = c.use_ntxent;
  t.ordered_negatives = c.ordered_negatives;
  t.augment = c.augment;
  t.encoder.channels = c.channels;
  t.encoder.input_hw = c.image_size;
  t.encoder.fingerprint_dim = c.fingerprint_dim;
  t.excitation.reduction = c.reduction;
  t.excitation.weight_scale = c.weight_scale;
  return t;
}

FoldPlan to_fold_plan(const RunConfig& c) { return {c.folds, c.rounds}; }

}  // namespace neoprint
