#include "neoprint/model.hpp"

#include <cmath>

#include "neoprint/rng.hpp"

namespace neoprint {

using ad::Value;

namespace {

std::vector<double> he_init(size_t n, size_t fan_in, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  double s = std::sqrt(2.0 / double(fan_in));
  for (auto& x : v) x = s * rng.gaussian();
  return v;
}

// out = target * x / mean(x); keeps the returned weight vector's mean at
// exactly `target` regardless of the sigmoid activations
Value rescale_mean(const Value& x, double target) {
  int n = int(x->data.size());
  double mean = 0;
  for (double v : x->data) mean += v;
  mean /= n;
  if (std::abs(mean) < 1e-300) throw ModelError("rescale_mean: zero mean weights");
  auto out = ad::make_tensor(x->shape);
  for (int i = 0; i < n; ++i) out->data[i] = target * x->data[i] / mean;
  out->parents = {x};
  ad::Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn, target, mean, n]() {
    xn->ensure_grad();
    double dot = 0;
    for (int i = 0; i < n; ++i) dot += o->grad[i] * xn->data[i];
    for (int i = 0; i < n; ++i)
      xn->grad[i] += target * (o->grad[i] / mean - dot / (n * mean * mean));
  };
  return out;
}

}  // namespace

ad::ParamSet init_encoder_params(const EncoderConfig& cfg, uint64_t seed) {
  ad::ParamSet ps;
  int cin = cfg.in_channels;
  for (size_t b = 0; b < cfg.channels.size(); ++b) {
    int cout = cfg.channels[b];
    std::string prefix = "enc.b" + std::to_string(b);
    size_t fan_in = size_t(cin) * 9;
    ps.add(prefix + ".ker", {cout, cin, 3, 3},
           he_init(size_t(cout) * cin * 9, fan_in, subseed(seed, prefix + ".ker")));
    ps.add(prefix + ".bias", {cout}, std::vector<double>(cout, 0.0));
    cin = cout;
  }
  return ps;
}

void add_excitation_params(ad::ParamSet& params, const EncoderConfig& cfg,
                           const ExcitationConfig& exc, uint64_t seed) {
  int C4 = 4 * cfg.feature_channels();
  if (exc.reduction <= 0 || C4 % exc.reduction != 0)
    throw ModelError("excitation: reduction must divide 4*C_f");
  int hidden = C4 / exc.reduction;
  int D = cfg.fingerprint_dim;
  // The squeeze MLP only trains during the short stage-2 schedule, so its
  // initialization is chosen for that regime: fc2 starts at zero, making the
  // initial attention exactly the uniform baseline (sigmoid(0) rescaled to
  // weight_scale), and fc1 is a strongly scaled fixed-style random projection
  // whose large activations give fc2 gradients big enough to move the
  // attention within a few epochs at the shared learning rate.
  const double fc1_gain = 128.0;
  auto fc1 = he_init(size_t(hidden) * C4, C4, subseed(seed, "exc.fc1.W"));
  for (double& v : fc1) v *= fc1_gain;
  params.add("exc.fc1.W", {hidden, C4}, fc1);
  params.add("exc.fc1.b", {hidden}, std::vector<double>(hidden, 0.0));
  params.add("exc.fc2.W", {C4, hidden}, std::vector<double>(size_t(C4) * hidden, 0.0));
  params.add("exc.fc2.b", {C4}, std::vector<double>(C4, 0.0));
  params.add("exc.head.W", {D, C4}, he_init(size_t(D) * C4, C4, subseed(seed, "exc.head.W")));
  params.add("exc.head.b", {D}, std::vector<double>(D, 0.0));
}

void add_mlp_params(ad::ParamSet& params, int dim, uint64_t seed) {
  params.add("mlp.fc1.W", {2 * dim, 4 * dim},
             he_init(size_t(2 * dim) * 4 * dim, 4 * dim, subseed(seed, "mlp.fc1.W")));
  params.add("mlp.fc1.b", {2 * dim}, std::vector<double>(2 * dim, 0.0));
  params.add("mlp.fc2.W", {dim, 2 * dim},
             he_init(size_t(dim) * 2 * dim, 2 * dim, subseed(seed, "mlp.fc2.W")));
  params.add("mlp.fc2.b", {dim}, std::vector<double>(dim, 0.0));
}

Value image_to_tensor(const FeatureImage& img) {
  return ad::make_tensor({img.C, img.H, img.W}, img.data);
}

Value encode_partition(const Value& img, const ad::ParamSet& params,
                       const EncoderConfig& cfg) {
  if (img->shape != std::vector<int>{cfg.in_channels, cfg.input_hw, cfg.input_hw})
    throw ModelError("encode_partition: input shape does not match encoder config");
  Value h = img;
  for (size_t b = 0; b < cfg.channels.size(); ++b) {
    std::string prefix = "enc.b" + std::to_string(b);
    h = ad::conv2d(h, params.at(prefix + ".ker"), params.at(prefix + ".bias"), 1, 1);
    h = ad::relu(h);
    h = ad::max_pool(h);
  }
  return h;
}

FusedOutput excitation_fuse(const std::array<Value, 4>& maps, const ad::ParamSet& params,
                            const ExcitationConfig& exc, bool bypass,
                            const std::vector<double>* weight_override) {
  for (int p = 1; p < 4; ++p)
    if (maps[p]->shape != maps[0]->shape)
      throw ModelError("excitation_fuse: partition feature maps differ in shape");
  Value cat = ad::concat({maps[0], maps[1], maps[2], maps[3]});
  int C4 = cat->shape[0];

  Value weights;
  if (weight_override != nullptr) {
    if (int(weight_override->size()) != C4)
      throw ModelError("excitation_fuse: weight override has wrong length");
    weights = ad::make_tensor({C4}, *weight_override);
  } else if (bypass) {
    weights = ad::make_tensor({C4}, std::vector<double>(C4, exc.weight_scale));
  } else {
    Value squeeze = ad::global_avg_pool(cat);
    Value a = ad::relu(ad::linear(params.at("exc.fc1.W"), squeeze, params.at("exc.fc1.b")));
    Value s = ad::sigmoid(ad::linear(params.at("exc.fc2.W"), a, params.at("exc.fc2.b")));
    weights = rescale_mean(s, exc.weight_scale);
  }

  Value scaled = ad::channel_scale(cat, weights);
  Value pooled = ad::global_avg_pool(scaled);
  Value fingerprint = ad::linear(params.at("exc.head.W"), pooled, params.at("exc.head.b"));
  return {fingerprint, weights};
}

Eigen::MatrixXd voting_identify(const std::array<Eigen::MatrixXd, 4>& sims) {
  for (int p = 1; p < 4; ++p)
    if (sims[p].rows() != sims[0].rows() || sims[p].cols() != sims[0].cols())
      throw ModelError("voting_identify: similarity matrices differ in shape");
  return 0.25 * (sims[0] + sims[1] + sims[2] + sims[3]);
}

Value mlp_fuse(const std::array<Value, 4>& pooled, const ad::ParamSet& params) {
  for (int p = 0; p < 4; ++p)
    if (pooled[p]->shape.size() != 1 || pooled[p]->shape != pooled[0]->shape)
      throw ModelError("mlp_fuse: inputs must be equal-length vectors");
  Value cat = ad::concat({pooled[0], pooled[1], pooled[2], pooled[3]});
  Value h = ad::relu(ad::linear(params.at("mlp.fc1.W"), cat, params.at("mlp.fc1.b")));
  return ad::linear(params.at("mlp.fc2.W"), h, params.at("mlp.fc2.b"));
}

Value nt_xent_loss(const std::vector<Value>& z, const std::vector<Value>& z_pos,
                   double tau) {
  const int N = int(z.size());
  if (N < 2) throw ModelError("nt_xent_loss: need N >= 2 (empty denominator)");
  if (int(z_pos.size()) != N) throw ModelError("nt_xent_loss: z and z_pos length differ");
  if (tau <= 0) throw ModelError("nt_xent_loss: tau must be positive");

  // all pairwise distances d_ij = ||z_i - z_j+|| as graph nodes
  std::vector<Value> d(size_t(N) * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) d[i * N + j] = ad::euclidean_distance(z[i], z_pos[j]);

  // L = (1/N) sum_i [ d_ii/tau + log sum_{j!=i} exp(-d_ij/tau) ]
  double L = 0;
  std::vector<double> softmax(size_t(N) * N, 0.0);
  for (int i = 0; i < N; ++i) {
    double lo = d[i * N + (i == 0 ? 1 : 0)]->data[0];
    for (int j = 0; j < N; ++j)
      if (j != i) lo = std::min(lo, d[i * N + j]->data[0]);
    double denom = 0;
    for (int j = 0; j < N; ++j)
      if (j != i) denom += std::exp(-(d[i * N + j]->data[0] - lo) / tau);
    for (int j = 0; j < N; ++j)
      if (j != i) softmax[i * N + j] = std::exp(-(d[i * N + j]->data[0] - lo) / tau) / denom;
    L += d[i * N + i]->data[0] / tau + (std::log(denom) - lo / tau);
  }
  L /= N;

  auto out = ad::make_tensor({1}, std::vector<double>{L});
  out->parents.assign(d.begin(), d.end());
  ad::Node* o = out.get();
  auto dist = d;
  auto sm = std::make_shared<std::vector<double>>(std::move(softmax));
  out->backprop = [o, dist, sm, N, tau]() {
    double g = o->grad[0] / (N * tau);
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        auto& dn = dist[i * N + j];
        dn->ensure_grad();
        if (j == i)
          dn->grad[0] += g;
        else
          dn->grad[0] -= g * (*sm)[i * N + j];
      }
    }
  };
  return out;
}

Value margin_contrastive_loss(const std::vector<Value>& dist, const std::vector<int>& y,
                              double m) {
  if (m <= 0) throw ModelError("margin_contrastive_loss: margin must be positive");
  if (dist.size() != y.size())
    throw ModelError("margin_contrastive_loss: dist and label count differ");
  for (int label : y)
    if (label != 0 && label != 1)
      throw ModelError("margin_contrastive_loss: label outside {0,1}");

  double L = 0;
  for (size_t i = 0; i < dist.size(); ++i) {
    double dv = dist[i]->data[0];
    if (y[i] == 0)
      L += dv * dv;
    else {
      double c = std::max(m - dv, 0.0);
      L += c * c;
    }
  }
  auto out = ad::make_tensor({1}, std::vector<double>{L});
  out->parents.assign(dist.begin(), dist.end());
  ad::Node* o = out.get();
  auto ds = dist;
  auto labels = y;
  out->backprop = [o, ds, labels, m]() {
    for (size_t i = 0; i < ds.size(); ++i) {
      ds[i]->ensure_grad();
      double dv = ds[i]->data[0];
      if (labels[i] == 0)
        ds[i]->grad[0] += o->grad[0] * 2.0 * dv;
      else if (dv < m)
        ds[i]->grad[0] -= o->grad[0] * 2.0 * (m - dv);
    }
  };
  return out;
}

}  // namespace neoprint
