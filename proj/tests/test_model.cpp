#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "neoprint/model.hpp"
#include "neoprint/rng.hpp"

using namespace neoprint;
using ad::Value;

namespace {

Value random_image(int C, int HW, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data(size_t(C) * HW * HW);
  for (auto& v : data) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
  return ad::make_tensor({C, HW, HW}, data);
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.channels = {2};
  cfg.input_hw = 4;
  cfg.fingerprint_dim = 4;
  return cfg;
}

EncoderConfig small_config() {
  EncoderConfig cfg;
  cfg.channels = {2, 3};
  cfg.input_hw = 8;
  cfg.fingerprint_dim = 512;
  return cfg;
}

}  // namespace

TEST_CASE("encode_partition: default config yields 128x14x14") {
  EncoderConfig cfg;  // defaults
  auto params = init_encoder_params(cfg, 1);
  auto img = random_image(3, 224, 2);
  auto map = encode_partition(img, params, cfg);
  CHECK(map->shape == std::vector<int>{128, 14, 14});
  CHECK(cfg.feature_channels() == 128);
  CHECK(cfg.feature_hw() == 14);
}

TEST_CASE("encode_partition: zero input finite, sharing, determinism") {
  auto cfg = small_config();
  auto params = init_encoder_params(cfg, 3);
  auto zero = ad::make_tensor({3, 8, 8}, 0.0);
  auto map = encode_partition(zero, params, cfg);
  CHECK(map->shape == std::vector<int>{3, 2, 2});
  for (double v : map->data) CHECK(std::isfinite(v));

  auto img = random_image(3, 8, 4);
  auto m1 = encode_partition(img, params, cfg);
  auto m2 = encode_partition(img, params, cfg);
  CHECK(m1->data == m2->data);  // same params, same input, bit-identical

  CHECK_THROWS_WITH_AS(encode_partition(random_image(3, 16, 5), params, cfg),
                       doctest::Contains("shape"), ModelError);
}

TEST_CASE("excitation_fuse: weight mean exact, fingerprint length") {
  auto cfg = small_config();
  ExcitationConfig exc;
  auto params = init_encoder_params(cfg, 7);
  add_excitation_params(params, cfg, exc, 7);
  std::array<Value, 4> maps;
  for (int p = 0; p < 4; ++p)
    maps[p] = encode_partition(random_image(3, 8, 10 + p), params, cfg);

  auto out = excitation_fuse(maps, params, exc);
  CHECK(out.fingerprint->shape == std::vector<int>{512});
  double mean = 0;
  for (double w : out.weights->data) mean += w;
  mean /= out.weights->data.size();
  CHECK(std::abs(mean - 1.0) < 1e-12);

  ExcitationConfig scaled;
  scaled.weight_scale = 2.5;
  auto out2 = excitation_fuse(maps, params, scaled);
  mean = 0;
  for (double w : out2.weights->data) mean += w;
  mean /= out2.weights->data.size();
  CHECK(std::abs(mean - 2.5) < 1e-12);
}

TEST_CASE("excitation_fuse: uniform sigmoid outputs equal the bypass pathway") {
  auto cfg = small_config();
  ExcitationConfig exc;
  auto params = init_encoder_params(cfg, 8);
  add_excitation_params(params, cfg, exc, 8);
  // zero fc2 => all sigmoid outputs 0.5 => rescaled weights all 1.0
  for (double& v : params.at("exc.fc2.W")->data) v = 0.0;
  for (double& v : params.at("exc.fc2.b")->data) v = 0.0;
  std::array<Value, 4> maps;
  for (int p = 0; p < 4; ++p)
    maps[p] = encode_partition(random_image(3, 8, 20 + p), params, cfg);
  auto attended = excitation_fuse(maps, params, exc, false);
  auto bypassed = excitation_fuse(maps, params, exc, true);
  for (double w : attended.weights->data) CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t i = 0; i < attended.fingerprint->data.size(); ++i)
    CHECK(attended.fingerprint->data[i] ==
          doctest::Approx(bypassed.fingerprint->data[i]).epsilon(1e-12));
}

TEST_CASE("excitation_fuse: zeroed partition block makes fingerprint invariant") {
  auto cfg = small_config();
  ExcitationConfig exc;
  auto params = init_encoder_params(cfg, 9);
  add_excitation_params(params, cfg, exc, 9);
  int Cf = cfg.feature_channels();
  std::vector<double> override_w(size_t(4) * Cf, 1.0);
  for (int c = Cf; c < 2 * Cf; ++c) override_w[c] = 0.0;  // mask partition index 1

  std::array<Value, 4> maps;
  for (int p = 0; p < 4; ++p)
    maps[p] = encode_partition(random_image(3, 8, 30 + p), params, cfg);
  auto a = excitation_fuse(maps, params, exc, false, &override_w);

  maps[1] = encode_partition(random_image(3, 8, 999), params, cfg);  // arbitrary change
  auto b = excitation_fuse(maps, params, exc, false, &override_w);
  for (size_t i = 0; i < a.fingerprint->data.size(); ++i)
    CHECK(a.fingerprint->data[i] == b.fingerprint->data[i]);
}

TEST_CASE("voting_identify hand examples") {
  Eigen::MatrixXd m(1, 1);
  std::array<Eigen::MatrixXd, 4> sims;
  for (int p = 0; p < 4; ++p) {
    m(0, 0) = 1.0 + 2.0 * p;  // 1, 3, 5, 7
    sims[p] = m;
  }
  CHECK(voting_identify(sims)(0, 0) == doctest::Approx(4.0).epsilon(1e-15));

  std::array<Eigen::MatrixXd, 4> same;
  Eigen::MatrixXd s = Eigen::MatrixXd::Random(3, 3).cwiseAbs();
  for (int p = 0; p < 4; ++p) same[p] = s;
  CHECK(voting_identify(same) == s);

  // two partitions prefer A (row [1,9]), two prefer B (row [9,2]); mean picks A
  std::array<Eigen::MatrixXd, 4> split;
  Eigen::MatrixXd fa(1, 2), fb(1, 2);
  fa << 1, 9;
  fb << 9, 2;
  split = {fa, fa, fb, fb};
  auto mean = voting_identify(split);
  CHECK(mean(0, 0) == doctest::Approx(5.0));
  CHECK(mean(0, 1) == doctest::Approx(5.5));
  CHECK(mean(0, 0) < mean(0, 1));  // argmin = subject A
}

TEST_CASE("mlp_fuse: zero params, hand example, output length") {
  {
    ad::ParamSet ps;
    add_mlp_params(ps, 2, 1);
    for (auto& [name, p] : ps.params)
      for (double& v : p->data) v = 0.0;
    std::array<Value, 4> pooled;
    for (int p = 0; p < 4; ++p) pooled[p] = ad::make_tensor({2}, std::vector<double>{1, 2});
    auto out = mlp_fuse(pooled, ps);
    CHECK(out->data == std::vector<double>{0, 0});
  }
  {
    // D = 2: fc1 passes through the first 4 inputs, fc2 sums pairs
    ad::ParamSet ps;
    ps.add("mlp.fc1.W", {4, 8},
           std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0,  //
                               0, 1, 0, 0, 0, 0, 0, 0,  //
                               0, 0, 1, 0, 0, 0, 0, 0,  //
                               0, 0, 0, 1, 0, 0, 0, 0});
    ps.add("mlp.fc1.b", {4}, std::vector<double>(4, 0.0));
    ps.add("mlp.fc2.W", {2, 4}, std::vector<double>{1, 1, 0, 0, 0, 0, 1, 1});
    ps.add("mlp.fc2.b", {2}, std::vector<double>{0.5, -0.5});
    std::array<Value, 4> pooled = {
        ad::make_tensor({2}, std::vector<double>{1, 2}),
        ad::make_tensor({2}, std::vector<double>{3, 4}),
        ad::make_tensor({2}, std::vector<double>{5, 6}),
        ad::make_tensor({2}, std::vector<double>{7, 8})};
    auto out = mlp_fuse(pooled, ps);
    // fc1 output = (1,2,3,4); fc2 => (1+2+0.5, 3+4-0.5)
    CHECK(out->data == std::vector<double>{3.5, 6.5});
  }
  {
    ad::ParamSet ps;
    add_mlp_params(ps, 512, 2);
    std::array<Value, 4> pooled;
    for (int p = 0; p < 4; ++p) pooled[p] = ad::make_tensor({512}, 0.1);
    CHECK(mlp_fuse(pooled, ps)->shape == std::vector<int>{512});
  }
}

TEST_CASE("margin_contrastive_loss hand values and properties") {
  auto d = [](double v) { return ad::make_tensor({1}, std::vector<double>{v}); };
  CHECK(margin_contrastive_loss({d(0.0)}, {0}, 1.0)->data[0] == doctest::Approx(0.0));
  CHECK(margin_contrastive_loss({d(1.0)}, {1}, 1.0)->data[0] == doctest::Approx(0.0));
  CHECK(margin_contrastive_loss({d(0.3)}, {1}, 1.0)->data[0] ==
        doctest::Approx(0.49).epsilon(1e-9));

  // non-negative; zero iff positives at 0 and negatives beyond margin
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Value> ds;
    std::vector<int> ys;
    for (int i = 0; i < 6; ++i) {
      ds.push_back(d(rng.uniform(0.0, 2.0)));
      ys.push_back(rng.uniform() < 0.5 ? 0 : 1);
    }
    CHECK(margin_contrastive_loss(ds, ys, 1.0)->data[0] >= 0.0);
  }
  CHECK(margin_contrastive_loss({d(0.0), d(1.5)}, {0, 1}, 1.0)->data[0] == 0.0);
  CHECK(margin_contrastive_loss({d(0.1), d(1.5)}, {0, 1}, 1.0)->data[0] > 0.0);
  CHECK(margin_contrastive_loss({d(0.0), d(0.9)}, {0, 1}, 1.0)->data[0] > 0.0);

  CHECK_THROWS_WITH_AS(margin_contrastive_loss({d(1.0)}, {2}, 1.0),
                       doctest::Contains("label"), ModelError);
  CHECK_THROWS_WITH_AS(margin_contrastive_loss({d(1.0)}, {0}, 0.0),
                       doctest::Contains("margin"), ModelError);
}

TEST_CASE("nt_xent_loss hand values") {
  auto vec = [](std::vector<double> v) {
    int n = int(v.size());
    return ad::make_tensor({n}, std::move(v));
  };
  {
    // N=2, all four distances zero -> L = 0
    auto a = vec({1.0, 2.0});
    auto loss = nt_xent_loss({a, a}, {a, a}, 1.0);
    CHECK(loss->data[0] == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    // d(i,i+) = 0, d(i,j+) = 10 -> L = -10
    auto z1 = vec({0.0, 0.0});
    auto z2 = vec({10.0, 0.0});
    auto loss = nt_xent_loss({z1, z2}, {z1, z2}, 1.0);
    CHECK(loss->data[0] == doctest::Approx(-10.0).epsilon(1e-9));
  }
  CHECK_THROWS_WITH_AS(nt_xent_loss({vec({1.0})}, {vec({1.0})}, 1.0),
                       doctest::Contains("N >= 2"), ModelError);
}

TEST_CASE("nt_xent_loss strictly decreases as a positive distance shrinks") {
  auto vec = [](std::vector<double> v) {
    int n = int(v.size());
    return ad::make_tensor({n}, std::move(v));
  };
  // orthogonal construction: shrinking t changes d(1,1+) directly; the huge
  // separation R makes the cross terms insensitive
  double R = 1000.0;
  auto loss_at = [&](double t) {
    auto z1 = vec({0.0, 0.0});
    auto z1p = vec({t, 0.0});
    auto z2 = vec({0.0, R});
    auto z2p = vec({0.0, R});
    return nt_xent_loss({z1, z2}, {z1p, z2p}, 1.0);
  };
  CHECK(loss_at(0.5)->data[0] < loss_at(1.0)->data[0]);
  CHECK(loss_at(0.1)->data[0] < loss_at(0.5)->data[0]);

  // gradient signs: positive on d_ii, negative on d_ij
  auto loss = loss_at(1.0);
  backward(loss);
  CHECK(loss->parents[0]->grad[0] > 0.0);   // d(1,1+)
  CHECK(loss->parents[1]->grad[0] < 0.0);   // d(1,2+)
  CHECK(loss->parents[2]->grad[0] < 0.0);   // d(2,1+)
  CHECK(loss->parents[3]->grad[0] > 0.0);   // d(2,2+)
}

TEST_CASE("both losses pass grad_check through encoder + fusion") {
  auto cfg = tiny_config();
  ExcitationConfig exc;
  auto params = init_encoder_params(cfg, 42);
  add_excitation_params(params, cfg, exc, 42);

  std::array<std::array<Value, 4>, 4> views;  // 2 subjects x 2 views
  for (int s = 0; s < 4; ++s)
    for (int p = 0; p < 4; ++p) views[s][p] = random_image(3, 4, 100 + 10 * s + p);

  auto fingerprints = [&](const ad::ParamSet& ps) {
    std::vector<Value> zs;
    for (int s = 0; s < 4; ++s) {
      std::array<Value, 4> maps;
      for (int p = 0; p < 4; ++p) maps[p] = encode_partition(views[s][p], ps, cfg);
      zs.push_back(excitation_fuse(maps, ps, exc).fingerprint);
    }
    return zs;
  };

  auto f_margin = [&](const ad::ParamSet& ps) {
    auto zs = fingerprints(ps);
    std::vector<Value> dists = {ad::euclidean_distance(zs[0], zs[1]),
                                ad::euclidean_distance(zs[0], zs[2]),
                                ad::euclidean_distance(zs[2], zs[3])};
    return margin_contrastive_loss(dists, {0, 1, 0}, 1.0);
  };
  CHECK(grad_check(f_margin, params, 1e-5) < 1e-4);

  auto f_ntxent = [&](const ad::ParamSet& ps) {
    auto zs = fingerprints(ps);
    return nt_xent_loss({zs[0], zs[2]}, {zs[1], zs[3]}, 0.5);
  };
  CHECK(grad_check(f_ntxent, params, 1e-5) < 1e-4);
}
