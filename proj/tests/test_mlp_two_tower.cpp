#include <cmath>
#include <random>

#include <stdexcept>

#include "doctest.h"
#include "vrs/core_model.hpp"
#include "vrs/rng.hpp"
#include "vrs/two_tower.hpp"

using namespace vrs;

namespace {

// Central-difference gradient of a scalar loss over the flat parameter
// vector; the oracle for every analytic-gradient check.
template <typename LossFn>
std::vector<double> numeric_gradient(Mlp& net, LossFn loss, double h = 1e-6) {
  std::vector<double> params = net.flat_params();
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = params[i];
    params[i] = original + h;
    net.set_flat_params(params);
    const double up = loss();
    params[i] = original - h;
    net.set_flat_params(params);
    const double down = loss();
    params[i] = original;
    grad[i] = (up - down) / (2.0 * h);
  }
  net.set_flat_params(params);
  return grad;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-6});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

std::vector<double> flat_gradients(const Mlp& net, const MlpGradients& g) {
  std::vector<double> out;
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    out.insert(out.end(), g.w[l].begin(), g.w[l].end());
    out.insert(out.end(), g.b[l].begin(), g.b[l].end());
  }
  (void)net;
  return out;
}

// Linearly separable clickthrough set plus the logistic-regression oracle
// that freezes the accuracy bar.
std::vector<ClickthroughExample> separable_clicks(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ClickthroughExample> out;
  for (int i = 0; i < n; ++i) {
    ClickthroughExample ex;
    const int label = i % 2;
    ex.user_features.resize(4);
    for (double& v : ex.user_features) v = 0.3 * normal(rng);
    ex.user_features[0] += label ? 1.5 : -1.5;
    ex.ad_features.resize(2);
    for (double& v : ex.ad_features) v = 0.3 * normal(rng);
    ex.ad_features[0] += label ? 1.0 : -1.0;
    ex.label = label;
    out.push_back(std::move(ex));
  }
  return out;
}

double logistic_oracle_accuracy(std::span<const ClickthroughExample> data) {
  // Plain logistic regression on [user, ad] via gradient descent.
  const std::size_t d = data.front().user_features.size() + data.front().ad_features.size();
  std::vector<double> w(d + 1, 0.0);
  const auto feats = [&](const ClickthroughExample& ex) {
    std::vector<double> x(ex.user_features);
    x.insert(x.end(), ex.ad_features.begin(), ex.ad_features.end());
    x.push_back(1.0);
    return x;
  };
  for (int epoch = 0; epoch < 200; ++epoch) {
    std::vector<double> g(w.size(), 0.0);
    for (const auto& ex : data) {
      const auto x = feats(ex);
      double z = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
      const double err = sigmoid(z) - ex.label;
      for (std::size_t i = 0; i < w.size(); ++i) g[i] += err * x[i];
    }
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= 0.1 * g[i] / data.size();
  }
  long correct = 0;
  for (const auto& ex : data) {
    const auto x = feats(ex);
    double z = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) z += w[i] * x[i];
    if ((z > 0.0) == (ex.label == 1)) ++correct;
  }
  return static_cast<double>(correct) / data.size();
}

TwoTowerConfig tiny_config() {
  TwoTowerConfig cfg;
  cfg.user_layers = {4, 6, 3};
  cfg.ad_layers = {2, 3};
  cfg.interaction_layers = {6, 4, 1};
  cfg.learning_rate = 0.2;
  cfg.epochs = 40;
  cfg.batch_size = 16;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("mlp analytic gradients match central differences") {
  Rng rng(2023);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mlp net({3, 5, 2}, Activation::Tanh, Activation::Identity, derive_seed(17, trial));
    std::vector<double> x(3);
    for (double& v : x) v = normal(rng);
    std::vector<double> target(2);
    for (double& v : target) v = normal(rng);

    // Loss: squared error summed over outputs.
    const auto loss = [&] {
      const auto out = net.forward(x);
      double total = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        total += (out[i] - target[i]) * (out[i] - target[i]);
      }
      return total;
    };

    Mlp::Trace trace;
    const auto out = net.forward(x, trace);
    std::vector<double> dpre(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) dpre[i] = 2.0 * (out[i] - target[i]);
    MlpGradients grads = net.make_gradients();
    net.backward(trace, dpre, grads);

    const auto analytic = flat_gradients(net, grads);
    const auto numeric = numeric_gradient(net, loss);
    CHECK(max_rel_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("mlp is deterministic per seed and serializes exactly") {
  Mlp a({4, 3, 2}, Activation::Tanh, Activation::Sigmoid, 7);
  Mlp b({4, 3, 2}, Activation::Tanh, Activation::Sigmoid, 7);
  CHECK(a.flat_params() == b.flat_params());

  Mlp restored = Mlp::from_json(a.to_json());
  CHECK(restored.flat_params() == a.flat_params());

  const std::vector<double> x{0.1, -0.4, 0.9, 0.0};
  CHECK(a.forward(x) == restored.forward(x));
}

TEST_CASE("two-tower training separates a separable click set") {
  const auto data = separable_clicks(400, 31);
  CHECK(logistic_oracle_accuracy(data) >= 0.95);  // the bar is achievable

  TwoTowerTrainStats stats;
  const TwoTowerModel model = train_two_tower(data, tiny_config(), &stats);
  CHECK(stats.final_epoch_loss < stats.initial_epoch_loss);

  long correct = 0;
  for (const auto& ex : data) {
    const double p = model.predict(ex.user_features, ex.ad_features);
    if ((p > 0.5) == (ex.label == 1)) ++correct;
  }
  CHECK(static_cast<double>(correct) / data.size() >= 0.95);
}

TEST_CASE("zero epochs returns the initialized weights unchanged") {
  const auto data = separable_clicks(32, 5);
  TwoTowerConfig cfg = tiny_config();
  cfg.epochs = 0;
  const TwoTowerModel trained = train_two_tower(data, cfg);
  const TwoTowerModel fresh = TwoTowerModel::init(cfg);
  CHECK(trained.user_arch.flat_params() == fresh.user_arch.flat_params());
  CHECK(trained.ad_arch.flat_params() == fresh.ad_arch.flat_params());
  CHECK(trained.interaction_arch.flat_params() == fresh.interaction_arch.flat_params());
}

TEST_CASE("single-label datasets are rejected") {
  auto data = separable_clicks(20, 6);
  for (auto& ex : data) ex.label = 1;
  CHECK_THROWS_AS(train_two_tower(data, tiny_config()), std::invalid_argument);
}

TEST_CASE("flipped labels with a sign-symmetric init trace the same loss") {
  const auto data = separable_clicks(160, 77);
  auto flipped = data;
  for (auto& ex : flipped) ex.label = 1 - ex.label;

  TwoTowerConfig cfg = tiny_config();
  cfg.epochs = 12;

  const TwoTowerModel base = TwoTowerModel::init(cfg);
  // Negate the interaction head's output layer: the click logit flips sign,
  // which is exactly the BCE symmetry under label flipping.
  TwoTowerModel mirrored = base;
  auto params = mirrored.interaction_arch.flat_params();
  const int last_in = cfg.interaction_layers[cfg.interaction_layers.size() - 2];
  for (std::size_t i = params.size() - static_cast<std::size_t>(last_in) - 1;
       i < params.size(); ++i) {
    params[i] = -params[i];
  }
  mirrored.interaction_arch.set_flat_params(params);

  TwoTowerTrainStats stats_a;
  TwoTowerTrainStats stats_b;
  train_two_tower(data, cfg, &stats_a, &base);
  train_two_tower(flipped, cfg, &stats_b, &mirrored);
  REQUIRE(stats_a.epoch_losses.size() == stats_b.epoch_losses.size());
  for (std::size_t e = 0; e < stats_a.epoch_losses.size(); ++e) {
    CHECK(stats_a.epoch_losses[e] == doctest::Approx(stats_b.epoch_losses[e]).epsilon(1e-9));
  }
}

TEST_CASE("user embeddings are deterministic, shaped, and standalone") {
  TwoTowerConfig cfg = tiny_config();
  const TwoTowerModel model = TwoTowerModel::init(cfg);
  const std::vector<double> feats{0.2, -0.1, 0.5, 0.9};
  const auto e1 = model.user_embedding(feats);
  const auto e2 = model.user_embedding(feats);
  CHECK(e1 == e2);
  CHECK(static_cast<int>(e1.size()) == cfg.user_layers.back());

  // All-zero weights give an all-zero embedding.
  TwoTowerModel zeroed = model;
  auto params = zeroed.user_arch.flat_params();
  std::fill(params.begin(), params.end(), 0.0);
  zeroed.user_arch.set_flat_params(params);
  for (double v : zeroed.user_embedding(feats)) CHECK(v == 0.0);

  CHECK_THROWS_AS(model.user_embedding(std::vector<double>{1.0}), std::invalid_argument);
}

TEST_CASE("refresh_store recomputes entries and bumps the version") {
  TwoTowerConfig cfg = tiny_config();
  const TwoTowerModel model = TwoTowerModel::init(cfg);
  const auto featurize = [](const UserRecord& u) {
    return std::vector<double>{static_cast<double>(u.user_id), 0.0, 0.0, 0.0};
  };

  std::vector<UserRecord> users(3);
  for (int i = 0; i < 3; ++i) users[static_cast<std::size_t>(i)].user_id = i;

  EmbeddingStore store;
  refresh_store(model, users, featurize, store);
  CHECK(store.entries.size() == 3);
  CHECK(store.version == 1);

  users.push_back(UserRecord{});
  users.back().user_id = 9;
  refresh_store(model, users, featurize, store);
  CHECK(store.entries.size() == 4);
  CHECK(store.version == 2);
  CHECK(store.entries.count(9) == 1);

  // Removed user drops out; unchanged users keep identical embeddings.
  const auto before = store.at(1);
  users.pop_back();
  refresh_store(model, users, featurize, store);
  CHECK(store.entries.size() == 3);
  CHECK(store.version == 3);
  CHECK(store.entries.count(9) == 0);
  CHECK(store.at(1) == before);

  CHECK_THROWS_AS(store.at(42), std::out_of_range);
}

TEST_CASE("embedding store CSV round trip") {
  EmbeddingStore store;
  store.version = 3;
  store.entries[5] = {0.125, -2.5, 1e-7};
  store.entries[9] = {1.0, 2.0, 3.0};
  std::istringstream in(store.to_csv());
  const EmbeddingStore back = EmbeddingStore::from_csv(in);
  CHECK(back.version == 3);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.at(5) == store.at(5));
  CHECK(back.at(9) == store.at(9));
}

TEST_CASE("trained embeddings stay finite over a full store") {
  const auto data = separable_clicks(300, 8);
  const TwoTowerModel model = train_two_tower(data, tiny_config());
  Rng rng(12);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> feats(4);
    for (double& v : feats) v = normal(rng);
    for (double v : model.user_embedding(feats)) CHECK(std::isfinite(v));
  }
}
