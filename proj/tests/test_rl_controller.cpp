#include <cmath>
#include <random>

#include <stdexcept>

#include "doctest.h"
#include "vrs/rl_controller.hpp"
#include "vrs/rng.hpp"

using namespace vrs;

namespace {

ControllerState state_of(std::vector<double> emb, std::vector<double> signs) {
  ControllerState s;
  s.embedding = std::move(emb);
  s.signs = std::move(signs);
  return s;
}

Episode all_up_episode(PC pc, std::vector<double> v0, double reward, int k,
                       std::uint64_t seed = 1) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Episode e;
  e.pc = pc;
  e.v0 = std::move(v0);
  e.terminal_reward = reward;
  for (int i = 0; i < k; ++i) {
    EpisodeStep step;
    step.state = build_state(std::vector<double>{normal(rng), normal(rng)}, e.v0, pc);
    step.action = ControllerAction::AdjustUp;
    step.resulted_in_impression = true;
    e.steps.push_back(std::move(step));
  }
  return e;
}

// Synthetic recovery dataset: the hidden per-step reward is a deterministic
// linear function of the sign block, r* = sign(w . s) in {-1, +1}; episode
// rewards are k*r* plus Gaussian DP noise. The generating rule is the oracle.
struct RecoveryData {
  std::vector<Episode> raw;
  std::vector<double> w{0.8, -0.4, 0.2, -0.1};

  int hidden_reward(std::span<const double> signs) const {
    double dot = 0.0;
    for (std::size_t i = 0; i < signs.size(); ++i) dot += w[i] * signs[i];
    return dot > 0.0 ? 1 : -1;
  }
};

RecoveryData make_recovery_data(int episodes, int k, double noise_sigma,
                                std::uint64_t seed) {
  RecoveryData data;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int n = 0; n < episodes; ++n) {
    Episode e;
    e.pc = PC::EstimatedRace;
    e.v0.resize(4);
    for (double& v : e.v0) v = coin(rng) ? 0.1 : -0.1;
    const int r_star = data.hidden_reward(
        std::vector<double>{sign_of(e.v0[0]) * 1.0, sign_of(e.v0[1]) * 1.0,
                            sign_of(e.v0[2]) * 1.0, sign_of(e.v0[3]) * 1.0});
    e.terminal_reward = k * r_star + noise_sigma * normal(rng);
    for (int i = 0; i < k; ++i) {
      EpisodeStep step;
      step.state = build_state(
          std::vector<double>{normal(rng), normal(rng), normal(rng), normal(rng)}, e.v0,
          PC::EstimatedRace);
      step.action = ControllerAction::AdjustUp;
      step.resulted_in_impression = true;
      e.steps.push_back(std::move(step));
    }
    data.raw.push_back(std::move(e));
  }
  return data;
}

}  // namespace

TEST_CASE("build_state extracts the sign block per PC") {
  const std::vector<double> emb{0.5, -0.25};

  SUBCASE("gender keeps only the female sign") {
    const auto s = build_state(emb, std::vector<double>{0.07, -0.07}, PC::Gender);
    REQUIRE(s.signs.size() == 1);
    CHECK(s.signs[0] == -1.0);
    CHECK(s.embedding == emb);
  }
  SUBCASE("race keeps all four signs") {
    const auto s =
        build_state(emb, std::vector<double>{0.02, -0.01, 0.0, 0.03}, PC::EstimatedRace);
    CHECK(s.signs == std::vector<double>{1.0, -1.0, 0.0, 1.0});
  }
  SUBCASE("zero variance yields all-zero signs") {
    const auto s = build_state(emb, std::vector<double>{0.0, 0.0}, PC::Gender);
    CHECK(s.signs == std::vector<double>{0.0});
  }
  SUBCASE("NaN variance is rejected") {
    CHECK_THROWS_AS(
        build_state(emb, std::vector<double>{std::nan(""), 0.0}, PC::Gender),
        std::invalid_argument);
  }
  SUBCASE("wrong bucket count is rejected") {
    CHECK_THROWS_AS(build_state(emb, std::vector<double>{0.1}, PC::EstimatedRace),
                    std::invalid_argument);
  }
}

TEST_CASE("compute_terminal_reward scores deltas against starting signs") {
  SUBCASE("all impressions to the underserved bucket") {
    const std::vector<double> before{10.0, 10.0};
    const std::vector<double> after{10.0, 13.0};
    const std::vector<double> v0{0.1, -0.1};
    CHECK(compute_terminal_reward(before, after, v0) == doctest::Approx(3.0));
  }
  SUBCASE("two correct, one incorrect gives plus one") {
    const std::vector<double> before{5.0, 5.0};
    const std::vector<double> after{6.0, 7.0};  // 1 to overserved, 2 to underserved
    const std::vector<double> v0{0.2, -0.2};
    CHECK(compute_terminal_reward(before, after, v0) == doctest::Approx(1.0));
  }
  SUBCASE("zero starting variance zeroes the reward") {
    const std::vector<double> before{0.0, 0.0};
    const std::vector<double> after{4.0, 9.0};
    const std::vector<double> v0{0.0, 0.0};
    CHECK(compute_terminal_reward(before, after, v0) == doctest::Approx(0.0));
  }
}

TEST_CASE("preprocess filters, enforces length, and mirrors") {
  const int k = 3;

  SUBCASE("clean episode is kept with its mirror") {
    std::vector<Episode> raw{all_up_episode(PC::Gender, {0.1, -0.1}, 3.0, k)};
    PreprocessSummary summary;
    const ReplayBuffer buffer = preprocess(raw, k, &summary);
    CHECK(buffer.episodes.size() == 2);
    CHECK(summary.kept == 1);
    CHECK(summary.mirrored == 1);
    const Episode& mirror = buffer.episodes[1];
    CHECK(mirror.terminal_reward == doctest::Approx(-3.0));
    CHECK(mirror.v0 == std::vector<double>{-0.1, 0.1});
    CHECK(mirror.steps[0].state.signs[0] ==
          -buffer.episodes[0].steps[0].state.signs[0]);
  }
  SUBCASE("episodes containing a no-adjustment action are dropped") {
    Episode e = all_up_episode(PC::Gender, {0.1, -0.1}, 2.0, k);
    e.steps[1].action = ControllerAction::NoAdjustment;
    e.steps[1].resulted_in_impression = false;
    std::vector<Episode> raw{e, all_up_episode(PC::Gender, {0.1, -0.1}, 3.0, k)};
    PreprocessSummary summary;
    const ReplayBuffer buffer = preprocess(raw, k, &summary);
    CHECK(summary.dropped_no_adjustment == 1);
    CHECK(buffer.episodes.size() == 2);
  }
  SUBCASE("unimpressed adjust-up steps are noise and are removed") {
    Episode e = all_up_episode(PC::Gender, {0.1, -0.1}, 3.0, k);
    EpisodeStep noise_step;
    noise_step.state = e.steps[0].state;
    noise_step.action = ControllerAction::AdjustUp;
    noise_step.resulted_in_impression = false;
    e.steps.push_back(noise_step);
    const ReplayBuffer buffer = preprocess(std::vector<Episode>{e}, k);
    for (const Episode& kept : buffer.episodes) {
      CHECK(kept.steps.size() == static_cast<std::size_t>(k));
    }
  }
  SUBCASE("wrong-length survivors are dropped") {
    std::vector<Episode> raw{all_up_episode(PC::Gender, {0.1, -0.1}, 2.0, k),
                             all_up_episode(PC::Gender, {0.1, -0.1}, 2.0, k - 1)};
    PreprocessSummary summary;
    const ReplayBuffer buffer = preprocess(raw, k, &summary);
    CHECK(summary.dropped_wrong_length == 1);
    CHECK(buffer.episodes.size() == 2);
  }
  SUBCASE("empty survivor set is an error asking for more data") {
    Episode e = all_up_episode(PC::Gender, {0.1, -0.1}, 2.0, k);
    e.steps[0].action = ControllerAction::NoAdjustment;
    CHECK_THROWS_AS(preprocess(std::vector<Episode>{e}, k), std::runtime_error);
  }
}

TEST_CASE("preprocess invariants hold over a random corpus") {
  Rng rng(404);
  std::uniform_int_distribution<int> coin(0, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = 4;
  std::vector<Episode> raw;
  for (int n = 0; n < 200; ++n) {
    Episode e = all_up_episode(PC::EstimatedRace,
                               {0.1 * (coin(rng) ? 1 : -1), 0.1 * (coin(rng) ? 1 : -1),
                                0.1 * (coin(rng) ? 1 : -1), 0.1 * (coin(rng) ? 1 : -1)},
                               normal(rng), k, derive_seed(9, n));
    // Sprinkle in noise steps and occasional no-adjustment actions.
    if (n % 3 == 0) {
      EpisodeStep s = e.steps[0];
      s.resulted_in_impression = false;
      e.steps.push_back(s);
    }
    if (n % 5 == 0) e.steps[0].action = ControllerAction::NoAdjustment;
    raw.push_back(std::move(e));
  }
  const ReplayBuffer buffer = preprocess(raw, k);
  // Every surviving episode has exactly k adjust-up impressed steps.
  for (const Episode& e : buffer.episodes) {
    CHECK(e.steps.size() == static_cast<std::size_t>(k));
    for (const EpisodeStep& s : e.steps) {
      CHECK(s.action == ControllerAction::AdjustUp);
      CHECK(s.resulted_in_impression);
    }
  }
  // Mirror balance is exact per bucket.
  for (std::size_t b = 0; b < buffer.underserved_count.size(); ++b) {
    CHECK(buffer.underserved_count[b] == buffer.overserved_count[b]);
  }
}

TEST_CASE("act is greedy with a conservative tie and an exact zero branch") {
  // One linear layer lets the test pin f exactly: f = w . x + b.
  RewardNet net;
  net.pc = PC::Gender;
  net.k = 1;
  net.net = Mlp({3, 1}, Activation::Tanh, Activation::Identity, 1);
  const ControllerState s = state_of({1.0, 2.0}, {1.0});

  const auto set_f = [&](double w0, double bias) {
    std::vector<double> params{w0, 0.0, 0.0, bias};
    net.net.set_flat_params(params);
  };

  set_f(0.0, 0.4);
  CHECK(act(net, s) == ControllerAction::AdjustUp);
  set_f(0.0, -0.2);
  CHECK(act(net, s) == ControllerAction::NoAdjustment);
  set_f(0.0, 0.0);  // exact tie resolves to no-adjustment
  CHECK(act(net, s) == ControllerAction::NoAdjustment);

  // The no-adjustment branch is exactly zero no matter the weights.
  set_f(1e12, 1e12);
  CHECK(net.action_value(s, ControllerAction::NoAdjustment) == 0.0);
}

TEST_CASE("return estimate equals the step-wise sum of shared parameters") {
  RewardNet net;
  net.pc = PC::Gender;
  net.k = 5;
  net.net = Mlp({3, 8, 1}, Activation::Tanh, Activation::Identity, 77);
  const Episode e = all_up_episode(PC::Gender, {0.1, -0.1}, 2.0, 5);
  double manual = 0.0;
  for (const EpisodeStep& s : e.steps) manual += net.value(s.state);
  CHECK(return_estimate(net, e) == doctest::Approx(manual).epsilon(1e-9));
}

TEST_CASE("adjust-up difference identities") {
  // x = (R + k) / 2; d = predicted - x.
  CHECK(adjust_up_difference(2, 1.0, 3) == doctest::Approx(0.0));  // R=1,k=3 -> x=2
  CHECK(adjust_up_difference(3, 3.0, 3) == doctest::Approx(0.0));  // R=k -> x=k
  CHECK(adjust_up_difference(0, -3.0, 3) == doctest::Approx(0.0));  // R=-k -> x=0
  CHECK(adjust_up_difference(1, 0.6, 3) == doctest::Approx(1.0 - 1.8));
}

TEST_CASE("training gradient matches finite differences on a tiny instance") {
  const RecoveryData data = make_recovery_data(4, 3, 0.5, 2);
  const ReplayBuffer buffer = preprocess(data.raw, 3);
  RewardNet net;
  net.pc = buffer.pc;
  net.k = buffer.k;
  net.net = Mlp({8, 4, 1}, Activation::Tanh, Activation::Identity, 3);
  const Episode& tau = buffer.episodes.front();

  const auto loss = [&] {
    const double resid = return_estimate(net, tau) - tau.terminal_reward;
    return resid * resid;
  };

  MlpGradients grads = net.net.make_gradients();
  std::vector<Mlp::Trace> traces(tau.steps.size());
  double g_hat = 0.0;
  for (std::size_t i = 0; i < tau.steps.size(); ++i) {
    const auto f = tau.steps[i].state.features();
    g_hat += net.net.forward(f, traces[i])[0];
  }
  const double dout = 2.0 * (g_hat - tau.terminal_reward);
  for (const auto& tr : traces) {
    net.net.backward(tr, std::span<const double>(&dout, 1), grads);
  }
  std::vector<double> analytic;
  std::vector<double> numeric;
  {
    std::vector<double> params = net.net.flat_params();
    for (std::size_t l = 0; l < grads.w.size(); ++l) {
      analytic.insert(analytic.end(), grads.w[l].begin(), grads.w[l].end());
      analytic.insert(analytic.end(), grads.b[l].begin(), grads.b[l].end());
    }
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double orig = params[i];
      params[i] = orig + h;
      net.net.set_flat_params(params);
      const double up = loss();
      params[i] = orig - h;
      net.net.set_flat_params(params);
      const double down = loss();
      params[i] = orig;
      numeric.push_back((up - down) / (2.0 * h));
    }
    net.net.set_flat_params(params);
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1e-6});
    worst = std::max(worst, std::fabs(analytic[i] - numeric[i]) / scale);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("reward learning recovers a known per-step rule from noisy returns") {
  const int k = 5;
  const RecoveryData data = make_recovery_data(700, k, 0.5, 11);
  const ReplayBuffer buffer = preprocess(data.raw, k);

  RewardTrainConfig cfg;
  cfg.hidden = {16, 8};
  cfg.alpha = 8e-5;
  cfg.update_frequency = 16;
  cfg.max_updates = 12000;
  cfg.eval_every = 50;
  cfg.convergence_patience = 20;
  cfg.holdout_fraction = 0.25;
  cfg.seed = 21;
  const RewardTrainResult result = train_reward_net(buffer, cfg);
  REQUIRE_FALSE(result.holdout.empty());

  // Sign recovery on held-out states against the generating rule.
  long correct = 0;
  long total = 0;
  for (const Episode& e : result.holdout) {
    for (const EpisodeStep& s : e.steps) {
      const int predicted = result.net.value(s.state) > 0.0 ? 1 : -1;
      if (predicted == data.hidden_reward(s.state.signs)) ++correct;
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);

  // Offline evaluation: held-out mean |d| within a tenth of the episode length.
  CHECK(mean_abs_adjust_up_difference(result.net, result.holdout, k) <= 0.1 * k);

  // The training curve's |d| improves from the first third to the last.
  REQUIRE(result.curve.size() >= 3);
  const std::size_t third = result.curve.size() / 3;
  double early = 0.0;
  double late = 0.0;
  for (std::size_t i = 0; i < third; ++i) early += result.curve[i].holdout_mean_abs_d;
  for (std::size_t i = result.curve.size() - third; i < result.curve.size(); ++i) {
    late += result.curve[i].holdout_mean_abs_d;
  }
  CHECK(late / third < early / third);
}

TEST_CASE("single mirrored pair drives f to opposite unit values") {
  // One episode with k=1 and R=1 plus its mirror: f converges toward +1 on
  // the original state and -1 on the mirrored one.
  Episode e = all_up_episode(PC::Gender, {0.1, -0.1}, 1.0, 1, 55);
  const ReplayBuffer buffer = preprocess(std::vector<Episode>{e}, 1);
  REQUIRE(buffer.episodes.size() == 2);

  RewardTrainConfig cfg;
  cfg.hidden = {8};
  cfg.alpha = 5e-3;
  cfg.update_frequency = 4;
  cfg.max_updates = 4000;
  cfg.eval_every = 100;
  cfg.holdout_fraction = 0.0;
  cfg.seed = 5;
  const RewardTrainResult result = train_reward_net(buffer, cfg);

  const double f_orig = result.net.value(buffer.episodes[0].steps[0].state);
  const double f_mirror = result.net.value(buffer.episodes[1].steps[0].state);
  CHECK(f_orig == doctest::Approx(1.0).epsilon(0.1));
  CHECK(f_mirror == doctest::Approx(-1.0).epsilon(0.1));
}

TEST_CASE("training rejects divergent rates and unbalanced buffers") {
  const RecoveryData data = make_recovery_data(40, 3, 0.5, 31);
  ReplayBuffer buffer = preprocess(data.raw, 3);

  SUBCASE("huge alpha diverges with a clear error") {
    RewardTrainConfig cfg;
    cfg.alpha = 1e3;
    cfg.max_updates = 2000;
    CHECK_THROWS_WITH_AS(train_reward_net(buffer, cfg),
                         "train_reward_net: loss diverged; alpha too large",
                         std::runtime_error);
  }
  SUBCASE("sign imbalance is rejected") {
    buffer.episodes.push_back(buffer.episodes.front());  // break the mirror balance
    buffer.recount();
    RewardTrainConfig cfg;
    CHECK_THROWS_AS(train_reward_net(buffer, cfg), std::runtime_error);
  }
  SUBCASE("empty buffer is rejected") {
    ReplayBuffer empty;
    CHECK_THROWS_AS(train_reward_net(empty, RewardTrainConfig{}), std::runtime_error);
  }
}
