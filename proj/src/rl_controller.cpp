#include "vrs/rl_controller.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vrs/rng.hpp"

namespace vrs {

std::vector<double> ControllerState::features() const {
  std::vector<double> f;
  f.reserve(embedding.size() + signs.size());
  f.insert(f.end(), embedding.begin(), embedding.end());
  f.insert(f.end(), signs.begin(), signs.end());
  return f;
}

ControllerState build_state(std::span<const double> embedding,
                            std::span<const double> variance_vec, PC pc) {
  if (variance_vec.size() != bucket_count(pc)) {
    throw std::invalid_argument("build_state: variance vector size != bucket count");
  }
  for (double v : variance_vec) {
    if (std::isnan(v)) throw std::invalid_argument("build_state: NaN variance");
  }
  ControllerState s;
  s.embedding.assign(embedding.begin(), embedding.end());
  if (pc == PC::Gender) {
    s.signs = {static_cast<double>(sign_of(variance_vec[kFemale]))};
  } else {
    s.signs.reserve(variance_vec.size());
    for (double v : variance_vec) s.signs.push_back(static_cast<double>(sign_of(v)));
  }
  return s;
}

double compute_terminal_reward(std::span<const double> counts_before,
                               std::span<const double> counts_after,
                               std::span<const double> v0) {
  if (counts_before.size() != counts_after.size() || counts_before.size() != v0.size()) {
    throw std::invalid_argument("compute_terminal_reward: length mismatch");
  }
  double r = 0.0;
  for (std::size_t i = 0; i < v0.size(); ++i) {
    r += (counts_after[i] - counts_before[i]) * sign_of(v0[i]) * (-1.0);
  }
  return r;
}

Episode mirror_episode(const Episode& e) {
  Episode m = e;
  for (double& v : m.v0) v = -v;
  for (EpisodeStep& step : m.steps) {
    for (double& s : step.state.signs) s = -s;
  }
  // Recomputing the reward under the mirrored v0 flips every term's sign.
  m.terminal_reward = -e.terminal_reward;
  return m;
}

void ReplayBuffer::recount() {
  const std::size_t buckets = bucket_count(pc);
  underserved_count.assign(buckets, 0);
  overserved_count.assign(buckets, 0);
  for (const Episode& e : episodes) {
    for (std::size_t b = 0; b < buckets && b < e.v0.size(); ++b) {
      const int s = sign_of(e.v0[b]);
      if (s < 0) ++underserved_count[b];
      if (s > 0) ++overserved_count[b];
    }
  }
}

ReplayBuffer preprocess(std::span<const Episode> raw, int k, PreprocessSummary* summary) {
  if (k < 1) throw std::invalid_argument("preprocess: k must be positive");
  PreprocessSummary local;
  local.raw = raw.size();
  ReplayBuffer buffer;
  buffer.k = k;
  if (!raw.empty()) buffer.pc = raw.front().pc;
  for (const Episode& e : raw) {
    const bool has_no_adjustment =
        std::any_of(e.steps.begin(), e.steps.end(), [](const EpisodeStep& s) {
          return s.action == ControllerAction::NoAdjustment;
        });
    if (has_no_adjustment) {
      ++local.dropped_no_adjustment;
      continue;
    }
    Episode kept;
    kept.ad_id = e.ad_id;
    kept.pc = e.pc;
    kept.v0 = e.v0;
    kept.terminal_reward = e.terminal_reward;
    for (const EpisodeStep& s : e.steps) {
      // Adjust-up steps that did not impress are noise; drop them.
      if (s.resulted_in_impression) kept.steps.push_back(s);
    }
    if (static_cast<int>(kept.steps.size()) != k) {
      ++local.dropped_wrong_length;
      continue;
    }
    ++local.kept;
    Episode mirrored = mirror_episode(kept);
    ++local.mirrored;
    buffer.episodes.push_back(std::move(kept));
    buffer.episodes.push_back(std::move(mirrored));
  }
  if (buffer.episodes.empty()) {
    throw std::runtime_error(
        "preprocess: no episodes survived filtering; collect more data "
        "(smaller k or more requests)");
  }
  buffer.recount();
  if (summary) *summary = local;
  return buffer;
}

double RewardNet::value(const ControllerState& state) const {
  const std::vector<double> f = state.features();
  return net.forward(f)[0];
}

double RewardNet::action_value(const ControllerState& state, ControllerAction a) const {
  // The no-adjustment branch is exactly zero by definition; the net is never
  // consulted for it.
  if (a == ControllerAction::NoAdjustment) return 0.0;
  return value(state);
}

nlohmann::json RewardNet::to_json() const {
  return nlohmann::json{{"pc", pc_name(pc)}, {"k", k}, {"net", net.to_json()}};
}

RewardNet RewardNet::from_json(const nlohmann::json& j) {
  RewardNet r;
  const auto pc = pc_from_name(j.at("pc").get<std::string>());
  if (!pc) throw std::invalid_argument("RewardNet::from_json: unknown pc");
  r.pc = *pc;
  r.k = j.at("k").get<int>();
  r.net = Mlp::from_json(j.at("net"));
  return r;
}

ControllerAction act(const RewardNet& net, const ControllerState& state) {
  return net.value(state) > 0.0 ? ControllerAction::AdjustUp
                                : ControllerAction::NoAdjustment;
}

double return_estimate(const RewardNet& net, const Episode& episode) {
  double g = 0.0;
  for (const EpisodeStep& s : episode.steps) g += net.value(s.state);
  return g;
}

double adjust_up_difference(int predicted_count, double episode_reward, int k) {
  const double x = (episode_reward + k) / 2.0;
  return static_cast<double>(predicted_count) - x;
}

int predicted_adjust_ups(const RewardNet& net, const Episode& episode) {
  int n = 0;
  for (const EpisodeStep& s : episode.steps) {
    if (act(net, s.state) == ControllerAction::AdjustUp) ++n;
  }
  return n;
}

double mean_abs_adjust_up_difference(const RewardNet& net, std::span<const Episode> episodes,
                                     int k) {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const Episode& e : episodes) {
    total += std::abs(adjust_up_difference(predicted_adjust_ups(net, e), e.terminal_reward, k));
  }
  return total / static_cast<double>(episodes.size());
}

namespace {

void check_balance(const ReplayBuffer& buffer) {
  for (std::size_t b = 0; b < buffer.underserved_count.size(); ++b) {
    if (buffer.underserved_count[b] != buffer.overserved_count[b]) {
      throw std::runtime_error("train_reward_net: buffer is not sign-balanced");
    }
  }
}

double mean_episode_loss(const RewardNet& net, std::span<const Episode> episodes) {
  if (episodes.empty()) return 0.0;
  double total = 0.0;
  for (const Episode& e : episodes) {
    const double resid = return_estimate(net, e) - e.terminal_reward;
    total += resid * resid;
  }
  return total / static_cast<double>(episodes.size());
}

}  // namespace

RewardTrainResult train_reward_net(const ReplayBuffer& buffer,
                                   const RewardTrainConfig& config) {
  if (buffer.episodes.empty()) {
    throw std::runtime_error("train_reward_net: empty replay buffer");
  }
  check_balance(buffer);
  const ControllerState& probe = buffer.episodes.front().steps.front().state;
  const int input_dim = static_cast<int>(probe.embedding.size() + probe.signs.size());

  std::vector<int> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(1);

  RewardTrainResult result;
  result.net.pc = buffer.pc;
  result.net.k = buffer.k;
  result.net.net =
      Mlp(sizes, Activation::Tanh, Activation::Identity, derive_seed(config.seed, 21));

  // Split holdout by mirror pair so an episode and its mirror stay together.
  Rng rng(derive_seed(config.seed, 22));
  const std::size_t pairs = buffer.episodes.size() / 2;
  std::vector<std::size_t> pair_order(pairs);
  std::iota(pair_order.begin(), pair_order.end(), 0);
  std::shuffle(pair_order.begin(), pair_order.end(), rng);
  const std::size_t holdout_pairs = std::min(
      pairs > 1 ? pairs - 1 : 0,
      static_cast<std::size_t>(std::floor(config.holdout_fraction * pairs)));
  std::vector<Episode> train;
  for (std::size_t pi = 0; pi < pairs; ++pi) {
    const std::size_t base = pair_order[pi] * 2;
    if (pi < holdout_pairs) {
      result.holdout.push_back(buffer.episodes[base]);
      result.holdout.push_back(buffer.episodes[base + 1]);
    } else {
      train.push_back(buffer.episodes[base]);
      train.push_back(buffer.episodes[base + 1]);
    }
  }
  // Odd tail (no mirror twin) trains.
  if (buffer.episodes.size() % 2 == 1) train.push_back(buffer.episodes.back());

  MlpGradients grads = result.net.net.make_gradients();
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);

  double best_eval = std::numeric_limits<double>::infinity();
  int stale_evals = 0;

  for (int update = 0; update < config.max_updates; ++update) {
    grads.zero();
    double update_loss = 0.0;
    for (int i = 0; i < config.update_frequency; ++i) {
      const Episode& tau = train[pick(rng)];
      // G_hat = sum over steps of f(S|theta), shared parameters per step.
      std::vector<Mlp::Trace> traces(tau.steps.size());
      double g_hat = 0.0;
      for (std::size_t s = 0; s < tau.steps.size(); ++s) {
        const std::vector<double> f = tau.steps[s].state.features();
        g_hat += result.net.net.forward(f, traces[s])[0];
      }
      const double resid = g_hat - tau.terminal_reward;
      update_loss += resid * resid;
      const double dout = 2.0 * resid;
      for (const Mlp::Trace& tr : traces) {
        result.net.net.backward(tr, std::span<const double>(&dout, 1), grads);
      }
    }
    if (!std::isfinite(update_loss) ||
        update_loss > 1e6 * static_cast<double>(config.update_frequency)) {
      throw std::runtime_error("train_reward_net: loss diverged; alpha too large");
    }
    result.net.net.apply_step(grads, config.alpha);
    ++result.updates_run;

    if ((update + 1) % config.eval_every == 0) {
      const double eval_loss = mean_episode_loss(result.net, train);
      TrainingCurvePoint point;
      point.update = update + 1;
      point.loss = eval_loss;
      point.holdout_mean_abs_d = mean_abs_adjust_up_difference(
          result.net, result.holdout.empty() ? train : result.holdout, buffer.k);
      result.curve.push_back(point);
      const double rel_improvement =
          (best_eval - eval_loss) / std::max(std::abs(best_eval), 1e-12);
      if (rel_improvement < config.convergence_tol) {
        ++stale_evals;
      } else {
        stale_evals = 0;
      }
      best_eval = std::min(best_eval, eval_loss);
      if (stale_evals >= config.convergence_patience) {
        result.converged = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace vrs
