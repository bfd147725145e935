#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vrs/core_model.hpp"
#include "vrs/mlp.hpp"

namespace vrs {

// Controller input: a PC-free user embedding plus the sign block of the ad's
// current delivery variance. Gender carries only sign(v_female); estimated
// race carries the sign for all four buckets.
struct ControllerState {
  std::vector<double> embedding;
  std::vector<double> signs;  // entries in {-1, 0, +1}

  std::vector<double> features() const;
};

// Throws std::invalid_argument on NaN variance entries.
ControllerState build_state(std::span<const double> embedding,
                            std::span<const double> variance_vec, PC pc);

// Terminal reward from flush-boundary noisy counter reads:
//   sum_i (after_i - before_i) * sign(v0_i) * (-1)
// Impressions to an underserved bucket (v0 < 0) score positive.
double compute_terminal_reward(std::span<const double> counts_before,
                               std::span<const double> counts_after,
                               std::span<const double> v0);

struct EpisodeStep {
  ControllerState state;
  ControllerAction action = ControllerAction::NoAdjustment;
  bool resulted_in_impression = false;
};

// k consecutive controller steps for one ad between two delivery-counter
// updates, with one aggregated terminal reward. v0 is the signed per-bucket
// variance vector live during the episode.
struct Episode {
  std::int64_t ad_id = 0;
  PC pc = PC::Gender;
  std::vector<double> v0;
  double terminal_reward = 0.0;
  std::vector<EpisodeStep> steps;
};

// Negates the variance-sign features and v0 and recomputes the terminal
// reward under the mirrored v0 (which flips its sign).
Episode mirror_episode(const Episode& e);

struct PreprocessSummary {
  std::size_t raw = 0;
  std::size_t dropped_no_adjustment = 0;
  std::size_t dropped_wrong_length = 0;
  std::size_t kept = 0;
  std::size_t mirrored = 0;
};

struct ReplayBuffer {
  PC pc = PC::Gender;
  int k = 0;
  std::vector<Episode> episodes;  // mirror pairs stored adjacently
  // Per bucket, episode counts with negative / positive v0 sign.
  std::vector<std::size_t> underserved_count;
  std::vector<std::size_t> overserved_count;

  void recount();
};

// Offline data preparation:
//  - episodes logged with any no-adjustment action are dropped (those
//    actions are not expected to lead to impressions);
//  - within survivors, adjust-up steps that did not impress are noise and
//    are removed; no-adjustment steps that impressed likewise;
//  - surviving episodes must then have exactly k (all adjust-up, all
//    impressed) steps;
//  - each survivor is mirrored and both copies are retained, so every bucket
//    has equally many underserved and overserved episodes.
// Throws std::runtime_error when nothing survives (more data needed).
ReplayBuffer preprocess(std::span<const Episode> raw, int k,
                        PreprocessSummary* summary = nullptr);

// Learned per-step reward f(S|theta) for the adjust-up action. The
// no-adjustment branch is exactly zero and never evaluates the net.
struct RewardNet {
  PC pc = PC::Gender;
  int k = 0;  // aggregation level the training data used
  Mlp net;

  double value(const ControllerState& state) const;  // f(S|theta)
  double action_value(const ControllerState& state, ControllerAction a) const;

  nlohmann::json to_json() const;
  static RewardNet from_json(const nlohmann::json& j);
};

// Greedy policy: adjust-up iff f(S|theta) > 0; ties resolve conservatively
// to no-adjustment.
ControllerAction act(const RewardNet& net, const ControllerState& state);

struct RewardTrainConfig {
  std::vector<int> hidden{32, 16};
  double alpha = 8e-5;
  int update_frequency = 64;
  int max_updates = 60000;
  // Converged when relative improvement of the full-buffer loss stays below
  // convergence_tol for convergence_patience consecutive evaluations.
  double convergence_tol = 1e-4;
  int convergence_patience = 10;
  int eval_every = 1000;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct TrainingCurvePoint {
  int update = 0;
  double loss = 0.0;           // mean per-episode squared residual, train split
  double holdout_mean_abs_d = 0.0;
};

struct RewardTrainResult {
  RewardNet net;
  std::vector<TrainingCurvePoint> curve;
  int updates_run = 0;
  bool converged = false;
  std::vector<Episode> holdout;  // episodes reserved for evaluation
};

// Return decomposition: per update, accumulate the squared residual between
// the episode return estimate sum_{S in tau} f(S|theta) and the observed
// noisy terminal reward over update_frequency sampled trajectories, then take
// one gradient step. Throws std::runtime_error on divergence (alpha too
// large) or an unbalanced/empty buffer.
RewardTrainResult train_reward_net(const ReplayBuffer& buffer, const RewardTrainConfig& config);

// Batched return estimate: the same parameters applied to every step, summed.
double return_estimate(const RewardNet& net, const Episode& episode);

// Offline evaluation metric d = predicted adjust-up count - x, where
// x = (R + k) / 2 is the expected adjust-up count recovered from the episode
// reward; x stays fractional because R carries DP noise.
double adjust_up_difference(int predicted_count, double episode_reward, int k);

int predicted_adjust_ups(const RewardNet& net, const Episode& episode);
double mean_abs_adjust_up_difference(const RewardNet& net, std::span<const Episode> episodes,
                                     int k);

}  // namespace vrs
