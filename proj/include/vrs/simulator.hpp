#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "vrs/bid_adjustment.hpp"
#include "vrs/bisg.hpp"
#include "vrs/config.hpp"
#include "vrs/core_model.hpp"
#include "vrs/dp_counters.hpp"
#include "vrs/hrl_meta.hpp"
#include "vrs/rl_controller.hpp"
#include "vrs/two_tower.hpp"
#include "vrs/variance_metrics.hpp"
#include "vrs/world.hpp"

namespace vrs {

struct RequestEvent {
  int user_index = 0;
  std::vector<int> candidate_ad_indices;  // housing and non-housing mixed
  int slot_count = 1;
};

// The request stream is generated up front from its own seed; no controller
// output ever feeds request generation, so actions cannot influence the
// transitions into future states.
std::vector<RequestEvent> generate_request_stream(const World& world,
                                                  const SimLoopConfig& sim, long count,
                                                  std::uint64_t seed);

// Descending sort by adjusted total bid, ties broken by ascending ad_id;
// the first slot_count candidates win. Returns winning candidate positions.
std::vector<int> run_auction(std::span<const double> adjusted_totals,
                             std::span<const std::int64_t> ad_ids, int slot_count);

enum class Arm { Control, Test1, Test2 };
Arm arm_from_name(const std::string& name);  // throws ConfigError on unknown
const char* arm_name(Arm arm);

enum class PolicyMode { Random, Trained };

// Per-PC action source consulted for each housing candidate.
class Policy {
 public:
  virtual ~Policy() = default;
  // Called once per housing candidate before the per-PC queries.
  virtual void begin_candidate() {}
  virtual ControllerAction action(PC pc, const ControllerState& state) = 0;
};

// Uniform random behavior policy for data collection. One draw per housing
// candidate, shared across PCs, so the logged per-PC action is exactly the
// executed action.
class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(seed) {}
  void begin_candidate() override;
  ControllerAction action(PC pc, const ControllerState& state) override;

 private:
  Rng rng_;
  ControllerAction current_ = ControllerAction::NoAdjustment;
};

// Greedy policy over trained per-PC reward nets.
class TrainedPolicy : public Policy {
 public:
  explicit TrainedPolicy(std::map<PC, RewardNet> nets) : nets_(std::move(nets)) {}
  ControllerAction action(PC pc, const ControllerState& state) override;

 private:
  std::map<PC, RewardNet> nets_;
};

// Per-(housing ad, PC) measurement state: delivery counters (gender counts
// ground truth directly; race goes through the BISG pipeline), the daily
// DP-measured eligible distribution, and the signed variance vector v that
// is recomputed only at counter-flush boundaries.
struct PcTracker {
  PC pc = PC::Gender;
  std::optional<NoisyBucketCounter> gender_delivery;
  std::optional<BisgGroupState> race_delivery;
  NoisyBucketCounter eligible_counter;
  BucketDistribution eligible_dist;
  BucketDistribution delivery_dist;
  std::vector<double> v;  // signed delivery - eligible per bucket
  double scalar_variance = 0.0;
  bool variance_defined = false;
  double total_impressions = 0.0;  // clamped noisy total at last flush
  std::vector<double> counts_at_episode_start;
  std::vector<EpisodeStep> step_buffer;
  std::vector<long> exact_counts;  // audit channel, never read by controllers

  PcTracker(PC pc, std::size_t buckets, const SimulationConfig& cfg, std::uint64_t seed);
  std::vector<double> read_delivery_counts() const;

  // Post-flush bookkeeping: closes the pending episode (steps move into the
  // returned Episode; ad id is filled in by the caller), then recomputes the
  // signed v vector, the scalar shuffle-distance variance, and the snapshot
  // counts for the next episode.
  Episode complete_flush();
};

struct DayMetricsRow {
  int day = 0;
  PC pc = PC::Gender;
  std::optional<double> ncac;
  std::optional<double> coverage;
  double mean_variance = 0.0;
  int qualifying_ads = 0;
};

struct SimulatorResult {
  std::vector<DayMetricsRow> day_metrics;
  std::vector<VarianceReport> final_reports;
  std::vector<Episode> episodes;  // raw episode log (episode collection on)
  MultiplierCalibration calibration;

  struct Audit {
    long impressions = 0;
    long requests = 0;
    long action_counts[2] = {0, 0};  // indexed by ControllerAction
    bool non_housing_adjusted = false;
    long exact_impressions_per_ad_mismatches = 0;
    long timestep_violations = 0;
  } audit;
};

// One arm of one experiment run. The event loop is sequential by design:
// auction t+1 can depend on counters updated at t.
class Simulator {
 public:
  Simulator(const World& world, const SimulationConfig& config,
            const EmbeddingStore& store, std::uint64_t run_seed, Arm arm, PolicyMode mode,
            const std::map<PC, RewardNet>* nets, MultiplierCalibration calibration,
            bool collect_episodes);

  SimulatorResult run(std::span<const RequestEvent> events);

  // Exposed for targeted tests.
  std::vector<ImpressionEvent> run_request(const RequestEvent& event);
  void refresh_eligible();
  const PcTracker& tracker(int ad_index, PC pc) const;

 private:
  void snapshot_day(int day);
  void close_episode(int ad_index, PcTracker& t);
  void record_impression(const RequestEvent& event, int ad_index,
                         ControllerAction executed);
  std::vector<VarianceReport> current_reports(PC pc) const;
  const BucketDistribution& posterior_for(const UserRecord& u);

  const World& world_;
  SimulationConfig config_;
  const EmbeddingStore* store_;
  Arm arm_;
  PolicyMode mode_;
  BidLogic logic_;
  bool adjust_enabled_;
  bool collect_episodes_;
  MultiplierCalibration calibration_;
  std::unique_ptr<Policy> policy_;
  std::vector<std::vector<double>> embeddings_;  // by user index
  std::vector<int> housing_ads_;                 // ad indices
  // By ad index; entries stay null for non-housing ads.
  std::vector<std::array<std::unique_ptr<PcTracker>, kNumPcs>> trackers_;
  std::vector<BucketDistribution> posterior_cache_;  // (surname, zip) -> posterior
  std::vector<char> posterior_cached_;
  std::vector<long> per_ad_impressions_;
  long timestep_ = 0;
  SimulatorResult result_;
};

// Control-arm pre-pass over a dedicated request stream; records the to-top /
// to-bottom multiplier history and returns the P40/P15 calibration.
MultiplierCalibration run_calibration_pass(const World& world, const SimulationConfig& config,
                                           std::uint64_t seed);

}  // namespace vrs
