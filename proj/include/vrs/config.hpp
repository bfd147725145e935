#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrs/bid_adjustment.hpp"
#include "vrs/core_model.hpp"
#include "vrs/dp_counters.hpp"
#include "vrs/hrl_meta.hpp"
#include "vrs/rl_controller.hpp"
#include "vrs/two_tower.hpp"

namespace vrs {

// Thrown for bad user-supplied configuration; maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WorldGenConfig {
  int user_count = 5000;
  int ad_count = 240;
  double housing_fraction = 0.2;
  int zip_count = 12;
  int surname_count = 20;
  int latent_dim = 12;
  // Bucket-dependent latent means; this is what manufactures nonzero
  // untreated delivery variance for the system to reduce.
  double gender_bias = 0.9;
  double race_bias = 1.4;
  // Housing-ad quality affinities get a component along the bucket-mean
  // directions so their untreated delivery measurably skews.
  double pc_affinity_align = 0.8;
  double table_informativeness = 0.85;  // 0 = BISG tables uninformative
  int max_activity_weight = 4;
  double quality_scale = 1.2;
  double bid_min = 1.0;
  double bid_max = 3.0;
  double zip_keep_prob = 0.75;      // targeting breadth over zips
  double interest_band_width = 2.5;
  int min_audience = 50;
};

struct SimLoopConfig {
  long requests = 72000;
  int requests_per_day = 4500;
  int slot_count = 2;
  int candidates_per_request = 6;
  double housing_candidate_prob = 0.95;
  int episode_k = 3;         // gender delivery-counter batch = episode length
  int bisg_aggregation = 3;  // race-side aggregation level (independent knob)
  int calibration_auctions = 400;
};

struct TwoTowerPipelineConfig {
  TwoTowerConfig model;
  int examples = 40000;
  double click_noise = 0.5;
};

struct MetricsConfig {
  double variance_threshold = 0.10;  // standard reporting threshold
  double min_impressions = 25;       // 300 in production, scaled to desk size
};

struct SimulationConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  WorldGenConfig world;
  DPParams dp_delivery;  // batch_size follows sim.episode_k
  DPParams dp_eligible;
  SimLoopConfig sim;
  RewardTrainConfig rl;
  TwoTowerPipelineConfig two_tower;
  MetricsConfig metrics;
  BidLogic bid_logic = BidLogic::AdjustUpOnly;
  VotingScheme voting = VotingScheme::Equal;
  std::vector<PC> active_pcs{PC::Gender, PC::EstimatedRace};

  int days() const {
    return static_cast<int>((sim.requests + sim.requests_per_day - 1) / sim.requests_per_day);
  }

  void validate() const;  // throws ConfigError

  nlohmann::json to_json() const;
  // Starts from defaults and applies only the keys present, so configs can be
  // partial. Unknown keys raise ConfigError.
  static SimulationConfig from_json(const nlohmann::json& j);
  static SimulationConfig load_file(const std::string& path);
};

}  // namespace vrs
