#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrs/bisg.hpp"
#include "vrs/config.hpp"
#include "vrs/core_model.hpp"
#include "vrs/two_tower.hpp"

namespace vrs {

// A generated synthetic world. Immutable after generation; safe to share
// read-only across concurrent simulation workers.
struct World {
  std::uint64_t seed = 0;
  SimulationConfig config;  // echo of the generating config
  SurnameTable surnames;
  GeoTable geo;
  // Q(surname | race), the generative side of the toy tables; kept so the
  // surname table stays exactly Bayes-consistent with the population.
  std::vector<std::vector<double>> surname_given_race;
  std::vector<UserRecord> users;
  std::vector<AdRecord> ads;

  // Derived indexes, rebuilt on load (not serialized).
  std::vector<std::vector<int>> audience;          // per ad: user indexes
  std::vector<std::vector<int>> eligible_ads;      // per user: ad indexes
  std::vector<std::vector<int>> eligible_housing;  // per user: housing ad indexes

  void build_indexes();

  // Model features, provenance-tagged. Ground-truth PC fields never appear.
  TaggedFeatures user_features(const UserRecord& u) const;
  TaggedFeatures ad_features(const AdRecord& a) const;
  int user_feature_dim() const { return config.two_tower.model.user_layers.front(); }

  // quality_bid reflects user experience: a scaled latent/affinity match plus
  // a small idiosyncratic term, fixed per (user, ad) pair.
  double quality_bid(const UserRecord& u, const AdRecord& a) const;
  // Deterministic part of the synthetic click model.
  double click_logit(const UserRecord& u, const AdRecord& a) const;

  nlohmann::json to_json() const;
  static World from_json(const nlohmann::json& j);
  void save_file(const std::string& path) const;
  static World load_file(const std::string& path);
};

// Deterministic: identical (config, seed) yield byte-identical worlds.
// Throws ConfigError when the config cannot produce valid audiences.
World generate_world(const SimulationConfig& config, std::uint64_t seed);

// Synthetic clickthrough examples: Bernoulli clicks with probability
// sigmoid(click_logit + noise). PC correlation flows only through the
// latent-preference means.
std::vector<ClickthroughExample> synth_clickthrough(const World& world, int n,
                                                    std::uint64_t seed);

struct UserSummarization {
  TwoTowerModel model;
  EmbeddingStore store;
  TwoTowerTrainStats stats;
};

// Trains the two-tower model on synthetic clicks and precomputes embeddings
// for every user. Seeded from the world seed, so every phase of an
// experiment sees identical embeddings.
UserSummarization build_embeddings(const World& world);

}  // namespace vrs
