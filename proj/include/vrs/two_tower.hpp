#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "vrs/core_model.hpp"
#include "vrs/mlp.hpp"

namespace vrs {

struct ClickthroughExample {
  std::vector<double> user_features;
  std::vector<double> ad_features;
  int label = 0;  // click flag
};

struct TwoTowerConfig {
  std::vector<int> user_layers{16, 16, 8};
  std::vector<int> ad_layers{12, 8};
  std::vector<int> interaction_layers{16, 8, 1};
  double learning_rate = 0.05;
  int epochs = 60;
  int batch_size = 32;
  std::uint64_t seed = 1;

  void validate() const;  // throws std::invalid_argument
};

// Click predictor with separate user and ad towers feeding an interaction
// head. The user tower is evaluable standalone; its output is the served
// user embedding.
class TwoTowerModel {
 public:
  static TwoTowerModel init(const TwoTowerConfig& config);

  std::vector<double> user_embedding(std::span<const double> user_features) const;
  double logit(std::span<const double> user_features,
               std::span<const double> ad_features) const;
  double predict(std::span<const double> user_features,
                 std::span<const double> ad_features) const;  // click probability

  int embedding_dim() const { return user_arch.output_size(); }

  nlohmann::json to_json() const;
  static TwoTowerModel from_json(const nlohmann::json& j);

  Mlp user_arch;
  Mlp ad_arch;
  Mlp interaction_arch;
};

struct TwoTowerTrainStats {
  double initial_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;
  std::vector<double> epoch_losses;
};

// Mini-batch gradient descent on mean binary cross entropy. Requires at
// least one example of each label; throws std::invalid_argument otherwise.
// With zero epochs the freshly initialized weights are returned unchanged.
// An explicit starting point can replace the seeded initialization.
TwoTowerModel train_two_tower(std::span<const ClickthroughExample> examples,
                              const TwoTowerConfig& config,
                              TwoTowerTrainStats* stats = nullptr,
                              const TwoTowerModel* init = nullptr);

// Precomputed user embeddings served at request time.
struct EmbeddingStore {
  std::map<std::int64_t, std::vector<double>> entries;
  int version = 0;

  const std::vector<double>& at(std::int64_t user_id) const;
  std::string to_csv() const;
  static EmbeddingStore from_csv(std::istream& in);
};

// Recomputes every entry from scratch: new users gain entries, removed users
// drop out, and the version stamp increments.
void refresh_store(const TwoTowerModel& model, std::span<const UserRecord> users,
                   const std::function<std::vector<double>(const UserRecord&)>& featurize,
                   EmbeddingStore& store);

}  // namespace vrs
