#include "vrs/two_tower.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <stdexcept>

#include "vrs/rng.hpp"

namespace vrs {

void TwoTowerConfig::validate() const {
  if (user_layers.size() < 2 || ad_layers.size() < 2 || interaction_layers.size() < 2) {
    throw std::invalid_argument("TwoTowerConfig: towers need at least two layer sizes");
  }
  if (interaction_layers.front() != user_layers.back() + ad_layers.back()) {
    throw std::invalid_argument(
        "TwoTowerConfig: interaction input must equal concatenated tower outputs");
  }
  if (interaction_layers.back() != 1) {
    throw std::invalid_argument("TwoTowerConfig: interaction output must be a single logit");
  }
  if (learning_rate <= 0.0) throw std::invalid_argument("TwoTowerConfig: learning_rate <= 0");
  if (epochs < 0) throw std::invalid_argument("TwoTowerConfig: negative epochs");
  if (batch_size < 1) throw std::invalid_argument("TwoTowerConfig: batch_size < 1");
}

TwoTowerModel TwoTowerModel::init(const TwoTowerConfig& config) {
  config.validate();
  TwoTowerModel m;
  // Tower outputs are linear so the served embedding keeps the weaker latent
  // directions instead of saturating them away; the sigmoid lives on the
  // click head.
  m.user_arch = Mlp(config.user_layers, Activation::Tanh, Activation::Identity,
                    derive_seed(config.seed, 11));
  m.ad_arch = Mlp(config.ad_layers, Activation::Tanh, Activation::Identity,
                  derive_seed(config.seed, 12));
  m.interaction_arch = Mlp(config.interaction_layers, Activation::Tanh, Activation::Identity,
                           derive_seed(config.seed, 13));
  return m;
}

std::vector<double> TwoTowerModel::user_embedding(std::span<const double> user_features) const {
  return user_arch.forward(user_features);
}

double TwoTowerModel::logit(std::span<const double> user_features,
                            std::span<const double> ad_features) const {
  const std::vector<double> ue = user_arch.forward(user_features);
  const std::vector<double> ae = ad_arch.forward(ad_features);
  std::vector<double> joint;
  joint.reserve(ue.size() + ae.size());
  joint.insert(joint.end(), ue.begin(), ue.end());
  joint.insert(joint.end(), ae.begin(), ae.end());
  return interaction_arch.forward(joint)[0];
}

double TwoTowerModel::predict(std::span<const double> user_features,
                              std::span<const double> ad_features) const {
  return sigmoid(logit(user_features, ad_features));
}

nlohmann::json TwoTowerModel::to_json() const {
  return nlohmann::json{{"user_arch", user_arch.to_json()},
                        {"ad_arch", ad_arch.to_json()},
                        {"interaction_arch", interaction_arch.to_json()}};
}

TwoTowerModel TwoTowerModel::from_json(const nlohmann::json& j) {
  TwoTowerModel m;
  m.user_arch = Mlp::from_json(j.at("user_arch"));
  m.ad_arch = Mlp::from_json(j.at("ad_arch"));
  m.interaction_arch = Mlp::from_json(j.at("interaction_arch"));
  return m;
}

TwoTowerModel train_two_tower(std::span<const ClickthroughExample> examples,
                              const TwoTowerConfig& config, TwoTowerTrainStats* stats,
                              const TwoTowerModel* init) {
  config.validate();
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& ex : examples) {
    (ex.label ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) {
    throw std::invalid_argument("train_two_tower: need at least one example of each label");
  }

  TwoTowerModel model = init ? *init : TwoTowerModel::init(config);
  Rng rng(derive_seed(config.seed, 14));
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  MlpGradients g_user = model.user_arch.make_gradients();
  MlpGradients g_ad = model.ad_arch.make_gradients();
  MlpGradients g_inter = model.interaction_arch.make_gradients();

  const int emb_user = model.user_arch.output_size();
  const int emb_ad = model.ad_arch.output_size();

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batch_start = 0;
    while (batch_start < order.size()) {
      const std::size_t batch_end =
          std::min(order.size(), batch_start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(batch_end - batch_start);
      g_user.zero();
      g_ad.zero();
      g_inter.zero();
      for (std::size_t bi = batch_start; bi < batch_end; ++bi) {
        const ClickthroughExample& ex = examples[order[bi]];
        Mlp::Trace tu, ta, ti;
        const std::vector<double> ue = model.user_arch.forward(ex.user_features, tu);
        const std::vector<double> ae = model.ad_arch.forward(ex.ad_features, ta);
        std::vector<double> joint;
        joint.reserve(ue.size() + ae.size());
        joint.insert(joint.end(), ue.begin(), ue.end());
        joint.insert(joint.end(), ae.begin(), ae.end());
        const double logit = model.interaction_arch.forward(joint, ti)[0];
        epoch_loss += bce_with_logit(logit, ex.label);

        const double dlogit = bce_logit_grad(logit, ex.label) * inv_batch;
        const std::vector<double> djoint =
            model.interaction_arch.backward(ti, std::span<const double>(&dlogit, 1), g_inter);
        // Split the joint gradient back into the towers. Tower outputs are
        // linear, so the joint gradient is already the pre-activation one.
        std::vector<double> du(djoint.begin(), djoint.begin() + emb_user);
        std::vector<double> da(djoint.begin() + emb_user, djoint.begin() + emb_user + emb_ad);
        model.user_arch.backward(tu, du, g_user);
        model.ad_arch.backward(ta, da, g_ad);
      }
      model.user_arch.apply_step(g_user, config.learning_rate);
      model.ad_arch.apply_step(g_ad, config.learning_rate);
      model.interaction_arch.apply_step(g_inter, config.learning_rate);
      batch_start = batch_end;
    }
    epoch_losses.push_back(epoch_loss / static_cast<double>(examples.size()));
  }

  if (stats) {
    stats->epoch_losses = epoch_losses;
    stats->initial_epoch_loss = epoch_losses.empty() ? 0.0 : epoch_losses.front();
    stats->final_epoch_loss = epoch_losses.empty() ? 0.0 : epoch_losses.back();
  }
  return model;
}

const std::vector<double>& EmbeddingStore::at(std::int64_t user_id) const {
  const auto it = entries.find(user_id);
  if (it == entries.end()) {
    throw std::out_of_range("EmbeddingStore: no embedding for user " +
                            std::to_string(user_id));
  }
  return it->second;
}

std::string EmbeddingStore::to_csv() const {
  std::size_t dim = 0;
  for (const auto& [id, emb] : entries) {
    dim = emb.size();
    break;
  }
  std::string out = "user_id";
  for (std::size_t i = 0; i < dim; ++i) out += ",e" + std::to_string(i);
  out += ",version\n";
  char buf[48];
  for (const auto& [id, emb] : entries) {
    out += std::to_string(id);
    for (double v : emb) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += "," + std::to_string(version) + "\n";
  }
  return out;
}

EmbeddingStore EmbeddingStore::from_csv(std::istream& in) {
  EmbeddingStore store;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    std::vector<double> fields;
    std::string cur;
    std::vector<std::string> raw;
    for (char c : line) {
      if (c == ',') {
        raw.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    raw.push_back(cur);
    const std::int64_t id = std::stoll(raw.front());
    std::vector<double> emb;
    for (std::size_t i = 1; i + 1 < raw.size(); ++i) emb.push_back(std::stod(raw[i]));
    store.version = std::stoi(raw.back());
    store.entries[id] = std::move(emb);
  }
  return store;
}

void refresh_store(const TwoTowerModel& model, std::span<const UserRecord> users,
                   const std::function<std::vector<double>(const UserRecord&)>& featurize,
                   EmbeddingStore& store) {
  std::map<std::int64_t, std::vector<double>> fresh;
  for (const UserRecord& u : users) {
    fresh[u.user_id] = model.user_embedding(featurize(u));
  }
  store.entries = std::move(fresh);
  ++store.version;
}

}  // namespace vrs
