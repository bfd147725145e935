#include "vrs/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "vrs/rng.hpp"

namespace vrs {

namespace {

constexpr std::size_t kRaceBuckets = 4;

std::size_t sample_discrete(Rng& rng, const std::vector<double>& probs) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

// Row of weights exp(spread * z) normalized; spread 0 gives the uniform row.
std::vector<double> peaked_row(Rng& rng, std::size_t n, double spread) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> row(n);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(spread * normal(rng));
    total += v;
  }
  for (double& v : row) v /= total;
  return row;
}

// Sign patterns giving each race bucket a distinct latent direction.
constexpr int kRacePattern[4][4] = {
    {+1, +1, +1, +1},
    {+1, -1, +1, -1},
    {+1, +1, -1, -1},
    {+1, -1, -1, +1},
};

std::vector<double> latent_mean(const WorldGenConfig& w, int gender, int race) {
  std::vector<double> mean(static_cast<std::size_t>(w.latent_dim), 0.0);
  const int gender_dims = w.latent_dim / 2;
  const double g_sign = gender == kFemale ? 1.0 : -1.0;
  for (int d = 0; d < gender_dims; ++d) {
    mean[static_cast<std::size_t>(d)] = g_sign * w.gender_bias;
  }
  for (int d = gender_dims; d < w.latent_dim; ++d) {
    mean[static_cast<std::size_t>(d)] =
        kRacePattern[race][(d - gender_dims) % 4] * w.race_bias;
  }
  return mean;
}

std::uint64_t pair_key(std::int64_t user_id, std::int64_t ad_id) {
  return splitmix64(static_cast<std::uint64_t>(user_id) * 0x9E3779B97F4A7C15ULL +
                    static_cast<std::uint64_t>(ad_id));
}

}  // namespace

void World::build_indexes() {
  audience.assign(ads.size(), {});
  eligible_ads.assign(users.size(), {});
  eligible_housing.assign(users.size(), {});
  for (std::size_t ai = 0; ai < ads.size(); ++ai) {
    for (std::size_t ui = 0; ui < users.size(); ++ui) {
      if (matches_targeting(users[ui], ads[ai].targeting)) {
        audience[ai].push_back(static_cast<int>(ui));
        eligible_ads[ui].push_back(static_cast<int>(ai));
        if (ads[ai].is_housing) eligible_housing[ui].push_back(static_cast<int>(ai));
      }
    }
  }
}

TaggedFeatures World::user_features(const UserRecord& u) const {
  TaggedFeatures f;
  const int dim = user_feature_dim();
  f.values.reserve(static_cast<std::size_t>(dim));
  f.sources.reserve(static_cast<std::size_t>(dim));
  for (double v : u.latent_preference) {
    f.values.push_back(v);
    f.sources.push_back(FeatureSource::LatentPreference);
  }
  // Benign filler features, deterministic per user.
  for (int j = static_cast<int>(u.latent_preference.size()); j < dim; ++j) {
    f.values.push_back(0.5 * hash_normal(static_cast<std::uint64_t>(u.user_id),
                                         1000 + static_cast<std::uint64_t>(j)));
    f.sources.push_back(FeatureSource::BenignNoise);
  }
  f.assert_pc_free();
  return f;
}

TaggedFeatures World::ad_features(const AdRecord& a) const {
  TaggedFeatures f;
  f.values = a.quality_affinity;
  f.sources.assign(f.values.size(), FeatureSource::AdAffinity);
  return f;
}

double World::quality_bid(const UserRecord& u, const AdRecord& a) const {
  double dot = 0.0;
  for (std::size_t d = 0; d < u.latent_preference.size(); ++d) {
    dot += u.latent_preference[d] * a.quality_affinity[d];
  }
  return config.world.quality_scale * dot +
         0.25 * hash_normal(pair_key(u.user_id, a.ad_id), 7);
}

double World::click_logit(const UserRecord& u, const AdRecord& a) const {
  double dot = 0.0;
  for (std::size_t d = 0; d < u.latent_preference.size(); ++d) {
    dot += u.latent_preference[d] * a.quality_affinity[d];
  }
  return dot;
}

World generate_world(const SimulationConfig& config, std::uint64_t seed) {
  config.validate();
  const WorldGenConfig& w = config.world;
  World world;
  world.seed = seed;
  world.config = config;
  world.config.seed = seed;

  Rng rng(derive_seed(seed, seed_stream::kWorld));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Toy census tables. Geo rows are the generative P(race | zip); the
  // surname table is derived by exact Bayes inversion from Q(surname | race)
  // and the population marginal, so the BISG model matches the population.
  const double spread = 2.0 * w.table_informativeness;
  world.geo.rows.reserve(static_cast<std::size_t>(w.zip_count));
  for (int z = 0; z < w.zip_count; ++z) {
    world.geo.rows.push_back(peaked_row(rng, kRaceBuckets, spread));
  }
  world.geo.marginal.assign(kRaceBuckets, 0.0);
  for (const auto& row : world.geo.rows) {
    for (std::size_t r = 0; r < kRaceBuckets; ++r) {
      world.geo.marginal[r] += row[r] / static_cast<double>(w.zip_count);
    }
  }
  world.geo.validate();

  world.surname_given_race.reserve(kRaceBuckets);
  for (std::size_t r = 0; r < kRaceBuckets; ++r) {
    world.surname_given_race.push_back(
        peaked_row(rng, static_cast<std::size_t>(w.surname_count), spread));
  }
  world.surnames.rows.assign(static_cast<std::size_t>(w.surname_count),
                             std::vector<double>(kRaceBuckets, 0.0));
  for (int s = 0; s < w.surname_count; ++s) {
    double total = 0.0;
    for (std::size_t r = 0; r < kRaceBuckets; ++r) {
      const double v =
          world.surname_given_race[r][static_cast<std::size_t>(s)] * world.geo.marginal[r];
      world.surnames.rows[static_cast<std::size_t>(s)][r] = v;
      total += v;
    }
    for (double& v : world.surnames.rows[static_cast<std::size_t>(s)]) v /= total;
  }
  world.surnames.validate();

  // Users.
  world.users.reserve(static_cast<std::size_t>(w.user_count));
  std::uniform_int_distribution<int> zip_dist(0, w.zip_count - 1);
  std::uniform_int_distribution<int> activity_dist(1, w.max_activity_weight);
  for (int i = 0; i < w.user_count; ++i) {
    UserRecord u;
    u.user_id = i;
    u.zip_id = zip_dist(rng);
    u.true_race = static_cast<int>(
        sample_discrete(rng, world.geo.rows[static_cast<std::size_t>(u.zip_id)]));
    u.true_gender = unif(rng) < 0.5 ? kMale : kFemale;
    u.surname_id = static_cast<int>(sample_discrete(
        rng, world.surname_given_race[static_cast<std::size_t>(u.true_race)]));
    const std::vector<double> mean = latent_mean(w, u.true_gender, u.true_race);
    u.latent_preference.resize(static_cast<std::size_t>(w.latent_dim));
    for (int d = 0; d < w.latent_dim; ++d) {
      u.latent_preference[static_cast<std::size_t>(d)] =
          mean[static_cast<std::size_t>(d)] + normal(rng);
    }
    u.activity_weight = activity_dist(rng);
    world.users.push_back(std::move(u));
  }

  // Ads.
  const int housing_count = static_cast<int>(
      std::lround(w.housing_fraction * static_cast<double>(w.ad_count)));
  std::uniform_real_distribution<double> bid_dist(w.bid_min, w.bid_max);
  std::uniform_int_distribution<int> coord_dist(0, w.latent_dim - 1);
  std::uniform_int_distribution<int> race_dist(0, 3);
  const double affinity_scale = 1.0 / std::sqrt(static_cast<double>(w.latent_dim));
  world.ads.reserve(static_cast<std::size_t>(w.ad_count));
  for (int i = 0; i < w.ad_count; ++i) {
    AdRecord a;
    a.ad_id = i;
    a.is_housing = i < housing_count;
    a.advertiser_bid_base = bid_dist(rng);
    a.quality_affinity.resize(static_cast<std::size_t>(w.latent_dim));
    for (double& v : a.quality_affinity) v = affinity_scale * normal(rng);
    if (a.is_housing && w.pc_affinity_align > 0.0) {
      // Pull the affinity toward one gender direction and one race direction
      // so untreated delivery skews by construction.
      const double g_sign = unif(rng) < 0.5 ? 1.0 : -1.0;
      const double r_sign = unif(rng) < 0.5 ? 1.0 : -1.0;
      const int race = race_dist(rng);
      const double mix = unif(rng);
      std::vector<double> dir(static_cast<std::size_t>(w.latent_dim), 0.0);
      const int gender_dims = w.latent_dim / 2;
      for (int d = 0; d < gender_dims; ++d) dir[static_cast<std::size_t>(d)] = g_sign * mix;
      for (int d = gender_dims; d < w.latent_dim; ++d) {
        dir[static_cast<std::size_t>(d)] =
            r_sign * (1.0 - mix) * kRacePattern[race][(d - gender_dims) % 4];
      }
      double norm = 0.0;
      for (double v : dir) norm += v * v;
      norm = std::sqrt(std::max(norm, 1e-12));
      for (int d = 0; d < w.latent_dim; ++d) {
        a.quality_affinity[static_cast<std::size_t>(d)] +=
            w.pc_affinity_align * dir[static_cast<std::size_t>(d)] / norm;
      }
    }

    // Targeting: retry until the audience clears the configured floor.
    bool placed = false;
    for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
      TargetingSpec spec;
      for (int z = 0; z < w.zip_count; ++z) {
        if (unif(rng) < w.zip_keep_prob) spec.allowed_zip_ids.push_back(z);
      }
      if (spec.allowed_zip_ids.empty()) {
        spec.allowed_zip_ids.push_back(zip_dist(rng));
      }
      spec.interest_coord = coord_dist(rng);
      const double center = normal(rng);
      spec.interest_lo = center - w.interest_band_width;
      spec.interest_hi = center + w.interest_band_width;
      int matched = 0;
      for (const UserRecord& u : world.users) {
        if (matches_targeting(u, spec)) ++matched;
        if (matched >= w.min_audience) break;
      }
      if (matched >= w.min_audience) {
        a.targeting = std::move(spec);
        placed = true;
      }
    }
    if (!placed) {
      throw ConfigError("generate_world: could not build a non-empty audience for ad " +
                        std::to_string(i) + "; loosen targeting knobs");
    }
    world.ads.push_back(std::move(a));
  }

  world.build_indexes();
  return world;
}

std::vector<ClickthroughExample> synth_clickthrough(const World& world, int n,
                                                    std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> user_dist(0, world.users.size() - 1);
  std::vector<ClickthroughExample> examples;
  examples.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(examples.size()) < n) {
    const UserRecord& u = world.users[user_dist(rng)];
    const auto& eligible = world.eligible_ads[static_cast<std::size_t>(u.user_id)];
    if (eligible.empty()) continue;
    std::uniform_int_distribution<std::size_t> ad_dist(0, eligible.size() - 1);
    const AdRecord& a = world.ads[static_cast<std::size_t>(eligible[ad_dist(rng)])];
    ClickthroughExample ex;
    ex.user_features = world.user_features(u).values;
    ex.ad_features = world.ad_features(a).values;
    const double p =
        sigmoid(world.click_logit(u, a) + world.config.two_tower.click_noise * normal(rng));
    ex.label = unif(rng) < p ? 1 : 0;
    examples.push_back(std::move(ex));
  }
  return examples;
}

UserSummarization build_embeddings(const World& world) {
  const auto examples = synth_clickthrough(world, world.config.two_tower.examples,
                                           derive_seed(world.seed, seed_stream::kClicks));
  TwoTowerConfig cfg = world.config.two_tower.model;
  cfg.seed = derive_seed(world.seed, seed_stream::kTwoTower);
  UserSummarization out;
  out.model = train_two_tower(examples, cfg, &out.stats);
  refresh_store(
      out.model, world.users,
      [&world](const UserRecord& u) { return world.user_features(u).values; }, out.store);
  return out;
}

nlohmann::json World::to_json() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = seed;
  j["config"] = config.to_json();
  j["geo_rows"] = geo.rows;
  j["geo_marginal"] = geo.marginal;
  j["surname_rows"] = surnames.rows;
  j["surname_given_race"] = surname_given_race;
  nlohmann::json users_j = nlohmann::json::array();
  for (const UserRecord& u : users) {
    users_j.push_back(nlohmann::json::array({u.user_id, u.surname_id, u.zip_id, u.true_gender,
                                             u.true_race, u.activity_weight,
                                             u.latent_preference}));
  }
  j["users"] = std::move(users_j);
  nlohmann::json ads_j = nlohmann::json::array();
  for (const AdRecord& a : ads) {
    ads_j.push_back(nlohmann::json::array(
        {a.ad_id, a.is_housing ? 1 : 0, a.advertiser_bid_base, a.quality_affinity,
         a.targeting.allowed_zip_ids, a.targeting.interest_coord, a.targeting.interest_lo,
         a.targeting.interest_hi}));
  }
  j["ads"] = std::move(ads_j);
  return j;
}

World World::from_json(const nlohmann::json& j) {
  World world;
  world.seed = j.at("seed").get<std::uint64_t>();
  world.config = SimulationConfig::from_json(j.at("config"));
  world.geo.rows = j.at("geo_rows").get<std::vector<std::vector<double>>>();
  world.geo.marginal = j.at("geo_marginal").get<std::vector<double>>();
  world.geo.validate();
  world.surnames.rows = j.at("surname_rows").get<std::vector<std::vector<double>>>();
  world.surnames.validate();
  world.surname_given_race =
      j.at("surname_given_race").get<std::vector<std::vector<double>>>();
  for (const auto& uj : j.at("users")) {
    UserRecord u;
    u.user_id = uj.at(0).get<std::int64_t>();
    u.surname_id = uj.at(1).get<int>();
    u.zip_id = uj.at(2).get<int>();
    u.true_gender = uj.at(3).get<int>();
    u.true_race = uj.at(4).get<int>();
    u.activity_weight = uj.at(5).get<int>();
    u.latent_preference = uj.at(6).get<std::vector<double>>();
    world.users.push_back(std::move(u));
  }
  for (const auto& aj : j.at("ads")) {
    AdRecord a;
    a.ad_id = aj.at(0).get<std::int64_t>();
    a.is_housing = aj.at(1).get<int>() != 0;
    a.advertiser_bid_base = aj.at(2).get<double>();
    a.quality_affinity = aj.at(3).get<std::vector<double>>();
    a.targeting.allowed_zip_ids = aj.at(4).get<std::vector<int>>();
    a.targeting.interest_coord = aj.at(5).get<int>();
    a.targeting.interest_lo = aj.at(6).get<double>();
    a.targeting.interest_hi = aj.at(7).get<double>();
    world.ads.push_back(std::move(a));
  }
  world.build_indexes();
  return world;
}

void World::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write world file '" + path + "'");
  out << to_json().dump() << "\n";
}

World World::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open world file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("world parse error: " + std::string(e.what()));
  }
  return from_json(j);
}

}  // namespace vrs
