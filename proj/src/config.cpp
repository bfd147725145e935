#include "vrs/config.hpp"

#include <fstream>
#include <set>

namespace vrs {

namespace {

void require_fraction(double v, const char* what) {
  if (!(v > 0.0 && v < 1.0)) {
    throw ConfigError(std::string(what) + " must lie in (0,1)");
  }
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) {
      throw ConfigError("unknown config key '" + scope + it.key() + "'");
    }
  }
}

nlohmann::json dp_to_json(const DPParams& p) {
  return {{"epsilon", p.epsilon},
          {"delta", p.delta},
          {"sensitivity", p.sensitivity},
          {"noise", p.noise == NoiseKind::Gaussian ? "gaussian" : "laplace"}};
}

void dp_from_json(const nlohmann::json& j, DPParams& p, const std::string& scope) {
  check_keys(j, {"epsilon", "delta", "sensitivity", "noise"}, scope);
  maybe(j, "epsilon", p.epsilon);
  maybe(j, "delta", p.delta);
  maybe(j, "sensitivity", p.sensitivity);
  if (j.contains("noise")) {
    const std::string n = j.at("noise").get<std::string>();
    if (n == "gaussian") {
      p.noise = NoiseKind::Gaussian;
    } else if (n == "laplace") {
      p.noise = NoiseKind::Laplace;
    } else {
      throw ConfigError("unknown noise kind '" + n + "'");
    }
  }
}

}  // namespace

void SimulationConfig::validate() const {
  if (schema_version != 1) throw ConfigError("unsupported schema_version");
  if (world.user_count < 1) throw ConfigError("world.users must be positive");
  if (world.ad_count < 1) throw ConfigError("world.ads must be positive");
  // housing_fraction 0 is allowed: the VRS becomes a no-op.
  if (!(world.housing_fraction >= 0.0 && world.housing_fraction < 1.0)) {
    throw ConfigError("world.housing_fraction must lie in [0,1)");
  }
  if (world.zip_count < 1 || world.surname_count < 1) {
    throw ConfigError("world table sizes must be positive");
  }
  if (world.latent_dim < 1) throw ConfigError("world.latent_dim must be positive");
  if (world.max_activity_weight < 1) {
    throw ConfigError("world.max_activity_weight must be positive");
  }
  require_positive(world.bid_min, "world.bid_min");
  if (world.bid_max < world.bid_min) throw ConfigError("world.bid_max < world.bid_min");
  require_fraction(world.zip_keep_prob, "world.zip_keep_prob");
  require_positive(world.interest_band_width, "world.interest_band_width");
  if (world.min_audience < 1) throw ConfigError("world.min_audience must be positive");

  if (sim.requests < 1) throw ConfigError("sim.requests must be positive");
  if (sim.requests_per_day < 1) throw ConfigError("sim.requests_per_day must be positive");
  if (sim.slot_count < 1) throw ConfigError("sim.slot_count must be positive");
  if (sim.candidates_per_request < sim.slot_count) {
    throw ConfigError("sim.candidates_per_request must be >= sim.slot_count");
  }
  require_fraction(sim.housing_candidate_prob, "sim.housing_candidate_prob");
  if (sim.episode_k < 1) throw ConfigError("sim.episode_k must be positive");
  if (sim.bisg_aggregation < 1) throw ConfigError("sim.bisg_aggregation must be positive");
  if (sim.calibration_auctions < 20) {
    throw ConfigError("sim.calibration_auctions must be at least 20");
  }

  try {
    DPParams d = dp_delivery;
    d.batch_size = sim.episode_k;
    d.validate();
    DPParams e = dp_eligible;
    e.batch_size = kManualFlush;
    e.validate();
  } catch (const std::invalid_argument& err) {
    throw ConfigError(err.what());
  }

  require_fraction(metrics.variance_threshold, "metrics.variance_threshold");
  if (metrics.min_impressions < 0) throw ConfigError("metrics.min_impressions < 0");

  if (two_tower.examples < 2) throw ConfigError("two_tower.examples too small");
  if (static_cast<std::size_t>(two_tower.model.ad_layers.front()) !=
      static_cast<std::size_t>(world.latent_dim)) {
    throw ConfigError("two_tower ad tower input must equal world.latent_dim");
  }
  if (two_tower.model.user_layers.front() < world.latent_dim) {
    throw ConfigError("two_tower user tower input must be >= world.latent_dim");
  }
  if (active_pcs.empty()) throw ConfigError("active_pcs must not be empty");
}

nlohmann::json SimulationConfig::to_json() const {
  nlohmann::json j;
  j["schema_version"] = schema_version;
  j["seed"] = seed;
  j["world"] = {
      {"users", world.user_count},
      {"ads", world.ad_count},
      {"housing_fraction", world.housing_fraction},
      {"zips", world.zip_count},
      {"surnames", world.surname_count},
      {"latent_dim", world.latent_dim},
      {"gender_bias", world.gender_bias},
      {"race_bias", world.race_bias},
      {"pc_affinity_align", world.pc_affinity_align},
      {"table_informativeness", world.table_informativeness},
      {"max_activity_weight", world.max_activity_weight},
      {"quality_scale", world.quality_scale},
      {"bid_min", world.bid_min},
      {"bid_max", world.bid_max},
      {"zip_keep_prob", world.zip_keep_prob},
      {"interest_band_width", world.interest_band_width},
      {"min_audience", world.min_audience},
  };
  j["dp_delivery"] = dp_to_json(dp_delivery);
  j["dp_eligible"] = dp_to_json(dp_eligible);
  j["sim"] = {
      {"requests", sim.requests},
      {"requests_per_day", sim.requests_per_day},
      {"slot_count", sim.slot_count},
      {"candidates_per_request", sim.candidates_per_request},
      {"housing_candidate_prob", sim.housing_candidate_prob},
      {"episode_k", sim.episode_k},
      {"bisg_aggregation", sim.bisg_aggregation},
      {"calibration_auctions", sim.calibration_auctions},
  };
  j["rl"] = {
      {"hidden", rl.hidden},
      {"alpha", rl.alpha},
      {"update_frequency", rl.update_frequency},
      {"max_updates", rl.max_updates},
      {"convergence_tol", rl.convergence_tol},
      {"convergence_patience", rl.convergence_patience},
      {"eval_every", rl.eval_every},
      {"holdout_fraction", rl.holdout_fraction},
  };
  j["two_tower"] = {
      {"user_layers", two_tower.model.user_layers},
      {"ad_layers", two_tower.model.ad_layers},
      {"interaction_layers", two_tower.model.interaction_layers},
      {"learning_rate", two_tower.model.learning_rate},
      {"epochs", two_tower.model.epochs},
      {"batch_size", two_tower.model.batch_size},
      {"examples", two_tower.examples},
      {"click_noise", two_tower.click_noise},
  };
  j["metrics"] = {
      {"variance_threshold", metrics.variance_threshold},
      {"min_impressions", metrics.min_impressions},
  };
  j["bid_logic"] = bid_logic_name(bid_logic);
  j["voting_scheme"] = voting_scheme_name(voting);
  std::vector<std::string> pcs;
  for (PC pc : active_pcs) pcs.push_back(pc_name(pc));
  j["active_pcs"] = pcs;
  return j;
}

SimulationConfig SimulationConfig::from_json(const nlohmann::json& j) {
  SimulationConfig c;
  check_keys(j,
             {"schema_version", "seed", "world", "dp_delivery", "dp_eligible", "sim", "rl",
              "two_tower", "metrics", "bid_logic", "voting_scheme", "active_pcs"},
             "");
  maybe(j, "schema_version", c.schema_version);
  maybe(j, "seed", c.seed);
  if (j.contains("world")) {
    const auto& w = j.at("world");
    check_keys(w,
               {"users", "ads", "housing_fraction", "zips", "surnames", "latent_dim",
                "gender_bias", "race_bias", "pc_affinity_align", "table_informativeness",
                "max_activity_weight", "quality_scale", "bid_min", "bid_max",
                "zip_keep_prob", "interest_band_width", "min_audience"},
               "world.");
    maybe(w, "users", c.world.user_count);
    maybe(w, "ads", c.world.ad_count);
    maybe(w, "housing_fraction", c.world.housing_fraction);
    maybe(w, "zips", c.world.zip_count);
    maybe(w, "surnames", c.world.surname_count);
    maybe(w, "latent_dim", c.world.latent_dim);
    maybe(w, "gender_bias", c.world.gender_bias);
    maybe(w, "race_bias", c.world.race_bias);
    maybe(w, "pc_affinity_align", c.world.pc_affinity_align);
    maybe(w, "table_informativeness", c.world.table_informativeness);
    maybe(w, "max_activity_weight", c.world.max_activity_weight);
    maybe(w, "quality_scale", c.world.quality_scale);
    maybe(w, "bid_min", c.world.bid_min);
    maybe(w, "bid_max", c.world.bid_max);
    maybe(w, "zip_keep_prob", c.world.zip_keep_prob);
    maybe(w, "interest_band_width", c.world.interest_band_width);
    maybe(w, "min_audience", c.world.min_audience);
  }
  if (j.contains("dp_delivery")) dp_from_json(j.at("dp_delivery"), c.dp_delivery, "dp_delivery.");
  if (j.contains("dp_eligible")) dp_from_json(j.at("dp_eligible"), c.dp_eligible, "dp_eligible.");
  if (j.contains("sim")) {
    const auto& s = j.at("sim");
    check_keys(s,
               {"requests", "requests_per_day", "slot_count", "candidates_per_request",
                "housing_candidate_prob", "episode_k", "bisg_aggregation",
                "calibration_auctions"},
               "sim.");
    maybe(s, "requests", c.sim.requests);
    maybe(s, "requests_per_day", c.sim.requests_per_day);
    maybe(s, "slot_count", c.sim.slot_count);
    maybe(s, "candidates_per_request", c.sim.candidates_per_request);
    maybe(s, "housing_candidate_prob", c.sim.housing_candidate_prob);
    maybe(s, "episode_k", c.sim.episode_k);
    maybe(s, "bisg_aggregation", c.sim.bisg_aggregation);
    maybe(s, "calibration_auctions", c.sim.calibration_auctions);
  }
  if (j.contains("rl")) {
    const auto& r = j.at("rl");
    check_keys(r,
               {"hidden", "alpha", "update_frequency", "max_updates", "convergence_tol",
                "convergence_patience", "eval_every", "holdout_fraction"},
               "rl.");
    maybe(r, "hidden", c.rl.hidden);
    maybe(r, "alpha", c.rl.alpha);
    maybe(r, "update_frequency", c.rl.update_frequency);
    maybe(r, "max_updates", c.rl.max_updates);
    maybe(r, "convergence_tol", c.rl.convergence_tol);
    maybe(r, "convergence_patience", c.rl.convergence_patience);
    maybe(r, "eval_every", c.rl.eval_every);
    maybe(r, "holdout_fraction", c.rl.holdout_fraction);
  }
  if (j.contains("two_tower")) {
    const auto& t = j.at("two_tower");
    check_keys(t,
               {"user_layers", "ad_layers", "interaction_layers", "learning_rate", "epochs",
                "batch_size", "examples", "click_noise"},
               "two_tower.");
    maybe(t, "user_layers", c.two_tower.model.user_layers);
    maybe(t, "ad_layers", c.two_tower.model.ad_layers);
    maybe(t, "interaction_layers", c.two_tower.model.interaction_layers);
    maybe(t, "learning_rate", c.two_tower.model.learning_rate);
    maybe(t, "epochs", c.two_tower.model.epochs);
    maybe(t, "batch_size", c.two_tower.model.batch_size);
    maybe(t, "examples", c.two_tower.examples);
    maybe(t, "click_noise", c.two_tower.click_noise);
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    check_keys(m, {"variance_threshold", "min_impressions"}, "metrics.");
    maybe(m, "variance_threshold", c.metrics.variance_threshold);
    maybe(m, "min_impressions", c.metrics.min_impressions);
  }
  if (j.contains("bid_logic")) {
    try {
      c.bid_logic = bid_logic_from_name(j.at("bid_logic").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("voting_scheme")) {
    try {
      c.voting = voting_scheme_from_name(j.at("voting_scheme").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (j.contains("active_pcs")) {
    c.active_pcs.clear();
    for (const auto& name : j.at("active_pcs")) {
      const auto pc = pc_from_name(name.get<std::string>());
      if (!pc) throw ConfigError("unknown pc '" + name.get<std::string>() + "'");
      c.active_pcs.push_back(*pc);
    }
  }
  c.validate();
  return c;
}

SimulationConfig SimulationConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }
  return from_json(j);
}

}  // namespace vrs
