#include "vrs/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "vrs/experiment.hpp"
#include "vrs/world.hpp"

namespace vrs {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

int report_error(const std::exception& e, int code) {
  std::cerr << "error: " << e.what() << "\n";
  return code;
}

// Runs the body, mapping validation errors to exit 2 and the rest to exit 1.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    return report_error(e, kExitValidation);
  } catch (const std::invalid_argument& e) {
    return report_error(e, kExitValidation);
  } catch (const nlohmann::json::exception& e) {
    return report_error(e, kExitValidation);
  } catch (const std::exception& e) {
    return report_error(e, kExitRuntime);
  }
}

SimulationConfig load_config_or_default(const std::string& path) {
  if (path.empty()) {
    SimulationConfig c;
    c.validate();
    return c;
  }
  return SimulationConfig::load_file(path);
}

void apply_overrides(SimulationConfig& config, const CommonOverrides& o) {
  if (o.seed) config.seed = *o.seed;
  if (o.days) {
    if (*o.days < 1) throw ConfigError("--days must be positive");
    config.sim.requests = static_cast<long>(*o.days) * config.sim.requests_per_day;
  }
  if (o.voting) config.voting = voting_scheme_from_name(*o.voting);
  if (o.pc) {
    if (*o.pc == "all") {
      config.active_pcs = {PC::Gender, PC::EstimatedRace};
    } else {
      const auto pc = pc_from_name(*o.pc);
      if (!pc) throw ConfigError("unknown pc '" + *o.pc + "'");
      config.active_pcs = {*pc};
    }
  }
  config.validate();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

}  // namespace

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 const CommonOverrides& overrides) {
  return guarded([&] {
    SimulationConfig config = load_config_or_default(config_path);
    apply_overrides(config, overrides);
    const World world = generate_world(config, config.seed);
    world.save_file(out_path);
    std::cout << "world: " << world.users.size() << " users, " << world.ads.size()
              << " ads -> " << out_path << "\n";
    return kExitOk;
  });
}

int cmd_collect(const std::string& world_path, const std::string& config_path,
                const std::string& out_path, const CommonOverrides& overrides) {
  return guarded([&] {
    const World world = World::load_file(world_path);
    SimulationConfig config =
        config_path.empty() ? world.config : SimulationConfig::load_file(config_path);
    apply_overrides(config, overrides);

    const UserSummarization summarization = build_embeddings(world);
    const ExperimentRun run = run_experiment(world, config, summarization.store, config.seed,
                                             Arm::Test1, PolicyMode::Random, nullptr);

    if (run.sim.episodes.empty()) {
      write_episode_log(out_path, {}, config.sim.episode_k, config.sim.bisg_aggregation);
      std::cerr << "warning: no episodes collected (no housing ads in rotation?)\n";
      return kExitOk;
    }

    // Preprocess per PC; the gender and race aggregation levels differ.
    std::vector<Episode> processed;
    nlohmann::json summary;
    for (PC pc : config.active_pcs) {
      std::vector<Episode> raw;
      for (const Episode& e : run.sim.episodes) {
        if (e.pc == pc) raw.push_back(e);
      }
      if (raw.empty()) continue;
      const int k = pc == PC::Gender ? config.sim.episode_k : config.sim.bisg_aggregation;
      PreprocessSummary s;
      const ReplayBuffer buffer = preprocess(raw, k, &s);
      processed.insert(processed.end(), buffer.episodes.begin(), buffer.episodes.end());
      summary[pc_name(pc)] = {{"raw", s.raw},
                              {"dropped_no_adjustment", s.dropped_no_adjustment},
                              {"dropped_wrong_length", s.dropped_wrong_length},
                              {"kept", s.kept},
                              {"mirrored", s.mirrored},
                              {"written", s.kept + s.mirrored}};
    }
    write_episode_log(out_path, processed, config.sim.episode_k, config.sim.bisg_aggregation);
    write_text_file(out_path + ".summary.json", summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return kExitOk;
  });
}

int cmd_train(const std::string& episodes_path, const std::string& pc,
              const std::string& config_path, const std::string& out_path,
              const CommonOverrides& overrides) {
  return guarded([&] {
    const auto pc_id = pc_from_name(pc);
    if (!pc_id) throw ConfigError("unknown pc '" + pc + "'");
    SimulationConfig config = load_config_or_default(config_path);
    apply_overrides(config, overrides);

    const EpisodeLog log = read_episode_log(episodes_path);
    ReplayBuffer buffer;
    buffer.pc = *pc_id;
    for (const Episode& e : log.episodes) {
      if (e.pc == *pc_id) buffer.episodes.push_back(e);
    }
    if (buffer.episodes.empty()) {
      throw ConfigError("episode log contains no episodes for pc '" + pc + "'");
    }
    buffer.k = log.k_by_pc.at(*pc_id);
    buffer.recount();

    RewardTrainConfig train_config = config.rl;
    train_config.seed = derive_seed(config.seed, seed_stream::kRewardTrain,
                                    static_cast<std::uint64_t>(*pc_id));
    const RewardTrainResult trained = train_reward_net(buffer, train_config);

    nlohmann::json ckpt = trained.net.to_json();
    ckpt["config"] = config.to_json();
    ckpt["updates_run"] = trained.updates_run;
    ckpt["converged"] = trained.converged;
    write_text_file(out_path, ckpt.dump() + "\n");

    std::string curve = "update,loss,holdout_mean_abs_d\n";
    for (const TrainingCurvePoint& p : trained.curve) {
      curve += std::to_string(p.update) + "," + fmt_double(p.loss) + "," +
               fmt_double(p.holdout_mean_abs_d) + "\n";
    }
    write_text_file(out_path + ".curve.csv", curve);
    std::cout << "trained " << pc << " controller: " << trained.updates_run << " updates, "
              << (trained.converged ? "converged" : "hit max_updates") << " -> " << out_path
              << "\n";
    return kExitOk;
  });
}

int cmd_evaluate(const std::string& world_path, const std::string& config_path,
                 const std::string& ckpt_gender, const std::string& ckpt_race,
                 const std::vector<std::string>& arms, const std::vector<std::uint64_t>& seeds,
                 const std::string& out_prefix, const CommonOverrides& overrides) {
  return guarded([&] {
    const World world = World::load_file(world_path);
    SimulationConfig config =
        config_path.empty() ? world.config : SimulationConfig::load_file(config_path);
    apply_overrides(config, overrides);

    std::map<PC, RewardNet> nets;
    const auto load_ckpt = [&](const std::string& path, PC expect) {
      if (path.empty()) {
        throw ConfigError(std::string("missing checkpoint for pc ") + pc_name(expect));
      }
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
      nlohmann::json j;
      in >> j;
      RewardNet net = RewardNet::from_json(j);
      if (net.pc != expect) {
        throw ConfigError("checkpoint '" + path + "' is for pc " +
                          std::string(pc_name(net.pc)) + ", expected " + pc_name(expect));
      }
      nets[expect] = std::move(net);
    };
    for (PC pc : config.active_pcs) {
      load_ckpt(pc == PC::Gender ? ckpt_gender : ckpt_race, pc);
    }

    EvaluateOptions options;
    options.arms.clear();
    for (const std::string& a : arms) options.arms.push_back(arm_from_name(a));
    if (options.arms.empty()) options.arms = {Arm::Test1, Arm::Test2};
    if (!seeds.empty()) options.seeds = seeds;

    const UserSummarization summarization = build_embeddings(world);
    const EvaluateResult result =
        evaluate_arms(world, config, summarization.store, nets, options);

    write_text_file(out_prefix + "_curves.csv", curves_csv(result));
    write_text_file(out_prefix + "_summary.csv", summary_csv(result, options.seeds));
    for (const auto& m : result.metrics) {
      write_text_file(out_prefix + "_metrics_seed" + std::to_string(m.seed) + "_" + m.arm +
                          ".csv",
                      day_metrics_csv(m.arm, m.days));
    }
    write_text_file(out_prefix + "_report.json", result.report.dump(2) + "\n");
    std::cout << summary_csv(result, options.seeds);
    return kExitOk;
  });
}

int cmd_report(const std::string& curves_path, const std::string& out_path) {
  return guarded([&] {
    std::ifstream in(curves_path);
    if (!in) throw ConfigError("cannot open curves CSV '" + curves_path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string gnuplot;
    const std::string tidy = plot_data_from_curves_csv(buffer.str(), &gnuplot);
    write_text_file(out_path, tidy);
    write_text_file(out_path + ".gp", gnuplot);
    std::cout << "plot data -> " << out_path << "\n";
    return kExitOk;
  });
}

}  // namespace vrs
