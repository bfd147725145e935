#include "vrs/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vrs {

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

namespace {

std::uint64_t arm_stream_tag(Arm arm, bool is_baseline) {
  // The baseline control gets its own noise stream so that evaluating a
  // requested "control" arm against it measures pure DP-noise variation.
  if (is_baseline) return 100;
  return static_cast<std::uint64_t>(arm) + 1;
}

}  // namespace

ExperimentRun run_experiment(const World& world, const SimulationConfig& config,
                             const EmbeddingStore& store, std::uint64_t seed, Arm arm,
                             PolicyMode mode, const std::map<PC, RewardNet>* nets) {
  config.validate();
  const auto events = generate_request_stream(
      world, config.sim, config.sim.requests, derive_seed(seed, seed_stream::kRequests));
  const MultiplierCalibration calibration = run_calibration_pass(world, config, seed);
  const std::uint64_t run_seed =
      derive_seed(seed, seed_stream::kArm, arm_stream_tag(arm, false));
  Simulator sim(world, config, store, run_seed, arm, mode, nets, calibration,
                /*collect_episodes=*/mode == PolicyMode::Random);
  ExperimentRun run;
  run.arm = arm;
  run.mode = mode;
  run.seed = seed;
  run.sim = sim.run(events);
  return run;
}

EvaluateResult evaluate_arms(const World& world, const SimulationConfig& config,
                             const EmbeddingStore& store,
                             const std::map<PC, RewardNet>& nets,
                             const EvaluateOptions& options) {
  config.validate();
  if (options.seeds.empty()) throw ConfigError("evaluate: need at least one seed");
  if (options.arms.empty()) throw ConfigError("evaluate: need at least one arm");

  EvaluateResult result;
  result.days = config.days();
  result.arm_curves.resize(options.arms.size());
  for (std::size_t a = 0; a < options.arms.size(); ++a) {
    result.arm_curves[a].arm = options.arms[a];
    for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
      result.arm_curves[a].reduction[pci].assign(
          options.seeds.size(), std::vector<std::optional<double>>(
                                    static_cast<std::size_t>(result.days), std::nullopt));
    }
  }

  nlohmann::json calibration_echo = nlohmann::json::array();

  for (std::size_t si = 0; si < options.seeds.size(); ++si) {
    const std::uint64_t seed = options.seeds[si];
    const auto events = generate_request_stream(
        world, config.sim, config.sim.requests, derive_seed(seed, seed_stream::kRequests));
    const MultiplierCalibration calibration = run_calibration_pass(world, config, seed);
    calibration_echo.push_back({{"seed", seed},
                                {"up_multiplier", calibration.up_multiplier},
                                {"down_multiplier", calibration.down_multiplier},
                                {"history_window", calibration.history_window}});

    // Baseline control.
    Simulator control_sim(world, config, store,
                          derive_seed(seed, seed_stream::kArm, arm_stream_tag(Arm::Control, true)),
                          Arm::Control, PolicyMode::Trained, &nets, calibration, false);
    const SimulatorResult control = control_sim.run(events);
    result.metrics.push_back({seed, "control", control.day_metrics});

    // Control NCAC per (pc, day).
    std::array<std::vector<std::optional<double>>, kNumPcs> control_ncac;
    for (auto& v : control_ncac) {
      v.assign(static_cast<std::size_t>(result.days), std::nullopt);
    }
    for (const DayMetricsRow& row : control.day_metrics) {
      control_ncac[static_cast<std::size_t>(row.pc)][static_cast<std::size_t>(row.day)] =
          row.ncac;
    }

    for (std::size_t a = 0; a < options.arms.size(); ++a) {
      const Arm arm = options.arms[a];
      Simulator arm_sim(world, config, store,
                        derive_seed(seed, seed_stream::kArm, arm_stream_tag(arm, false)), arm,
                        PolicyMode::Trained, &nets, calibration, false);
      const SimulatorResult arm_result = arm_sim.run(events);
      result.metrics.push_back({seed, arm_name(arm), arm_result.day_metrics});
      for (const DayMetricsRow& row : arm_result.day_metrics) {
        const auto& base =
            control_ncac[static_cast<std::size_t>(row.pc)][static_cast<std::size_t>(row.day)];
        if (!base || !row.ncac) continue;
        const auto red = ncac_reduction(*row.ncac, *base);
        if (red) {
          result.arm_curves[a].reduction[static_cast<std::size_t>(row.pc)][si]
                             [static_cast<std::size_t>(row.day)] = *red;
        }
      }
    }
  }

  // Final-day summary per (arm, pc): per-seed values and their mean.
  for (std::size_t a = 0; a < options.arms.size(); ++a) {
    for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
      SummaryRow row;
      row.arm = options.arms[a];
      row.pc = static_cast<PC>(pci);
      double total = 0.0;
      int defined = 0;
      for (std::size_t si = 0; si < options.seeds.size(); ++si) {
        const auto& curve = result.arm_curves[a].reduction[pci][si];
        const auto final_value = curve.empty() ? std::nullopt : curve.back();
        row.per_seed.push_back(final_value);
        if (final_value) {
          total += *final_value;
          ++defined;
        }
      }
      if (defined > 0) row.mean = total / defined;
      result.summary.push_back(std::move(row));
    }
  }

  nlohmann::json summary_json = nlohmann::json::array();
  for (const SummaryRow& row : result.summary) {
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& v : row.per_seed) {
      if (v) {
        per_seed.push_back(*v);
      } else {
        per_seed.push_back(nullptr);
      }
    }
    summary_json.push_back({{"arm", arm_name(row.arm)},
                            {"pc", pc_name(row.pc)},
                            {"per_seed", per_seed},
                            {"mean", row.mean ? nlohmann::json(*row.mean) : nlohmann::json()}});
  }
  std::vector<std::string> arm_names;
  for (Arm a : options.arms) arm_names.push_back(arm_name(a));
  result.report = nlohmann::json{{"config", config.to_json()},
                                 {"world_seed", world.seed},
                                 {"seeds", options.seeds},
                                 {"arms", arm_names},
                                 {"days", result.days},
                                 {"calibration", calibration_echo},
                                 {"summary", summary_json}};
  return result;
}

std::string curves_csv(const EvaluateResult& result) {
  std::string out = "day,arm,pc,ncac_reduction\n";
  for (int day = 0; day < result.days; ++day) {
    for (const ArmCurves& arm : result.arm_curves) {
      for (std::size_t pci = 0; pci < kNumPcs; ++pci) {
        double total = 0.0;
        int defined = 0;
        for (const auto& seed_curve : arm.reduction[pci]) {
          const auto& v = seed_curve[static_cast<std::size_t>(day)];
          if (v) {
            total += *v;
            ++defined;
          }
        }
        out += std::to_string(day);
        out += ",";
        out += arm_name(arm.arm);
        out += ",";
        out += pc_name(static_cast<PC>(pci));
        out += ",";
        out += defined > 0 ? fmt_double(total / defined) : "nan";
        out += "\n";
      }
    }
  }
  return out;
}

std::string summary_csv(const EvaluateResult& result,
                        const std::vector<std::uint64_t>& seeds) {
  std::string out = "arm,pc";
  for (std::uint64_t s : seeds) out += ",seed_" + std::to_string(s);
  out += ",mean\n";
  for (const SummaryRow& row : result.summary) {
    out += arm_name(row.arm);
    out += ",";
    out += pc_name(row.pc);
    for (const auto& v : row.per_seed) {
      out += ",";
      out += v ? fmt_double(*v) : "nan";
    }
    out += ",";
    out += row.mean ? fmt_double(*row.mean) : "nan";
    out += "\n";
  }
  return out;
}

std::string day_metrics_csv(const std::string& arm, const std::vector<DayMetricsRow>& rows) {
  std::string out = "day,arm,pc,ncac,coverage,mean_variance\n";
  for (const DayMetricsRow& row : rows) {
    out += std::to_string(row.day);
    out += ",";
    out += arm;
    out += ",";
    out += pc_name(row.pc);
    out += ",";
    out += row.ncac ? fmt_double(*row.ncac) : "nan";
    out += ",";
    out += row.coverage ? fmt_double(*row.coverage) : "nan";
    out += ",";
    out += fmt_double(row.mean_variance);
    out += "\n";
  }
  return out;
}

std::string plot_data_from_curves_csv(const std::string& curves, std::string* gnuplot_script) {
  std::istringstream in(curves);
  std::string line;
  std::string out = "day,series,value\n";
  std::vector<std::string> series_seen;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("day,", 0) != 0) {
        throw std::invalid_argument("plot data: unexpected curves CSV header");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 4) throw std::invalid_argument("plot data: malformed curves row");
    const std::string series = fields[1] + "-" + fields[2];
    out += fields[0] + "," + series + "," + fields[3] + "\n";
    if (std::find(series_seen.begin(), series_seen.end(), series) == series_seen.end()) {
      series_seen.push_back(series);
    }
  }
  if (gnuplot_script) {
    std::string gp =
        "set datafile separator ','\n"
        "set key outside\n"
        "set xlabel 'day'\n"
        "set ylabel 'NCAC reduction (%)'\n";
    gp += "plot ";
    for (std::size_t i = 0; i < series_seen.size(); ++i) {
      if (i) gp += ", \\\n     ";
      gp += "'plot_data.csv' using 1:(strcol(2) eq '" + series_seen[i] +
            "' ? $3 : NaN) with linespoints title '" + series_seen[i] + "'";
    }
    gp += "\n";
    *gnuplot_script = gp;
  }
  return out;
}

std::string episode_to_jsonl(const Episode& e, int k) {
  nlohmann::json steps = nlohmann::json::array();
  for (const EpisodeStep& s : e.steps) steps.push_back(s.state.embedding);
  const nlohmann::json j{{"ad", e.ad_id},  {"pc", pc_name(e.pc)},        {"k", k},
                         {"v0", e.v0},     {"r", e.terminal_reward},     {"emb", steps}};
  return j.dump();
}

Episode episode_from_jsonl(const std::string& line, int* k_out) {
  const nlohmann::json j = nlohmann::json::parse(line);
  Episode e;
  e.ad_id = j.at("ad").get<std::int64_t>();
  const auto pc = pc_from_name(j.at("pc").get<std::string>());
  if (!pc) throw std::invalid_argument("episode log: unknown pc");
  e.pc = *pc;
  e.v0 = j.at("v0").get<std::vector<double>>();
  e.terminal_reward = j.at("r").get<double>();
  for (const auto& emb : j.at("emb")) {
    EpisodeStep step;
    step.state = build_state(emb.get<std::vector<double>>(), e.v0, e.pc);
    step.action = ControllerAction::AdjustUp;
    step.resulted_in_impression = true;
    e.steps.push_back(std::move(step));
  }
  if (k_out) *k_out = j.at("k").get<int>();
  return e;
}

void write_episode_log(const std::string& path, const std::vector<Episode>& episodes,
                       int k_gender, int k_race) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode log '" + path + "'");
  for (const Episode& e : episodes) {
    out << episode_to_jsonl(e, e.pc == PC::Gender ? k_gender : k_race) << "\n";
  }
}

EpisodeLog read_episode_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open episode log '" + path + "'");
  EpisodeLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int k = 0;
    Episode e = episode_from_jsonl(line, &k);
    const auto it = log.k_by_pc.find(e.pc);
    if (it == log.k_by_pc.end()) {
      log.k_by_pc[e.pc] = k;
    } else if (it->second != k) {
      throw ConfigError("episode log mixes aggregation levels for one pc");
    }
    log.episodes.push_back(std::move(e));
  }
  return log;
}

}  // namespace vrs
