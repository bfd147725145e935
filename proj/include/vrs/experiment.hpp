#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vrs/simulator.hpp"

namespace vrs {

struct ExperimentRun {
  Arm arm = Arm::Control;
  PolicyMode mode = PolicyMode::Random;
  std::uint64_t seed = 0;
  SimulatorResult sim;
};

// One full arm run: generates the request stream and calibration pre-pass
// from the seed, then plays every event through the ranking and auction
// stack. Output is a pure function of (world, config, seed, checkpoints).
ExperimentRun run_experiment(const World& world, const SimulationConfig& config,
                             const EmbeddingStore& store, std::uint64_t seed, Arm arm,
                             PolicyMode mode, const std::map<PC, RewardNet>* nets);

struct EvaluateOptions {
  std::vector<Arm> arms{Arm::Test1, Arm::Test2};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct ArmCurves {
  Arm arm = Arm::Test1;
  // reduction[pc][seed][day]; missing when NCAC was undefined that day.
  std::array<std::vector<std::vector<std::optional<double>>>, kNumPcs> reduction;
};

struct SummaryRow {
  Arm arm = Arm::Test1;
  PC pc = PC::Gender;
  std::vector<std::optional<double>> per_seed;  // final-day NCAC reduction
  std::optional<double> mean;
};

struct EvaluateResult {
  std::vector<ArmCurves> arm_curves;
  std::vector<SummaryRow> summary;
  // Per (seed, arm incl. control): day metrics rows for the metrics CSV.
  struct SeedArmMetrics {
    std::uint64_t seed = 0;
    std::string arm;
    std::vector<DayMetricsRow> days;
  };
  std::vector<SeedArmMetrics> metrics;
  nlohmann::json report;
  int days = 0;
};

// Runs the control arm plus every requested arm for every seed. Arms within
// one seed share the request stream and calibration; DP noise streams are
// arm-specific, so comparing control against a control "test arm" measures
// pure seed noise.
EvaluateResult evaluate_arms(const World& world, const SimulationConfig& config,
                             const EmbeddingStore& store,
                             const std::map<PC, RewardNet>& nets,
                             const EvaluateOptions& options);

// ---- Output formats -------------------------------------------------------

// day,arm,pc,ncac_reduction — seed means, one row per (day, arm, pc).
std::string curves_csv(const EvaluateResult& result);
// arm,pc,seed_<s>...,mean — final-day values per seed.
std::string summary_csv(const EvaluateResult& result, const std::vector<std::uint64_t>& seeds);
// day,arm,pc,ncac,coverage,mean_variance for one arm run.
std::string day_metrics_csv(const std::string& arm, const std::vector<DayMetricsRow>& rows);
// Tidy plot data from a curves CSV: day,series,value.
std::string plot_data_from_curves_csv(const std::string& curves, std::string* gnuplot_script);

// Stable float formatting shared by every CSV writer.
std::string fmt_double(double v);

// Episode log: line-delimited JSON, one preprocessed episode per line. The
// sign block is reconstructed from v0 on load, so only v0, the reward and
// the step embeddings are stored.
std::string episode_to_jsonl(const Episode& e, int k);
Episode episode_from_jsonl(const std::string& line, int* k_out = nullptr);

struct EpisodeLog {
  std::vector<Episode> episodes;
  std::map<PC, int> k_by_pc;
};
void write_episode_log(const std::string& path, const std::vector<Episode>& episodes,
                       int k_gender, int k_race);
EpisodeLog read_episode_log(const std::string& path);

}  // namespace vrs
