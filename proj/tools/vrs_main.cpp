// Command-line driver for the variance-reduction ad-auction simulator:
// world generation, random-policy data collection, controller training,
// multi-arm evaluation, and plot-data export.
#include <cstdint>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vrs/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Impression-variance-aware ad auction simulator"};
  app.require_subcommand(1);

  vrs::CommonOverrides overrides;
  std::uint64_t seed_flag = 0;
  int days_flag = 0;
  std::string voting_flag;
  std::string pc_flag;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_flag, "Seed override");
    cmd->add_option("--days", days_flag, "Number of simulated days");
    cmd->add_option("--voting", voting_flag, "Voting scheme: equal|shuffle|max");
    cmd->add_option("--pc", pc_flag, "Active protected classes: gender|race|all");
  };
  const auto collect_common = [&](CLI::App* cmd) {
    if (cmd->count("--seed")) overrides.seed = seed_flag;
    if (cmd->count("--days")) overrides.days = days_flag;
    if (cmd->count("--voting")) overrides.voting = voting_flag;
    if (cmd->count("--pc")) overrides.pc = pc_flag;
  };

  // generate
  std::string config_path;
  std::string out_path;
  CLI::App* generate = app.add_subcommand("generate", "Generate a synthetic world");
  generate->add_option("--config", config_path, "Config JSON (defaults if omitted)");
  generate->add_option("--out", out_path, "Output world JSON")->required();
  add_common(generate);

  // collect
  std::string world_path;
  CLI::App* collect =
      app.add_subcommand("collect", "Collect preprocessed episodes under a random policy");
  collect->add_option("--world", world_path, "World JSON")->required();
  collect->add_option("--config", config_path, "Config JSON (world echo if omitted)");
  collect->add_option("--out", out_path, "Output episode log (JSONL)")->required();
  add_common(collect);

  // train
  std::string episodes_path;
  std::string train_pc;
  CLI::App* train = app.add_subcommand("train", "Train a per-PC reward net");
  train->add_option("--episodes", episodes_path, "Episode log from collect")->required();
  train->add_option("--pc", train_pc, "Protected class: gender|race")->required();
  train->add_option("--config", config_path, "Config JSON (defaults if omitted)");
  train->add_option("--out", out_path, "Output checkpoint JSON")->required();
  train->add_option("--seed", seed_flag, "Seed override");

  // evaluate
  std::string ckpt_gender;
  std::string ckpt_race;
  std::vector<std::string> arms;
  std::vector<std::uint64_t> seeds;
  std::string out_prefix;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Run control plus test arms");
  evaluate->add_option("--world", world_path, "World JSON")->required();
  evaluate->add_option("--config", config_path, "Config JSON (world echo if omitted)");
  evaluate->add_option("--ckpt-gender", ckpt_gender, "Gender controller checkpoint");
  evaluate->add_option("--ckpt-race", ckpt_race, "Race controller checkpoint");
  evaluate->add_option("--arm", arms, "Arms to run: control|test1|test2 (repeatable)");
  evaluate->add_option("--seeds", seeds, "Simulation seeds")->delimiter(',');
  evaluate->add_option("--out", out_prefix, "Output file prefix")->required();
  add_common(evaluate);

  // report
  std::string curves_path;
  CLI::App* report = app.add_subcommand("report", "Tidy plot data from a curves CSV");
  report->add_option("--curves", curves_path, "Curves CSV from evaluate")->required();
  report->add_option("--out", out_path, "Output plot-data CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (generate->parsed()) {
    collect_common(generate);
    return vrs::cmd_generate(config_path, out_path, overrides);
  }
  if (collect->parsed()) {
    collect_common(collect);
    return vrs::cmd_collect(world_path, config_path, out_path, overrides);
  }
  if (train->parsed()) {
    if (train->count("--seed")) overrides.seed = seed_flag;
    return vrs::cmd_train(episodes_path, train_pc, config_path, out_path, overrides);
  }
  if (evaluate->parsed()) {
    collect_common(evaluate);
    return vrs::cmd_evaluate(world_path, config_path, ckpt_gender, ckpt_race, arms, seeds,
                             out_prefix, overrides);
  }
  if (report->parsed()) return vrs::cmd_report(curves_path, out_path);
  return 2;
}
