#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vrs {

// Subcommand entry points shared by the CLI binary and the test suites.
// Exit codes: 0 success, 1 runtime failure, 2 validation failure.

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> days;
  std::optional<std::string> voting;
  std::optional<std::string> pc;  // gender | race | all
};

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 const CommonOverrides& overrides);

int cmd_collect(const std::string& world_path, const std::string& config_path,
                const std::string& out_path, const CommonOverrides& overrides);

int cmd_train(const std::string& episodes_path, const std::string& pc,
              const std::string& config_path, const std::string& out_path,
              const CommonOverrides& overrides);

int cmd_evaluate(const std::string& world_path, const std::string& config_path,
                 const std::string& ckpt_gender, const std::string& ckpt_race,
                 const std::vector<std::string>& arms, const std::vector<std::uint64_t>& seeds,
                 const std::string& out_prefix, const CommonOverrides& overrides);

int cmd_report(const std::string& curves_path, const std::string& out_path);

}  // namespace vrs
