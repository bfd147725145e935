#pragma once

#include <span>
#include <string>
#include <vector>

#include "vrs/core_model.hpp"

namespace vrs {

// One per-PC controller's vote plus that PC's current per-bucket variance.
struct VoteInput {
  PC pc = PC::Gender;
  ControllerAction action = ControllerAction::NoAdjustment;
  std::vector<double> variance;
};

enum class VotingScheme { Equal, ShuffleWeighted, MaxWeighted };

VotingScheme voting_scheme_from_name(const std::string& name);  // throws on unknown
const char* voting_scheme_name(VotingScheme s);

// One vote per controller; majority wins; ties resolve conservatively to
// no-adjustment. Throws std::invalid_argument on empty input.
ControllerAction equal_vote(std::span<const VoteInput> inputs);

// Weight each PC by the sum of absolute bucket variances, normalized across
// PCs. Actions encode as adjust-up = 1, no-adjustment = 0; final adjust-up
// iff the weighted sum exceeds 0.5. All-zero variances mean no pressure and
// yield no-adjustment.
ControllerAction shuffle_weighted_vote(std::span<const VoteInput> inputs);

// As above with the maximum absolute bucket variance as each PC's weight.
ControllerAction max_weighted_vote(std::span<const VoteInput> inputs);

ControllerAction decide(std::span<const VoteInput> inputs, VotingScheme scheme);

}  // namespace vrs
