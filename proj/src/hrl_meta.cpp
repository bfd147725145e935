#include "vrs/hrl_meta.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace vrs {

VotingScheme voting_scheme_from_name(const std::string& name) {
  if (name == "equal") return VotingScheme::Equal;
  if (name == "shuffle" || name == "shuffle_weighted") return VotingScheme::ShuffleWeighted;
  if (name == "max" || name == "max_weighted") return VotingScheme::MaxWeighted;
  throw std::invalid_argument("unknown voting scheme '" + name + "'");
}

const char* voting_scheme_name(VotingScheme s) {
  switch (s) {
    case VotingScheme::Equal:
      return "equal";
    case VotingScheme::ShuffleWeighted:
      return "shuffle_weighted";
    case VotingScheme::MaxWeighted:
      return "max_weighted";
  }
  return "equal";
}

ControllerAction equal_vote(std::span<const VoteInput> inputs) {
  if (inputs.empty()) throw std::invalid_argument("equal_vote: no controllers");
  int up = 0;
  int no = 0;
  for (const VoteInput& in : inputs) {
    (in.action == ControllerAction::AdjustUp ? up : no) += 1;
  }
  if (up > no) return ControllerAction::AdjustUp;
  return ControllerAction::NoAdjustment;  // minority or tie
}

namespace {

ControllerAction weighted_vote(std::span<const VoteInput> inputs,
                               const std::function<double(const VoteInput&)>& weight_numer) {
  if (inputs.empty()) throw std::invalid_argument("weighted vote: no controllers");
  double denom = 0.0;
  for (const VoteInput& in : inputs) denom += weight_numer(in);
  if (denom <= 0.0) return ControllerAction::NoAdjustment;  // no variance pressure
  double weighted_sum = 0.0;
  for (const VoteInput& in : inputs) {
    const double encoded = in.action == ControllerAction::AdjustUp ? 1.0 : 0.0;
    weighted_sum += weight_numer(in) / denom * encoded;
  }
  if (weighted_sum > 0.5 + 1e-12) return ControllerAction::AdjustUp;
  return ControllerAction::NoAdjustment;  // below threshold or exact tie
}

}  // namespace

ControllerAction shuffle_weighted_vote(std::span<const VoteInput> inputs) {
  return weighted_vote(inputs, [](const VoteInput& in) {
    double sum = 0.0;
    for (double v : in.variance) sum += std::abs(v);
    return sum;
  });
}

ControllerAction max_weighted_vote(std::span<const VoteInput> inputs) {
  return weighted_vote(inputs, [](const VoteInput& in) {
    double best = 0.0;
    for (double v : in.variance) best = std::max(best, std::abs(v));
    return best;
  });
}

ControllerAction decide(std::span<const VoteInput> inputs, VotingScheme scheme) {
  switch (scheme) {
    case VotingScheme::Equal:
      return equal_vote(inputs);
    case VotingScheme::ShuffleWeighted:
      return shuffle_weighted_vote(inputs);
    case VotingScheme::MaxWeighted:
      return max_weighted_vote(inputs);
  }
  throw std::invalid_argument("decide: unknown voting scheme");
}

}  // namespace vrs
