#include <random>

#include <stdexcept>

#include "doctest.h"
#include "vrs/hrl_meta.hpp"
#include "vrs/rng.hpp"

using namespace vrs;

namespace {

constexpr ControllerAction kUp = ControllerAction::AdjustUp;
constexpr ControllerAction kNo = ControllerAction::NoAdjustment;

VoteInput vote(PC pc, ControllerAction a, std::vector<double> v) {
  return VoteInput{pc, a, std::move(v)};
}

}  // namespace

TEST_CASE("equal voting: majority wins, ties are conservative") {
  CHECK(equal_vote(std::vector<VoteInput>{vote(PC::Gender, kUp, {0.1, -0.1}),
                                          vote(PC::EstimatedRace, kUp, {0, 0, 0, 0})}) == kUp);
  CHECK(equal_vote(std::vector<VoteInput>{vote(PC::Gender, kUp, {0.1, -0.1}),
                                          vote(PC::EstimatedRace, kNo, {0, 0, 0, 0})}) == kNo);
  // Three controllers, two in favor.
  CHECK(equal_vote(std::vector<VoteInput>{vote(PC::Gender, kUp, {}),
                                          vote(PC::EstimatedRace, kUp, {}),
                                          vote(PC::Gender, kNo, {})}) == kUp);
  CHECK_THROWS_AS(equal_vote(std::vector<VoteInput>{}), std::invalid_argument);
}

TEST_CASE("shuffle-weighted voting follows summed absolute variance") {
  // gender |v| sum 0.3, race |v| sum 0.1 -> gender weight 0.75.
  const std::vector<VoteInput> inputs{
      vote(PC::Gender, kUp, {0.15, -0.15}),
      vote(PC::EstimatedRace, kNo, {0.05, -0.05, 0.0, 0.0})};
  CHECK(shuffle_weighted_vote(inputs) == kUp);

  // Equal |v| sums with split actions hit exactly 0.5 -> conservative.
  const std::vector<VoteInput> tie{vote(PC::Gender, kUp, {0.1, -0.1}),
                                   vote(PC::EstimatedRace, kNo, {0.1, -0.1, 0.0, 0.0})};
  CHECK(shuffle_weighted_vote(tie) == kNo);

  // Unanimity.
  const std::vector<VoteInput> both{vote(PC::Gender, kUp, {0.1, -0.1}),
                                    vote(PC::EstimatedRace, kUp, {0.2, -0.2, 0.0, 0.0})};
  CHECK(shuffle_weighted_vote(both) == kUp);

  // All-zero variances mean no pressure.
  const std::vector<VoteInput> flat{vote(PC::Gender, kUp, {0.0, 0.0}),
                                    vote(PC::EstimatedRace, kUp, {0.0, 0.0, 0.0, 0.0})};
  CHECK(shuffle_weighted_vote(flat) == kNo);
}

TEST_CASE("max-weighted voting follows the largest bucket variance") {
  // gender max 0.2, race max 0.05 -> gender weight 0.8.
  const std::vector<VoteInput> inputs{
      vote(PC::Gender, kUp, {0.2, -0.1}),
      vote(PC::EstimatedRace, kNo, {0.05, -0.02, 0.0, 0.0})};
  CHECK(max_weighted_vote(inputs) == kUp);

  const std::vector<VoteInput> tie{vote(PC::Gender, kUp, {0.1, -0.1}),
                                   vote(PC::EstimatedRace, kNo, {-0.1, 0.0, 0.0, 0.0})};
  CHECK(max_weighted_vote(tie) == kNo);

  const std::vector<VoteInput> none{vote(PC::Gender, kNo, {0.3, -0.3}),
                                    vote(PC::EstimatedRace, kNo, {0.1, 0.0, 0.0, 0.0})};
  CHECK(max_weighted_vote(none) == kNo);
}

TEST_CASE("decide dispatches and validates scheme names") {
  const std::vector<VoteInput> split{vote(PC::Gender, kUp, {0.1, -0.1}),
                                     vote(PC::EstimatedRace, kNo, {0.1, -0.1, 0.0, 0.0})};
  CHECK(decide(split, VotingScheme::Equal) == kNo);

  CHECK(voting_scheme_from_name("equal") == VotingScheme::Equal);
  CHECK(voting_scheme_from_name("shuffle") == VotingScheme::ShuffleWeighted);
  CHECK(voting_scheme_from_name("max") == VotingScheme::MaxWeighted);
  CHECK_THROWS_AS(voting_scheme_from_name("plurality"), std::invalid_argument);
}

TEST_CASE("single active PC passes through verbatim under every scheme") {
  for (const ControllerAction a : {kUp, kNo}) {
    const std::vector<VoteInput> solo{vote(PC::EstimatedRace, a, {0.2, -0.1, -0.05, -0.05})};
    for (const auto scheme :
         {VotingScheme::Equal, VotingScheme::ShuffleWeighted, VotingScheme::MaxWeighted}) {
      CHECK(decide(solo, scheme) == a);
    }
  }
}

TEST_CASE("equal voting equals shuffle-weighted when |v| sums coincide") {
  Rng rng(321);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_real_distribution<double> mag(0.01, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    const double m = mag(rng);
    const std::vector<VoteInput> inputs{
        vote(PC::Gender, coin(rng) ? kUp : kNo, {m, -m}),
        vote(PC::EstimatedRace, coin(rng) ? kUp : kNo, {m, -m, 0.0, 0.0})};
    CHECK(equal_vote(inputs) == shuffle_weighted_vote(inputs));
  }
}

TEST_CASE("exhaustive 2-PC grids: unanimity, conservatism, scale invariance") {
  const double grid[] = {0.0, 0.02, 0.1, 0.37};
  const double scales[] = {0.5, 3.0, 117.0};
  for (const ControllerAction a1 : {kUp, kNo}) {
    for (const ControllerAction a2 : {kUp, kNo}) {
      for (const double g1 : grid) {
        for (const double g2 : grid) {
          const std::vector<VoteInput> inputs{
              vote(PC::Gender, a1, {g1, -g1}),
              vote(PC::EstimatedRace, a2, {g2, -g2 / 2, -g2 / 4, -g2 / 4})};
          for (const auto scheme : {VotingScheme::Equal, VotingScheme::ShuffleWeighted,
                                    VotingScheme::MaxWeighted}) {
            const ControllerAction out = decide(inputs, scheme);
            if (a1 == a2) {
              // Unanimity passes through except when weighted schemes see no
              // variance pressure at all.
              if (scheme == VotingScheme::Equal || a1 == kNo || g1 + g2 > 0.0) {
                CHECK(out == a1);
              }
            }
            if (a1 == kNo && a2 == kNo) CHECK(out == kNo);  // conservatism
            // Common positive scaling never changes the decision.
            for (const double s : scales) {
              std::vector<VoteInput> scaled = inputs;
              for (auto& in : scaled) {
                for (double& v : in.variance) v *= s;
              }
              CHECK(decide(scaled, scheme) == out);
            }
          }
        }
      }
    }
  }
}
