#include <algorithm>
#include <cmath>
#include <random>

#include <stdexcept>

#include "doctest.h"
#include "vrs/bid_adjustment.hpp"
#include "vrs/rng.hpp"

using namespace vrs;

namespace {

AuctionCandidate cand(double bid, double quality, bool housing = true) {
  AuctionCandidate c;
  c.ad_id = 1;
  c.advertiser_bid = bid;
  c.quality_bid = quality;
  c.is_housing = housing;
  return c;
}

// Sorted-and-interpolated percentile oracle, independent of the
// implementation path.
double percentile_oracle(std::vector<double> v, double pct) {
  std::sort(v.begin(), v.end());
  const double rank = pct / 100.0 * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const double frac = rank - lo;
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] * (1.0 - frac) + v[lo + 1] * frac;
}

// Random auction generator shared by the calibration Monte Carlo checks.
struct AuctionDraw {
  CalibrationAuction auction;  // single housing candidate
  double required_up;          // multiplier that exactly tops it
  double required_down;        // multiplier that exactly bottoms it
};

AuctionDraw draw_auction(Rng& rng) {
  std::uniform_real_distribution<double> bid(1.0, 4.0);
  std::uniform_real_distribution<double> quality(0.0, 0.5);
  AuctionDraw d;
  const AuctionCandidate housing = cand(bid(rng), quality(rng));
  double max_total = total_bid(housing);
  double min_total = total_bid(housing);
  for (int other = 0; other < 7; ++other) {
    const double t = total_bid(cand(bid(rng), quality(rng), false));
    max_total = std::max(max_total, t);
    min_total = std::min(min_total, t);
  }
  d.auction.housing = {housing};
  d.auction.max_total_bid = max_total;
  d.auction.min_total_bid = min_total;
  d.required_up = multiplier_to_top(housing, max_total);
  d.required_down = multiplier_to_bottom(housing, min_total);
  return d;
}

}  // namespace

TEST_CASE("total_bid arithmetic") {
  CHECK(total_bid(cand(4.0, 2.0)) == doctest::Approx(6.0));
  CHECK(total_bid(cand(4.0, 2.0), 2.0) == doctest::Approx(10.0));  // 4*2 + 2
  CHECK(total_bid(cand(4.0, 2.0), 0.0) == doctest::Approx(2.0));
  CHECK_THROWS_AS(total_bid(cand(4.0, 2.0), -0.5), std::invalid_argument);
}

TEST_CASE("multiplier_to_top lifts to the max with a floor at one") {
  CHECK(multiplier_to_top(cand(4.0, 2.0), 10.0) == doctest::Approx(2.0));
  // Already at the top: the raw value is 1 and the clamp holds there.
  CHECK(multiplier_to_top(cand(4.0, 2.0), 6.0) == doctest::Approx(1.0));
  // Pathological: quality above the max still never decreases the bid.
  CHECK(multiplier_to_top(cand(4.0, 12.0), 10.0) == doctest::Approx(1.0));
}

TEST_CASE("multiplier_to_bottom drops to the min inside [0, 1]") {
  CHECK(multiplier_to_bottom(cand(4.0, 2.0), 3.0) == doctest::Approx(0.25));
  CHECK(multiplier_to_bottom(cand(4.0, 2.0), 1.0) == doctest::Approx(0.0));
  // Already at the bottom: ceiling clamp keeps the bid unchanged.
  CHECK(multiplier_to_bottom(cand(4.0, 2.0), 6.0) == doctest::Approx(1.0));
}

TEST_CASE("to-top exactness: applying the multiplier hits the target bid") {
  Rng rng(606);
  std::uniform_real_distribution<double> bid(0.5, 5.0);
  std::uniform_real_distribution<double> quality(-1.0, 2.0);
  std::uniform_real_distribution<double> target_gap(0.0, 6.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const AuctionCandidate c = cand(bid(rng), quality(rng));
    // Target above the candidate's own total keeps the clamp inactive.
    const double target = total_bid(c) + target_gap(rng);
    const double m = multiplier_to_top(c, target);
    CHECK(std::fabs(total_bid(c, m) - target) < 1e-9);
  }
}

TEST_CASE("total_bid is strictly monotone in the multiplier") {
  Rng rng(607);
  std::uniform_real_distribution<double> bid(0.5, 5.0);
  std::uniform_real_distribution<double> quality(-1.0, 2.0);
  std::uniform_real_distribution<double> mult(0.0, 4.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const AuctionCandidate c = cand(bid(rng), quality(rng));
    const double m1 = mult(rng);
    const double m2 = m1 + 0.25;
    CHECK(total_bid(c, m2) > total_bid(c, m1));
  }
}

TEST_CASE("percentile uses linear interpolation between order statistics") {
  CHECK(percentile_linear({1, 2, 3, 4, 5}, 40.0) == doctest::Approx(2.6));
  CHECK(percentile_linear({5, 3, 1, 2, 4}, 40.0) == doctest::Approx(2.6));  // sorts a copy
  CHECK(percentile_linear({2, 2, 2}, 40.0) == doctest::Approx(2.0));
  CHECK(percentile_linear({7}, 15.0) == doctest::Approx(7.0));
  CHECK_THROWS_AS(percentile_linear({}, 40.0), std::invalid_argument);

  Rng rng(4);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(20);
    for (double& x : v) x = unif(rng);
    for (const double pct : {15.0, 40.0, 85.0}) {
      CHECK(percentile_linear(v, pct) == doctest::Approx(percentile_oracle(v, pct)));
    }
  }
}

TEST_CASE("calibrate requires a sufficient housing history") {
  std::vector<CalibrationAuction> short_history(19);
  for (auto& a : short_history) {
    a.housing = {cand(2.0, 0.2)};
    a.max_total_bid = 5.0;
    a.min_total_bid = 1.0;
  }
  CHECK_THROWS_WITH_AS(calibrate(short_history, 20),
                       "calibrate: need at least 20 auctions containing housing ads, got 19",
                       std::invalid_argument);
}

TEST_CASE("calibration bounds hold over random histories") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<CalibrationAuction> history;
    for (int i = 0; i < 60; ++i) history.push_back(draw_auction(rng).auction);
    const MultiplierCalibration cal = calibrate(history);
    CHECK(cal.up_multiplier >= 1.0);
    CHECK(cal.down_multiplier >= 0.0);
    CHECK(cal.down_multiplier <= 1.0);
    CHECK(cal.history_window == 60);
  }
}

TEST_CASE("calibrated multipliers top 40% and bottom 85% of fresh auctions") {
  Rng rng(2718);
  std::vector<CalibrationAuction> history;
  for (int i = 0; i < 800; ++i) history.push_back(draw_auction(rng).auction);
  const MultiplierCalibration cal = calibrate(history);

  long topped = 0;
  long bottomed = 0;
  const int kFresh = 4000;
  for (int i = 0; i < kFresh; ++i) {
    const AuctionDraw d = draw_auction(rng);
    if (cal.up_multiplier >= d.required_up) ++topped;
    if (cal.down_multiplier <= d.required_down) ++bottomed;
  }
  CHECK(static_cast<double>(topped) / kFresh == doctest::Approx(0.40).epsilon(0.15));
  CHECK(static_cast<double>(bottomed) / kFresh == doctest::Approx(0.85).epsilon(0.07));
}

TEST_CASE("apply_action maps actions through the bid logic") {
  MultiplierCalibration cal;
  cal.up_multiplier = 2.4;
  cal.down_multiplier = 0.3;
  CHECK(apply_action(ControllerAction::AdjustUp, cal, BidLogic::AdjustUpOnly) ==
        doctest::Approx(2.4));
  CHECK(apply_action(ControllerAction::AdjustUp, cal, BidLogic::AdjustUpAndDown) ==
        doctest::Approx(2.4));
  CHECK(apply_action(ControllerAction::NoAdjustment, cal, BidLogic::AdjustUpOnly) ==
        doctest::Approx(1.0));
  CHECK(apply_action(ControllerAction::NoAdjustment, cal, BidLogic::AdjustUpAndDown) ==
        doctest::Approx(0.3));
}

TEST_CASE("bid logic names round trip") {
  CHECK(bid_logic_from_name("adjust_up_only") == BidLogic::AdjustUpOnly);
  CHECK(bid_logic_from_name("adjust_up_and_down") == BidLogic::AdjustUpAndDown);
  CHECK_THROWS_AS(bid_logic_from_name("sideways"), std::invalid_argument);
}
