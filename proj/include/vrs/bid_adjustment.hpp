#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vrs/core_model.hpp"

namespace vrs {

struct AuctionCandidate {
  std::int64_t ad_id = 0;
  double advertiser_bid = 1.0;  // > 0
  double quality_bid = 0.0;
  bool is_housing = false;
};

// total_bid = advertiser_bid * multiplier + quality_bid.
// Throws std::invalid_argument for a negative multiplier (clamping happens
// upstream in the multiplier computations).
double total_bid(const AuctionCandidate& c, double multiplier = 1.0);

// Multiplier that lifts the candidate's total bid to the auction maximum,
// clamped below at 1: aiming up never decreases the bid.
double multiplier_to_top(const AuctionCandidate& c, double max_total_bid);

// Multiplier that drops the candidate's total bid to the auction minimum,
// clamped into [0, 1]: bids stay nonnegative and never increase going down.
double multiplier_to_bottom(const AuctionCandidate& c, double min_total_bid);

// Percentile with linear interpolation between order statistics
// (pct in [0, 100]).
double percentile_linear(std::vector<double> values, double pct);

struct MultiplierCalibration {
  double up_multiplier = 1.0;    // >= 1
  double down_multiplier = 1.0;  // in [0, 1]
  int history_window = 0;        // calibration auctions used
};

// One historical auction used for calibration: its housing candidates and
// the max/min total bid over all candidates at multiplier 1.
struct CalibrationAuction {
  std::vector<AuctionCandidate> housing;
  double max_total_bid = 0.0;
  double min_total_bid = 0.0;
};

// up_multiplier = P40 of the to-top multipliers over the history (so the
// adjustment tops the auction roughly 40% of the time); down_multiplier =
// P15 of the to-bottom multipliers (bottoms roughly 85% of the time).
// Throws std::invalid_argument when the history holds fewer than min_window
// auctions with housing ads.
MultiplierCalibration calibrate(std::span<const CalibrationAuction> history,
                                int min_window = 20);

enum class BidLogic { AdjustUpOnly, AdjustUpAndDown };

BidLogic bid_logic_from_name(const std::string& name);  // throws on unknown
const char* bid_logic_name(BidLogic logic);

// Adjust-up maps to the calibrated up multiplier. No-adjustment maps to 1
// under Adjust-up Only; under Adjust-up and Down it converts to adjust-down
// and maps to the calibrated down multiplier.
double apply_action(ControllerAction action, const MultiplierCalibration& calibration,
                    BidLogic logic);

}  // namespace vrs
