#include "vrs/bid_adjustment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vrs {

double total_bid(const AuctionCandidate& c, double multiplier) {
  if (multiplier < 0.0) {
    throw std::invalid_argument("total_bid: negative multiplier");
  }
  return c.advertiser_bid * multiplier + c.quality_bid;
}

double multiplier_to_top(const AuctionCandidate& c, double max_total_bid) {
  const double raw = (max_total_bid - c.quality_bid) / c.advertiser_bid;
  return std::max(1.0, raw);
}

double multiplier_to_bottom(const AuctionCandidate& c, double min_total_bid) {
  const double raw = (min_total_bid - c.quality_bid) / c.advertiser_bid;
  return std::clamp(raw, 0.0, 1.0);
}

double percentile_linear(std::vector<double> values, double pct) {
  if (values.empty()) throw std::invalid_argument("percentile_linear: empty sample");
  if (pct < 0.0 || pct > 100.0) throw std::invalid_argument("percentile_linear: bad pct");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values.front();
  const double rank = pct / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

MultiplierCalibration calibrate(std::span<const CalibrationAuction> history,
                                int min_window) {
  std::vector<double> to_top;
  std::vector<double> to_bottom;
  int auctions_with_housing = 0;
  for (const CalibrationAuction& auction : history) {
    if (auction.housing.empty()) continue;
    ++auctions_with_housing;
    for (const AuctionCandidate& c : auction.housing) {
      to_top.push_back(multiplier_to_top(c, auction.max_total_bid));
      to_bottom.push_back(multiplier_to_bottom(c, auction.min_total_bid));
    }
  }
  if (auctions_with_housing < min_window) {
    throw std::invalid_argument(
        "calibrate: need at least " + std::to_string(min_window) +
        " auctions containing housing ads, got " + std::to_string(auctions_with_housing));
  }
  MultiplierCalibration cal;
  cal.up_multiplier = percentile_linear(std::move(to_top), 40.0);
  cal.down_multiplier = percentile_linear(std::move(to_bottom), 15.0);
  cal.history_window = auctions_with_housing;
  return cal;
}

BidLogic bid_logic_from_name(const std::string& name) {
  if (name == "adjust_up_only" || name == "up_only") return BidLogic::AdjustUpOnly;
  if (name == "adjust_up_and_down" || name == "up_and_down") return BidLogic::AdjustUpAndDown;
  throw std::invalid_argument("unknown bid logic '" + name + "'");
}

const char* bid_logic_name(BidLogic logic) {
  return logic == BidLogic::AdjustUpOnly ? "adjust_up_only" : "adjust_up_and_down";
}

double apply_action(ControllerAction action, const MultiplierCalibration& calibration,
                    BidLogic logic) {
  if (action == ControllerAction::AdjustUp) return calibration.up_multiplier;
  return logic == BidLogic::AdjustUpOnly ? 1.0 : calibration.down_multiplier;
}

}  // namespace vrs
