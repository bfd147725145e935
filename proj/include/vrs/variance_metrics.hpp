#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vrs/core_model.hpp"

namespace vrs {

// Per-ad measurement snapshot for one PC attribute. total_impressions is a
// sum of noisy counts and may be fractional.
struct VarianceReport {
  std::int64_t ad_id = 0;
  PC pc = PC::Gender;
  BucketDistribution eligible;
  BucketDistribution delivery;
  double variance = 0.0;
  bool variance_defined = false;
  double total_impressions = 0.0;
  bool is_housing = true;
};

// Normalizes per-bucket counts into a delivery distribution. Negative noisy
// counts are clamped to zero first; a zero clamped total yields an undefined
// distribution rather than an error.
BucketDistribution delivery_ratio(std::span<const double> counts);

// Activity-weighted demographic distribution of the ad's targeted audience,
// from ground truth. Falls back to unweighted user counts when every matched
// user has zero activity weight.
BucketDistribution eligible_ratio(std::span<const UserRecord> users, const AdRecord& ad,
                                  PC pc);

// Half the L1 distance between two distributions: the minimum fraction of
// mass that must move to turn one into the other.
// Throws std::invalid_argument on mismatched bucket counts or undefined input.
double shuffle_distance(const BucketDistribution& p, const BucketDistribution& q);

// Fraction of qualifying housing-ad reports whose variance is under the
// threshold. Qualifying means total_impressions >= min_impressions. Returns
// nullopt when no report qualifies.
std::optional<double> coverage(std::span<const VarianceReport> reports, double threshold,
                               double min_impressions);

// Non-conforming ad coverage: 1 - coverage. Undefined coverage propagates.
std::optional<double> ncac(std::span<const VarianceReport> reports, double threshold,
                           double min_impressions);

// (1 - ncac_test / ncac_control) * 100. Undefined when ncac_control == 0.
std::optional<double> ncac_reduction(double ncac_test, double ncac_control);

// CSV export: ad_id, pc, variance, total_impressions, then one column per
// bucket for each ratio.
std::string reports_to_csv(std::span<const VarianceReport> reports);

}  // namespace vrs
