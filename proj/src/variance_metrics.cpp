#include "vrs/variance_metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vrs {

BucketDistribution delivery_ratio(std::span<const double> counts) {
  return BucketDistribution::from_counts(counts);
}

BucketDistribution eligible_ratio(std::span<const UserRecord> users, const AdRecord& ad,
                                  PC pc) {
  const std::size_t n = bucket_count(pc);
  std::vector<double> weighted(n, 0.0);
  std::vector<double> unweighted(n, 0.0);
  double total_weight = 0.0;
  bool any = false;
  for (const UserRecord& u : users) {
    if (!matches_targeting(u, ad.targeting)) continue;
    any = true;
    const int b = bucket_of(u, pc);
    weighted[static_cast<std::size_t>(b)] += u.activity_weight;
    unweighted[static_cast<std::size_t>(b)] += 1.0;
    total_weight += u.activity_weight;
  }
  if (!any) return BucketDistribution::undefined(n);
  // Cold-start worlds can have an audience with zero activity everywhere.
  if (total_weight <= 0.0) return BucketDistribution::from_counts(unweighted);
  return BucketDistribution::from_counts(weighted);
}

double shuffle_distance(const BucketDistribution& p, const BucketDistribution& q) {
  if (!p.defined || !q.defined) {
    throw std::invalid_argument("shuffle_distance: undefined distribution");
  }
  if (p.buckets() != q.buckets()) {
    throw std::invalid_argument("shuffle_distance: mismatched bucket counts");
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.buckets(); ++i) {
    l1 += std::abs(p.values[i] - q.values[i]);
  }
  return l1 / 2.0;
}

std::optional<double> coverage(std::span<const VarianceReport> reports, double threshold,
                               double min_impressions) {
  long qualifying = 0;
  long under = 0;
  for (const VarianceReport& r : reports) {
    if (!r.is_housing) continue;
    if (r.total_impressions < min_impressions) continue;
    ++qualifying;
    // An undefined variance counts as non-conforming.
    if (r.variance_defined && r.variance < threshold) ++under;
  }
  if (qualifying == 0) return std::nullopt;
  return static_cast<double>(under) / static_cast<double>(qualifying);
}

std::optional<double> ncac(std::span<const VarianceReport> reports, double threshold,
                           double min_impressions) {
  const auto cov = coverage(reports, threshold, min_impressions);
  if (!cov) return std::nullopt;
  return 1.0 - *cov;
}

std::optional<double> ncac_reduction(double ncac_test, double ncac_control) {
  if (ncac_control <= 0.0) return std::nullopt;
  return (1.0 - ncac_test / ncac_control) * 100.0;
}

std::string reports_to_csv(std::span<const VarianceReport> reports) {
  std::string out = "ad_id,pc,variance,total_impressions";
  std::size_t max_buckets = 0;
  for (const auto& r : reports) max_buckets = std::max(max_buckets, r.eligible.buckets());
  for (std::size_t i = 0; i < max_buckets; ++i) {
    out += ",eligible_" + std::to_string(i);
  }
  for (std::size_t i = 0; i < max_buckets; ++i) {
    out += ",delivery_" + std::to_string(i);
  }
  out += "\n";
  char buf[64];
  for (const auto& r : reports) {
    out += std::to_string(r.ad_id);
    out += ",";
    out += pc_name(r.pc);
    std::snprintf(buf, sizeof(buf), ",%.10g,%.10g", r.variance, r.total_impressions);
    out += buf;
    for (std::size_t i = 0; i < max_buckets; ++i) {
      const double v = i < r.eligible.buckets() ? r.eligible.values[i] : 0.0;
      std::snprintf(buf, sizeof(buf), ",%.10g", v);
      out += buf;
    }
    for (std::size_t i = 0; i < max_buckets; ++i) {
      const double v = i < r.delivery.buckets() ? r.delivery.values[i] : 0.0;
      std::snprintf(buf, sizeof(buf), ",%.10g", v);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace vrs
