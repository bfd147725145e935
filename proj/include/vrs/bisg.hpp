#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "vrs/core_model.hpp"
#include "vrs/dp_counters.hpp"

namespace vrs {

// P(race bucket | surname), one row per surname id. Rows sum to 1.
struct SurnameTable {
  std::vector<std::vector<double>> rows;

  std::size_t surnames() const { return rows.size(); }
  std::size_t buckets() const { return rows.empty() ? 0 : rows.front().size(); }
  void validate() const;  // throws std::invalid_argument
};

// P(race bucket | zip), one row per zip id, plus the population race
// marginal P(race). Marginal entries must be strictly positive.
struct GeoTable {
  std::vector<std::vector<double>> rows;
  std::vector<double> marginal;

  std::size_t zips() const { return rows.size(); }
  std::size_t buckets() const { return marginal.size(); }
  void validate() const;
};

// Bayesian surname-geocoding posterior:
//   P(r | s, g)  ∝  P(r | s) · P(g | r)
// with the geo likelihood recovered by Bayes inversion P(g|r) ∝ P(r|g)/P(r);
// the zip marginal cancels in normalization. Contradictory tables (zero
// normalizer) fall back to a uniform distribution with a logged warning.
BucketDistribution bisg_posterior(int surname_id, int zip_id, const SurnameTable& surnames,
                                  const GeoTable& geo);

// CSV round trips: surname_id then one probability column per race bucket;
// the geo file carries one extra row labelled "marginal".
std::string surname_table_to_csv(const SurnameTable& t);
SurnameTable surname_table_from_csv(std::istream& in);
std::string geo_table_to_csv(const GeoTable& t);
GeoTable geo_table_from_csv(std::istream& in);

// Per-ad race-count pipeline: impressions stage as (surname, zip) pairs;
// when the staging batch reaches the aggregation level, the whole batch is
// resolved to posteriors, folded into the DP counter as soft counts with one
// noise draw per bucket, and the staging batch is cleared.
class BisgGroupState {
 public:
  BisgGroupState(std::int64_t ad_id, std::size_t buckets, int aggregation_level,
                 const DPParams& counter_params, std::uint64_t seed);

  // Returns true when this impression completed a batch (counter flushed).
  bool ingest_impression(int surname_id, int zip_id, const SurnameTable& surnames,
                         const GeoTable& geo);

  // End-of-run: resolve and flush whatever is staged (no data dropped).
  // Returns true if a flush fired.
  bool flush_remaining(const SurnameTable& surnames, const GeoTable& geo);

  BucketDistribution race_ratios() const;

  std::int64_t ad_id() const { return ad_id_; }
  std::size_t staged() const { return staging_.size(); }
  int aggregation_level() const { return aggregation_level_; }
  const NoisyBucketCounter& counter() const { return counter_; }

 private:
  void resolve_batch(const SurnameTable& surnames, const GeoTable& geo);

  std::int64_t ad_id_;
  int aggregation_level_;
  std::vector<std::pair<int, int>> staging_;  // (surname_id, zip_id)
  NoisyBucketCounter counter_;
};

}  // namespace vrs
