#include "vrs/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vrs/rng.hpp"

namespace vrs {

double hash_normal(std::uint64_t key, std::uint64_t salt) {
  const double u1 = hash_uniform(key, salt);
  const double u2 = hash_uniform(key, splitmix64(salt) ^ 0x5851F42D4C957F2DULL);
  const double r = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300)));
  return r * std::cos(2.0 * M_PI * u2);
}

const PCAttribute& PCAttribute::gender() {
  static const PCAttribute attr{"gender", {"male", "female"}};
  return attr;
}

const PCAttribute& PCAttribute::estimated_race() {
  static const PCAttribute attr{"race", {"Black", "Hispanic", "White", "Other"}};
  return attr;
}

const PCAttribute& PCAttribute::of(PC pc) {
  return pc == PC::Gender ? gender() : estimated_race();
}

const char* pc_name(PC pc) { return pc == PC::Gender ? "gender" : "race"; }

std::optional<PC> pc_from_name(const std::string& name) {
  if (name == "gender") return PC::Gender;
  if (name == "race" || name == "estimated_race") return PC::EstimatedRace;
  return std::nullopt;
}

BucketDistribution BucketDistribution::undefined(std::size_t n) {
  BucketDistribution d;
  d.values.assign(n, 0.0);
  d.defined = false;
  return d;
}

BucketDistribution BucketDistribution::from_values(std::vector<double> v) {
  double total = 0.0;
  for (double x : v) {
    if (x < -1e-9 || x > 1.0 + 1e-9) {
      throw std::invalid_argument("BucketDistribution entry outside [0,1]");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("BucketDistribution values must sum to 1");
  }
  BucketDistribution d;
  d.values = std::move(v);
  d.defined = true;
  return d;
}

BucketDistribution BucketDistribution::from_counts(std::span<const double> counts) {
  BucketDistribution d;
  d.values.assign(counts.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double c = std::max(0.0, counts[i]);
    d.values[i] = c;
    total += c;
  }
  if (total <= 0.0) {
    std::fill(d.values.begin(), d.values.end(), 0.0);
    d.defined = false;
    return d;
  }
  for (double& v : d.values) v /= total;
  d.defined = true;
  return d;
}

bool matches_targeting(const UserRecord& user, const TargetingSpec& spec) {
  if (!std::binary_search(spec.allowed_zip_ids.begin(), spec.allowed_zip_ids.end(),
                          user.zip_id)) {
    return false;
  }
  const std::size_t coord = static_cast<std::size_t>(spec.interest_coord);
  if (coord >= user.latent_preference.size()) return false;
  const double x = user.latent_preference[coord];
  return x >= spec.interest_lo && x <= spec.interest_hi;
}

int bucket_of(const UserRecord& user, PC pc) {
  return pc == PC::Gender ? user.true_gender : user.true_race;
}

int bucket_of(const UserRecord& user, const PCAttribute& pc) {
  if (pc.name == PCAttribute::gender().name) return user.true_gender;
  if (pc.name == PCAttribute::estimated_race().name) return user.true_race;
  throw std::invalid_argument("bucket_of: unsupported PC attribute '" + pc.name + "'");
}

void TaggedFeatures::assert_pc_free() const {
  for (FeatureSource s : sources) {
    if (s == FeatureSource::GroundTruthPC) {
      throw std::logic_error("ground-truth PC value leaked into a model feature");
    }
  }
}

}  // namespace vrs
