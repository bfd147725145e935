#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vrs {

// Protected-class attributes measured by the system. Gender has two buckets
// (male, female); estimated race has four (Black, Hispanic, White, Other).
enum class PC { Gender = 0, EstimatedRace = 1 };

constexpr std::size_t kNumPcs = 2;

struct PCAttribute {
  std::string name;
  std::vector<std::string> buckets;

  std::size_t bucket_count() const { return buckets.size(); }

  static const PCAttribute& gender();
  static const PCAttribute& estimated_race();
  static const PCAttribute& of(PC pc);
};

constexpr std::size_t bucket_count(PC pc) {
  return pc == PC::Gender ? 2u : 4u;
}

const char* pc_name(PC pc);
std::optional<PC> pc_from_name(const std::string& name);

// Bucket index conventions.
constexpr int kMale = 0;
constexpr int kFemale = 1;

// sign(0) = 0: fresh or perfectly balanced ads exert no pressure either way.
inline int sign_of(double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); }

// Normalized fractions over the buckets of one protected-class attribute.
// A distribution built from zero total mass is flagged undefined instead of
// dividing by zero; values of an undefined distribution are all zero.
struct BucketDistribution {
  std::vector<double> values;
  bool defined = false;

  std::size_t buckets() const { return values.size(); }

  static BucketDistribution undefined(std::size_t n);
  // Values must already lie in [0,1] and sum to 1 within 1e-9.
  static BucketDistribution from_values(std::vector<double> v);
  // Clamps negative counts to zero, then normalizes; undefined if the
  // clamped total is zero.
  static BucketDistribution from_counts(std::span<const double> counts);
};

struct TargetingSpec {
  std::vector<int> allowed_zip_ids;  // sorted
  int interest_coord = 0;            // latent-preference coordinate the band applies to
  double interest_lo = -1e30;
  double interest_hi = 1e30;
};

struct UserRecord {
  std::int64_t user_id = 0;
  int surname_id = 0;
  int zip_id = 0;
  int true_gender = 0;  // ground truth, simulator-internal only
  int true_race = 0;    // ground truth, simulator-internal only
  std::vector<double> latent_preference;
  int activity_weight = 1;  // count of request events; weights the eligible ratio
};

struct AdRecord {
  std::int64_t ad_id = 0;
  bool is_housing = false;
  TargetingSpec targeting;
  double advertiser_bid_base = 1.0;
  std::vector<double> quality_affinity;
};

// Binary controller action space.
enum class ControllerAction { NoAdjustment = 0, AdjustUp = 1 };

struct ImpressionEvent {
  std::int64_t ad_id = 0;
  std::int64_t user_id = 0;
  long timestep = 0;
  ControllerAction action_taken = ControllerAction::NoAdjustment;
  bool clicked = false;
};

bool matches_targeting(const UserRecord& user, const TargetingSpec& spec);

// Ground-truth bucket lookup. Only the simulator's counters and reward
// computation may call this; it must never feed model features.
int bucket_of(const UserRecord& user, PC pc);
// Name-based variant; throws std::invalid_argument for unsupported attributes.
int bucket_of(const UserRecord& user, const PCAttribute& pc);

// Provenance tag carried by every model feature so that tests can assert no
// ground-truth PC value ever reaches an embedding or controller input.
enum class FeatureSource {
  LatentPreference,
  BenignNoise,
  AdAffinity,
  Embedding,
  VarianceSign,
  GroundTruthPC,
};

struct TaggedFeatures {
  std::vector<double> values;
  std::vector<FeatureSource> sources;

  // Throws std::logic_error if any feature is tagged GroundTruthPC.
  void assert_pc_free() const;
};

}  // namespace vrs
