#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "json.hpp"
#include "vrs/core_model.hpp"
#include "vrs/rng.hpp"

namespace vrs {

enum class NoiseKind { Gaussian, Laplace };

struct DPParams {
  double epsilon = 0.8;
  double delta = 0.05;
  double sensitivity = 1.0;
  // Staged mass that triggers a flush; the aggregation level k. Use
  // kManualFlush to disable auto-flushing and drive batches externally.
  int batch_size = 10;
  NoiseKind noise = NoiseKind::Gaussian;

  void validate() const;  // throws std::invalid_argument
};

constexpr int kManualFlush = std::numeric_limits<int>::max();

// Standard deviation of the Gaussian mechanism providing (epsilon, delta)-DP
// for epsilon, delta in (0,1): sqrt(2 ln(1.25/delta) sensitivity^2 / epsilon^2).
double gaussian_sigma(const DPParams& params);

// Scale of the Laplace mechanism variant: sensitivity / epsilon.
double laplace_scale(const DPParams& params);

// Batched noisy per-bucket event counter. Events accumulate exactly in a
// staging buffer; at each flush the staged counts plus one independent noise
// draw per bucket fold into the global totals. Readers only ever see the
// global totals, so unflushed events reveal nothing.
//
// Mutations on one counter must be externally serialized; distinct counters
// are independent (each owns a seed-derived RNG stream).
class NoisyBucketCounter {
 public:
  NoisyBucketCounter(std::size_t buckets, const DPParams& params, std::uint64_t seed);

  // Hard count: one event in the given bucket (mass may be fractional when a
  // user's contribution is weighted). Auto-flushes when the staged total
  // reaches batch_size.
  void add_event(std::size_t bucket, double mass = 1.0);
  // Soft count: the event's posterior mass spread over all buckets; the
  // distribution must sum to 1 so one user still contributes total mass 1.
  void add_event(const BucketDistribution& posterior);

  // Folds staging plus per-bucket noise into the global totals and zeroes
  // staging. Flushing empty staging adds pure noise (end-of-run convention so
  // no staged data is ever silently dropped).
  void flush_batch();

  // Snapshot of the noise-folded global totals. Never exposes staging.
  std::vector<double> read_counts() const { return global_; }

  int batches_flushed() const { return batches_flushed_; }
  double sigma() const { return sigma_; }
  std::size_t buckets() const { return global_.size(); }
  double staged_total() const;  // audit/test hook, not a read path
  std::span<const double> staged_snapshot() const { return staging_; }

  const DPParams& params() const { return params_; }

  // Checkpoint/restore of long simulations, including the RNG stream.
  nlohmann::json to_json() const;
  static NoisyBucketCounter from_json(const nlohmann::json& j);

 private:
  void maybe_auto_flush();
  double draw_noise();

  DPParams params_;
  double sigma_ = 0.0;
  std::vector<double> global_;
  std::vector<double> staging_;
  int batches_flushed_ = 0;
  Rng rng_;
};

}  // namespace vrs
