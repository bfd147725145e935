#include "vrs/dp_counters.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vrs {

void DPParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("DPParams: epsilon must lie in (0,1)");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("DPParams: delta must lie in (0,1)");
  }
  if (!(sensitivity > 0.0)) {
    throw std::invalid_argument("DPParams: sensitivity must be positive");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("DPParams: batch_size must be positive");
  }
}

double gaussian_sigma(const DPParams& params) {
  params.validate();
  return std::sqrt(2.0 * std::log(1.25 / params.delta) * params.sensitivity *
                   params.sensitivity / (params.epsilon * params.epsilon));
}

double laplace_scale(const DPParams& params) {
  params.validate();
  return params.sensitivity / params.epsilon;
}

NoisyBucketCounter::NoisyBucketCounter(std::size_t buckets, const DPParams& params,
                                       std::uint64_t seed)
    : params_(params),
      global_(buckets, 0.0),
      staging_(buckets, 0.0),
      rng_(seed) {
  params_.validate();
  sigma_ = gaussian_sigma(params_);
}

double NoisyBucketCounter::staged_total() const {
  double t = 0.0;
  for (double s : staging_) t += s;
  return t;
}

void NoisyBucketCounter::add_event(std::size_t bucket, double mass) {
  staging_.at(bucket) += mass;
  maybe_auto_flush();
}

void NoisyBucketCounter::add_event(const BucketDistribution& posterior) {
  if (posterior.buckets() != staging_.size()) {
    throw std::invalid_argument("add_event: posterior bucket count mismatch");
  }
  for (std::size_t i = 0; i < staging_.size(); ++i) {
    staging_[i] += posterior.values[i];
  }
  maybe_auto_flush();
}

void NoisyBucketCounter::maybe_auto_flush() {
  if (params_.batch_size == kManualFlush) return;
  // Tolerance so that soft counts summing to 1 within 1e-9 still trigger.
  if (staged_total() >= static_cast<double>(params_.batch_size) - 1e-9) {
    flush_batch();
  }
}

double NoisyBucketCounter::draw_noise() {
  if (params_.noise == NoiseKind::Gaussian) {
    std::normal_distribution<double> dist(0.0, sigma_);
    return dist(rng_);
  }
  // Laplace via inverse CDF.
  std::uniform_real_distribution<double> unif(-0.5, 0.5);
  const double u = unif(rng_);
  const double b = laplace_scale(params_);
  return -b * (u < 0 ? -1.0 : 1.0) * std::log(1.0 - 2.0 * std::abs(u));
}

void NoisyBucketCounter::flush_batch() {
  for (std::size_t i = 0; i < global_.size(); ++i) {
    global_[i] += staging_[i] + draw_noise();
    staging_[i] = 0.0;
  }
  ++batches_flushed_;
}

nlohmann::json NoisyBucketCounter::to_json() const {
  std::ostringstream rng_state;
  rng_state << rng_;
  return nlohmann::json{
      {"epsilon", params_.epsilon},
      {"delta", params_.delta},
      {"sensitivity", params_.sensitivity},
      {"batch_size", params_.batch_size},
      {"noise", params_.noise == NoiseKind::Gaussian ? "gaussian" : "laplace"},
      {"global", global_},
      {"staging", staging_},
      {"batches_flushed", batches_flushed_},
      {"rng_state", rng_state.str()},
  };
}

NoisyBucketCounter NoisyBucketCounter::from_json(const nlohmann::json& j) {
  DPParams params;
  params.epsilon = j.at("epsilon").get<double>();
  params.delta = j.at("delta").get<double>();
  params.sensitivity = j.at("sensitivity").get<double>();
  params.batch_size = j.at("batch_size").get<int>();
  params.noise =
      j.at("noise").get<std::string>() == "laplace" ? NoiseKind::Laplace : NoiseKind::Gaussian;
  NoisyBucketCounter c(j.at("global").size(), params, 0);
  c.global_ = j.at("global").get<std::vector<double>>();
  c.staging_ = j.at("staging").get<std::vector<double>>();
  c.batches_flushed_ = j.at("batches_flushed").get<int>();
  std::istringstream rng_state(j.at("rng_state").get<std::string>());
  rng_state >> c.rng_;
  return c;
}

}  // namespace vrs
