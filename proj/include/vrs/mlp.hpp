#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

namespace vrs {

enum class Activation { Identity, Tanh, Sigmoid };

// Parameter-shaped gradient accumulator.
struct MlpGradients {
  std::vector<std::vector<double>> w;  // per layer, row-major (out x in)
  std::vector<std::vector<double>> b;

  void zero();
  void add(const MlpGradients& other);
  void scale(double s);
};

// Plain fully connected network over doubles. Weights are row-major
// (out x in) per layer; initialization is Xavier-uniform from the given
// seed, so identical (sizes, seed) yield identical parameters.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, Activation hidden, Activation output,
      std::uint64_t seed);

  int input_size() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int output_size() const { return sizes_.empty() ? 0 : sizes_.back(); }
  std::size_t layers() const { return w_.size(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }

  std::vector<double> forward(std::span<const double> input) const;

  // Forward pass that records post-activation values per layer for backward.
  struct Trace {
    std::vector<std::vector<double>> acts;  // acts[0] = input, acts.back() = output
  };
  std::vector<double> forward(std::span<const double> input, Trace& trace) const;

  // Backpropagates from dL/d(pre-activation of the output layer), accumulating
  // parameter gradients into `grads` and returning dL/d(input).
  std::vector<double> backward(const Trace& trace, std::span<const double> dloss_dpre_out,
                               MlpGradients& grads) const;

  MlpGradients make_gradients() const;
  void apply_step(const MlpGradients& grads, double lr);  // theta -= lr * grad

  std::size_t param_count() const;
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> params);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  static double activate(double x, Activation a);
  // Derivative expressed from the post-activation value.
  static double activate_deriv_from_act(double a_val, Activation a);

  std::vector<int> sizes_;
  Activation hidden_ = Activation::Tanh;
  Activation output_ = Activation::Identity;
  std::vector<std::vector<double>> w_;
  std::vector<std::vector<double>> b_;
};

// Numerically stable binary cross entropy from a logit.
double bce_with_logit(double logit, int label);
// d(bce)/d(logit) = sigmoid(logit) - label.
double bce_logit_grad(double logit, int label);
double sigmoid(double x);

}  // namespace vrs
