#include "vrs/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "vrs/rng.hpp"

namespace vrs {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double bce_with_logit(double logit, int label) {
  // max(z,0) - y*z + log(1 + exp(-|z|))
  return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

double bce_logit_grad(double logit, int label) { return sigmoid(logit) - label; }

void MlpGradients::zero() {
  for (auto& layer : w) std::fill(layer.begin(), layer.end(), 0.0);
  for (auto& layer : b) std::fill(layer.begin(), layer.end(), 0.0);
}

void MlpGradients::add(const MlpGradients& other) {
  for (std::size_t l = 0; l < w.size(); ++l) {
    for (std::size_t i = 0; i < w[l].size(); ++i) w[l][i] += other.w[l][i];
    for (std::size_t i = 0; i < b[l].size(); ++i) b[l][i] += other.b[l][i];
  }
}

void MlpGradients::scale(double s) {
  for (auto& layer : w) {
    for (double& v : layer) v *= s;
  }
  for (auto& layer : b) {
    for (double& v : layer) v *= s;
  }
}

Mlp::Mlp(std::vector<int> layer_sizes, Activation hidden, Activation output,
         std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least two layer sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
  }
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int fan_in = sizes_[l];
    const int fan_out = sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-limit, limit);
    std::vector<double> weights(static_cast<std::size_t>(fan_in) * fan_out);
    for (double& v : weights) v = unif(rng);
    w_.push_back(std::move(weights));
    b_.push_back(std::vector<double>(static_cast<std::size_t>(fan_out), 0.0));
  }
}

double Mlp::activate(double x, Activation a) {
  switch (a) {
    case Activation::Identity:
      return x;
    case Activation::Tanh:
      return std::tanh(x);
    case Activation::Sigmoid:
      return sigmoid(x);
  }
  return x;
}

double Mlp::activate_deriv_from_act(double a_val, Activation a) {
  switch (a) {
    case Activation::Identity:
      return 1.0;
    case Activation::Tanh:
      return 1.0 - a_val * a_val;
    case Activation::Sigmoid:
      return a_val * (1.0 - a_val);
  }
  return 1.0;
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Trace trace;
  return forward(input, trace);
}

std::vector<double> Mlp::forward(std::span<const double> input, Trace& trace) const {
  if (static_cast<int>(input.size()) != input_size()) {
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  }
  trace.acts.clear();
  trace.acts.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const int in_n = sizes_[l];
    const int out_n = sizes_[l + 1];
    const Activation act = (l + 1 == w_.size()) ? output_ : hidden_;
    const std::vector<double>& x = trace.acts.back();
    std::vector<double> y(static_cast<std::size_t>(out_n));
    for (int o = 0; o < out_n; ++o) {
      double z = b_[l][static_cast<std::size_t>(o)];
      const double* row = &w_[l][static_cast<std::size_t>(o) * in_n];
      for (int i = 0; i < in_n; ++i) z += row[i] * x[static_cast<std::size_t>(i)];
      y[static_cast<std::size_t>(o)] = activate(z, act);
    }
    trace.acts.push_back(std::move(y));
  }
  return trace.acts.back();
}

std::vector<double> Mlp::backward(const Trace& trace,
                                  std::span<const double> dloss_dpre_out,
                                  MlpGradients& grads) const {
  std::vector<double> dpre(dloss_dpre_out.begin(), dloss_dpre_out.end());
  for (std::size_t li = w_.size(); li-- > 0;) {
    const int in_n = sizes_[li];
    const int out_n = sizes_[li + 1];
    const std::vector<double>& x = trace.acts[li];
    for (int o = 0; o < out_n; ++o) {
      const double g = dpre[static_cast<std::size_t>(o)];
      double* wrow = &grads.w[li][static_cast<std::size_t>(o) * in_n];
      for (int i = 0; i < in_n; ++i) wrow[i] += g * x[static_cast<std::size_t>(i)];
      grads.b[li][static_cast<std::size_t>(o)] += g;
    }
    if (li == 0) {
      // dL/d(input)
      std::vector<double> dx(static_cast<std::size_t>(in_n), 0.0);
      for (int o = 0; o < out_n; ++o) {
        const double g = dpre[static_cast<std::size_t>(o)];
        const double* row = &w_[li][static_cast<std::size_t>(o) * in_n];
        for (int i = 0; i < in_n; ++i) dx[static_cast<std::size_t>(i)] += g * row[i];
      }
      return dx;
    }
    // Propagate to the previous layer's pre-activation.
    std::vector<double> dprev(static_cast<std::size_t>(in_n), 0.0);
    const std::vector<double>& prev_act = trace.acts[li];
    for (int o = 0; o < out_n; ++o) {
      const double g = dpre[static_cast<std::size_t>(o)];
      const double* row = &w_[li][static_cast<std::size_t>(o) * in_n];
      for (int i = 0; i < in_n; ++i) dprev[static_cast<std::size_t>(i)] += g * row[i];
    }
    for (int i = 0; i < in_n; ++i) {
      dprev[static_cast<std::size_t>(i)] *=
          activate_deriv_from_act(prev_act[static_cast<std::size_t>(i)], hidden_);
    }
    dpre = std::move(dprev);
  }
  return {};
}

MlpGradients Mlp::make_gradients() const {
  MlpGradients g;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    g.w.push_back(std::vector<double>(w_[l].size(), 0.0));
    g.b.push_back(std::vector<double>(b_[l].size(), 0.0));
  }
  return g;
}

void Mlp::apply_step(const MlpGradients& grads, double lr) {
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (std::size_t i = 0; i < w_[l].size(); ++i) w_[l][i] -= lr * grads.w[l][i];
    for (std::size_t i = 0; i < b_[l].size(); ++i) b_[l][i] -= lr * grads.b[l][i];
  }
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
  return n;
}

std::vector<double> Mlp::flat_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    out.insert(out.end(), w_[l].begin(), w_[l].end());
    out.insert(out.end(), b_[l].begin(), b_[l].end());
  }
  return out;
}

void Mlp::set_flat_params(std::span<const double> params) {
  std::size_t pos = 0;
  for (std::size_t l = 0; l < w_.size(); ++l) {
    for (double& v : w_[l]) v = params[pos++];
    for (double& v : b_[l]) v = params[pos++];
  }
  if (pos != params.size()) {
    throw std::invalid_argument("Mlp::set_flat_params: size mismatch");
  }
}

namespace {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  return Activation::Identity;
}

}  // namespace

nlohmann::json Mlp::to_json() const {
  return nlohmann::json{
      {"layer_sizes", sizes_},
      {"hidden", activation_name(hidden_)},
      {"output", activation_name(output_)},
      {"weights", w_},
      {"biases", b_},
  };
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m(j.at("layer_sizes").get<std::vector<int>>(),
        activation_from_name(j.at("hidden").get<std::string>()),
        activation_from_name(j.at("output").get<std::string>()), 0);
  m.w_ = j.at("weights").get<std::vector<std::vector<double>>>();
  m.b_ = j.at("biases").get<std::vector<std::vector<double>>>();
  if (m.w_.size() + 1 != m.sizes_.size()) {
    throw std::invalid_argument("Mlp::from_json: layer count mismatch");
  }
  return m;
}

}  // namespace vrs
