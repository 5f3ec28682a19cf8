#pragma once

// Small feed-forward networks with hand-written reverse mode, Adam, and
// JSON checkpoints. Batches are matrices with one sample per column.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace cec::nn {

enum class Activation { Tanh, Relu, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

class DenseNet {
 public:
  // Cached per-layer inputs and post-activation outputs of one forward pass.
  struct Tape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> outputs;
  };

  DenseNet() = default;
  // Weights and biases uniform in +-1/sqrt(fan_in), seeded.
  DenseNet(std::vector<int> layer_sizes, std::vector<Activation> activations,
           std::uint64_t seed);

  const std::vector<int>& layer_sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return acts_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(acts_.size()); }
  std::size_t param_count() const { return params_.size(); }
  std::uint64_t seed() const { return seed_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const;

  // Adds dL/dtheta into `grad` (length param_count) and returns dL/dx.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                           std::span<double> grad) const;

  nlohmann::json to_json() const;
  static DenseNet from_json(const nlohmann::json& doc);

 private:
  std::vector<int> sizes_;
  std::vector<Activation> acts_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of layer l's weights
  std::uint64_t seed_ = 0;
};

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t param_count, AdamConfig config);

  // Bias-corrected update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
  void step(std::span<double> params, std::span<const double> grads);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return t_; }

  nlohmann::json to_json() const;
  static Adam from_json(const nlohmann::json& doc);

 private:
  AdamConfig config_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

// target <- omega * primary + (1 - omega) * target
void soft_update(std::span<double> target, std::span<const double> primary,
                 double omega);

void require_finite(const Eigen::MatrixXd& m, const char* what);

}  // namespace cec::nn
