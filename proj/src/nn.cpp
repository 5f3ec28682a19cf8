#include "cec/nn.hpp"

#include <cmath>
#include <random>

#include "cec/errors.hpp"

namespace cec::nn {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "identity") return Activation::Identity;
  throw InvalidInput("unknown activation '" + name + "'");
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite values in ") + what);
}

DenseNet::DenseNet(std::vector<int> layer_sizes, std::vector<Activation> activations,
                   std::uint64_t seed)
    : sizes_(std::move(layer_sizes)), acts_(std::move(activations)), seed_(seed) {
  if (sizes_.size() < 2 || acts_.size() + 1 != sizes_.size())
    throw ShapeMismatch("need one activation per layer");
  for (int s : sizes_)
    if (s < 1) throw ShapeMismatch("layer sizes must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
  }
  params_.resize(total);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> init(-bound, bound);
    const std::size_t n = static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
    for (std::size_t i = 0; i < n; ++i) params_[offsets_[l] + i] = init(rng);
  }
}

Eigen::MatrixXd DenseNet::forward(const Eigen::MatrixXd& x, Tape* tape) const {
  if (x.rows() != input_size())
    throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows, expected " +
                        std::to_string(input_size()));
  if (tape) {
    tape->inputs.clear();
    tape->outputs.clear();
  }
  Eigen::MatrixXd a = x;
  for (int l = 0; l < num_layers(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + offsets_[l] + out * in, out);
    Eigen::MatrixXd z = w * a;
    z.colwise() += b;
    switch (acts_[l]) {
      case Activation::Tanh: z = z.array().tanh(); break;
      case Activation::Relu: z = z.array().max(0.0); break;
      case Activation::Identity: break;
    }
    if (tape) tape->inputs.push_back(std::move(a));
    a = std::move(z);
    if (tape) tape->outputs.push_back(a);
  }
  require_finite(a, "network output");
  return a;
}

Eigen::MatrixXd DenseNet::backward(const Tape& tape, const Eigen::MatrixXd& upstream,
                                   std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient buffer size");
  if (static_cast<int>(tape.outputs.size()) != num_layers())
    throw ShapeMismatch("backward without a matching forward tape");
  if (upstream.rows() != output_size() || upstream.cols() != tape.outputs.back().cols())
    throw ShapeMismatch("upstream gradient shape");
  Eigen::MatrixXd delta = upstream;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const Eigen::MatrixXd& y = tape.outputs[l];
    switch (acts_[l]) {
      case Activation::Tanh: delta.array() *= 1.0 - y.array().square(); break;
      case Activation::Relu: delta.array() *= (y.array() > 0.0).cast<double>(); break;
      case Activation::Identity: break;
    }
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + offsets_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l] + out * in, out);
    gw.noalias() += delta * tape.inputs[l].transpose();
    gb += delta.rowwise().sum();
    delta = w.transpose() * delta;
  }
  return delta;
}

nlohmann::json DenseNet::to_json() const {
  std::vector<std::string> acts;
  for (auto a : acts_) acts.emplace_back(activation_name(a));
  return {{"layer_sizes", sizes_}, {"activations", acts}, {"weights", params_},
          {"seed", seed_}};
}

DenseNet DenseNet::from_json(const nlohmann::json& doc) {
  std::vector<Activation> acts;
  for (const auto& a : doc.at("activations")) acts.push_back(activation_from_name(a));
  DenseNet net(doc.at("layer_sizes").get<std::vector<int>>(), acts,
               doc.value("seed", std::uint64_t{0}));
  auto w = doc.at("weights").get<std::vector<double>>();
  if (w.size() != net.params_.size()) throw ShapeMismatch("checkpoint weight count");
  net.params_ = std::move(w);
  return net;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax of an empty vector");
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

Adam::Adam(std::size_t param_count, AdamConfig config)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ShapeMismatch("Adam state does not match parameter count");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * grads[i];
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

nlohmann::json Adam::to_json() const {
  return {{"lr", config_.lr},       {"beta1", config_.beta1}, {"beta2", config_.beta2},
          {"eps", config_.eps},     {"step", t_},             {"m", m_},
          {"v", v_}};
}

Adam Adam::from_json(const nlohmann::json& doc) {
  AdamConfig c{doc.at("lr").get<double>(), doc.at("beta1").get<double>(),
               doc.at("beta2").get<double>(), doc.at("eps").get<double>()};
  Adam a(0, c);
  a.m_ = doc.at("m").get<std::vector<double>>();
  a.v_ = doc.at("v").get<std::vector<double>>();
  a.t_ = doc.at("step").get<std::uint64_t>();
  if (a.m_.size() != a.v_.size()) throw ShapeMismatch("Adam moment sizes differ");
  return a;
}

void soft_update(std::span<double> target, std::span<const double> primary,
                 double omega) {
  if (target.size() != primary.size()) throw ShapeMismatch("soft update sizes");
  if (!(omega > 0.0 && omega <= 1.0)) throw InvalidInput("omega must lie in (0,1]");
  for (std::size_t i = 0; i < target.size(); ++i)
    target[i] = omega * primary[i] + (1.0 - omega) * target[i];
}

}  // namespace cec::nn
