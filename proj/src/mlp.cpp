#include "dagprl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace dagprl {

namespace {

Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& z) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.max(0.0);
    case Activation::kSigmoid:
      return 1.0 / (1.0 + (-z).exp());
    case Activation::kTanh:
      return z.tanh();
  }
  return z;
}

/// Derivative expressed through the activation output h.
Eigen::ArrayXXd derivative_from_output(Activation a, const Eigen::ArrayXXd& h) {
  switch (a) {
    case Activation::kIdentity:
      return Eigen::ArrayXXd::Ones(h.rows(), h.cols());
    case Activation::kRelu:
      return (h > 0.0).cast<double>();
    case Activation::kSigmoid:
      return h * (1.0 - h);
    case Activation::kTanh:
      return 1.0 - h.square();
  }
  return h;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kSigmoid:
      return "sigmoid";
    case Activation::kTanh:
      return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Mlp::Mlp(const std::vector<int>& sizes, const std::vector<Activation>& activations) {
  if (sizes.size() < 2 || activations.size() + 1 != sizes.size()) {
    throw std::invalid_argument("MLP needs one activation per layer");
  }
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    if (sizes[i] < 1 || sizes[i + 1] < 1) throw std::invalid_argument("MLP layer sizes must be positive");
    layers_.push_back({Eigen::MatrixXd::Zero(sizes[i + 1], sizes[i]), Eigen::VectorXd::Zero(sizes[i + 1]),
                       activations[i]});
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("MLP needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weights.rows()) throw std::invalid_argument("MLP bias size mismatch");
    if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
      throw std::invalid_argument("MLP layer shapes do not chain");
    }
  }
}

void Mlp::initialize(Rng& rng) {
  for (auto& l : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weights.rows() + l.weights.cols()));
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) l.weights(i, j) = uniform(rng, -limit, limit);
    l.bias.setZero();
  }
}

int Mlp::input_dim() const { return static_cast<int>(layers_.front().weights.cols()); }
int Mlp::output_dim() const { return static_cast<int>(layers_.back().weights.rows()); }

std::vector<int> Mlp::layer_sizes() const {
  std::vector<int> s{input_dim()};
  for (const auto& l : layers_) s.push_back(static_cast<int>(l.weights.rows()));
  return s;
}

Eigen::Index Mlp::num_params() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

Eigen::VectorXd Mlp::params() const {
  Eigen::VectorXd p(num_params());
  Eigen::Index off = 0;
  for (const auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      p.segment(off, l.weights.cols()) = l.weights.row(i).transpose();
      off += l.weights.cols();
    }
    p.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return p;
}

void Mlp::set_params(const Eigen::VectorXd& p) {
  if (p.size() != num_params()) throw std::invalid_argument("MLP parameter vector length mismatch");
  Eigen::Index off = 0;
  for (auto& l : layers_) {
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      l.weights.row(i) = p.segment(off, l.weights.cols()).transpose();
      off += l.weights.cols();
    }
    l.bias = p.segment(off, l.bias.size());
    off += l.bias.size();
  }
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  Eigen::VectorXd h = x;
  for (const auto& l : layers_) h = activate(l.activation, (l.weights * h + l.bias).array()).matrix();
  return h;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x, Tape& tape) const {
  tape.values.assign(1, x);
  for (const auto& l : layers_) {
    tape.values.push_back(activate(l.activation, (l.weights * tape.values.back() + l.bias).array()).matrix());
  }
  return tape.values.back();
}

Eigen::VectorXd Mlp::backward(const Tape& tape, const Eigen::VectorXd& d_out, Eigen::Ref<Eigen::VectorXd> grad) const {
  Eigen::VectorXd d = d_out;
  Eigen::Index off = num_params();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    const Eigen::VectorXd dz = (d.array() * derivative_from_output(l.activation, tape.values[i + 1].array())).matrix();
    off -= l.weights.size() + l.bias.size();
    const Eigen::VectorXd& in = tape.values[i];
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      grad.segment(off + r * l.weights.cols(), l.weights.cols()) += dz(r) * in;
    }
    grad.segment(off + l.weights.size(), l.bias.size()) += dz;
    d = l.weights.transpose() * dz;
  }
  return d;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd h = x;
  for (const auto& l : layers_) {
    h = activate(l.activation, ((h * l.weights.transpose()).rowwise() + l.bias.transpose()).array()).matrix();
  }
  return h;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& x, BatchTape& tape) const {
  tape.values.assign(1, x);
  for (const auto& l : layers_) {
    const Eigen::MatrixXd z = (tape.values.back() * l.weights.transpose()).rowwise() + l.bias.transpose();
    tape.values.push_back(activate(l.activation, z.array()).matrix());
  }
  return tape.values.back();
}

void Mlp::backward_batch(const BatchTape& tape, const Eigen::MatrixXd& d_out, Eigen::Ref<Eigen::VectorXd> grad) const {
  Eigen::MatrixXd d = d_out;
  Eigen::Index off = num_params();
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const auto& l = layers_[i];
    const Eigen::MatrixXd dz = (d.array() * derivative_from_output(l.activation, tape.values[i + 1].array())).matrix();
    off -= l.weights.size() + l.bias.size();
    const Eigen::MatrixXd dw = dz.transpose() * tape.values[i];  // out x in
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      grad.segment(off + r * l.weights.cols(), l.weights.cols()) += dw.row(r).transpose();
    }
    grad.segment(off + l.weights.size(), l.bias.size()) += dz.colwise().sum().transpose();
    if (i > 0) d = dz * l.weights;
  }
}

}  // namespace dagprl
