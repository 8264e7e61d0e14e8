#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagprl/rng.hpp"

namespace dagprl {

enum class Activation { kIdentity, kRelu, kSigmoid, kTanh };

std::string to_string(Activation a);
/// Throws std::invalid_argument for unknown names.
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;
  Activation activation = Activation::kIdentity;
};

/// Fully connected network with a hand-written reverse pass. Flat parameter
/// layout: for each layer, weights row-major followed by the bias.
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network; activations.size() == sizes.size() - 1.
  Mlp(const std::vector<int>& sizes, const std::vector<Activation>& activations);
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights, zero biases.
  void initialize(Rng& rng);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> layer_sizes() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::Index num_params() const;
  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);

  /// Post-activation values of every layer, input first.
  struct Tape {
    std::vector<Eigen::VectorXd> values;
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& x, Tape& tape) const;
  /// Accumulates dL/dparams into grad and returns dL/dinput.
  Eigen::VectorXd backward(const Tape& tape, const Eigen::VectorXd& d_out, Eigen::Ref<Eigen::VectorXd> grad) const;

  /// Row-wise batch versions (one sample per row).
  struct BatchTape {
    std::vector<Eigen::MatrixXd> values;
  };
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x, BatchTape& tape) const;
  void backward_batch(const BatchTape& tape, const Eigen::MatrixXd& d_out, Eigen::Ref<Eigen::VectorXd> grad) const;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace dagprl
