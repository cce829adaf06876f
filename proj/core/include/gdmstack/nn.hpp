#pragma once

// Small dense networks in double precision with hand-written reverse-mode
// gradients. Batches are column-major: each column of an input matrix is one
// sample. No broadcasting: every shape is checked and mismatches throw
// std::invalid_argument.

#include <Eigen/Core>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gdmstack/rng.hpp"

namespace gdmstack {

enum class Activation { identity, tanh, relu, swish };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// Per-layer values recorded by a forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;   ///< input to layer k
  std::vector<Eigen::MatrixXd> outputs;  ///< activated output of layer k
  std::vector<Eigen::MatrixXd> pre;      ///< pre-activation of layer k
};

struct NetGradients {
  Eigen::VectorXd params;  ///< summed over the batch, same layout as DenseNet
  Eigen::MatrixXd inputs;  ///< one column per sample
};

/// Fully connected network. Parameters live in one flat vector; layer k
/// stores its weight matrix (out x in, column-major) followed by its bias.
class DenseNet {
 public:
  DenseNet() = default;
  /// Initializes weights and biases uniformly in +-1/sqrt(fan_in).
  DenseNet(std::vector<int> widths, std::vector<Activation> activations, Rng& rng);
  DenseNet(std::vector<int> widths, std::vector<Activation> activations,
           Eigen::VectorXd params);

  int input_width() const { return widths_.front(); }
  int output_width() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& widths() const { return widths_; }
  const std::vector<Activation>& activations() const { return activations_; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t param_count() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs,
                          ForwardCache* cache = nullptr) const;

  /// Gradients of sum(upstream .* forward(inputs)) with respect to the
  /// parameters and the inputs.
  NetGradients backward(const ForwardCache& cache,
                        const Eigen::MatrixXd& upstream) const;

 private:
  void check_layout();

  std::vector<int> widths_;
  std::vector<Activation> activations_;
  std::vector<std::ptrdiff_t> offsets_;
  Eigen::VectorXd params_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Rescale gradients whose L2 norm exceeds this; 0 disables clipping.
  double max_grad_norm = 0.0;
};

/// Adaptive-moment optimizer state for one flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, AdamConfig config);

  /// Throws std::domain_error on a non-finite gradient, leaving state and
  /// parameters untouched.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grads);

  const AdamConfig& config() const { return config_; }
  long steps() const { return steps_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long steps_ = 0;
};

// Text format, version 1:
//   gdmstack-densenet 1
//   widths <w0> <w1> ... <wK>
//   activations <a1> ... <aK>
//   params <count>
//   <one value per line, round-trip precision>
void save(const DenseNet& net, std::ostream& out);
DenseNet load_dense_net(std::istream& in);
void save(const DenseNet& net, const std::string& path);
DenseNet load_dense_net(const std::string& path);

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `loss` at `point`.
/// Relative error per coordinate is |a - n| / max(|a|, |n|, floor).
GradCheckResult finite_difference_check(
    const std::function<double(const Eigen::VectorXd&)>& loss,
    const Eigen::VectorXd& point, const Eigen::VectorXd& analytic,
    double step = 1e-4, double floor = 1e-6);

}  // namespace gdmstack
