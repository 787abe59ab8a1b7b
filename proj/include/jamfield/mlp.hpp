#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "jamfield/field_model.hpp"

namespace jamfield {

/// Affine map u = (x - center) / half_width applied before the first layer.
struct InputScaling {
  std::vector<double> center;
  std::vector<double> half_width;

  static InputScaling identity(std::size_t dim);
  /// Maps an axis-aligned box onto [-1, 1]^D.
  static InputScaling from_box(std::span<const double> lo, std::span<const double> hi);

  std::size_t dim() const { return center.size(); }
  void apply(const Position& x, std::span<double> out) const;
};

/// Feed-forward network with tanh hidden layers and a linear scalar output.
/// Parameters are stored flat, layer by layer: row-major weights
/// [n_out x n_in] followed by the n_out biases.
class MlpParams {
 public:
  MlpParams() = default;
  MlpParams(std::vector<std::size_t> layer_sizes, InputScaling scaling);

  static std::size_t parameter_count(std::span<const std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const { return layers_; }
  const InputScaling& scaling() const { return scaling_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double squared_norm() const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + layers_[layer] * layers_[layer + 1];
  }
  std::size_t n_layers() const { return layers_.size() - 1; }

 private:
  std::vector<std::size_t> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
  InputScaling scaling_;
};

/// D -> 200 -> 100 -> 1.
std::vector<std::size_t> default_layer_sizes(std::size_t input_dim);

/// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpParams init_mlp(std::vector<std::size_t> layer_sizes, InputScaling scaling, std::uint64_t seed);

/// Reusable activation buffers for forward/backward passes.
class MlpWorkspace {
 public:
  explicit MlpWorkspace(const MlpParams& params);

  /// Forward pass on already-scaled input; keeps activations for backward().
  double forward(const MlpParams& params, std::span<const double> u);
  double forward(const MlpParams& params, const Position& x);
  /// Adds upstream * d(output)/d(phi) for the last forward() input to grad.
  void backward(const MlpParams& params, double upstream, std::span<double> grad);

 private:
  std::vector<std::vector<double>> act_;
  std::vector<double> delta_;
  std::vector<double> delta_prev_;
  std::vector<double> scaled_;
};

/// Forward/backward over a fixed batch of already-scaled inputs, evaluated
/// layer by layer as matrix products (one column per sample).
class MlpBatch {
 public:
  MlpBatch(const MlpParams& params, const std::vector<std::vector<double>>& inputs);

  std::size_t batch_size() const { return static_cast<std::size_t>(act_.front().cols()); }
  /// Network output for every sample.
  std::span<const double> forward(const MlpParams& params);
  /// Adds sum_n upstream[n] * d g(u_n) / d phi to grad, for the last forward().
  void backward(const MlpParams& params, std::span<const double> upstream, std::span<double> grad);

 private:
  std::vector<Eigen::MatrixXd> act_;
  Eigen::MatrixXd delta_;
  Eigen::MatrixXd delta_prev_;
};

double mlp_forward(const MlpParams& params, const Position& x);

/// upstream * d g(x; phi) / d phi, by reverse-mode differentiation.
std::vector<double> mlp_gradient(const MlpParams& params, const Position& x, double upstream);

/// Upper bound on the Lipschitz constant of x -> g(x) from Frobenius norms.
double mlp_lipschitz_bound(const MlpParams& params);

/// Text format, version 1:
///   jamfield-mlp 1
///   layers <count> <n0> <n1> ...
///   scaling <dim> <center...> <half_width...>
///   params <M>
///   <one value per line>
void write_mlp(std::ostream& os, const MlpParams& params);
MlpParams read_mlp(std::istream& is);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  long step_count = 0;
  double lr = 0.4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double lr);
};

/// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad);

}  // namespace jamfield
