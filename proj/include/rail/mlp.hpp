#pragma once

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rail/rng.hpp"

namespace rail {

enum class Activation { kIdentity, kTanh, kRelu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& tag);

// Activations recorded by a forward pass; consumed by backward().
struct ForwardCache {
  // layer_inputs[l] is the input to layer l; layer_inputs.back() is the output.
  std::vector<std::vector<double>> layer_inputs;
  // Pre-activation values of each layer.
  std::vector<std::vector<double>> pre_activations;

  std::span<const double> output() const { return layer_inputs.back(); }
};

// Fully connected network. Hidden layers share one activation, the output
// layer is linear. All parameters live in one flat buffer laid out layer by
// layer as [W_0 (row-major, out x in), b_0, W_1, b_1, ...], which is also the
// layout of parameter gradients and optimizer moments.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  // Zero-initialized parameters.
  MlpNetwork(std::vector<int> layer_dims, Activation hidden);

  // Glorot-uniform weights (He-uniform for ReLU), zero biases.
  static MlpNetwork initialized(std::vector<int> layer_dims, Activation hidden, RngStream& rng);

  const std::vector<int>& layer_dims() const { return dims_; }
  Activation hidden_activation() const { return hidden_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> weights(int layer);
  std::span<const double> weights(int layer) const;
  std::span<double> biases(int layer);
  std::span<const double> biases(int layer) const;

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, ForwardCache& cache) const;

  // Accumulates d(dot(output, upstream))/d(params) into `param_grad` (which
  // must have num_params() entries). If `input_grad` is non-null it receives
  // the gradient with respect to the input.
  void backward(const ForwardCache& cache, std::span<const double> upstream,
                std::span<double> param_grad, std::vector<double>* input_grad = nullptr) const;

  void save(std::ostream& os) const;
  static MlpNetwork load(std::istream& is);

  bool operator==(const MlpNetwork& other) const = default;

 private:
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] + static_cast<std::size_t>(dims_[layer + 1]) * dims_[layer];
  }

  std::vector<int> dims_;
  Activation hidden_ = Activation::kTanh;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct MlpGradients {
  std::vector<double> params;
  std::vector<double> input;
};

// Convenience form: runs forward + backward for a single input.
MlpGradients backward(const MlpNetwork& net, std::span<const double> input,
                      std::span<const double> upstream);

}  // namespace rail
