#include "rail/mlp.hpp"

#include <cmath>
#include <sstream>

#include "rail/binary_io.hpp"
#include "rail/errors.hpp"

namespace rail {
namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kIdentity:
      break;
  }
  return z;
}

// Derivative expressed through the pre-activation and the activation output.
double activate_grad(Activation a, double z, double y) {
  switch (a) {
    case Activation::kTanh:
      return 1.0 - y * y;
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kIdentity:
      break;
  }
  return 1.0;
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      break;
  }
  return "identity";
}

Activation activation_from_string(const std::string& tag) {
  if (tag == "tanh") return Activation::kTanh;
  if (tag == "relu") return Activation::kRelu;
  if (tag == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation '" + tag + "'");
}

MlpNetwork::MlpNetwork(std::vector<int> layer_dims, Activation hidden)
    : dims_(std::move(layer_dims)), hidden_(hidden) {
  if (dims_.size() < 2) throw ShapeError("network needs at least an input and an output layer");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] <= 0 || dims_[l + 1] <= 0) throw ShapeError("layer dimensions must be positive");
    offsets_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * (dims_[l] + 1);
  }
  params_.assign(total, 0.0);
}

MlpNetwork MlpNetwork::initialized(std::vector<int> layer_dims, Activation hidden, RngStream& rng) {
  MlpNetwork net(std::move(layer_dims), hidden);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double fan_in = net.dims_[l];
    const double fan_out = net.dims_[l + 1];
    const bool relu_in = hidden == Activation::kRelu && l + 1 < net.num_layers();
    const double limit = relu_in ? std::sqrt(6.0 / fan_in) : std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : net.weights(l)) w = rng.uniform(-limit, limit);
  }
  return net;
}

std::span<double> MlpNetwork::weights(int layer) {
  return std::span<double>(params_).subspan(weight_offset(layer),
                                            static_cast<std::size_t>(dims_[layer + 1]) * dims_[layer]);
}
std::span<const double> MlpNetwork::weights(int layer) const {
  return std::span<const double>(params_).subspan(
      weight_offset(layer), static_cast<std::size_t>(dims_[layer + 1]) * dims_[layer]);
}
std::span<double> MlpNetwork::biases(int layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}
std::span<const double> MlpNetwork::biases(int layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), dims_[layer + 1]);
}

std::vector<double> MlpNetwork::forward(std::span<const double> input) const {
  ForwardCache cache;
  forward(input, cache);
  return std::move(cache.layer_inputs.back());
}

void MlpNetwork::forward(std::span<const double> input, ForwardCache& cache) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw ShapeError("input has " + std::to_string(input.size()) + " entries, network expects " +
                     std::to_string(input_dim()));
  }
  const int layers = num_layers();
  cache.layer_inputs.resize(layers + 1);
  cache.pre_activations.resize(layers);
  cache.layer_inputs[0].assign(input.begin(), input.end());
  for (int l = 0; l < layers; ++l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const double* x = cache.layer_inputs[l].data();
    auto& z = cache.pre_activations[l];
    auto& y = cache.layer_inputs[l + 1];
    z.resize(out);
    y.resize(out);
    const Activation act = (l + 1 < layers) ? hidden_ : Activation::kIdentity;
    for (int i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) acc += row[j] * x[j];
      z[i] = acc;
      y[i] = activate(act, acc);
    }
  }
}

void MlpNetwork::backward(const ForwardCache& cache, std::span<const double> upstream,
                          std::span<double> param_grad, std::vector<double>* input_grad) const {
  if (static_cast<int>(upstream.size()) != output_dim()) {
    throw ShapeError("upstream gradient has " + std::to_string(upstream.size()) +
                     " entries, network output has " + std::to_string(output_dim()));
  }
  if (param_grad.size() != params_.size()) throw ShapeError("parameter gradient buffer has wrong size");

  const int layers = num_layers();
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> dx;
  for (int l = layers - 1; l >= 0; --l) {
    const int in = dims_[l];
    const int out = dims_[l + 1];
    const double* w = params_.data() + weight_offset(l);
    double* gw = param_grad.data() + weight_offset(l);
    double* gb = param_grad.data() + bias_offset(l);
    const double* x = cache.layer_inputs[l].data();

    for (double d : delta) {
      if (!std::isfinite(d)) throw NumericError("non-finite gradient at layer " + std::to_string(l));
    }

    const bool need_dx = l > 0 || input_grad != nullptr;
    if (need_dx) dx.assign(in, 0.0);
    for (int i = 0; i < out; ++i) {
      const double di = delta[i];
      if (di == 0.0) continue;
      gb[i] += di;
      double* grow = gw + static_cast<std::size_t>(i) * in;
      const double* wrow = w + static_cast<std::size_t>(i) * in;
      for (int j = 0; j < in; ++j) grow[j] += di * x[j];
      if (need_dx) {
        for (int j = 0; j < in; ++j) dx[j] += wrow[j] * di;
      }
    }
    if (l == 0) {
      if (input_grad != nullptr) *input_grad = dx;
      break;
    }
    const auto& z = cache.pre_activations[l - 1];
    const auto& y = cache.layer_inputs[l];
    delta.resize(in);
    for (int j = 0; j < in; ++j) delta[j] = dx[j] * activate_grad(hidden_, z[j], y[j]);
  }
}

void MlpNetwork::save(std::ostream& os) const {
  os << "mlp dims=";
  for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
  os << " hidden=" << to_string(hidden_) << "\n";
  io::write_f64s(os, params_);
}

MlpNetwork MlpNetwork::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "missing network manifest");
  std::istringstream header(line);
  std::string tag, dims_field, hidden_field;
  header >> tag >> dims_field >> hidden_field;
  if (tag != "mlp" || dims_field.rfind("dims=", 0) != 0 || hidden_field.rfind("hidden=", 0) != 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "malformed network manifest: '" + line + "'");
  }
  std::vector<int> dims;
  std::istringstream dim_list(dims_field.substr(5));
  for (std::string item; std::getline(dim_list, item, ',');) {
    try {
      dims.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw LoadError(LoadError::Kind::kMalformedHeader, "bad layer dimension '" + item + "'");
    }
  }
  Activation hidden;
  try {
    hidden = activation_from_string(hidden_field.substr(7));
  } catch (const ConfigError& e) {
    throw LoadError(LoadError::Kind::kMalformedHeader, e.what());
  }
  MlpNetwork net;
  try {
    net = MlpNetwork(dims, hidden);
  } catch (const ShapeError& e) {
    throw LoadError(LoadError::Kind::kMalformedHeader, e.what());
  }
  io::read_f64s(is, net.params(), "network parameters");
  return net;
}

MlpGradients backward(const MlpNetwork& net, std::span<const double> input,
                      std::span<const double> upstream) {
  ForwardCache cache;
  net.forward(input, cache);
  MlpGradients g;
  g.params.assign(net.num_params(), 0.0);
  net.backward(cache, upstream, g.params, &g.input);
  return g;
}

}  // namespace rail
