#include "carl/encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "carl/ops.hpp"

namespace carl {

void EncoderConfig::validate() const {
  if (input_dim == 0 || embedding_dim == 0) throw ContractError("encoder dimensions must be positive");
  if (hidden_dims.empty()) throw ContractError("encoder needs at least one hidden layer");
  for (auto h : hidden_dims)
    if (h == 0) throw ContractError("encoder hidden widths must be positive");
}

template <typename T>
std::vector<Tensor<T>> EncoderNetwork<T>::parameters() const {
  std::vector<Tensor<T>> out;
  out.reserve(layers.size() * 2);
  for (const auto& layer : layers) {
    out.push_back(layer.weight);
    out.push_back(layer.bias);
  }
  return out;
}

template <typename T>
EncoderNetwork<T> encoder_init(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderNetwork<T> net;
  net.config = cfg;
  std::vector<std::size_t> dims{cfg.input_dim};
  dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  dims.push_back(cfg.embedding_dim);

  std::mt19937_64 rng(cfg.seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan_in = dims[l], fan_out = dims[l + 1];
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    std::vector<T> w(fan_in * fan_out);
    for (auto& v : w) v = static_cast<T>(normal(rng));
    net.layers.push_back({Tensor<T>(Shape{fan_in, fan_out}, std::move(w), true),
                          Tensor<T>::zeros(Shape{fan_out}, true)});
  }
  return net;
}

template <typename T>
Tensor<T> encoder_forward(Tape<T>& tape, const EncoderNetwork<T>& net, const Tensor<T>& batch) {
  if (batch.rank() != 2 || batch.shape()[1] != net.config.input_dim) {
    throw DimensionError("encoder_forward: batch " + shape_to_string(batch.shape()) + " but input_dim is " +
                         std::to_string(net.config.input_dim));
  }
  Tensor<T> h = batch;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    h = ops::add_row_vector(tape, ops::matmul(tape, h, layer.weight), layer.bias);
    if (l + 1 < net.layers.size()) h = ops::relu(tape, h);
  }
  return h;
}

template struct EncoderNetwork<float>;
template struct EncoderNetwork<double>;
template EncoderNetwork<float> encoder_init(const EncoderConfig&);
template EncoderNetwork<double> encoder_init(const EncoderConfig&);
template Tensor<float> encoder_forward(Tape<float>&, const EncoderNetwork<float>&, const Tensor<float>&);
template Tensor<double> encoder_forward(Tape<double>&, const EncoderNetwork<double>&, const Tensor<double>&);

}  // namespace carl
