#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "carl/tape.hpp"
#include "carl/tensor.hpp"

namespace carl {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims{512, 512};
  std::size_t embedding_dim = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Fully-connected rectifier network: affine→ReLU per hidden layer, then a
/// final affine map to the embedding.
template <typename T>
struct EncoderNetwork {
  struct Layer {
    Tensor<T> weight;  ///< fan_in × fan_out
    Tensor<T> bias;    ///< fan_out
  };

  EncoderConfig config;
  std::vector<Layer> layers;

  /// Weights and biases in layer order (w0, b0, w1, b1, ...). Handles share storage with the layers.
  std::vector<Tensor<T>> parameters() const;
};

/// He initialization: weights ~ N(0, 2/fan_in), zero biases, deterministic in cfg.seed.
template <typename T>
EncoderNetwork<T> encoder_init(const EncoderConfig& cfg);

template <typename T>
Tensor<T> encoder_forward(Tape<T>& tape, const EncoderNetwork<T>& net, const Tensor<T>& batch);

}  // namespace carl
