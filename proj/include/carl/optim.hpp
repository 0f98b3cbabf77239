#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "carl/tensor.hpp"

namespace carl {

/// Momentum buffers for an ordered parameter list plus the SGD hyper-parameters.
template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> buffers;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::uint64_t step_count = 0;
};

/// Zeroed buffers shaped like `params`.
template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const Tensor<T>> params, double momentum, double weight_decay);

/// buf ← momentum·buf + (grad + weight_decay·param); param ← param − lr·buf.
/// A parameter without a gradient is treated as having a zero gradient.
template <typename T>
void sgd_momentum_step(std::span<Tensor<T>> params, OptimizerState<T>& state, double lr);

/// Cosine annealing without restarts from lr_start at epoch 0 to lr_end at total_epochs.
double cosine_learning_rate(long epoch, long total_epochs, double lr_start, double lr_end);

}  // namespace carl
