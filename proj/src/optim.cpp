#include "carl/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace carl {

template <typename T>
OptimizerState<T> make_optimizer_state(std::span<const Tensor<T>> params, double momentum, double weight_decay) {
  if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ContractError("weight decay must be nonnegative");
  OptimizerState<T> state;
  state.momentum = momentum;
  state.weight_decay = weight_decay;
  for (const auto& p : params) state.buffers.emplace_back(p.numel(), T{0});
  return state;
}

template <typename T>
void sgd_momentum_step(std::span<Tensor<T>> params, OptimizerState<T>& state, double lr) {
  if (!(lr > 0.0)) throw ContractError("learning rate must be positive, got " + std::to_string(lr));
  if (params.size() != state.buffers.size()) {
    throw DimensionError("optimizer tracks " + std::to_string(state.buffers.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].has_grad() && params[i].grad().size() != params[i].numel()) {
      throw DimensionError("gradient size differs from parameter " + std::to_string(i));
    }
    if (state.buffers[i].size() != params[i].numel()) {
      throw DimensionError("momentum buffer " + std::to_string(i) + " has " +
                           std::to_string(state.buffers[i].size()) + " entries, parameter has shape " +
                           shape_to_string(params[i].shape()));
    }
  }
  const T mu = static_cast<T>(state.momentum);
  const T wd = static_cast<T>(state.weight_decay);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].data();
    auto grad = params[i].grad();
    auto& buf = state.buffers[i];
    const bool has_grad = params[i].has_grad();
    for (std::size_t j = 0; j < value.size(); ++j) {
      const T g = (has_grad ? grad[j] : T{0}) + wd * value[j];
      buf[j] = mu * buf[j] + g;
      value[j] -= rate * buf[j];
    }
  }
  ++state.step_count;
}

double cosine_learning_rate(long epoch, long total_epochs, double lr_start, double lr_end) {
  if (total_epochs < 1) throw ContractError("total_epochs must be at least 1");
  if (epoch < 0 || epoch > total_epochs) {
    throw ContractError("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(total_epochs) + "]");
  }
  if (!(lr_end > 0.0) || lr_start < lr_end) throw ContractError("need lr_start >= lr_end > 0");
  // Convex combination keeps both endpoints exact in floating point.
  const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) /
                                         static_cast<double>(total_epochs)));
  return w * lr_start + (1.0 - w) * lr_end;
}

template OptimizerState<float> make_optimizer_state(std::span<const Tensor<float>>, double, double);
template OptimizerState<double> make_optimizer_state(std::span<const Tensor<double>>, double, double);
template void sgd_momentum_step(std::span<Tensor<float>>, OptimizerState<float>&, double);
template void sgd_momentum_step(std::span<Tensor<double>>, OptimizerState<double>&, double);

}  // namespace carl
