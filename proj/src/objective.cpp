#include "carl/objective.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace carl {

template <typename T>
PrototypeBank<T> PrototypeBank<T>::random(std::size_t num_prototypes, std::size_t dim, EnergyMode mode,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<T> data(num_prototypes * dim);
  for (auto& v : data) v = static_cast<T>(normal(rng));
  auto bank = from_weights(Tensor<T>(Shape{num_prototypes, dim}, std::move(data), true), mode);
  // Initial rows are unit length in both modes.
  const auto saved = bank.mode;
  bank.mode = EnergyMode::kNormalized;
  bank.renormalize();
  bank.mode = saved;
  return bank;
}

template <typename T>
PrototypeBank<T> PrototypeBank<T>::from_weights(Tensor<T> weights, EnergyMode mode) {
  if (weights.rank() != 2) throw DimensionError("prototype bank needs a K×d matrix");
  if (weights.shape()[0] < 2) throw ContractError("prototype bank needs K >= 2");
  weights.set_requires_grad(true);
  return PrototypeBank{std::move(weights), mode};
}

template <typename T>
void PrototypeBank<T>::renormalize() {
  if (mode != EnergyMode::kNormalized) return;
  const auto k = num_prototypes(), d = dim();
  auto w = weights.data();
  for (std::size_t r = 0; r < k; ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) sq += double(w[r * d + c]) * double(w[r * d + c]);
    const double norm = std::sqrt(sq);
    if (norm < 1e-12) continue;
    for (std::size_t c = 0; c < d; ++c) w[r * d + c] = static_cast<T>(w[r * d + c] / norm);
  }
}

void DecaySchedule::validate() const {
  if (decay_epochs < 1) throw ContractError("decay schedule needs E >= 1");
  if (!(start >= end && end >= 0.0)) {
    throw ContractError("decay schedule needs b >= a >= 0, got a=" + std::to_string(end) +
                        " b=" + std::to_string(start));
  }
}

double decay_weight(const DecaySchedule& schedule, long epoch) {
  if (epoch < 0) throw ContractError("epoch must be nonnegative");
  if (epoch > schedule.decay_epochs) return schedule.end;
  return schedule.start - (schedule.start - schedule.end) * static_cast<double>(epoch) /
                              static_cast<double>(schedule.decay_epochs);
}

template <typename T>
Tensor<T> compute_energy(Tape<T>& tape, const Tensor<T>& z, const PrototypeBank<T>& bank) {
  if (z.rank() != 2 || z.shape()[1] != bank.dim()) {
    throw DimensionError("compute_energy: embeddings " + shape_to_string(z.shape()) + " vs prototypes " +
                         shape_to_string(bank.weights.shape()));
  }
  if (bank.mode == EnergyMode::kRaw) {
    return ops::matmul(tape, z, ops::transpose(tape, bank.weights));
  }
  auto zn = ops::l2_normalize_rows(tape, z);
  auto cn = ops::l2_normalize_rows(tape, bank.weights);
  return ops::matmul(tape, zn, ops::transpose(tape, cn));
}

template <typename T>
Tensor<T> assign_views(Tape<T>& tape, const Tensor<T>& energies) {
  return ops::softmax_rows(tape, energies);
}

template <typename T>
Tensor<T> consistency_loss(Tape<T>& tape, const Tensor<T>& pa, const Tensor<T>& pp, T log_floor) {
  if (pa.shape() != pp.shape() || pa.rank() != 2) {
    throw DimensionError("consistency_loss: assignment shapes " + shape_to_string(pa.shape()) + " and " +
                         shape_to_string(pp.shape()));
  }
  auto agreement = ops::rowwise_dot(tape, pa, pp);
  auto log_agreement = ops::log_clamped(tape, agreement, log_floor);
  return ops::scale(tape, ops::mean(tape, log_agreement), T{-1});
}

template <typename T>
Tensor<T> batch_mean_assignment(Tape<T>& tape, const Tensor<T>& p_all) {
  if (p_all.rank() != 2) throw DimensionError("batch_mean_assignment: expected a B×K matrix");
  return ops::column_mean(tape, p_all);
}

template <typename T>
Tensor<T> kl_to_uniform(Tape<T>& tape, const Tensor<T>& p_hat, T log_floor) {
  if (p_hat.rank() != 1) throw DimensionError("kl_to_uniform: expected a K-vector, got " + shape_to_string(p_hat.shape()));
  const auto k = p_hat.numel();
  double total = 0.0;
  for (T v : p_hat.data()) {
    if (!(v >= T{0})) throw ContractError("kl_to_uniform: negative or NaN probability");
    total += v;
  }
  // 1e-5 plus the rounding a K-term sum in T can accumulate.
  const double tolerance = 1e-5 + static_cast<double>(k) * std::numeric_limits<T>::epsilon();
  if (std::abs(total - 1.0) > tolerance) {
    throw ContractError("kl_to_uniform: distribution sums to " + std::to_string(total));
  }
  auto neg_entropy = ops::sum(tape, ops::mul(tape, p_hat, ops::log_clamped(tape, p_hat, log_floor)));
  return ops::add_scalar(tape, neg_entropy, static_cast<T>(std::log(static_cast<double>(k))));
}

template <typename T>
CarlLoss<T> carl_total_loss(Tape<T>& tape, const Tensor<T>& pa, const Tensor<T>& pp, const DecaySchedule& schedule,
                            long epoch, T log_floor) {
  const double lambda = decay_weight(schedule, epoch);
  auto lc = consistency_loss(tape, pa, pp, log_floor);
  auto p_hat = batch_mean_assignment(tape, ops::concat_rows(tape, pa, pp));
  auto kl = kl_to_uniform(tape, p_hat, log_floor);
  auto total = ops::add(tape, lc, ops::scale(tape, kl, static_cast<T>(lambda)));
  return {total, p_hat, LossParts{static_cast<double>(lc.item()), static_cast<double>(kl.item()), lambda}};
}

template <typename T>
Tensor<T> infonce_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                       const InfoNCEConfig& cfg) {
  if (anchors.shape() != positives.shape() || anchors.rank() != 2) {
    throw DimensionError("infonce_loss: anchors " + shape_to_string(anchors.shape()) + " vs positives " +
                         shape_to_string(positives.shape()));
  }
  if (!(cfg.tau > 0.0)) throw ContractError("infonce_loss: tau must be positive");
  const auto b = anchors.shape()[0];
  if (b < 2) throw ContractError("infonce_loss: needs a batch of at least 2 for negatives");

  auto a = ops::l2_normalize_rows(tape, anchors);
  auto all = ops::l2_normalize_rows(tape, ops::concat_rows(tape, anchors, positives));
  auto logits = ops::scale(tape, ops::matmul(tape, a, ops::transpose(tape, all)), static_cast<T>(1.0 / cfg.tau));

  std::vector<std::uint8_t> self(b * 2 * b, 0);
  std::vector<std::size_t> target(b);
  for (std::size_t i = 0; i < b; ++i) {
    self[i * 2 * b + i] = 1;
    target[i] = b + i;
  }
  auto log_prob = ops::gather_cols(tape, ops::log_softmax_rows(tape, logits, self), target);
  return ops::scale(tape, ops::mean(tape, log_prob), T{-1});
}

#define CARL_INSTANTIATE_OBJECTIVE(T)                                                                    \
  template struct PrototypeBank<T>;                                                                     \
  template Tensor<T> compute_energy(Tape<T>&, const Tensor<T>&, const PrototypeBank<T>&);               \
  template Tensor<T> assign_views(Tape<T>&, const Tensor<T>&);                                          \
  template Tensor<T> consistency_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, T);                 \
  template Tensor<T> batch_mean_assignment(Tape<T>&, const Tensor<T>&);                                 \
  template Tensor<T> kl_to_uniform(Tape<T>&, const Tensor<T>&, T);                                      \
  template CarlLoss<T> carl_total_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const DecaySchedule&, \
                                       long, T);                                                        \
  template Tensor<T> infonce_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const InfoNCEConfig&);

CARL_INSTANTIATE_OBJECTIVE(float)
CARL_INSTANTIATE_OBJECTIVE(double)

#undef CARL_INSTANTIATE_OBJECTIVE

}  // namespace carl
