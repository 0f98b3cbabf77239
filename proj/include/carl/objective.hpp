#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "carl/ops.hpp"
#include "carl/tape.hpp"
#include "carl/tensor.hpp"

namespace carl {

inline constexpr double kDefaultLogFloor = 1e-12;

/// How energies between embeddings and prototypes are formed.
enum class EnergyMode {
  kNormalized,  ///< rows of z and C are scaled to unit length first (cosine energies)
  kRaw,         ///< literal dot product of the unnormalized vectors
};

/// The K×d matrix of learnable general prototypes, one row per prototype.
template <typename T>
struct PrototypeBank {
  Tensor<T> weights;
  EnergyMode mode = EnergyMode::kNormalized;

  std::size_t num_prototypes() const { return weights.shape()[0]; }
  std::size_t dim() const { return weights.shape()[1]; }

  /// Rows drawn from N(0, 1/d), then scaled to unit norm.
  static PrototypeBank random(std::size_t num_prototypes, std::size_t dim, EnergyMode mode, std::uint64_t seed);
  /// Wraps explicit weights; requires K ≥ 2.
  static PrototypeBank from_weights(Tensor<T> weights, EnergyMode mode);

  /// Rescales every row to unit norm in place (no-op in raw mode).
  void renormalize();
};

/// λ_e(a, b): linear decay from `start` (b) at epoch 0 to `end` (a) at `decay_epochs` (E),
/// constant afterwards.
struct DecaySchedule {
  double end = 1.0;
  double start = 2.0;
  long decay_epochs = 100;

  void validate() const;
};

double decay_weight(const DecaySchedule& schedule, long epoch);

/// q[i][j] = <z_i, c_j>, optionally after row-normalizing z and C.
template <typename T>
Tensor<T> compute_energy(Tape<T>& tape, const Tensor<T>& z, const PrototypeBank<T>& bank);

/// Row-wise softmax of the energies (no temperature).
template <typename T>
Tensor<T> assign_views(Tape<T>& tape, const Tensor<T>& energies);

/// −(1/B) Σ_i log <pa_i, pp_i> with the clamped log.
template <typename T>
Tensor<T> consistency_loss(Tape<T>& tape, const Tensor<T>& pa, const Tensor<T>& pp,
                           T log_floor = T(kDefaultLogFloor));

/// Column mean of the stacked assignment rows.
template <typename T>
Tensor<T> batch_mean_assignment(Tape<T>& tape, const Tensor<T>& p_all);

/// KL(p̂ ‖ U) = log K + Σ_c p̂_c log p̂_c, with 0·log 0 = 0.
template <typename T>
Tensor<T> kl_to_uniform(Tape<T>& tape, const Tensor<T>& p_hat, T log_floor = T(kDefaultLogFloor));

struct LossParts {
  double consistency = 0.0;
  double kl = 0.0;
  double lambda = 0.0;
};

template <typename T>
struct CarlLoss {
  Tensor<T> total;
  Tensor<T> mean_assignment;  ///< p̂ over both views' rows
  LossParts parts;
};

/// L_c + λ_e·L_KL, where L_KL is taken on the mean assignment of both views (2B rows).
template <typename T>
CarlLoss<T> carl_total_loss(Tape<T>& tape, const Tensor<T>& pa, const Tensor<T>& pp,
                            const DecaySchedule& schedule, long epoch,
                            T log_floor = T(kDefaultLogFloor));

struct InfoNCEConfig {
  double tau = 0.2;
};

/// Mean over anchors of the cross-entropy of picking the positive among the
/// 2B−1 other in-batch embeddings, with cosine similarity over temperature τ.
template <typename T>
Tensor<T> infonce_loss(Tape<T>& tape, const Tensor<T>& anchors, const Tensor<T>& positives,
                       const InfoNCEConfig& cfg);

}  // namespace carl
