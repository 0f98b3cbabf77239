#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "carl/data.hpp"
#include "carl/encoder.hpp"
#include "carl/objective.hpp"
#include "carl/optim.hpp"

namespace carl {

enum class LossKind { kCarl, kInfoNCE };

struct TrainConfig {
  long epochs = 100;
  std::size_t batch_size = 128;
  std::size_t num_prototypes = 64;
  DecaySchedule schedule{};
  /// Both zero freezes the parameters (no optimizer steps).
  double lr_start = 0.6;
  double lr_end = 0.0006;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  LossKind loss = LossKind::kCarl;
  InfoNCEConfig infonce{};
  EnergyMode energy_mode = EnergyMode::kNormalized;
  std::uint64_t seed = 0;
  EncoderConfig encoder{};
  AugmentationConfig augmentation{};

  void validate() const;
  /// Learning rate used throughout `epoch`.
  double learning_rate(long epoch) const;
};

struct TrainState {
  EncoderNetwork<float> encoder;
  PrototypeBank<float> bank;
  OptimizerState<float> optimizer;
  long epoch = 0;          ///< epochs completed so far
  std::uint64_t seed = 0;  ///< root of the data stream; with `epoch` it fixes every later batch

  /// Encoder parameters in layer order followed by the prototype matrix.
  std::vector<Tensor<float>> parameters() const;
};

/// Encoder seeded from config.seed, prototypes from a derived seed, zeroed momentum.
TrainState init_train_state(const TrainConfig& config, std::size_t input_dim);

struct MetricsRecord {
  long epoch = 0;
  double total_loss = 0.0;
  double consistency_loss = 0.0;
  double kl = 0.0;
  double lambda = 0.0;
  double learning_rate = 0.0;
  double perplexity = 0.0;         ///< exp(H(p̂)) of the epoch-mean soft assignment
  double max_cluster_share = 0.0;  ///< fraction of views whose argmax is the most used prototype
  double wall_seconds = 0.0;
};

/// One shuffled pass: both views through the shared encoder, loss, backward,
/// SGD step. Throws DivergedError on a non-finite loss.
MetricsRecord train_epoch(TrainState& state, const TrainConfig& config, const LabeledDataset& dataset);

/// exp of the Shannon entropy of a distribution; 1 for one-hot, K for uniform.
double prototype_usage_perplexity(std::span<const double> p_hat);

/// True iff perplexity < threshold_fraction·K.
bool detect_collapse(const MetricsRecord& record, std::size_t num_prototypes, double threshold_fraction = 0.05);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Versioned little-endian binary: header {magic, version, K, d, layer dims, ...}
/// followed by raw float32 parameter and momentum arrays.
void checkpoint_save(const TrainState& state, const std::filesystem::path& path);
TrainState checkpoint_load(const std::filesystem::path& path);

}  // namespace carl
