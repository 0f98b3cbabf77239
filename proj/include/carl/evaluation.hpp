#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "carl/data.hpp"
#include "carl/encoder.hpp"
#include "carl/objective.hpp"

namespace carl {

struct ProbeConfig {
  long epochs = 50;
  double lr = 0.03;
  std::size_t batch_size = 64;
  double momentum = 0.9;
  double train_fraction = 0.8;  ///< used only by the single-set overload
  bool standardize = true;      ///< z-score features with training-split statistics
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double top1_accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_count;
  long probe_epochs = 0;
  std::string dataset;
  std::string checkpoint_id;
};

/// Embeddings of every sample, no augmentation, parameters untouched.
Tensor<float> extract_features(const EncoderNetwork<float>& encoder, const LabeledDataset& dataset);

/// Softmax assignments of every sample to the prototypes.
Tensor<float> assign_dataset(const EncoderNetwork<float>& encoder, const PrototypeBank<float>& bank,
                             const LabeledDataset& dataset);

/// Seeded shuffle into train/held-out parts, then a softmax-regression probe.
ProbeResult train_linear_probe(const Tensor<float>& features, std::span<const int> labels, int num_classes,
                               const ProbeConfig& cfg);

/// Probe trained on an explicit split (e.g. the official CIFAR train/test files).
ProbeResult train_linear_probe(const Tensor<float>& train_features, std::span<const int> train_labels,
                               const Tensor<float>& test_features, std::span<const int> test_labels,
                               int num_classes, const ProbeConfig& cfg);

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels);

struct ClusterDiagnostics {
  std::vector<std::size_t> usage;  ///< argmax counts per prototype
  double perplexity = 1.0;         ///< of the normalized usage histogram
  double purity = 0.0;             ///< mean majority-label fraction over used prototypes
};

ClusterDiagnostics cluster_diagnostics(const Tensor<float>& assignments, std::span<const int> labels,
                                       int num_classes);

}  // namespace carl
