#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carl/tensor.hpp"

namespace carl {

using Rng = std::mt19937_64;

/// Planar (channel-major) image layout: all of channel 0, then channel 1, ...
struct ImageShape {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;

  std::size_t numel() const { return height * width * channels; }
  bool operator==(const ImageShape&) const = default;
};

/// N flattened samples with integer labels; labels are only used for evaluation.
struct LabeledDataset {
  std::string name;
  std::size_t sample_dim = 0;
  int num_classes = 0;
  std::vector<float> samples;  ///< N × sample_dim, row-major
  std::vector<int> labels;
  std::optional<ImageShape> image;

  std::size_t size() const { return labels.size(); }
  std::span<const float> sample(std::size_t i) const { return {samples.data() + i * sample_dim, sample_dim}; }
  /// Copies the selected rows into a B×sample_dim tensor.
  Tensor<float> rows(std::span<const std::size_t> indices) const;
  Tensor<float> all_rows() const;
  void validate() const;
};

/// Parameters of the view-generation function T. Image fields apply to datasets
/// with an ImageShape, vector fields to everything else.
struct AugmentationConfig {
  // image mode
  double crop_scale_min = 0.08;
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  double jitter_prob = 0.8;
  double brightness = 0.4;  ///< factor ~ U[1 − s, 1 + s]
  double contrast = 0.4;
  double saturation = 0.4;
  double hue = 0.1;         ///< shift ~ U[−s, s] turns of the color wheel
  double grayscale_prob = 0.2;
  double blur_prob = 0.5;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  std::array<double, 3> channel_mean{0.0, 0.0, 0.0};
  std::array<double, 3> channel_std{1.0, 1.0, 1.0};

  // vector mode
  double noise_std = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double mask_prob = 0.0;

  /// Every stochastic step disabled, crop fixed to the whole image, unit normalization.
  static AugmentationConfig identity();
  void validate() const;
};

struct ViewBatch {
  Tensor<float> view_a;
  Tensor<float> view_b;
  std::vector<std::size_t> source_indices;
};

/// Class centers on a sphere of radius `separation` around the origin, with
/// unit-variance isotropic Gaussian clouds; samples ordered class by class.
LabeledDataset generate_gaussian_mixture(int num_classes, std::size_t per_class, std::size_t dim, double separation,
                                         std::uint64_t seed);

inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Reads one CIFAR-10 binary batch file (3073-byte records: label, 1024 R, 1024 G, 1024 B).
LabeledDataset read_cifar10_file(const std::filesystem::path& file);
/// `path` may be a single batch file or a directory; a directory contributes
/// every *.bin file in lexicographic order.
LabeledDataset load_cifar10_binary(const std::filesystem::path& path);

enum class CifarSplit { kTrain, kTest };
/// data_batch_1..5.bin for the training split, test_batch.bin for the test split.
LabeledDataset load_cifar10_split(const std::filesystem::path& dir, CifarSplit split);
/// Inverse of read_cifar10_file; pixels are rounded to the nearest byte.
void write_cifar10_file(const std::filesystem::path& file, const LabeledDataset& ds);

/// CSV with a header "label,x0,x1,..."; one sample per line.
void write_dataset_csv(const std::filesystem::path& file, const LabeledDataset& ds);
LabeledDataset read_dataset_csv(const std::filesystem::path& file);

/// Per-channel mean and standard deviation over an image dataset.
std::pair<std::array<double, 3>, std::array<double, 3>> channel_statistics(const LabeledDataset& ds);

std::vector<float> flip_horizontal(std::span<const float> image, const ImageShape& shape);
std::vector<float> to_grayscale(std::span<const float> image, const ImageShape& shape);

/// Crop-resize, flip, color jitter, grayscale, blur, normalize; each step with
/// its configured probability.
std::vector<float> augment_image(std::span<const float> image, const ImageShape& shape,
                                 const AugmentationConfig& cfg, Rng& rng);

/// x·s + ε with s ~ U[scale_min, scale_max], ε ~ N(0, noise_std²), then each
/// coordinate zeroed with probability mask_prob.
std::vector<float> augment_vector(std::span<const float> x, const AugmentationConfig& cfg, Rng& rng);

/// Two independent augmentations of each indexed sample.
ViewBatch make_view_batch(const LabeledDataset& ds, std::span<const std::size_t> indices,
                          const AugmentationConfig& cfg, Rng& rng);

/// Generator for batch `batch_index` of `epoch`; the data stream depends only on these three numbers.
Rng batch_rng(std::uint64_t seed, std::uint64_t epoch, std::uint64_t batch_index);

/// Shuffled pass over [0, n) split into full batches; the tail that does not
/// fill a batch is dropped.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::uint64_t epoch);

}  // namespace carl
