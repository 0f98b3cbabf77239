#include "carl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "carl/ops.hpp"
#include "carl/optim.hpp"

namespace carl {

namespace {

constexpr std::size_t kChunkRows = 1024;

template <typename Fn>
Tensor<float> map_in_chunks(const LabeledDataset& dataset, std::size_t width, Fn&& fn) {
  std::vector<float> out;
  out.reserve(dataset.size() * width);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < dataset.size(); start += kChunkRows) {
    const auto stop = std::min(dataset.size(), start + kChunkRows);
    idx.resize(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    Tape<float> tape(Tape<float>::Mode::kInference);
    auto chunk = fn(tape, dataset.rows(idx));
    out.insert(out.end(), chunk.data().begin(), chunk.data().end());
  }
  return Tensor<float>(Shape{dataset.size(), width}, std::move(out));
}

struct Standardizer {
  std::vector<float> mean, inv_std;

  Standardizer(const Tensor<float>& x, bool enabled) {
    const auto n = x.shape()[0], d = x.shape()[1];
    mean.assign(d, 0.0f);
    inv_std.assign(d, 1.0f);
    if (!enabled) return;
    for (std::size_t c = 0; c < d; ++c) {
      double s = 0.0, sq = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const double v = x(r, c);
        s += v;
        sq += v * v;
      }
      const double m = s / static_cast<double>(n);
      const double var = std::max(sq / static_cast<double>(n) - m * m, 0.0);
      mean[c] = static_cast<float>(m);
      inv_std[c] = var > 1e-12 ? static_cast<float>(1.0 / std::sqrt(var)) : 1.0f;
    }
  }

  Tensor<float> apply(const Tensor<float>& x) const {
    auto out = x.clone();
    out.set_requires_grad(false);
    const auto d = x.shape()[1];
    auto v = out.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (v[i] - mean[i % d]) * inv_std[i % d];
    return out;
  }
};

Tensor<float> select_rows(const Tensor<float>& x, std::span<const std::size_t> idx) {
  const auto d = x.shape()[1];
  std::vector<float> out;
  out.reserve(idx.size() * d);
  for (auto i : idx) out.insert(out.end(), x.raw() + i * d, x.raw() + (i + 1) * d);
  return Tensor<float>(Shape{idx.size(), d}, std::move(out));
}

}  // namespace

Tensor<float> extract_features(const EncoderNetwork<float>& encoder, const LabeledDataset& dataset) {
  if (dataset.sample_dim != encoder.config.input_dim) {
    throw DimensionError("extract_features: dataset sample_dim " + std::to_string(dataset.sample_dim) +
                         " vs encoder input_dim " + std::to_string(encoder.config.input_dim));
  }
  const auto params = encoder.parameters();
  const auto before = checksum<float>(params);
  auto features = map_in_chunks(dataset, encoder.config.embedding_dim, [&](Tape<float>& tape, const Tensor<float>& x) {
    return encoder_forward(tape, encoder, x);
  });
  if (checksum<float>(params) != before) throw StateError("encoder parameters changed during feature extraction");
  return features;
}

Tensor<float> assign_dataset(const EncoderNetwork<float>& encoder, const PrototypeBank<float>& bank,
                             const LabeledDataset& dataset) {
  if (dataset.sample_dim != encoder.config.input_dim) throw DimensionError("assign_dataset: input width mismatch");
  return map_in_chunks(dataset, bank.num_prototypes(), [&](Tape<float>& tape, const Tensor<float>& x) {
    return assign_views(tape, compute_energy(tape, encoder_forward(tape, encoder, x), bank));
  });
}

ProbeResult train_linear_probe(const Tensor<float>& features, std::span<const int> labels, int num_classes,
                               const ProbeConfig& cfg) {
  if (features.rank() != 2 || features.shape()[0] != labels.size()) {
    throw DimensionError("train_linear_probe: features and labels disagree");
  }
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) throw ContractError("train_fraction must lie in (0, 1)");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed ^ 0x70726f6265ULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(order.size())));
  if (n_train == 0 || n_train == order.size()) throw ContractError("train_linear_probe: split leaves a side empty");
  std::span<const std::size_t> train_idx(order.data(), n_train);
  std::span<const std::size_t> test_idx(order.data() + n_train, order.size() - n_train);
  std::vector<int> train_labels, test_labels;
  for (auto i : train_idx) train_labels.push_back(labels[i]);
  for (auto i : test_idx) test_labels.push_back(labels[i]);
  return train_linear_probe(select_rows(features, train_idx), train_labels, select_rows(features, test_idx),
                            test_labels, num_classes, cfg);
}

ProbeResult train_linear_probe(const Tensor<float>& train_features, std::span<const int> train_labels,
                               const Tensor<float>& test_features, std::span<const int> test_labels,
                               int num_classes, const ProbeConfig& cfg) {
  if (train_features.rank() != 2 || test_features.rank() != 2 ||
      train_features.shape()[1] != test_features.shape()[1]) {
    throw DimensionError("train_linear_probe: feature matrices disagree");
  }
  if (train_features.shape()[0] != train_labels.size() || test_features.shape()[0] != test_labels.size()) {
    throw DimensionError("train_linear_probe: label count differs from feature rows");
  }
  if (num_classes < 2) throw ContractError("train_linear_probe: need at least two classes");
  for (int l : train_labels)
    if (l < 0 || l >= num_classes) throw ContractError("train_linear_probe: label out of range");
  for (int l : test_labels)
    if (l < 0 || l >= num_classes) throw ContractError("train_linear_probe: label out of range");
  if (std::set<int>(train_labels.begin(), train_labels.end()).size() < 2) {
    throw ContractError("train_linear_probe: training split contains a single class");
  }
  if (cfg.epochs < 1 || cfg.batch_size == 0 || !(cfg.lr > 0.0)) throw ContractError("bad probe hyper-parameters");

  const Standardizer scaler(train_features, cfg.standardize);
  const auto x_train = scaler.apply(train_features);
  const auto x_test = scaler.apply(test_features);
  const auto d = x_train.shape()[1];
  const auto classes = static_cast<std::size_t>(num_classes);

  Tensor<float> weight = Tensor<float>::zeros(Shape{d, classes}, true);
  Tensor<float> bias = Tensor<float>::zeros(Shape{classes}, true);
  std::vector<Tensor<float>> params{weight, bias};
  auto opt = make_optimizer_state<float>(params, cfg.momentum, 0.0);

  std::vector<std::size_t> order(train_labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.seed);
  for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<std::size_t> targets;
      for (auto i : idx) targets.push_back(static_cast<std::size_t>(train_labels[i]));
      for (auto& p : params) p.zero_grad();
      Tape<float> tape;
      auto logits = ops::add_row_vector(tape, ops::matmul(tape, select_rows(x_train, idx), weight), bias);
      auto picked = ops::gather_cols(tape, ops::log_softmax_rows(tape, logits), targets);
      auto loss = ops::scale(tape, ops::mean(tape, picked), -1.0f);
      tape.backward(loss);
      sgd_momentum_step<float>(params, opt, cfg.lr);
    }
  }

  Tape<float> eval(Tape<float>::Mode::kInference);
  auto logits = ops::add_row_vector(eval, ops::matmul(eval, x_test, weight.detach()), bias.detach());
  std::vector<int> predictions(test_labels.size());
  for (std::size_t r = 0; r < predictions.size(); ++r) {
    const float* row = logits.raw() + r * classes;
    predictions[r] = static_cast<int>(std::max_element(row, row + classes) - row);
  }

  ProbeResult result;
  result.top1_accuracy = top1_accuracy(predictions, test_labels);
  result.per_class_accuracy.assign(classes, 0.0);
  result.per_class_count.assign(classes, 0);
  std::vector<std::size_t> hits(classes, 0);
  for (std::size_t i = 0; i < test_labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(test_labels[i]);
    result.per_class_count[c]++;
    if (predictions[i] == test_labels[i]) hits[c]++;
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (result.per_class_count[c]) result.per_class_accuracy[c] = double(hits[c]) / double(result.per_class_count[c]);
  result.probe_epochs = cfg.epochs;
  return result;
}

double top1_accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("top1_accuracy: length mismatch");
  if (labels.empty()) throw ContractError("top1_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

ClusterDiagnostics cluster_diagnostics(const Tensor<float>& assignments, std::span<const int> labels,
                                       int num_classes) {
  if (assignments.rank() != 2 || assignments.shape()[0] != labels.size()) {
    throw DimensionError("cluster_diagnostics: assignments and labels disagree");
  }
  const auto n = assignments.shape()[0], k = assignments.shape()[1];
  const auto classes = static_cast<std::size_t>(num_classes);
  ClusterDiagnostics out;
  out.usage.assign(k, 0);
  std::vector<std::size_t> joint(k * classes, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const float* row = assignments.raw() + r * k;
    const auto j = static_cast<std::size_t>(std::max_element(row, row + k) - row);
    out.usage[j]++;
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes) {
      throw ContractError("cluster_diagnostics: label out of range");
    }
    joint[j * classes + static_cast<std::size_t>(labels[r])]++;
  }
  double entropy = 0.0, purity_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (!out.usage[j]) continue;
    const double p = static_cast<double>(out.usage[j]) / static_cast<double>(n);
    entropy -= p * std::log(p);
    const auto majority = *std::max_element(joint.begin() + static_cast<long>(j * classes),
                                            joint.begin() + static_cast<long>((j + 1) * classes));
    purity_sum += static_cast<double>(majority) / static_cast<double>(out.usage[j]);
    ++used;
  }
  out.perplexity = std::exp(entropy);
  out.purity = purity_sum / static_cast<double>(used);
  return out;
}

}  // namespace carl
