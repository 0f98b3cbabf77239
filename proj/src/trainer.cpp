#include "carl/trainer.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

namespace carl {

void TrainConfig::validate() const {
  if (epochs < 1) throw ContractError("epochs must be at least 1");
  if (batch_size < 2) throw ContractError("batch size must be at least 2");
  if (num_prototypes < 2) throw ContractError("need at least 2 prototypes");
  schedule.validate();
  const bool frozen = lr_start == 0.0 && lr_end == 0.0;
  if (!frozen && !(lr_end > 0.0 && lr_start >= lr_end)) {
    throw ContractError("learning rates need lr_start >= lr_end > 0 (or both 0 to freeze)");
  }
  if (momentum < 0.0 || momentum >= 1.0) throw ContractError("momentum must lie in [0, 1)");
  if (weight_decay < 0.0) throw ContractError("weight decay must be nonnegative");
  if (!(infonce.tau > 0.0)) throw ContractError("tau must be positive");
  encoder.validate();
  augmentation.validate();
}

double TrainConfig::learning_rate(long epoch) const {
  if (lr_start == 0.0 && lr_end == 0.0) return 0.0;
  return cosine_learning_rate(epoch, epochs, lr_start, lr_end);
}

std::vector<Tensor<float>> TrainState::parameters() const {
  auto params = encoder.parameters();
  params.push_back(bank.weights);
  return params;
}

TrainState init_train_state(const TrainConfig& config, std::size_t input_dim) {
  config.validate();
  auto enc_cfg = config.encoder;
  enc_cfg.input_dim = input_dim;
  enc_cfg.seed = config.seed;
  TrainState state;
  state.encoder = encoder_init<float>(enc_cfg);
  state.bank = PrototypeBank<float>::random(config.num_prototypes, enc_cfg.embedding_dim, config.energy_mode,
                                            config.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto params = state.parameters();
  state.optimizer = make_optimizer_state<float>(params, config.momentum, config.weight_decay);
  state.seed = config.seed;
  return state;
}

namespace {

struct UsageAccumulator {
  std::vector<double> soft;
  std::vector<std::size_t> hard;
  std::size_t rows = 0;

  explicit UsageAccumulator(std::size_t k) : soft(k, 0.0), hard(k, 0) {}

  void add(const Tensor<float>& p) {
    const auto k = soft.size();
    for (std::size_t r = 0; r < p.shape()[0]; ++r) {
      const float* row = p.raw() + r * k;
      for (std::size_t c = 0; c < k; ++c) soft[c] += row[c];
      // lowest index wins ties
      hard[static_cast<std::size_t>(std::max_element(row, row + k) - row)]++;
      ++rows;
    }
  }
};

}  // namespace

MetricsRecord train_epoch(TrainState& state, const TrainConfig& config, const LabeledDataset& dataset) {
  if (state.epoch >= config.epochs) throw StateError("all configured epochs have been trained");
  if (dataset.sample_dim != state.encoder.config.input_dim) {
    throw DimensionError("dataset sample_dim " + std::to_string(dataset.sample_dim) + " but encoder expects " +
                         std::to_string(state.encoder.config.input_dim));
  }
  const auto started = std::chrono::steady_clock::now();
  const long epoch = state.epoch;
  const double lambda = decay_weight(config.schedule, epoch);
  const double lr = config.learning_rate(epoch);
  const auto batches = epoch_batches(dataset.size(), config.batch_size, state.seed, static_cast<std::uint64_t>(epoch));
  if (batches.empty()) throw ContractError("dataset is smaller than one batch");

  auto params = state.parameters();
  UsageAccumulator usage(state.bank.num_prototypes());
  double sum_total = 0.0, sum_consistency = 0.0, sum_kl = 0.0;

  for (std::size_t b = 0; b < batches.size(); ++b) {
    auto rng = batch_rng(state.seed, static_cast<std::uint64_t>(epoch), b);
    const auto views = make_view_batch(dataset, batches[b], config.augmentation, rng);

    for (auto& p : params) p.zero_grad();
    try {
      Tape<float> tape;
      // Siamese: both views go through the very same parameter tensors.
      auto za = encoder_forward(tape, state.encoder, views.view_a);
      auto zp = encoder_forward(tape, state.encoder, views.view_b);

      Tensor<float> loss;
      Tensor<float> pa, pp;
      if (config.loss == LossKind::kCarl) {
        pa = assign_views(tape, compute_energy(tape, za, state.bank));
        pp = assign_views(tape, compute_energy(tape, zp, state.bank));
        auto carl = carl_total_loss(tape, pa, pp, config.schedule, epoch);
        loss = carl.total;
        sum_consistency += carl.parts.consistency;
        sum_kl += carl.parts.kl;
      } else {
        loss = infonce_loss(tape, za, zp, config.infonce);
        Tape<float> probe(Tape<float>::Mode::kInference);
        pa = assign_views(probe, compute_energy(probe, za.detach(), state.bank));
        pp = assign_views(probe, compute_energy(probe, zp.detach(), state.bank));
      }
      const double value = loss.item();
      if (!std::isfinite(value)) throw DivergedError(static_cast<std::size_t>(epoch), b);
      sum_total += value;
      usage.add(pa);
      usage.add(pp);

      if (lr > 0.0) {
        tape.backward(loss);
        const auto current = state.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (!params[i].same_storage(current[i])) throw StateError("parameter handle no longer shared with the model");
        }
        sgd_momentum_step<float>(params, state.optimizer, lr);
        state.bank.renormalize();
      }
    } catch (const NumericError&) {
      throw DivergedError(static_cast<std::size_t>(epoch), b);
    }
  }

  const double n = static_cast<double>(batches.size());
  std::vector<double> p_hat(usage.soft.size());
  for (std::size_t c = 0; c < p_hat.size(); ++c) p_hat[c] = usage.soft[c] / static_cast<double>(usage.rows);
  double total = 0.0;
  for (double v : p_hat) total += v;
  for (double& v : p_hat) v /= total;

  MetricsRecord record;
  record.epoch = epoch;
  record.total_loss = sum_total / n;
  record.consistency_loss = sum_consistency / n;
  record.kl = sum_kl / n;
  record.lambda = lambda;
  record.learning_rate = lr;
  record.perplexity = prototype_usage_perplexity(p_hat);
  record.max_cluster_share = static_cast<double>(*std::max_element(usage.hard.begin(), usage.hard.end())) /
                             static_cast<double>(usage.rows);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  ++state.epoch;
  return record;
}

double prototype_usage_perplexity(std::span<const double> p_hat) {
  if (p_hat.empty()) throw ContractError("perplexity of an empty distribution");
  double total = 0.0, entropy = 0.0;
  for (double p : p_hat) {
    if (p < 0.0) throw ContractError("perplexity: negative probability");
    total += p;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  if (std::abs(total - 1.0) > 1e-5) throw ContractError("perplexity: distribution sums to " + std::to_string(total));
  return std::clamp(std::exp(entropy), 1.0, static_cast<double>(p_hat.size()));
}

bool detect_collapse(const MetricsRecord& record, std::size_t num_prototypes, double threshold_fraction) {
  if (!(threshold_fraction > 0.0 && threshold_fraction <= 1.0)) {
    throw ContractError("collapse threshold must lie in (0, 1]");
  }
  return record.perplexity < threshold_fraction * static_cast<double>(num_prototypes);
}

// ---------------------------------------------------------------------------
// checkpoint format

namespace {

constexpr char kMagic[8] = {'C', 'A', 'R', 'L', 'C', 'K', 'P', 'T'};

template <typename U>
void put(std::ostream& out, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw FormatError("checkpoint is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(U));
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

void put_floats(std::ostream& out, std::span<const float> values) {
  for (float v : values) put<float>(out, v);
}

void get_floats(std::istream& in, std::span<float> values) {
  for (auto& v : values) v = get<float>(in);
}

}  // namespace

void checkpoint_save(const TrainState& state, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  const auto& cfg = state.encoder.config;
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.bank.num_prototypes()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.bank.dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.input_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.hidden_dims.size()));
  for (auto h : cfg.hidden_dims) put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put<std::uint8_t>(out, state.bank.mode == EnergyMode::kRaw ? 1 : 0);
  put<std::int64_t>(out, state.epoch);
  put<std::uint64_t>(out, state.seed);
  put<std::uint64_t>(out, cfg.seed);
  put<std::uint64_t>(out, state.optimizer.step_count);
  put<double>(out, state.optimizer.momentum);
  put<double>(out, state.optimizer.weight_decay);
  for (const auto& p : state.parameters()) put_floats(out, p.data());
  for (const auto& buf : state.optimizer.buffers) put_floats(out, buf);
  if (!out) throw FormatError("failed writing checkpoint " + path.string());
}

TrainState checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + ", expected " +
                       std::to_string(kCheckpointVersion));
  }
  const auto k = get<std::uint32_t>(in);
  const auto d = get<std::uint32_t>(in);
  EncoderConfig cfg;
  cfg.input_dim = get<std::uint32_t>(in);
  const auto hidden = get<std::uint32_t>(in);
  if (hidden > 64) throw FormatError("checkpoint header is corrupt");
  cfg.hidden_dims.clear();
  for (std::uint32_t i = 0; i < hidden; ++i) cfg.hidden_dims.push_back(get<std::uint32_t>(in));
  cfg.embedding_dim = d;
  const auto raw_mode = get<std::uint8_t>(in);
  TrainState state;
  state.epoch = get<std::int64_t>(in);
  state.seed = get<std::uint64_t>(in);
  cfg.seed = get<std::uint64_t>(in);
  const auto steps = get<std::uint64_t>(in);
  const auto momentum = get<double>(in);
  const auto weight_decay = get<double>(in);
  try {
    cfg.validate();
    state.encoder = encoder_init<float>(cfg);
    state.bank = PrototypeBank<float>::from_weights(Tensor<float>(Shape{k, d}, true),
                                                    raw_mode ? EnergyMode::kRaw : EnergyMode::kNormalized);
    const auto params = state.parameters();
    state.optimizer = make_optimizer_state<float>(params, momentum, weight_decay);
  } catch (const ContractError& e) {
    throw FormatError(std::string("checkpoint header is invalid: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("checkpoint header is invalid: ") + e.what());
  }
  state.optimizer.step_count = steps;
  for (auto& p : state.parameters()) get_floats(in, p.data());
  for (auto& buf : state.optimizer.buffers) get_floats(in, buf);
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("checkpoint has trailing bytes");
  return state;
}

}  // namespace carl
