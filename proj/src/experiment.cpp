#include "carl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "carl/gradcheck.hpp"
#include "carl/ops.hpp"

namespace carl {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

LabeledDataset truncated(LabeledDataset ds, std::size_t limit) {
  if (limit == 0 || limit >= ds.size()) return ds;
  ds.labels.resize(limit);
  ds.samples.resize(limit * ds.sample_dim);
  return ds;
}

}  // namespace

DatasetBundle build_dataset(RunConfig& cfg) {
  DatasetBundle out;
  const auto& d = cfg.data;
  switch (d.kind) {
    case DataKind::kGaussianMixture:
      out.train = generate_gaussian_mixture(d.num_classes, d.per_class, d.dim, d.separation, d.seed);
      break;
    case DataKind::kCsv:
      if (d.path.empty()) throw ConfigError("data.path is required for csv data");
      out.train = truncated(read_dataset_csv(d.path), d.limit);
      break;
    case DataKind::kCifar10: {
      if (d.path.empty()) throw ConfigError("data.path is required for cifar10 data");
      const std::filesystem::path root(d.path);
      if (std::filesystem::is_directory(root) && std::filesystem::exists(root / "test_batch.bin") &&
          std::filesystem::exists(root / "data_batch_1.bin")) {
        out.train = truncated(load_cifar10_split(root, CifarSplit::kTrain), d.limit);
        out.test = load_cifar10_split(root, CifarSplit::kTest);
      } else {
        out.train = truncated(load_cifar10_binary(root), d.limit);
      }
      if (d.normalize_channels) {
        const auto [mean, std] = channel_statistics(out.train);
        cfg.trainer.augmentation.channel_mean = mean;
        cfg.trainer.augmentation.channel_std = std;
      }
      break;
    }
  }
  out.train.validate();
  return out;
}

LabeledDataset evaluation_view(const LabeledDataset& ds, const AugmentationConfig& aug) {
  if (!ds.image) return ds;
  LabeledDataset out = ds;
  const auto plane = ds.image->height * ds.image->width;
  for (std::size_t i = 0; i < out.size(); ++i) {
    float* x = out.samples.data() + i * out.sample_dim;
    for (std::size_t c = 0; c < ds.image->channels; ++c) {
      const double m = aug.channel_mean[c], s = aug.channel_std[c];
      for (std::size_t p = 0; p < plane; ++p) x[c * plane + p] = static_cast<float>((x[c * plane + p] - m) / s);
    }
  }
  return out;
}

TrainState run_training(const RunConfig& cfg, const LabeledDataset& train, std::optional<TrainState> resume,
                        const EpochCallback& on_epoch, long stop_after) {
  TrainState state = resume ? std::move(*resume) : init_train_state(cfg.trainer, train.sample_dim);
  if (resume) {
    cfg.trainer.validate();
    if (state.bank.num_prototypes() != cfg.trainer.num_prototypes ||
        state.encoder.config.embedding_dim != cfg.trainer.encoder.embedding_dim ||
        state.encoder.config.hidden_dims != cfg.trainer.encoder.hidden_dims ||
        state.bank.mode != cfg.trainer.energy_mode) {
      throw StateError("checkpoint does not match the configured model");
    }
    if (state.seed != cfg.trainer.seed) throw StateError("checkpoint was trained with a different seed");
  }
  const long last = stop_after < 0 ? cfg.trainer.epochs : std::min(stop_after, cfg.trainer.epochs);
  while (state.epoch < last) {
    const auto record = train_epoch(state, cfg.trainer, train);
    if (on_epoch) on_epoch(record, state);
  }
  return state;
}

EvalSummary evaluate_encoder(const RunConfig& cfg, const EncoderNetwork<float>& encoder, const DatasetBundle& data) {
  if (cfg.eval.probe_seeds < 1) throw ContractError("probe_seeds must be at least 1");
  const auto& aug = cfg.trainer.augmentation;
  const auto train_view = evaluation_view(data.train, aug);
  const auto train_features = extract_features(encoder, train_view);
  std::optional<Tensor<float>> test_features;
  if (data.test) test_features = extract_features(encoder, evaluation_view(*data.test, aug));

  EvalSummary out;
  std::vector<double> acc;
  for (int s = 0; s < cfg.eval.probe_seeds; ++s) {
    auto probe = cfg.eval.probe;
    probe.seed += static_cast<std::uint64_t>(s);
    auto result = test_features
                      ? train_linear_probe(train_features, data.train.labels, *test_features, data.test->labels,
                                           data.train.num_classes, probe)
                      : train_linear_probe(train_features, data.train.labels, data.train.num_classes, probe);
    result.dataset = data.train.name;
    acc.push_back(result.top1_accuracy);
    out.runs.push_back(std::move(result));
  }
  std::tie(out.mean, out.std) = mean_std(acc);
  return out;
}

std::string metrics_csv_header() {
  return "epoch,total_loss,consistency_loss,kl,lambda,learning_rate,perplexity,max_cluster_share";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::ostringstream out;
  out << r.epoch << ',' << fmt(r.total_loss) << ',' << fmt(r.consistency_loss) << ',' << fmt(r.kl) << ','
      << fmt(r.lambda) << ',' << fmt(r.learning_rate) << ',' << fmt(r.perplexity) << ','
      << fmt(r.max_cluster_share);
  return out.str();
}

std::string metrics_json_line(const MetricsRecord& r) {
  nlohmann::json j;
  j["event"] = "epoch";
  j["epoch"] = r.epoch;
  j["total_loss"] = r.total_loss;
  j["consistency_loss"] = r.consistency_loss;
  j["kl"] = r.kl;
  j["lambda"] = r.lambda;
  j["learning_rate"] = r.learning_rate;
  j["perplexity"] = r.perplexity;
  j["max_cluster_share"] = r.max_cluster_share;
  j["wall_seconds"] = r.wall_seconds;
  return j.dump();
}

// ---------------------------------------------------------------------------
// sweeps

SweepAxis parse_sweep_axis(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) throw ConfigError("--vary expects key=v1,v2,...");
  SweepAxis axis;
  axis.key = canonical_key(text.substr(0, eq));
  std::string_view rest = text.substr(eq + 1);
  while (true) {
    const auto comma = rest.find(',');
    const auto value = rest.substr(0, comma);
    if (value.empty()) throw ConfigError("--vary " + axis.key + ": empty value");
    axis.values.emplace_back(value);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  // reject values the key cannot take before any training starts
  RunConfig probe;
  for (const auto& v : axis.values) set_config_value(probe, axis.key, v);
  return axis;
}

int thread_cap(int fallback) {
  if (const char* env = std::getenv("CARL_LAB_THREADS")) {
    int v = 0;
    const std::string_view s(env);
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && end == s.data() + s.size() && v >= 1) return v;
  }
  return std::max(1, fallback);
}

namespace {

std::string cell_name(const std::vector<std::pair<std::string, std::string>>& assignment) {
  if (assignment.empty()) return "base";
  std::string name;
  for (const auto& [key, value] : assignment) {
    if (!name.empty()) name += "__";
    name += key.substr(key.find('.') + 1) + "=" + value;
  }
  for (char& c : name)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '=' || c == '.' || c == '-' || c == '_')) c = '_';
  return name;
}

struct SeedOutcome {
  double accuracy = 0.0;
  double perplexity = 0.0;
  bool collapsed = false;
};

SeedOutcome run_one(RunConfig cfg, const std::filesystem::path& dir) {
  auto data = build_dataset(cfg);
  std::ofstream csv, jsonl;
  if (!dir.empty()) {
    std::filesystem::create_directories(dir);
    csv.open(dir / "metrics.csv");
    jsonl.open(dir / "metrics.jsonl");
    csv << metrics_csv_header() << '\n';
    std::ofstream(dir / "config.resolved.ini") << serialize_run_config(cfg);
  }
  MetricsRecord last;
  auto state = run_training(cfg, data.train, std::nullopt, [&](const MetricsRecord& r, const TrainState&) {
    last = r;
    if (csv.is_open()) {
      csv << metrics_csv_row(r) << '\n';
      jsonl << metrics_json_line(r) << '\n';
    }
  });
  if (!dir.empty()) checkpoint_save(state, dir / "checkpoint.bin");
  const auto eval = evaluate_encoder(cfg, state.encoder, data);
  SeedOutcome out;
  out.accuracy = eval.mean;
  out.perplexity = last.perplexity;
  out.collapsed = detect_collapse(last, cfg.trainer.num_prototypes, cfg.eval.collapse_threshold);
  if (!dir.empty()) {
    nlohmann::json j;
    j["event"] = "eval";
    j["top1_mean"] = eval.mean;
    j["top1_std"] = eval.std;
    j["final_perplexity"] = last.perplexity;
    j["collapsed"] = out.collapsed;
    jsonl << j.dump() << '\n';
  }
  return out;
}

}  // namespace

std::vector<SweepCell> run_sweep(const RunConfig& base, const std::vector<SweepAxis>& axes, const SweepOptions& opts) {
  if (opts.seeds < 1) throw ContractError("sweep needs at least one seed");
  std::vector<SweepCell> cells(1);
  for (const auto& axis : axes) {
    std::vector<SweepCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : axis.values) {
        auto c = cell;
        c.assignment.emplace_back(axis.key, v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  struct Job {
    std::size_t cell;
    int seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    cells[c].directory = cell_name(cells[c].assignment);
    cells[c].accuracies.assign(static_cast<std::size_t>(opts.seeds), 0.0);
    cells[c].final_perplexity.assign(static_cast<std::size_t>(opts.seeds), 0.0);
    cells[c].collapsed.assign(static_cast<std::size_t>(opts.seeds), false);
    for (int s = 0; s < opts.seeds; ++s) jobs.push_back({c, s});
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      const auto [c, s] = jobs[i];
      try {
        RunConfig cfg = base;
        for (const auto& [key, value] : cells[c].assignment) set_config_value(cfg, key, value);
        cfg.trainer.seed = base.trainer.seed + static_cast<std::uint64_t>(s);
        const auto dir = opts.out.empty() ? std::filesystem::path{}
                                          : opts.out / cells[c].directory / ("seed_" + std::to_string(s));
        const auto outcome = run_one(cfg, dir);
        cells[c].accuracies[static_cast<std::size_t>(s)] = outcome.accuracy;
        cells[c].final_perplexity[static_cast<std::size_t>(s)] = outcome.perplexity;
        cells[c].collapsed[static_cast<std::size_t>(s)] = outcome.collapsed;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::clamp(std::min(opts.jobs, thread_cap(opts.jobs)), 1, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (auto& cell : cells) {
    std::tie(cell.mean_accuracy, cell.std_accuracy) = mean_std(cell.accuracies);
    cell.mean_perplexity = mean_std(cell.final_perplexity).first;
  }
  if (!opts.out.empty()) {
    std::filesystem::create_directories(opts.out);
    std::ofstream summary(opts.out / "summary.csv");
    summary << "cell";
    for (const auto& axis : axes) summary << ',' << axis.key;
    summary << ",seeds,top1_mean,top1_std,perplexity_mean,collapsed_runs\n";
    for (const auto& cell : cells) {
      summary << cell.directory;
      for (const auto& [key, value] : cell.assignment) summary << ',' << value;
      summary << ',' << opts.seeds << ',' << fmt(cell.mean_accuracy) << ',' << fmt(cell.std_accuracy) << ','
              << fmt(cell.mean_perplexity) << ',' << std::count(cell.collapsed.begin(), cell.collapsed.end(), true)
              << '\n';
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// gradient check suite

namespace {

using TensorD = Tensor<double>;
using Build = std::function<TensorD(Tape<double>&, std::vector<TensorD>&)>;

struct Instance {
  std::size_t batch, prototypes, dim;
  long epoch;
};

// Doubles the value but propagates only 1.9x the incoming gradient.
TensorD faulty_double(Tape<double>& tape, const TensorD& x) {
  TensorD out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out.at(i) = 2.0 * x.at(i);
  return tape.record("faulty_double", {x}, out, [](std::span<TensorD> in, const TensorD& y) {
    if (!in[0].requires_grad()) return;
    auto g = in[0].mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 1.9 * y.grad()[i];
  });
}

double check_once(const Build& build, std::vector<TensorD> inputs) {
  std::vector<double> theta;
  for (const auto& t : inputs) theta.insert(theta.end(), t.data().begin(), t.data().end());

  for (auto& t : inputs) t.set_requires_grad(true);
  {
    Tape<double> tape;
    auto loss = build(tape, inputs);
    tape.backward(loss);
  }
  std::vector<double> analytic;
  for (const auto& t : inputs) {
    if (t.has_grad()) analytic.insert(analytic.end(), t.grad().begin(), t.grad().end());
    else analytic.insert(analytic.end(), t.numel(), 0.0);
  }

  auto f = [&](std::span<const double> x) {
    std::vector<TensorD> local;
    std::size_t offset = 0;
    for (const auto& t : inputs) {
      local.emplace_back(t.shape(), std::vector<double>(x.begin() + static_cast<long>(offset),
                                                        x.begin() + static_cast<long>(offset + t.numel())));
      offset += t.numel();
    }
    Tape<double> tape(Tape<double>::Mode::kInference);
    return build(tape, local).item();
  };
  const auto numeric = finite_difference_gradient(f, theta);
  return relative_error(analytic, numeric);
}

TensorD gaussian(Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  TensorD t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

}  // namespace

std::vector<GradcheckResult> run_gradcheck_suite(int trials, std::uint64_t seed, bool inject_fault) {
  if (trials < 1) throw ContractError("gradcheck needs at least one trial");
  const DecaySchedule schedule{};
  const InfoNCEConfig infonce{};

  struct Composition {
    std::string name;
    std::function<std::vector<TensorD>(const Instance&, std::mt19937_64&)> inputs;
    std::function<TensorD(Tape<double>&, std::vector<TensorD>&, const Instance&)> build;
  };
  auto energies_pair = [](const Instance& in, std::mt19937_64& rng) {
    return std::vector<TensorD>{gaussian({in.batch, in.prototypes}, rng), gaussian({in.batch, in.prototypes}, rng)};
  };
  auto embeddings_and_bank = [](const Instance& in, std::mt19937_64& rng) {
    return std::vector<TensorD>{gaussian({in.batch, in.dim}, rng), gaussian({in.batch, in.dim}, rng),
                                gaussian({in.prototypes, in.dim}, rng)};
  };
  auto carl_on_embeddings = [&schedule](EnergyMode mode, bool faulty) {
    return [&schedule, mode, faulty](Tape<double>& tape, std::vector<TensorD>& x, const Instance& in) {
      PrototypeBank<double> bank{x[2], mode};
      auto qa = compute_energy(tape, x[0], bank);
      auto qp = compute_energy(tape, x[1], bank);
      if (faulty) qa = faulty_double(tape, qa);
      return carl_total_loss(tape, assign_views(tape, qa), assign_views(tape, qp), schedule, in.epoch).total;
    };
  };

  std::vector<Composition> comps;
  comps.push_back({"consistency(softmax)", energies_pair, [](Tape<double>& t, std::vector<TensorD>& x, const Instance&) {
                     return consistency_loss(t, assign_views(t, x[0]), assign_views(t, x[1]));
                   }});
  comps.push_back({"kl_to_uniform(mean(softmax))", energies_pair,
                   [](Tape<double>& t, std::vector<TensorD>& x, const Instance&) {
                     auto p = ops::concat_rows(t, assign_views(t, x[0]), assign_views(t, x[1]));
                     return kl_to_uniform(t, batch_mean_assignment(t, p));
                   }});
  comps.push_back({"carl_total(softmax)", energies_pair,
                   [&schedule](Tape<double>& t, std::vector<TensorD>& x, const Instance& in) {
                     return carl_total_loss(t, assign_views(t, x[0]), assign_views(t, x[1]), schedule, in.epoch).total;
                   }});
  comps.push_back({"carl_total(normalized energies)", embeddings_and_bank, carl_on_embeddings(EnergyMode::kNormalized, false)});
  comps.push_back({"carl_total(raw energies)", embeddings_and_bank, carl_on_embeddings(EnergyMode::kRaw, false)});
  comps.push_back({"infonce", [](const Instance& in, std::mt19937_64& rng) {
                     return std::vector<TensorD>{gaussian({in.batch, in.dim}, rng), gaussian({in.batch, in.dim}, rng)};
                   },
                   [&infonce](Tape<double>& t, std::vector<TensorD>& x, const Instance&) {
                     return infonce_loss(t, x[0], x[1], infonce);
                   }});
  comps.push_back({"carl_total(encoder)",
                   [](const Instance& in, std::mt19937_64& rng) {
                     const std::size_t input = 5, hidden = 6;
                     return std::vector<TensorD>{gaussian({in.batch, input}, rng),
                                                 gaussian({in.batch, input}, rng),
                                                 gaussian({input, hidden}, rng, 0.6),
                                                 gaussian({hidden}, rng, 0.1),
                                                 gaussian({hidden, in.dim}, rng, 0.6),
                                                 gaussian({in.dim}, rng, 0.1),
                                                 gaussian({in.prototypes, in.dim}, rng)};
                   },
                   [&schedule](Tape<double>& t, std::vector<TensorD>& x, const Instance& in) {
                     EncoderNetwork<double> net;
                     net.config.input_dim = 5;
                     net.config.hidden_dims = {6};
                     net.config.embedding_dim = in.dim;
                     net.layers = {{x[2], x[3]}, {x[4], x[5]}};
                     PrototypeBank<double> bank{x[6], EnergyMode::kNormalized};
                     auto pa = assign_views(t, compute_energy(t, encoder_forward(t, net, x[0]), bank));
                     auto pp = assign_views(t, compute_energy(t, encoder_forward(t, net, x[1]), bank));
                     return carl_total_loss(t, pa, pp, schedule, in.epoch).total;
                   }});
  if (inject_fault) {
    comps.push_back({"carl_total(faulty rule)", embeddings_and_bank, carl_on_embeddings(EnergyMode::kNormalized, true)});
  }

  static constexpr std::size_t kBatches[] = {2, 4, 8};
  static constexpr std::size_t kProtos[] = {2, 3, 16};
  static constexpr std::size_t kDims[] = {3, 8};

  std::vector<GradcheckResult> results;
  for (const auto& comp : comps) {
    GradcheckResult r{comp.name, 0.0, trials};
    for (int trial = 0; trial < trials; ++trial) {
      const auto t = static_cast<std::size_t>(trial);
      std::seed_seq seq{seed, static_cast<std::uint64_t>(trial), std::uint64_t{results.size()}};
      std::mt19937_64 rng(seq);
      const Instance in{kBatches[t % 3], kProtos[(t / 3) % 3], kDims[(t / 9) % 2],
                        std::uniform_int_distribution<long>(0, 150)(rng)};
      auto inputs = comp.inputs(in, rng);
      const Build build = [&comp, &in](Tape<double>& tape, std::vector<TensorD>& x) { return comp.build(tape, x, in); };
      r.worst_error = std::max(r.worst_error, check_once(build, std::move(inputs)));
    }
    results.push_back(r);
  }
  return results;
}

}  // namespace carl
