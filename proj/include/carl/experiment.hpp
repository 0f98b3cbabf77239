#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "carl/config.hpp"
#include "carl/evaluation.hpp"
#include "carl/trainer.hpp"

namespace carl {

/// Training data plus, when the source has one, an official held-out split.
struct DatasetBundle {
  LabeledDataset train;
  std::optional<LabeledDataset> test;
};

/// Loads or generates the configured data. For image data with
/// normalize_channels set, the training-split channel statistics are written
/// into cfg.trainer.augmentation.
DatasetBundle build_dataset(RunConfig& cfg);

/// Copy of an image dataset with the augmentation's per-channel normalization
/// applied; other datasets are returned unchanged. This is what the encoder
/// sees at evaluation time.
LabeledDataset evaluation_view(const LabeledDataset& ds, const AugmentationConfig& aug);

using EpochCallback = std::function<void(const MetricsRecord&, const TrainState&)>;

/// Trains from `resume` (or a fresh state) until `stop_after` epochs are done
/// (negative = config.trainer.epochs).
TrainState run_training(const RunConfig& cfg, const LabeledDataset& train, std::optional<TrainState> resume = {},
                        const EpochCallback& on_epoch = {}, long stop_after = -1);

struct EvalSummary {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation over probe seeds (0 for a single seed)
  std::vector<ProbeResult> runs;
};

/// Frozen features, then eval.probe_seeds linear probes with seeds probe.seed + s.
EvalSummary evaluate_encoder(const RunConfig& cfg, const EncoderNetwork<float>& encoder, const DatasetBundle& data);

/// Column names of metrics.csv, matching MetricsRecord order minus wall-clock time.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& r);
/// One JSON object per line, including wall_seconds.
std::string metrics_json_line(const MetricsRecord& r);

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

/// "key=v1,v2,..." → axis with a canonical key. Throws ConfigError.
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepCell {
  std::vector<std::pair<std::string, std::string>> assignment;
  std::vector<double> accuracies;         ///< one mean probe accuracy per training seed
  std::vector<double> final_perplexity;   ///< last-epoch perplexity per training seed
  std::vector<bool> collapsed;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_perplexity = 0.0;
  std::string directory;
};

struct SweepOptions {
  int seeds = 1;
  int jobs = 1;
  std::filesystem::path out;  ///< empty: keep nothing on disk
};

/// Cross product of all axes × seeds. Seed s trains with trainer.seed + s.
/// Cells are written to out/<cell-name>/seed_<s>/ and summarized in out/summary.csv.
std::vector<SweepCell> run_sweep(const RunConfig& base, const std::vector<SweepAxis>& axes, const SweepOptions& opts);

/// Thread cap from CARL_LAB_THREADS, defaulting to `fallback`.
int thread_cap(int fallback);

struct GradcheckResult {
  std::string composition;
  double worst_error = 0.0;
  int trials = 0;
};

/// Finite-difference check of every loss composition in double precision on
/// random instances (B ∈ {2,4,8}, K ∈ {2,3,16}, d ∈ {3,8}). With
/// `inject_fault`, an extra composition carrying a deliberately wrong
/// gradient rule is included.
std::vector<GradcheckResult> run_gradcheck_suite(int trials, std::uint64_t seed = 0, bool inject_fault = false);

}  // namespace carl
