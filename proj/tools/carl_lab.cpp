// carl_lab: train, evaluate, sweep and gradient-check CARL models.
//
// Exit codes: 0 ok, 1 other failure, 2 config, 3 divergence, 4 checkpoint, 5 gradcheck.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "carl/config.hpp"
#include "carl/experiment.hpp"

namespace fs = std::filesystem;
using namespace carl;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kDiverged = 3, kCheckpoint = 4, kGradcheck = 5 };

RunConfig load_checked(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  auto cfg = load_run_config(path);
  try {
    cfg.trainer.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid configuration: ") + e.what());
  }
  return cfg;
}

int cmd_train(const fs::path& config_path, const fs::path& out, std::optional<std::uint64_t> seed,
              const std::string& resume, long stop_after) {
  auto cfg = load_checked(config_path);
  if (seed) cfg.trainer.seed = *seed;
  auto data = build_dataset(cfg);
  fs::create_directories(out);
  std::ofstream(out / "config.resolved.ini") << serialize_run_config(cfg);

  std::optional<TrainState> start;
  if (!resume.empty()) start = checkpoint_load(resume);
  const bool append = start.has_value() && fs::exists(out / "metrics.csv");
  std::ofstream csv(out / "metrics.csv", append ? std::ios::app : std::ios::trunc);
  std::ofstream jsonl(out / "metrics.jsonl", append ? std::ios::app : std::ios::trunc);
  if (!csv || !jsonl) throw FormatError("cannot write metrics to " + out.string());
  if (!append) csv << metrics_csv_header() << '\n';

  const auto state = run_training(
      cfg, data.train, std::move(start),
      [&](const MetricsRecord& r, const TrainState&) {
        csv << metrics_csv_row(r) << '\n' << std::flush;
        jsonl << metrics_json_line(r) << '\n' << std::flush;
        std::fprintf(stderr, "epoch %ld loss %.5f ppl %.3f lr %.5f\n", r.epoch, r.total_loss, r.perplexity,
                     r.learning_rate);
      },
      stop_after);
  checkpoint_save(state, out / "checkpoint.bin");
  return kOk;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& config_path, std::string jsonl_path) {
  auto cfg = load_checked(config_path);
  auto state = checkpoint_load(checkpoint);
  auto data = build_dataset(cfg);
  const auto summary = evaluate_encoder(cfg, state.encoder, data);
  std::printf("top1 %.6f %.6f\n", summary.mean, summary.std);

  if (jsonl_path.empty()) jsonl_path = (checkpoint.parent_path() / "metrics.jsonl").string();
  nlohmann::json j;
  j["event"] = "eval";
  j["checkpoint"] = checkpoint.string();
  j["dataset"] = data.train.name;
  j["epoch"] = state.epoch;
  j["top1_mean"] = summary.mean;
  j["top1_std"] = summary.std;
  j["probe_epochs"] = cfg.eval.probe.epochs;
  for (const auto& run : summary.runs) j["top1_runs"].push_back(run.top1_accuracy);
  std::ofstream(jsonl_path, std::ios::app) << j.dump() << '\n';
  return kOk;
}

int cmd_sweep(const fs::path& config_path, const std::vector<std::string>& vary, int seeds, const fs::path& out,
              int jobs) {
  auto cfg = load_checked(config_path);
  std::vector<SweepAxis> axes;
  for (const auto& v : vary) axes.push_back(parse_sweep_axis(v));
  SweepOptions opts;
  opts.seeds = seeds;
  opts.jobs = jobs;
  opts.out = out;
  const auto cells = run_sweep(cfg, axes, opts);
  for (const auto& c : cells) {
    std::printf("%-40s top1 %.4f %.4f perplexity %.3f\n", c.directory.c_str(), c.mean_accuracy, c.std_accuracy,
                c.mean_perplexity);
  }
  return kOk;
}

int cmd_gradcheck(int trials, std::uint64_t seed, bool inject_fault) {
  constexpr double kTolerance = 1e-4;
  const auto results = run_gradcheck_suite(trials, seed, inject_fault);
  double worst = 0.0;
  std::vector<std::string> failing;
  for (const auto& r : results) {
    std::printf("%-36s worst relative error %.3e over %d trials\n", r.composition.c_str(), r.worst_error, r.trials);
    worst = std::max(worst, r.worst_error);
    if (!(r.worst_error < kTolerance)) failing.push_back(r.composition);
  }
  std::printf("worst %.3e\n", worst);
  if (failing.empty()) return kOk;
  for (const auto& f : failing) std::printf("FAILED %s\n", f.c_str());
  return kGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CARL self-supervised training lab"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "train an encoder and write metrics and a checkpoint");
  std::string train_config, train_out = "run", resume;
  std::optional<std::uint64_t> train_seed;
  long stop_after = -1;
  train->add_option("config", train_config, "run configuration file")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--seed", train_seed, "overrides trainer.seed");
  train->add_option("--resume", resume, "continue from this checkpoint");
  train->add_option("--stop-after", stop_after, "stop once this many epochs are complete");

  auto* eval = app.add_subcommand("eval", "linear probe on frozen features of a checkpoint");
  std::string eval_ckpt, eval_config, eval_jsonl;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--config", eval_config, "configuration describing the dataset and probe")->required();
  eval->add_option("--jsonl", eval_jsonl, "append the result here (default: metrics.jsonl next to the checkpoint)");

  auto* sweep = app.add_subcommand("sweep", "train and probe every combination of the varied keys");
  std::string sweep_config, sweep_out = "sweep";
  std::vector<std::string> vary;
  int seeds = 1, jobs = 1;
  sweep->add_option("config", sweep_config, "base configuration file")->required();
  sweep->add_option("--vary", vary, "key=v1,v2,... (repeatable)");
  sweep->add_option("--seeds", seeds, "training seeds per cell")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "output directory");
  sweep->add_option("--jobs", jobs, "cells trained concurrently (capped by CARL_LAB_THREADS)")
      ->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every loss composition");
  int trials = 20;
  std::uint64_t grad_seed = 0;
  bool inject_fault = false;
  grad->add_option("--trials", trials, "random instances per composition")->check(CLI::PositiveNumber);
  grad->add_option("--seed", grad_seed, "instance seed");
  grad->add_flag("--inject-fault", inject_fault, "")->group("");

  auto* keys = app.add_subcommand("keys", "list every configuration key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train) return cmd_train(train_config, train_out, train_seed, resume, stop_after);
    if (*eval) return cmd_eval(eval_ckpt, eval_config, eval_jsonl);
    if (*sweep) return cmd_sweep(sweep_config, vary, seeds, sweep_out, jobs);
    if (*grad) return cmd_gradcheck(trials, grad_seed, inject_fault);
    if (*keys) {
      for (const auto& k : config_keys()) std::printf("%-28s %-16s %s\n", k.name.c_str(), k.default_value.c_str(), k.doc.c_str());
      return kOk;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const DivergedError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kDiverged;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "format error: %s\n", e.what());
    return kCheckpoint;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}
