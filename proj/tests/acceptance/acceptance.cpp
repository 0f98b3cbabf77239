// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
// Usage: acceptance [criterion numbers...]   (default: all)

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "carl/experiment.hpp"
#include "carl/ops.hpp"
#include "carl/optim.hpp"

using namespace carl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  enum Kind { kPass, kFail, kWarn, kSkip } kind = kPass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

RunConfig mixture_config() { return load_run_config(fs::path(CARL_SOURCE_DIR) / "configs" / "mixture.ini"); }

SweepOptions three_seeds() {
  SweepOptions opts;
  opts.seeds = 3;
  opts.jobs = thread_cap(static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
  return opts;
}

std::map<std::string, SweepCell> sweep_by_value(const RunConfig& base, const std::string& axis) {
  const auto key = parse_sweep_axis(axis);
  std::map<std::string, SweepCell> out;
  for (auto& cell : run_sweep(base, {key}, three_seeds())) out[cell.assignment.front().second] = cell;
  return out;
}

std::string seeds_str(const SweepCell& c) {
  std::string s;
  for (double a : c.accuracies) s += fmt("%s%.3f", s.empty() ? "" : "/", a);
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Verdict gradient_oracle() {
  const auto t0 = Clock::now();
  const auto results = run_gradcheck_suite(27);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (!(r.worst_error <= worst)) {
      worst = r.worst_error;
      worst_name = r.composition;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst < 1e-4 && secs < 120;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("%zu compositions x 27 trials, worst rel err %.2e (%s), %.1fs", results.size(), worst,
              worst_name.c_str(), secs)};
}

Verdict analytic_losses() {
  Tape<double> tape(Tape<double>::Mode::kInference);
  using T = Tensor<double>;
  double worst = 0.0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (std::size_t k : {2u, 3u, 16u, 100u}) {
    std::vector<double> uniform(k, 1.0 / static_cast<double>(k)), one_hot(k, 0.0);
    one_hot[0] = 1.0;
    check(kl_to_uniform(tape, T::vector(uniform)).item(), 0.0);
    check(kl_to_uniform(tape, T::vector(one_hot)).item(), std::log(static_cast<double>(k)));
    const T oh(Shape{1, k}, one_hot), un(Shape{1, k}, uniform);
    check(consistency_loss(tape, oh, oh).item(), 0.0);
    check(consistency_loss(tape, un, un).item(), -std::log(1.0 / static_cast<double>(k)));
  }
  return {worst <= 1e-9 ? Verdict::kPass : Verdict::kFail, fmt("max abs deviation %.2e (tol 1e-9)", worst)};
}

Verdict schedule_exactness() {
  const DecaySchedule s{1.0, 2.0, 100};
  const double w0 = decay_weight(s, 0), w50 = decay_weight(s, 50), w100 = decay_weight(s, 100),
               w150 = decay_weight(s, 150);
  const double lr0 = cosine_learning_rate(0, 150, 0.6, 0.0006), lr1 = cosine_learning_rate(150, 150, 0.6, 0.0006);
  const bool ok = w0 == 2.0 && w50 == 1.5 && w100 == 1.0 && w150 == 1.0 && lr0 == 0.6 && lr1 == 0.0006;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("lambda {%.17g, %.17g, %.17g, %.17g}, lr %.17g -> %.17g", w0, w50, w100, w150, lr0, lr1)};
}

// Criteria 4 and 5 share one schedule sweep.
std::map<std::string, SweepCell>& schedule_sweep() {
  static std::map<std::string, SweepCell> cells;
  if (cells.empty()) cells = sweep_by_value(mixture_config(), "objective.schedule=1:2,2:2,0:0");
  return cells;
}

Verdict collapse_reproduction() {
  const auto t0 = Clock::now();
  auto& cells = schedule_sweep();
  const auto& decay = cells.at("1:2");
  const auto& none = cells.at("0:0");
  const bool all_collapsed = std::all_of(none.collapsed.begin(), none.collapsed.end(), [](bool b) { return b; });
  const double gap = decay.mean_accuracy - none.mean_accuracy;
  const double secs = seconds_since(t0);
  const bool ok = all_collapsed && gap >= 0.20 && secs < 900;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("lambda(0,0) perplexity %.2f (collapse in %d/3 seeds, threshold %.1f), probe %.3f vs lambda(1,2) %.3f, "
              "gap %.1f points",
              none.mean_perplexity, static_cast<int>(std::count(none.collapsed.begin(), none.collapsed.end(), true)),
              0.05 * 64, none.mean_accuracy, decay.mean_accuracy, 100 * gap)};
}

Verdict schedule_ordering() {
  auto& cells = schedule_sweep();
  const double a12 = cells.at("1:2").mean_accuracy, a22 = cells.at("2:2").mean_accuracy,
               a00 = cells.at("0:0").mean_accuracy;
  const std::string detail = fmt("lambda(1,2) %.3f [%s], lambda(2,2) %.3f [%s], lambda(0,0) %.3f [%s]", a12,
                                 seeds_str(cells.at("1:2")).c_str(), a22, seeds_str(cells.at("2:2")).c_str(), a00,
                                 seeds_str(cells.at("0:0")).c_str());
  if (!(a12 - a00 >= 0.20)) return {Verdict::kFail, detail + "; decay not 20 points above no prior"};
  if (!(a12 >= a22 - 0.01)) return {Verdict::kWarn, detail + "; decay trails constant by more than 1 point"};
  return {Verdict::kPass, detail};
}

Verdict prototype_count_trend() {
  const auto t0 = Clock::now();
  const auto cells = sweep_by_value(mixture_config(), "objective.num_prototypes=2,8,64,512");
  const double a2 = cells.at("2").mean_accuracy, a8 = cells.at("8").mean_accuracy,
               a64 = cells.at("64").mean_accuracy, a512 = cells.at("512").mean_accuracy;
  const double secs = seconds_since(t0);
  const bool ok = std::max(a8, a64) > std::max(a2, a512) && secs < 1800;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("K=2 %.3f, K=8 %.3f, K=64 %.3f, K=512 %.3f, %.1fs", a2, a8, a64, a512, secs)};
}

Verdict batch_size_interaction() {
  auto base = mixture_config();
  base.trainer.num_prototypes = 512;
  const auto cells = sweep_by_value(base, "trainer.batch_size=32,512");
  const double small = cells.at("32").mean_accuracy, large = cells.at("512").mean_accuracy;
  return {large - small >= 0.02 ? Verdict::kPass : Verdict::kFail,
          fmt("K=512: B=32 %.3f [%s], B=512 %.3f [%s], difference %.1f points", small,
              seeds_str(cells.at("32")).c_str(), large, seeds_str(cells.at("512")).c_str(), 100 * (large - small))};
}

Verdict baseline_sanity() {
  const auto cfg = mixture_config();
  const auto cells = sweep_by_value(cfg, "objective.loss=carl,infonce");
  // random-init encoder, averaged over the same three training seeds
  double random_init = 0.0;
  for (int s = 0; s < 3; ++s) {
    auto c = cfg;
    c.trainer.seed += static_cast<std::uint64_t>(s);
    auto data = build_dataset(c);
    const auto state = init_train_state(c.trainer, data.train.sample_dim);
    random_init += evaluate_encoder(c, state.encoder, data).mean / 3.0;
  }
  const double carl = cells.at("carl").mean_accuracy, nce = cells.at("infonce").mean_accuracy;
  const bool ok = std::abs(carl - nce) <= 0.05 && carl - random_init >= 0.10 && nce - random_init >= 0.10;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("CARL %.3f, InfoNCE %.3f, random-init %.3f", carl, nce, random_init)};
}

Verdict determinism() {
#ifdef CARL_LAB_EXE
  const auto dir = fs::temp_directory_path() / ("carl_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (fs::path(CARL_SOURCE_DIR) / "configs" / "mixture.ini").string();
  auto run = [&](const std::string& args) {
    const std::string cmd = std::string("\"") + CARL_LAB_EXE + "\" train " + cfg + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  const auto a = dir / "a", b = dir / "b", part = dir / "part";
  const int codes = run("--out " + a.string()) | run("--out " + b.string()) |
                    run("--stop-after 40 --out " + part.string()) |
                    run("--resume " + (part / "checkpoint.bin").string() + " --out " + part.string());
  const auto ma = slurp(a / "metrics.csv"), mb = slurp(b / "metrics.csv"), mp = slurp(part / "metrics.csv");
  const bool same_runs = !ma.empty() && ma == mb && slurp(a / "checkpoint.bin") == slurp(b / "checkpoint.bin");
  const bool same_resume = ma == mp && slurp(a / "checkpoint.bin") == slurp(part / "checkpoint.bin");
  const auto rows = static_cast<long>(std::count(ma.begin(), ma.end(), '\n')) - 1;
  fs::remove_all(dir);
  const bool ok = codes == 0 && same_runs && same_resume;
  return {ok ? Verdict::kPass : Verdict::kFail,
          fmt("exit codes %s, repeated run %s, resumed at epoch 40 %s (%ld metric rows)", codes ? "nonzero" : "ok",
              same_runs ? "byte-identical" : "DIFFERS", same_resume ? "byte-identical" : "DIFFERS", rows)};
#else
  return {Verdict::kSkip, "carl_lab not built"};
#endif
}

Verdict cifar_reader() {
  const auto dir = fs::temp_directory_path() / ("carl_acceptance_cifar_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  LabeledDataset ds;
  ds.name = "fixture";
  ds.sample_dim = 3072;
  ds.num_classes = 10;
  ds.image = ImageShape{};
  for (int i = 0; i < 12; ++i) {
    ds.labels.push_back(i % 10);
    for (int k = 0; k < 3072; ++k) ds.samples.push_back(static_cast<float>((i * 31 + k * 7) % 256) / 255.0f);
  }
  write_cifar10_file(dir / "data_batch_1.bin", ds);
  const auto back = read_cifar10_file(dir / "data_batch_1.bin");
  write_cifar10_file(dir / "again.bin", back);
  const bool fixture_ok = back.labels == ds.labels && back.samples == ds.samples &&
                          slurp(dir / "data_batch_1.bin") == slurp(dir / "again.bin");
  fs::remove_all(dir);
  std::string detail = fmt("synthetic fixture round trip %s", fixture_ok ? "bit-exact" : "MISMATCH");

  const char* env = std::getenv("CARL_CIFAR_DIR");
  if (!env || !fs::exists(fs::path(env) / "data_batch_1.bin")) {
    return {fixture_ok ? Verdict::kPass : Verdict::kFail,
            detail + "; official batches absent (set CARL_CIFAR_DIR), skipped"};
  }
  bool official_ok = true;
  for (const char* name : {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin", "data_batch_4.bin",
                           "data_batch_5.bin", "test_batch.bin"}) {
    const auto f = fs::path(env) / name;
    if (!fs::exists(f)) continue;
    const auto batch = read_cifar10_file(f);
    official_ok &= batch.size() == 10000 &&
                   std::all_of(batch.labels.begin(), batch.labels.end(), [](int l) { return l >= 0 && l <= 9; });
  }
  detail += official_ok ? "; official batches 10000 records each, labels 0-9" : "; official batches INVALID";
  return {fixture_ok && official_ok ? Verdict::kPass : Verdict::kFail, detail};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"analytic loss values", analytic_losses},
      {"schedule exactness", schedule_exactness},
      {"collapse reproduction", collapse_reproduction},
      {"schedule ordering", schedule_ordering},
      {"prototype count trend", prototype_count_trend},
      {"batch size interaction", batch_size_interaction},
      {"baseline sanity", baseline_sanity},
      {"determinism", determinism},
      {"cifar reader", cifar_reader},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(n)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {Verdict::kFail, std::string("exception: ") + e.what()};
    }
    static const char* tags[] = {"PASS", "FAIL", "WARN", "SKIP"};
    std::printf("%s %2d %-24s %s [%.1fs]\n", tags[v.kind], n, criteria[i].first, v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failures += v.kind == Verdict::kFail;
  }
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
