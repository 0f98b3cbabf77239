#include "carl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace carl {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("expected a number, got '" + std::string(s) + "'");
  return v;
}

template <typename I>
I parse_integer(std::string_view s) {
  I v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("expected an integer, got '" + std::string(s) + "'");
  }
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("expected true or false, got '" + std::string(s) + "'");
}

std::vector<std::size_t> parse_dims(std::string_view s) {
  std::vector<std::size_t> dims;
  std::istringstream in{std::string(s)};
  std::string token;
  while (in >> token) dims.push_back(parse_integer<std::size_t>(token));
  if (dims.empty()) throw ConfigError("expected a space-separated list of widths");
  return dims;
}

std::string format_dims(const std::vector<std::size_t>& dims) {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) out += (i ? " " : "") + std::to_string(dims[i]);
  return out;
}

struct Entry {
  std::string name;
  std::string doc;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Binds a double/integer/bool member through an accessor lambda.
template <typename Access>
Entry number(std::string name, std::string doc, Access access) {
  using Member = std::remove_reference_t<decltype(access(std::declval<RunConfig&>()))>;
  return Entry{std::move(name), std::move(doc),
               [access](RunConfig& c, std::string_view v) {
                 if constexpr (std::is_same_v<Member, double>) {
                   access(c) = parse_double(v);
                 } else if constexpr (std::is_same_v<Member, bool>) {
                   access(c) = parse_bool(v);
                 } else {
                   access(c) = parse_integer<Member>(v);
                 }
               },
               [access](const RunConfig& c) {
                 auto& m = access(const_cast<RunConfig&>(c));
                 if constexpr (std::is_same_v<Member, double>) {
                   return format_double(m);
                 } else if constexpr (std::is_same_v<Member, bool>) {
                   return std::string(m ? "true" : "false");
                 } else {
                   return std::to_string(m);
                 }
               }};
}

std::vector<Entry> build_entries() {
  std::vector<Entry> e;
  // data
  e.push_back({"data.kind", "gaussian_mixture | cifar10 | csv",
               [](RunConfig& c, std::string_view v) {
                 if (v == "gaussian_mixture") c.data.kind = DataKind::kGaussianMixture;
                 else if (v == "cifar10") c.data.kind = DataKind::kCifar10;
                 else if (v == "csv") c.data.kind = DataKind::kCsv;
                 else throw ConfigError("unknown data kind '" + std::string(v) + "'");
               },
               [](const RunConfig& c) -> std::string {
                 switch (c.data.kind) {
                   case DataKind::kCifar10: return "cifar10";
                   case DataKind::kCsv: return "csv";
                   default: return "gaussian_mixture";
                 }
               }});
  e.push_back(number("data.num_classes", "mixture classes", [](RunConfig& c) -> int& { return c.data.num_classes; }));
  e.push_back(number("data.per_class", "mixture samples per class",
                     [](RunConfig& c) -> std::size_t& { return c.data.per_class; }));
  e.push_back(number("data.dim", "mixture dimension", [](RunConfig& c) -> std::size_t& { return c.data.dim; }));
  e.push_back(number("data.separation", "radius of the sphere holding the class centers",
                     [](RunConfig& c) -> double& { return c.data.separation; }));
  e.push_back(number("data.seed", "mixture generation seed", [](RunConfig& c) -> std::uint64_t& { return c.data.seed; }));
  e.push_back({"data.path", "CIFAR-10 directory or CSV file",
               [](RunConfig& c, std::string_view v) { c.data.path = std::string(v); },
               [](const RunConfig& c) { return c.data.path; }});
  e.push_back(number("data.limit", "use only the first N training samples (0 = all)",
                     [](RunConfig& c) -> std::size_t& { return c.data.limit; }));
  e.push_back(number("data.normalize_channels", "image data: normalize with training-split channel mean/std",
                     [](RunConfig& c) -> bool& { return c.data.normalize_channels; }));
  e.push_back(number("data.noise_std", "vector views: additive Gaussian noise std",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.noise_std; }));
  e.push_back(number("data.scale_min", "vector views: lower bound of the random scale",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.scale_min; }));
  e.push_back(number("data.scale_max", "vector views: upper bound of the random scale",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.scale_max; }));
  e.push_back(number("data.mask_prob", "vector views: per-coordinate drop probability",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.mask_prob; }));
  e.push_back(number("data.crop_min", "image views: smallest crop area fraction",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.crop_scale_min; }));
  e.push_back(number("data.crop_max", "image views: largest crop area fraction",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.crop_scale_max; }));
  e.push_back(number("data.flip_prob", "image views: horizontal flip probability",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.flip_prob; }));
  e.push_back(number("data.jitter_prob", "image views: color jitter probability",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.jitter_prob; }));
  e.push_back(number("data.brightness", "image views: brightness factor spread",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.brightness; }));
  e.push_back(number("data.contrast", "image views: contrast factor spread",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.contrast; }));
  e.push_back(number("data.saturation", "image views: saturation factor spread",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.saturation; }));
  e.push_back(number("data.hue", "image views: maximum hue shift",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.hue; }));
  e.push_back(number("data.grayscale_prob", "image views: grayscale probability",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.grayscale_prob; }));
  e.push_back(number("data.blur_prob", "image views: Gaussian blur probability",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.blur_prob; }));
  e.push_back(number("data.blur_sigma_min", "image views: smallest blur sigma",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.blur_sigma_min; }));
  e.push_back(number("data.blur_sigma_max", "image views: largest blur sigma",
                     [](RunConfig& c) -> double& { return c.trainer.augmentation.blur_sigma_max; }));
  // model
  e.push_back({"model.hidden_dims", "space-separated hidden layer widths",
               [](RunConfig& c, std::string_view v) { c.trainer.encoder.hidden_dims = parse_dims(v); },
               [](const RunConfig& c) { return format_dims(c.trainer.encoder.hidden_dims); }});
  e.push_back(number("model.embedding_dim", "embedding width d",
                     [](RunConfig& c) -> std::size_t& { return c.trainer.encoder.embedding_dim; }));
  e.push_back({"model.energy", "normalized (cosine energies) | raw (literal dot product)",
               [](RunConfig& c, std::string_view v) {
                 if (v == "normalized") c.trainer.energy_mode = EnergyMode::kNormalized;
                 else if (v == "raw") c.trainer.energy_mode = EnergyMode::kRaw;
                 else throw ConfigError("unknown energy mode '" + std::string(v) + "'");
               },
               [](const RunConfig& c) -> std::string {
                 return c.trainer.energy_mode == EnergyMode::kRaw ? "raw" : "normalized";
               }});
  // objective
  e.push_back({"objective.loss", "carl | infonce",
               [](RunConfig& c, std::string_view v) {
                 if (v == "carl") c.trainer.loss = LossKind::kCarl;
                 else if (v == "infonce") c.trainer.loss = LossKind::kInfoNCE;
                 else throw ConfigError("unknown loss '" + std::string(v) + "'");
               },
               [](const RunConfig& c) -> std::string { return c.trainer.loss == LossKind::kInfoNCE ? "infonce" : "carl"; }});
  e.push_back(number("objective.num_prototypes", "number of general prototypes K",
                     [](RunConfig& c) -> std::size_t& { return c.trainer.num_prototypes; }));
  e.push_back({"objective.schedule", "KL weight schedule a:b (end:start)",
               [](RunConfig& c, std::string_view v) {
                 const auto colon = v.find(':');
                 if (colon == std::string_view::npos) throw ConfigError("schedule must be written a:b");
                 c.trainer.schedule.end = parse_double(trim(v.substr(0, colon)));
                 c.trainer.schedule.start = parse_double(trim(v.substr(colon + 1)));
               },
               [](const RunConfig& c) {
                 return format_double(c.trainer.schedule.end) + ":" + format_double(c.trainer.schedule.start);
               }});
  e.push_back(number("objective.decay_epochs", "epochs E over which the KL weight decays",
                     [](RunConfig& c) -> long& { return c.trainer.schedule.decay_epochs; }));
  e.push_back(number("objective.tau", "InfoNCE temperature", [](RunConfig& c) -> double& { return c.trainer.infonce.tau; }));
  // trainer
  e.push_back(number("trainer.epochs", "training epochs", [](RunConfig& c) -> long& { return c.trainer.epochs; }));
  e.push_back(number("trainer.batch_size", "minibatch size B",
                     [](RunConfig& c) -> std::size_t& { return c.trainer.batch_size; }));
  e.push_back(number("trainer.lr_start", "cosine schedule start", [](RunConfig& c) -> double& { return c.trainer.lr_start; }));
  e.push_back(number("trainer.lr_end", "cosine schedule end", [](RunConfig& c) -> double& { return c.trainer.lr_end; }));
  e.push_back(number("trainer.momentum", "SGD momentum", [](RunConfig& c) -> double& { return c.trainer.momentum; }));
  e.push_back(number("trainer.weight_decay", "L2 penalty on all parameters",
                     [](RunConfig& c) -> double& { return c.trainer.weight_decay; }));
  e.push_back(number("trainer.seed", "root seed for initialization and the view stream",
                     [](RunConfig& c) -> std::uint64_t& { return c.trainer.seed; }));
  // eval
  e.push_back(number("eval.probe_epochs", "linear probe epochs", [](RunConfig& c) -> long& { return c.eval.probe.epochs; }));
  e.push_back(number("eval.probe_lr", "linear probe learning rate", [](RunConfig& c) -> double& { return c.eval.probe.lr; }));
  e.push_back(number("eval.probe_batch", "linear probe minibatch size",
                     [](RunConfig& c) -> std::size_t& { return c.eval.probe.batch_size; }));
  e.push_back(number("eval.probe_momentum", "linear probe SGD momentum",
                     [](RunConfig& c) -> double& { return c.eval.probe.momentum; }));
  e.push_back(number("eval.train_fraction", "probe training share for single-set data",
                     [](RunConfig& c) -> double& { return c.eval.probe.train_fraction; }));
  e.push_back(number("eval.standardize", "z-score features before probing",
                     [](RunConfig& c) -> bool& { return c.eval.probe.standardize; }));
  e.push_back(number("eval.probe_seeds", "independent probe runs averaged per evaluation",
                     [](RunConfig& c) -> int& { return c.eval.probe_seeds; }));
  e.push_back(number("eval.collapse_threshold", "collapse when perplexity < threshold * K",
                     [](RunConfig& c) -> double& { return c.eval.collapse_threshold; }));
  return e;
}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = build_entries();
  return table;
}

const Entry& find_entry(std::string_view key) {
  const auto name = canonical_key(key);
  for (const auto& e : entries())
    if (e.name == name) return e;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    const RunConfig defaults;
    for (const auto& e : entries()) out.push_back({e.name, e.get(defaults), e.doc});
    return out;
  }();
  return keys;
}

std::string canonical_key(std::string_view key) {
  std::string match;
  for (const auto& e : entries()) {
    if (e.name == key) return e.name;
    const auto dot = e.name.find('.');
    if (std::string_view(e.name).substr(dot + 1) == key) {
      if (!match.empty()) throw ConfigError("config key '" + std::string(key) + "' is ambiguous");
      match = e.name;
    }
  }
  if (match.empty()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return match;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_entry(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  return find_entry(key).get(cfg);
}

RunConfig parse_run_config(std::string_view text) {
  static const std::set<std::string, std::less<>> sections{"data", "model", "objective", "trainer", "eval"};
  RunConfig cfg;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!sections.count(section)) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    if (section.empty()) throw ConfigError("key outside of a section", line_no);
    const auto key = section + "." + std::string(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const Entry* entry = nullptr;
    for (const auto& e : entries())
      if (e.name == key) entry = &e;
    if (!entry) throw ConfigError("unknown key '" + key + "'", line_no);
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'", line_no);
    try {
      entry->set(cfg, value);
    } catch (const ConfigError& err) {
      throw ConfigError(key + ": " + err.what(), line_no);
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string serialize_run_config(const RunConfig& cfg) {
  std::ostringstream out;
  std::string section;
  for (const auto& e : entries()) {
    const auto dot = e.name.find('.');
    const auto sec = e.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << e.name.substr(dot + 1) << " = " << e.get(cfg) << '\n';
  }
  return out.str();
}

}  // namespace carl
