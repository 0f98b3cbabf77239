#include <gtest/gtest.h>

#include <set>

#include "carl/config.hpp"

using namespace carl;

namespace {

std::size_t error_line(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto cfg = parse_run_config("");
  EXPECT_EQ(serialize_run_config(cfg), serialize_run_config(RunConfig{}));
}

TEST(Config, EveryKeyHasDefaultAndDoc) {
  std::set<std::string> names;
  const RunConfig defaults;
  for (const auto& k : config_keys()) {
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.doc.empty()) << k.name;
    EXPECT_EQ(get_config_value(defaults, k.name), k.default_value) << k.name;
    EXPECT_NE(k.name.find('.'), std::string::npos);
  }
}

TEST(Config, ParsesSectionsAndComments) {
  const auto cfg = parse_run_config(R"(
# a comment
[data]
kind = gaussian_mixture
; another comment
separation = 2.5
[model]
hidden_dims = 32 16
energy = raw
[objective]
num_prototypes = 7
schedule = 0.5:3
[trainer]
lr_start = 0.1
[eval]
standardize = false
)");
  EXPECT_DOUBLE_EQ(cfg.data.separation, 2.5);
  EXPECT_EQ(cfg.trainer.encoder.hidden_dims, (std::vector<std::size_t>{32, 16}));
  EXPECT_EQ(cfg.trainer.energy_mode, EnergyMode::kRaw);
  EXPECT_EQ(cfg.trainer.num_prototypes, 7u);
  EXPECT_DOUBLE_EQ(cfg.trainer.schedule.end, 0.5);
  EXPECT_DOUBLE_EQ(cfg.trainer.schedule.start, 3.0);
  EXPECT_DOUBLE_EQ(cfg.trainer.lr_start, 0.1);
  EXPECT_FALSE(cfg.eval.probe.standardize);
}

TEST(Config, RoundTripIsIdempotent) {
  RunConfig cfg;
  set_config_value(cfg, "trainer.lr_start", "0.123456789");
  set_config_value(cfg, "objective.schedule", "0.25:1.75");
  set_config_value(cfg, "model.hidden_dims", "3 5 7");
  set_config_value(cfg, "data.kind", "csv");
  set_config_value(cfg, "data.path", "some/file.csv");
  set_config_value(cfg, "trainer.weight_decay", "1e-7");
  const auto text = serialize_run_config(cfg);
  const auto again = parse_run_config(text);
  EXPECT_EQ(serialize_run_config(again), text);
  EXPECT_DOUBLE_EQ(again.trainer.lr_start, 0.123456789);
  EXPECT_DOUBLE_EQ(again.trainer.weight_decay, 1e-7);
  EXPECT_EQ(again.data.path, "some/file.csv");
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_EQ(error_line("[data]\nnum_classes = 4\nbogus = 1\n"), 3u);
  EXPECT_EQ(error_line("[nowhere]\n"), 1u);
  EXPECT_EQ(error_line("[trainer]\nepochs = 3\nepochs = 4\n"), 3u);
  EXPECT_EQ(error_line("[trainer]\n\nepochs = many\n"), 3u);
  EXPECT_EQ(error_line("[trainer]\nepochs\n"), 2u);
  EXPECT_EQ(error_line("[eval]\nstandardize = maybe\n"), 2u);
  EXPECT_EQ(error_line("[model]\nenergy = cosine\n"), 2u);
  EXPECT_EQ(error_line("[objective]\nschedule = 1\n"), 2u);
}

TEST(Config, CommentsAreWholeLineOnly) {
  EXPECT_EQ(error_line("[data]\nseparation = 2.5 # note\n"), 2u);
  const auto cfg = parse_run_config("[data]\npath = runs/a#b;c\n");
  EXPECT_EQ(cfg.data.path, "runs/a#b;c");
}

TEST(Config, KeyBeforeSectionRejected) { EXPECT_EQ(error_line("epochs = 3\n"), 1u); }

TEST(Config, KeyInWrongSectionRejected) { EXPECT_NE(error_line("[data]\nlr_start = 0.1\n"), 0u); }

TEST(Config, CanonicalKeys) {
  EXPECT_EQ(canonical_key("trainer.epochs"), "trainer.epochs");
  EXPECT_EQ(canonical_key("num_prototypes"), "objective.num_prototypes");
  EXPECT_EQ(canonical_key("lr_start"), "trainer.lr_start");
  EXPECT_THROW(canonical_key("seed"), ConfigError);  // data.seed and trainer.seed
  EXPECT_THROW(canonical_key("nonsense"), ConfigError);
  EXPECT_THROW(canonical_key("trainer.nonsense"), ConfigError);
}

TEST(Config, SetRejectsBadValues) {
  RunConfig cfg;
  EXPECT_THROW(set_config_value(cfg, "trainer.epochs", "1.5"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "trainer.lr_start", "fast"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "trainer.batch_size", "-4"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "objective.loss", "triplet"), ConfigError);
  EXPECT_THROW(set_config_value(cfg, "model.hidden_dims", "12 x"), ConfigError);
}

TEST(Config, LoadMissingFile) { EXPECT_THROW(load_run_config("/nonexistent/run.ini"), Error); }

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"mixture.ini", "cifar10.ini"}) {
    const auto cfg = load_run_config(std::filesystem::path(CARL_SOURCE_DIR) / "configs" / name);
    EXPECT_NO_THROW(cfg.trainer.validate()) << name;
  }
}
