#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "prokan/checkpoint.hpp"
#include "prokan/commands.hpp"
#include "prokan/config.hpp"
#include "prokan/error.hpp"
#include "temp_dir.hpp"

using namespace prokan;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no prokan::Error thrown";
  return ErrorCode::kParseError;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Small, fast configuration: 8^3 volumes, few epochs.
RunConfig tiny_config(const fs::path& out, int n_cases = 4) {
  RunConfig cfg;
  cfg.output_dir = out.string();
  cfg.n_cases = n_cases;
  cfg.dim_x = cfg.dim_y = cfg.dim_z = 8;
  cfg.radius_min = 2.0;
  cfg.radius_max = 3.0;
  cfg.hidden_width = 4;
  cfg.samples_per_class = 32;
  cfg.max_epochs = 4;
  return cfg;
}

ProKanNetwork random_checkpoint_net(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> small(1, 4);
  NetworkShape shape;
  shape.input_dim = small(rng);
  shape.hidden_width = small(rng);
  shape.init_scale = 1.0;
  HyperParams hp{0, small(rng), small(rng) - 1, 1e-2, 1e-4};
  ProKanNetwork net = make_network(shape, hp, rng);
  const int blocks = small(rng);
  std::normal_distribution<double> coef(0.0, 1.0);
  for (int b = 1; b < blocks; ++b) {
    hp.grid_size += 1;
    net = insert_block(net, hp, 4);
  }
  for (auto* layer : net.layers())
    for (double& c : layer->coefficients()) c = coef(rng) * std::pow(10.0, coef(rng) * 3);
  return net;
}

}  // namespace

TEST(Config, DefaultsValidate) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, ParseOverridesAndRejectsUnknownKeys) {
  const auto cfg = parse_config(R"({"seed": 12, "hidden_width": 6, "output_dir": "x", "lr_decay": 0.25})");
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.hidden_width, 6);
  EXPECT_EQ(cfg.output_dir, "x");
  EXPECT_EQ(cfg.lr_decay, 0.25);
  EXPECT_EQ(code_of([] { parse_config(R"({"hiden_width": 6})"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"hidden_width": "six"})"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_config(R"({"hidden_width": 6.5})"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_config("[1, 2]"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([] { parse_config("{not json"); }), ErrorCode::kConfigError);
}

TEST(Config, EveryKeyRoundTripsThroughJson) {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.epsilon = 2.5e-3;
  const auto back = parse_config(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  const auto doc = nlohmann::json::parse(cfg.to_json());
  EXPECT_EQ(doc.size(), config_keys().size());
}

TEST(Config, FlagValues) {
  RunConfig cfg;
  set_config_value(cfg, "max_epochs", "12");
  set_config_value(cfg, "noise_sigma", "0.05");
  set_config_value(cfg, "output_dir", "some/dir");
  EXPECT_EQ(cfg.max_epochs, 12);
  EXPECT_EQ(cfg.noise_sigma, 0.05);
  EXPECT_EQ(cfg.output_dir, "some/dir");
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "max_epochs", "12x"); }), ErrorCode::kConfigError);
  EXPECT_EQ(code_of([&] { set_config_value(cfg, "bogus", "1"); }), ErrorCode::kConfigError);
}

TEST(Config, EnvironmentSeed) {
  RunConfig cfg;
  ::setenv("PROKAN_SEED", "4242", 1);
  apply_environment(cfg);
  ::unsetenv("PROKAN_SEED");
  EXPECT_EQ(cfg.seed, 4242u);
}

TEST(Config, ValidationRejectsInvariantViolations) {
  const std::vector<std::pair<std::string, std::string>> bad{
      {"hidden_width", "0"}, {"patch_radius", "-1"},   {"grid_size", "0"},    {"degree", "-1"},
      {"epsilon", "0"},      {"learning_rate", "-1"},  {"momentum", "1"},     {"batch_size", "0"},
      {"val_fraction", "1"}, {"noise_sigma", "-0.1"},  {"max_blocks", "0"},   {"spline_domain_max", "-2"},
      {"n_cases", "0"},      {"radius_max", "9"},      {"folds", "1"},        {"smooth_eps", "0"}};
  for (const auto& [key, value] : bad) {
    RunConfig cfg;
    set_config_value(cfg, key, value);
    EXPECT_EQ(code_of([&] { cfg.validate(); }), ErrorCode::kConfigError) << key << "=" << value;
  }
}

TEST(Checkpoint, RoundTripIsExact) {
  TempDir tmp;
  std::mt19937_64 rng(123);
  for (int i = 0; i < 50; ++i) {
    const Checkpoint ck{random_checkpoint_net(rng), i % 3, i, 0.01 * i};
    save_checkpoint(tmp.path() / "c.json", ck);
    const Checkpoint back = load_checkpoint(tmp.path() / "c.json");
    EXPECT_EQ(back.net, ck.net);
    EXPECT_EQ(back.patch_radius, ck.patch_radius);
    EXPECT_EQ(back.epoch, ck.epoch);
    EXPECT_EQ(back.val_dice, ck.val_dice);
  }
}

TEST(Checkpoint, CorruptedInputs) {
  std::mt19937_64 rng(1);
  const std::string good = serialize_checkpoint(Checkpoint{random_checkpoint_net(rng), 1, 3, 0.5});
  EXPECT_EQ(code_of([&] { parse_checkpoint(good.substr(0, good.size() / 2)); }), ErrorCode::kParseError);
  auto doc = nlohmann::json::parse(good);
  doc["format_version"] = 99;
  EXPECT_EQ(code_of([&] { parse_checkpoint(doc.dump()); }), ErrorCode::kVersionMismatch);
  doc = nlohmann::json::parse(good);
  doc["head"]["coefficients"].push_back(1.0);
  EXPECT_EQ(code_of([&] { parse_checkpoint(doc.dump()); }), ErrorCode::kParseError);
  doc = nlohmann::json::parse(good);
  doc.erase("blocks");
  EXPECT_EQ(code_of([&] { parse_checkpoint(doc.dump()); }), ErrorCode::kParseError);
  EXPECT_EQ(code_of([] { load_checkpoint("/nonexistent/c.json"); }), ErrorCode::kIoError);
}

TEST(Synth, FileCountAndByteIdenticalRerun) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "a", 5);
  cmd_synth(cfg);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(cfg.output_dir)) files += e.is_regular_file();
  EXPECT_EQ(files, 11u);
  cfg.output_dir = (tmp.path() / "b").string();
  cmd_synth(cfg);
  for (const auto& e : fs::directory_iterator(tmp.path() / "a")) {
    EXPECT_EQ(slurp(e.path()), slurp(tmp.path() / "b" / e.path().filename())) << e.path();
  }
  const auto ds = load_dataset(tmp.path() / "a");
  EXPECT_EQ(ds.cases.size(), 5u);
  EXPECT_EQ(ds.seed, cfg.seed);
}

TEST(Synth, UnwritableDirectoryNamesPath) {
  TempDir tmp;
  std::ofstream(tmp.path() / "file") << "x";
  const auto target = tmp.path() / "file" / "sub";
  try {
    cmd_synth(tiny_config(target));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
    EXPECT_NE(std::string(e.what()).find(target.string()), std::string::npos);
  }
}

TEST(Synth, InvalidConfigWritesNothing) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "never");
  cfg.hidden_width = 0;
  EXPECT_EQ(code_of([&] { cmd_synth(cfg); }), ErrorCode::kConfigError);
  EXPECT_FALSE(fs::exists(tmp.path() / "never"));
}

TEST(Train, OneEpochOneRecord) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "data");
  cmd_synth(cfg);
  cfg.output_dir = (tmp.path() / "run").string();
  cfg.max_epochs = 1;
  const auto s = cmd_train(cfg, tmp.path() / "data");
  EXPECT_EQ(s.epochs_run, 1);
  EXPECT_EQ(lines_of(tmp.path() / "run" / files::kEpochLog).size(), 1u);
  for (const char* f : {files::kEventLog, files::kFinalCheckpoint, files::kBestCheckpoint, files::kSplit, files::kSummary})
    EXPECT_TRUE(fs::exists(tmp.path() / "run" / f)) << f;
  const auto rec = nlohmann::json::parse(lines_of(tmp.path() / "run" / files::kEpochLog)[0]);
  for (const char* key : {"epoch", "train_loss", "val_loss", "val_accuracy", "val_dice", "block_count", "G", "k", "eta", "lambda"})
    EXPECT_TRUE(rec.contains(key)) << key;
}

TEST(Train, MissingManifest) {
  TempDir tmp;
  EXPECT_EQ(code_of([&] { cmd_train(tiny_config(tmp.path() / "run"), tmp.path()); }), ErrorCode::kIoError);
}

TEST(Train, EvalReproducesLoggedTrainDice) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "data", 5);
  cmd_synth(cfg);
  cfg.output_dir = (tmp.path() / "run").string();
  cfg.max_epochs = 6;
  const auto s = cmd_train(cfg, tmp.path() / "data");
  const auto ev = cmd_eval(tmp.path() / "run" / files::kFinalCheckpoint, tmp.path() / "data",
                           tmp.path() / "eval", "train");
  EXPECT_NEAR(ev.mean_dice, s.final_train_dice, 1e-9);
  EXPECT_EQ(ev.cases.size(), s.train_cases.size());
  EXPECT_EQ(lines_of(tmp.path() / "eval" / files::kEvalReport).size(), ev.cases.size() + 1);
}

TEST(Eval, ConstantZeroNetwork) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "data", 2);
  cmd_synth(cfg);
  // make case_001's mask empty so both Dice rules are exercised
  auto ds = load_dataset(tmp.path() / "data");
  write_mask(tmp.path() / "data" / "case_001.pkms", BinaryMask(ds.cases[1].mask.dims));

  std::mt19937_64 rng(0);
  NetworkShape shape;
  shape.init_scale = 0.0;
  const Checkpoint ck{make_network(shape, HyperParams{}, rng), 1, 0, 0.0};
  save_checkpoint(tmp.path() / "zero.json", ck);
  const auto ev = cmd_eval(tmp.path() / "zero.json", tmp.path() / "data", tmp.path() / "eval");
  ASSERT_EQ(ev.cases.size(), 2u);
  ASSERT_TRUE(ev.cases[0].dice.has_value());
  EXPECT_EQ(*ev.cases[0].dice, 0.0);
  EXPECT_FALSE(ev.cases[1].dice.has_value());
  EXPECT_NE(ev.cases[1].error.find("both-empty"), std::string::npos);
  EXPECT_EQ(ev.cases[1].accuracy, 1.0);
}

TEST(Eval, CorruptCheckpoint) {
  TempDir tmp;
  std::ofstream(tmp.path() / "bad.json") << "{\"format\": \"prokan-checkpoint\", \"format_version\": 7}";
  EXPECT_EQ(code_of([&] { cmd_eval(tmp.path() / "bad.json", tmp.path(), tmp.path()); }), ErrorCode::kVersionMismatch);
  std::ofstream(tmp.path() / "bad2.json") << "{\"format\": ";
  EXPECT_EQ(code_of([&] { cmd_eval(tmp.path() / "bad2.json", tmp.path(), tmp.path()); }), ErrorCode::kParseError);
}

TEST(Crossval, StructureAndAggregates) {
  TempDir tmp;
  auto cfg = tiny_config(tmp.path() / "data", 4);
  cmd_synth(cfg);
  cfg.output_dir = (tmp.path() / "cv").string();
  cfg.max_epochs = 2;
  const auto r = cmd_crossval(cfg, tmp.path() / "data", 2);
  ASSERT_EQ(r.folds.size(), 2u);
  std::set<std::string> ids;
  double acc = 0, dice = 0;
  for (const auto& f : r.folds) {
    for (const auto& id : f.val_case_ids) EXPECT_TRUE(ids.insert(id).second) << id;
    acc += f.accuracy;
    dice += f.dice;
  }
  EXPECT_EQ(ids.size(), 4u);
  EXPECT_NEAR(r.mean.accuracy, acc / 2, 1e-12);
  EXPECT_NEAR(r.mean.dice, dice / 2, 1e-12);
  const auto lines = lines_of(tmp.path() / "cv" / files::kCrossvalReport);
  EXPECT_EQ(lines.size(), 4u);  // two folds, mean, std
  EXPECT_EQ(code_of([&] { cmd_crossval(cfg, tmp.path() / "data", 5); }), ErrorCode::kTooFewCases);
}

TEST(Gradcheck, TwelveCellsPass) {
  const auto audit = cmd_gradcheck(RunConfig{});
  EXPECT_EQ(audit.cells.size(), 12u);
  EXPECT_TRUE(audit.passed);
  EXPECT_LT(audit.worst_error, kGradcheckTolerance);
}

TEST(Gradcheck, InjectedFaultFails) {
  const auto audit = cmd_gradcheck(RunConfig{}, true);
  EXPECT_FALSE(audit.passed);
  for (const auto& c : audit.cells) EXPECT_TRUE(c.report.offending.has_value());
}
