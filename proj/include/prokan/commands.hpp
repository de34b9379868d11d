#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "prokan/config.hpp"
#include "prokan/data.hpp"
#include "prokan/inference.hpp"
#include "prokan/training.hpp"

namespace prokan {

// Artifact names inside the output directory.
namespace files {
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kEpochLog = "epochs.jsonl";
inline constexpr const char* kEventLog = "events.jsonl";
inline constexpr const char* kFinalCheckpoint = "checkpoint_final.json";
inline constexpr const char* kBestCheckpoint = "checkpoint_best.json";
inline constexpr const char* kSplit = "split.json";
inline constexpr const char* kSummary = "summary.json";
inline constexpr const char* kCrossvalReport = "crossval.jsonl";
inline constexpr const char* kEvalReport = "eval.jsonl";
}  // namespace files

struct Dataset {
  std::uint64_t seed = 0;
  std::vector<LabeledCase> cases;
};

// Reads manifest.json and every listed volume/mask pair.
Dataset load_dataset(const std::filesystem::path& dir);

// Writes n_cases volume/mask pairs plus manifest.json into cfg.output_dir.
void cmd_synth(const RunConfig& cfg);

struct TrainSummary {
  int epochs_run = 0;
  bool early_stopped = false;
  int insertions = 0;
  int final_block_count = 0;
  std::size_t final_parameter_count = 0;
  int best_epoch = 0;
  double best_val_dice = 0.0;
  double final_val_dice = 0.0;
  double final_val_accuracy = 0.0;
  double final_train_dice = 0.0;
  double final_train_accuracy = 0.0;
  std::vector<std::string> train_cases;
  std::vector<std::string> val_cases;
};

// Progressive training on a case-level train/val split of the dataset.
TrainSummary cmd_train(const RunConfig& cfg, const std::filesystem::path& dataset_dir,
                       std::ostream* progress = nullptr);

struct FoldResult {
  int fold = 0;  // 1-based
  std::vector<std::string> val_case_ids;
  double accuracy = 0.0;
  double dice = 0.0;
  double miou = 0.0;
  std::optional<double> hd;
  int blocks = 0;
  int insertions = 0;
};

struct MetricAggregate {
  double accuracy = 0.0;
  double dice = 0.0;
  double miou = 0.0;
  std::optional<double> hd;
};

struct CrossvalReport {
  std::vector<FoldResult> folds;
  MetricAggregate mean;
  MetricAggregate stddev;  // sample standard deviation (n - 1)
};

CrossvalReport cmd_crossval(const RunConfig& cfg, const std::filesystem::path& dataset_dir, int k,
                            std::ostream* progress = nullptr);

// Dense inference with a checkpoint. `split` selects "train" or "val" cases
// from a split.json written by train; empty evaluates every case.
EvalSummary cmd_eval(const std::filesystem::path& checkpoint,
                     const std::filesystem::path& dataset_dir,
                     const std::filesystem::path& output_dir, const std::string& split = {},
                     const std::filesystem::path& split_file = {});

struct GradcheckCell {
  int grid_size = 0;
  int degree = 0;
  int blocks = 0;
  std::size_t parameters = 0;
  GradCheckReport report;
};

struct GradcheckAudit {
  std::vector<GradcheckCell> cells;
  double worst_error = 0.0;
  bool passed = true;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckTolerance = 1e-4;

// Seeded toy networks over G in {3,5}, k in {1,2,3}, blocks in {1,3}.
// `inject_fault` corrupts the analytic gradient to exercise the failure path.
GradcheckAudit cmd_gradcheck(const RunConfig& cfg, bool inject_fault = false);

}  // namespace prokan
