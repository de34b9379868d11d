#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "prokan/hyperparams.hpp"
#include "prokan/inference.hpp"
#include "prokan/kan.hpp"
#include "prokan/training.hpp"

namespace prokan {

// Per-epoch series; epochs are numbered from 1, so epoch t lives at index t-1.
struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
  std::vector<int> insertion_epochs;

  std::size_t epochs() const { return val_loss.size(); }
  void append(double train, double val, double accuracy);
};

struct StackingPolicy {
  double epsilon = 1e-3;
  int t_plateau = 5;
  int decline_window = 5;
  int cooldown = 5;
  int max_blocks = 4;
  HyperParams base{};  // G0, k0, eta0, lambda0 at block index 0
  int delta_grid = 3;
  int delta_degree = 0;
  double lr_decay = 0.5;  // alpha
  double delta_lambda = 1e-4;
  int max_epochs = 200;

  static constexpr int kMaxDegree = 5;
  void validate() const;
};

// Fewer than t_plateau+1 epochs: false. Otherwise |mean of the last t_plateau
// validation losses - the loss just before them| < epsilon.
bool detect_plateau(const TrainingHistory& history, int t_plateau, double epsilon);

// Fewer than window+1 epochs: false. Otherwise the least-squares slope of the
// last window+1 accuracies is negative and the first occurrence of the
// all-time maximum accuracy is at or before the start of that window.
bool detect_accuracy_decline(const TrainingHistory& history, int decline_window);

// (plateau or accuracy decline) and train < val at the latest epoch, with
// capacity left and at least `cooldown` epochs since the last insertion.
bool should_add_block(const TrainingHistory& history, const StackingPolicy& policy,
                      int blocks_now, std::optional<int> last_insertion_epoch);

// Hyperparameters for block b = current.block_index + 1:
// G += dG, k += dk, eta /= (1 + alpha b), lambda += dlambda.
HyperParams next_hyperparameters(const HyperParams& current, const StackingPolicy& policy);

struct TrainingData {
  SampleSet train;                 // balanced voxel samples from training cases
  SampleSet val;                   // balanced voxel samples from validation cases
  std::vector<EvalCase> val_cases; // dense validation volumes for accuracy/Dice
};

struct TrainerSettings {
  NetworkShape shape{};
  double momentum = 0.9;
  int batch_size = 64;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  double val_dice = 0.0;
  int block_count = 0;
  HyperParams hp{};
};

struct InsertionEvent {
  int epoch = 0;
  int new_block_index = 0;
  HyperParams hp{};
  // Validation loss just before and just after the insertion, both with the
  // pre-insertion lambda.
  double val_loss_before = 0.0;
  double val_loss_after = 0.0;
};

struct ProgressiveResult {
  ProKanNetwork final_net;
  ProKanNetwork best_net;
  int best_epoch = 0;
  double best_val_dice = 0.0;
  TrainingHistory history;
  std::vector<EpochRecord> records;
  std::vector<InsertionEvent> events;
  bool early_stopped = false;
};

struct TrainingObserver {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const InsertionEvent&)> on_insertion;
};

ProgressiveResult run_progressive_training(const TrainingData& data, const StackingPolicy& policy,
                                           const LossConfig& loss, const TrainerSettings& settings,
                                           std::uint64_t seed, const TrainingObserver& observer = {});

}  // namespace prokan
