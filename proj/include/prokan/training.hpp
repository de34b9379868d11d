#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "prokan/kan.hpp"

namespace prokan {

struct LossConfig {
  double bce_weight = 1.0;
  double dice_weight = 1.0;
  double smooth_eps = 1e-6;

  void validate() const;
};

inline constexpr double kProbClip = 1e-7;

double sigmoid(double z);

// 1 - (2 sum p t + eps) / (sum p + sum t + eps)
double soft_dice_loss(std::span<const double> probs, std::span<const double> targets,
                      double smooth_eps);

// Mean binary cross-entropy with probabilities clipped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, std::span<const double> targets);

struct BatchLoss {
  double value = 0.0;               // weighted BCE + Dice, without the L2 term
  std::vector<double> logit_grads;  // d value / d logit_i
};

BatchLoss compound_loss(std::span<const double> logits, std::span<const double> targets,
                        const LossConfig& cfg);

double l2_penalty(const ProKanNetwork& net, double lambda);

// Row-major feature matrix with one binary label per row.
struct SampleSet {
  int dim = 0;
  std::vector<double> features;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * static_cast<std::size_t>(dim),
                                                     static_cast<std::size_t>(dim));
  }
  void append(std::span<const double> x, double label);
  SampleSet subset(std::span<const std::size_t> indices) const;
};

struct OptimizerState {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double l2_lambda = 0.0;
  std::vector<std::vector<double>> velocity;  // one buffer per layer, canonical order

  static OptimizerState for_network(const ProKanNetwork& net, double learning_rate,
                                    double momentum, double l2_lambda);
  // Re-aligns velocity after blocks were appended: existing block buffers keep
  // their values, new layers start at zero, the head buffer stays last.
  void grow_to(const ProKanNetwork& net);
};

// v <- momentum * v + grads + 2 lambda c;  c <- c - eta * v
void sgd_momentum_step(OptimizerState& state, ProKanNetwork& net, const GradientSet& grads);

// Data-loss value of a batch; its coefficient gradient is added into `grads`.
double accumulate_batch_gradient(const ProKanNetwork& net, const SampleSet& samples,
                                 std::span<const std::size_t> batch, const LossConfig& cfg,
                                 GradientSet& grads);

// Total loss (data + L2) of the whole set treated as one batch.
double total_loss(const ProKanNetwork& net, const SampleSet& samples, const LossConfig& cfg,
                  double lambda);

// Gradient of total_loss, including the 2 lambda c weight-decay term.
GradientSet total_loss_gradient(const ProKanNetwork& net, const SampleSet& samples,
                                const LossConfig& cfg, double lambda);

// One shuffled pass. Returns the mean over batches of data loss + L2 penalty,
// each evaluated before that batch's update.
double train_epoch(ProKanNetwork& net, const SampleSet& data, const LossConfig& cfg,
                   OptimizerState& opt, int batch_size, std::mt19937_64& rng);

// Mean per-batch total loss over consecutive batches, no update.
double evaluate_loss(const ProKanNetwork& net, const SampleSet& data, const LossConfig& cfg,
                     double lambda, int batch_size);

struct ParameterIndex {
  std::size_t layer = 0;
  std::size_t coefficient = 0;
  bool operator==(const ParameterIndex&) const = default;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  double max_abs_difference = 0.0;  // largest |a - n|, floor or not
  std::optional<ParameterIndex> offending;  // set when the tolerance is exceeded
  std::size_t checked = 0;
  bool passed = true;
};

using GradientFn = std::function<GradientSet(const ProKanNetwork&, const SampleSet&,
                                             const LossConfig&, double lambda)>;

inline constexpr double kGradCheckAbsFloor = 1e-8;
inline constexpr std::size_t kGradCheckMaxParams = 2000;

// Compares analytic gradients of total_loss against central differences.
// Differences at or below 1e-8 count as exact; otherwise the error is
// |a - n| / max(|a|, |n|). Above 2,000 coefficients a seeded subset is checked.
// `gradient` defaults to total_loss_gradient.
GradCheckReport gradient_check(const ProKanNetwork& net, const SampleSet& samples,
                               const LossConfig& cfg, double lambda, double h, double tolerance,
                               std::uint64_t seed = 0, const GradientFn& gradient = {});

}  // namespace prokan
