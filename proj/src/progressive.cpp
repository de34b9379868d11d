#include "prokan/progressive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prokan/error.hpp"
#include "prokan/rng.hpp"

namespace prokan {

void TrainingHistory::append(double train, double val, double accuracy) {
  train_loss.push_back(train);
  val_loss.push_back(val);
  val_accuracy.push_back(accuracy);
}

void StackingPolicy::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfigError, msg); };
  if (!(epsilon > 0.0)) fail("epsilon must be > 0");
  if (t_plateau < 2) fail("t_plateau must be >= 2");
  if (decline_window < 1) fail("decline_window must be >= 1");
  if (cooldown < 1) fail("cooldown must be >= 1");
  if (max_blocks < 1) fail("max_blocks must be >= 1");
  if (max_epochs < 1) fail("max_epochs must be >= 1");
  if (base.grid_size < 1) fail("grid_size must be >= 1");
  if (base.degree < 0) fail("degree must be >= 0");
  if (!(base.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(base.l2_lambda >= 0.0)) fail("l2_lambda must be >= 0");
  if (delta_grid < 0) fail("delta_grid must be >= 0");
  if (delta_degree < 0) fail("delta_degree must be >= 0");
  if (!(lr_decay >= 0.0)) fail("lr_decay must be >= 0");
  if (!(delta_lambda >= 0.0)) fail("delta_lambda must be >= 0");
  if (base.degree + max_blocks * delta_degree > kMaxDegree) {
    fail("degree schedule would exceed " + std::to_string(kMaxDegree));
  }
}

bool detect_plateau(const TrainingHistory& history, int t_plateau, double epsilon) {
  if (t_plateau < 1) return false;
  const auto& v = history.val_loss;
  const auto t = static_cast<std::size_t>(t_plateau);
  if (v.size() < t + 1) return false;
  const std::size_t start = v.size() - t - 1;
  double sum = 0.0;
  for (std::size_t i = start + 1; i < v.size(); ++i) sum += v[i];
  return std::abs(sum / static_cast<double>(t) - v[start]) < epsilon;
}

namespace {
constexpr double kFlatSlopeTolerance = 1e-12;
}  // namespace

bool detect_accuracy_decline(const TrainingHistory& history, int decline_window) {
  if (decline_window < 1) return false;
  const auto& a = history.val_accuracy;
  const auto w = static_cast<std::size_t>(decline_window);
  if (a.size() < w + 1) return false;
  const std::size_t start = a.size() - w - 1;

  // Least-squares slope numerator over x = 0..w, folded around the mean of x
  // so that a flat series gives exactly zero.
  const double x_mean = static_cast<double>(w) / 2.0;
  double numerator = 0.0;
  for (std::size_t i = 0; i < (w + 1) / 2; ++i) {
    numerator += (static_cast<double>(i) - x_mean) * (a[start + i] - a[start + w - i]);
  }
  // Accuracies live in [0, 1]; anything this small is rounding on a flat series.
  if (!(numerator < -kFlatSlopeTolerance)) return false;

  const auto peak = std::max_element(a.begin(), a.end());
  return static_cast<std::size_t>(peak - a.begin()) <= start;
}

bool should_add_block(const TrainingHistory& history, const StackingPolicy& policy,
                      int blocks_now, std::optional<int> last_insertion_epoch) {
  if (history.epochs() == 0) return false;
  if (blocks_now >= policy.max_blocks) return false;
  const int current_epoch = static_cast<int>(history.epochs());
  if (last_insertion_epoch && current_epoch - *last_insertion_epoch < policy.cooldown) return false;
  if (!(history.train_loss.back() < history.val_loss.back())) return false;
  return detect_plateau(history, policy.t_plateau, policy.epsilon) ||
         detect_accuracy_decline(history, policy.decline_window);
}

HyperParams next_hyperparameters(const HyperParams& current, const StackingPolicy& policy) {
  HyperParams next;
  next.block_index = current.block_index + 1;
  next.grid_size = current.grid_size + policy.delta_grid;
  next.degree = current.degree + policy.delta_degree;
  next.learning_rate = current.learning_rate / (1.0 + policy.lr_decay * next.block_index);
  next.l2_lambda = current.l2_lambda + policy.delta_lambda;
  return next;
}

ProgressiveResult run_progressive_training(const TrainingData& data, const StackingPolicy& policy,
                                           const LossConfig& loss, const TrainerSettings& settings,
                                           std::uint64_t seed, const TrainingObserver& observer) {
  policy.validate();
  loss.validate();
  if (data.train.empty() || data.val.empty() || data.val_cases.empty()) {
    throw Error(ErrorCode::kEmptySplit, "training and validation splits must be non-empty");
  }

  HyperParams hp = policy.base;
  hp.block_index = 0;
  auto init_rng = make_rng(seed, RngStream::kInit);
  auto shuffle_rng = make_rng(seed, RngStream::kShuffle);

  ProKanNetwork net = make_network(settings.shape, hp, init_rng);
  OptimizerState opt = OptimizerState::for_network(net, hp.learning_rate, settings.momentum,
                                                   hp.l2_lambda);

  TrainingHistory history;
  std::vector<EpochRecord> records;
  std::vector<InsertionEvent> events;
  std::optional<ProKanNetwork> best;
  int best_epoch = 0;
  double best_dice = -1.0;
  std::optional<int> last_insertion;
  int plateau_streak = 0;
  bool early_stopped = false;

  for (int epoch = 1; epoch <= policy.max_epochs; ++epoch) {
    const double train_loss =
        train_epoch(net, data.train, loss, opt, settings.batch_size, shuffle_rng);
    const double val_loss = evaluate_loss(net, data.val, loss, opt.l2_lambda, settings.batch_size);
    const EvalSummary summary = evaluate_cases(net, data.val_cases);
    history.append(train_loss, val_loss, summary.accuracy);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.val_loss = val_loss;
    rec.val_accuracy = summary.accuracy;
    rec.val_dice = summary.mean_dice;
    rec.block_count = static_cast<int>(net.block_count());
    rec.hp = hp;
    records.push_back(rec);
    if (observer.on_epoch) observer.on_epoch(rec);

    if (summary.mean_dice > best_dice) {
      best_dice = summary.mean_dice;
      best_epoch = epoch;
      best = net;
    }

    if (should_add_block(history, policy, static_cast<int>(net.block_count()), last_insertion)) {
      InsertionEvent ev;
      ev.epoch = epoch;
      ev.val_loss_before = val_loss;
      hp = next_hyperparameters(hp, policy);
      net = insert_block(net, hp, policy.max_blocks);
      ev.val_loss_after = evaluate_loss(net, data.val, loss, opt.l2_lambda, settings.batch_size);
      opt.grow_to(net);
      opt.learning_rate = hp.learning_rate;
      opt.l2_lambda = hp.l2_lambda;
      ev.new_block_index = static_cast<int>(net.block_count()) - 1;
      ev.hp = hp;
      last_insertion = epoch;
      history.insertion_epochs.push_back(epoch);
      events.push_back(ev);
      if (observer.on_insertion) observer.on_insertion(ev);
      plateau_streak = 0;
      continue;
    }

    if (static_cast<int>(net.block_count()) >= policy.max_blocks) {
      plateau_streak = detect_plateau(history, policy.t_plateau, policy.epsilon) ? plateau_streak + 1 : 0;
      if (plateau_streak >= 2 * policy.t_plateau) {
        early_stopped = true;
        break;
      }
    }
  }

  ProgressiveResult result{std::move(net),  std::move(*best),   best_epoch,
                           best_dice,       std::move(history), std::move(records),
                           std::move(events), early_stopped};
  return result;
}

}  // namespace prokan
