#include "prokan/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prokan/error.hpp"

namespace prokan {

namespace {

void check_same_length(std::size_t a, std::size_t b) {
  if (a != b) {
    throw Error(ErrorCode::kLengthMismatch,
                "lengths differ: " + std::to_string(a) + " vs " + std::to_string(b));
  }
  if (a == 0) throw Error(ErrorCode::kLengthMismatch, "empty input");
}

}  // namespace

void LossConfig::validate() const {
  if (bce_weight < 0.0 || dice_weight < 0.0 || !(bce_weight + dice_weight > 0.0)) {
    throw Error(ErrorCode::kConfigError, "loss weights must be >= 0 with a positive sum");
  }
  if (!(smooth_eps > 0.0)) throw Error(ErrorCode::kConfigError, "smooth_eps must be > 0");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double soft_dice_loss(std::span<const double> probs, std::span<const double> targets,
                      double smooth_eps) {
  check_same_length(probs.size(), targets.size());
  double inter = 0.0;
  double sum_p = 0.0;
  double sum_t = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    inter += probs[i] * targets[i];
    sum_p += probs[i];
    sum_t += targets[i];
  }
  return 1.0 - (2.0 * inter + smooth_eps) / (sum_p + sum_t + smooth_eps);
}

double bce_loss(std::span<const double> probs, std::span<const double> targets) {
  check_same_length(probs.size(), targets.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClip, 1.0 - kProbClip);
    sum -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(probs.size());
}

BatchLoss compound_loss(std::span<const double> logits, std::span<const double> targets,
                        const LossConfig& cfg) {
  check_same_length(logits.size(), targets.size());
  const std::size_t n = logits.size();
  std::vector<double> probs(n);
  std::transform(logits.begin(), logits.end(), probs.begin(), sigmoid);

  BatchLoss out;
  out.logit_grads.assign(n, 0.0);
  if (cfg.bce_weight > 0.0) {
    out.value += cfg.bce_weight * bce_loss(probs, targets);
    const double scale = cfg.bce_weight / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double p = probs[i];
      // Clipped probabilities are constant in the logit.
      if (p > kProbClip && p < 1.0 - kProbClip) out.logit_grads[i] += scale * (p - targets[i]);
    }
  }
  if (cfg.dice_weight > 0.0) {
    double inter = 0.0;
    double sum_p = 0.0;
    double sum_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      inter += probs[i] * targets[i];
      sum_p += probs[i];
      sum_t += targets[i];
    }
    const double num = 2.0 * inter + cfg.smooth_eps;
    const double den = sum_p + sum_t + cfg.smooth_eps;
    out.value += cfg.dice_weight * (1.0 - num / den);
    for (std::size_t i = 0; i < n; ++i) {
      const double d_prob = -(2.0 * targets[i] * den - num) / (den * den);
      out.logit_grads[i] += cfg.dice_weight * d_prob * probs[i] * (1.0 - probs[i]);
    }
  }
  return out;
}

double l2_penalty(const ProKanNetwork& net, double lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (const KanLayer* layer : net.layers())
    for (double c : layer->coefficients()) sum += c * c;
  return lambda * sum;
}

void SampleSet::append(std::span<const double> x, double label) {
  if (dim == 0 && empty()) dim = static_cast<int>(x.size());
  if (x.size() != static_cast<std::size_t>(dim)) {
    throw Error(ErrorCode::kDimensionMismatch, "sample feature length differs from set");
  }
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(label);
}

SampleSet SampleSet::subset(std::span<const std::size_t> indices) const {
  SampleSet out;
  out.dim = dim;
  for (std::size_t i : indices) out.append(row(i), labels[i]);
  return out;
}

OptimizerState OptimizerState::for_network(const ProKanNetwork& net, double learning_rate,
                                           double momentum, double l2_lambda) {
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0 && momentum < 1.0) || !(l2_lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "optimizer settings out of range");
  }
  OptimizerState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.l2_lambda = l2_lambda;
  for (const KanLayer* layer : net.layers()) s.velocity.emplace_back(layer->parameter_count(), 0.0);
  return s;
}

void OptimizerState::grow_to(const ProKanNetwork& net) {
  const auto layers = net.layers();
  if (velocity.empty() || layers.size() < velocity.size()) {
    throw Error(ErrorCode::kShapeMismatch, "optimizer state cannot shrink");
  }
  std::vector<double> head = std::move(velocity.back());
  velocity.pop_back();
  for (std::size_t l = velocity.size(); l + 1 < layers.size(); ++l) {
    velocity.emplace_back(layers[l]->parameter_count(), 0.0);
  }
  velocity.push_back(std::move(head));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (velocity[l].size() != layers[l]->parameter_count()) {
      throw Error(ErrorCode::kShapeMismatch, "velocity buffer does not match layer " +
                                                 std::to_string(l));
    }
  }
}

void sgd_momentum_step(OptimizerState& state, ProKanNetwork& net, const GradientSet& grads) {
  auto layers = net.layers();
  if (grads.layers.size() != layers.size() || state.velocity.size() != layers.size()) {
    throw Error(ErrorCode::kShapeMismatch, "gradient/velocity layer count mismatch");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto params = layers[l]->coefficients();
    auto& v = state.velocity[l];
    const auto& g = grads.layers[l];
    if (g.size() != params.size() || v.size() != params.size()) {
      throw Error(ErrorCode::kShapeMismatch, "shape mismatch in layer " + std::to_string(l));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      v[i] = state.momentum * v[i] + g[i] + 2.0 * state.l2_lambda * params[i];
      params[i] -= state.learning_rate * v[i];
    }
  }
}

double accumulate_batch_gradient(const ProKanNetwork& net, const SampleSet& samples,
                                 std::span<const std::size_t> batch, const LossConfig& cfg,
                                 GradientSet& grads) {
  std::vector<ForwardCache> caches;
  caches.reserve(batch.size());
  std::vector<double> logits;
  std::vector<double> targets;
  logits.reserve(batch.size());
  targets.reserve(batch.size());
  for (std::size_t idx : batch) {
    auto fwd = network_forward(net, samples.row(idx));
    logits.push_back(fwd.logit);
    targets.push_back(samples.labels[idx]);
    caches.push_back(std::move(fwd.cache));
  }
  const BatchLoss loss = compound_loss(logits, targets, cfg);
  // Ordered summation keeps the reduction deterministic.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    network_backward_into(net, caches[i], loss.logit_grads[i], grads);
  }
  return loss.value;
}

double total_loss(const ProKanNetwork& net, const SampleSet& samples, const LossConfig& cfg,
                  double lambda) {
  std::vector<double> logits;
  logits.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) logits.push_back(network_logit(net, samples.row(i)));
  return compound_loss(logits, samples.labels, cfg).value + l2_penalty(net, lambda);
}

GradientSet total_loss_gradient(const ProKanNetwork& net, const SampleSet& samples,
                                const LossConfig& cfg, double lambda) {
  GradientSet grads = GradientSet::zeros_like(net);
  std::vector<std::size_t> all(samples.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  accumulate_batch_gradient(net, samples, all, cfg, grads);
  const auto layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto c = layers[l]->coefficients();
    for (std::size_t i = 0; i < c.size(); ++i) grads.layers[l][i] += 2.0 * lambda * c[i];
  }
  return grads;
}

double train_epoch(ProKanNetwork& net, const SampleSet& data, const LossConfig& cfg,
                   OptimizerState& opt, int batch_size, std::mt19937_64& rng) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "training split has no samples");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  GradientSet grads = GradientSet::zeros_like(net);
  double loss_sum = 0.0;
  std::size_t batches = 0;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(order.size(), start + bs);
    std::span<const std::size_t> batch(order.data() + start, end - start);
    grads.set_zero();
    const double data_loss = accumulate_batch_gradient(net, data, batch, cfg, grads);
    loss_sum += data_loss + l2_penalty(net, opt.l2_lambda);
    ++batches;
    sgd_momentum_step(opt, net, grads);
  }
  return loss_sum / static_cast<double>(batches);
}

double evaluate_loss(const ProKanNetwork& net, const SampleSet& data, const LossConfig& cfg,
                     double lambda, int batch_size) {
  if (data.empty()) throw Error(ErrorCode::kEmptyDataset, "evaluation split has no samples");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  const double penalty = l2_penalty(net, lambda);
  std::vector<double> logits;
  std::vector<double> targets;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < data.size(); start += bs) {
    const std::size_t end = std::min(data.size(), start + bs);
    logits.clear();
    targets.clear();
    for (std::size_t i = start; i < end; ++i) {
      logits.push_back(network_logit(net, data.row(i)));
      targets.push_back(data.labels[i]);
    }
    loss_sum += compound_loss(logits, targets, cfg).value + penalty;
    ++batches;
  }
  return loss_sum / static_cast<double>(batches);
}

GradCheckReport gradient_check(const ProKanNetwork& net, const SampleSet& samples,
                               const LossConfig& cfg, double lambda, double h, double tolerance,
                               std::uint64_t seed, const GradientFn& gradient) {
  if (!(h > 0.0 && h <= 1e-3)) throw Error(ErrorCode::kInvalidArgument, "h must be in (0, 1e-3]");
  if (samples.empty()) throw Error(ErrorCode::kEmptyDataset, "gradient check needs samples");

  const GradientSet analytic =
      gradient ? gradient(net, samples, cfg, lambda) : total_loss_gradient(net, samples, cfg, lambda);

  std::vector<ParameterIndex> targets;
  {
    const auto layers = net.layers();
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (std::size_t i = 0; i < layers[l]->parameter_count(); ++i) targets.push_back({l, i});
  }
  if (targets.size() > kGradCheckMaxParams) {
    std::mt19937_64 rng(seed);
    std::shuffle(targets.begin(), targets.end(), rng);
    targets.resize(kGradCheckMaxParams);
  }

  GradCheckReport report;
  ProKanNetwork probe = net;
  auto probe_layers = probe.layers();
  for (const auto& idx : targets) {
    double& c = probe_layers[idx.layer]->coefficients()[idx.coefficient];
    const double saved = c;
    c = saved + h;
    const double up = total_loss(probe, samples, cfg, lambda);
    c = saved - h;
    const double down = total_loss(probe, samples, cfg, lambda);
    c = saved;

    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.layers.at(idx.layer).at(idx.coefficient);
    const double diff = std::abs(a - numeric);
    report.max_abs_difference = std::max(report.max_abs_difference, diff);
    const double err =
        diff <= kGradCheckAbsFloor ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
    ++report.checked;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      if (err >= tolerance) report.offending = idx;
    }
  }
  report.passed = report.max_relative_error < tolerance;
  return report;
}

}  // namespace prokan
