#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "prokan/hyperparams.hpp"
#include "prokan/spline.hpp"

namespace prokan {

// in_dim x out_dim grid of spline edges sharing one clamped uniform knot vector.
// Coefficients are stored flat as [p][q][basis] for input p, output q.
class KanLayer {
 public:
  KanLayer(int in_dim, int out_dim, int grid_size, int degree, double domain_min = -1.0,
           double domain_max = 1.0);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  int grid_size() const { return grid_size_; }
  int degree() const { return knots_.degree(); }
  int num_basis() const { return knots_.num_basis(); }
  const KnotVector& knots() const { return knots_; }

  std::span<double> coefficients() { return coefficients_; }
  std::span<const double> coefficients() const { return coefficients_; }
  std::span<double> edge_coefficients(int p, int q);
  std::span<const double> edge_coefficients(int p, int q) const;

  // Copy of edge (p, q) as a standalone spline.
  SplineFunction edge(int p, int q) const;

  std::size_t parameter_count() const { return coefficients_.size(); }

  bool operator==(const KanLayer&) const = default;

 private:
  int in_dim_;
  int out_dim_;
  int grid_size_;
  KnotVector knots_;
  std::vector<double> coefficients_;
};

// y_q = sum_p spline_{p,q}(x_p)
std::vector<double> layer_forward(const KanLayer& layer, std::span<const double> x);

struct LayerGradients {
  std::vector<double> input_grad;
  std::vector<double> coeff_grads;  // same layout as KanLayer::coefficients()
};

LayerGradients layer_backward(const KanLayer& layer, std::span<const double> x,
                              std::span<const double> upstream_grad);

// Accumulating form: coefficient gradients are added into `coeff_grads`,
// `input_grad` is overwritten.
void layer_backward_into(const KanLayer& layer, std::span<const double> x,
                         std::span<const double> upstream_grad, std::span<double> input_grad,
                         std::span<double> coeff_grads);

struct KanBlock {
  std::vector<KanLayer> layers;
  bool residual = false;

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }
  std::size_t parameter_count() const;

  bool operator==(const KanBlock&) const = default;
};

class ProKanNetwork {
 public:
  ProKanNetwork(int input_dim, int hidden_width, std::vector<KanBlock> blocks, KanLayer head);

  int input_dim() const { return input_dim_; }
  int hidden_width() const { return hidden_width_; }
  const std::vector<KanBlock>& blocks() const { return blocks_; }
  std::size_t block_count() const { return blocks_.size(); }
  const KanLayer& head() const { return head_; }

  // All layers in canonical order: block layers front to back, then the head.
  std::vector<const KanLayer*> layers() const;
  std::vector<KanLayer*> layers();
  std::size_t layer_count() const;

  void append_block(KanBlock block);

  bool operator==(const ProKanNetwork&) const = default;

 private:
  void validate() const;

  int input_dim_;
  int hidden_width_;
  std::vector<KanBlock> blocks_;
  KanLayer head_;
};

struct NetworkShape {
  int input_dim = 27;
  int hidden_width = 8;
  double domain_min = -1.0;
  double domain_max = 1.0;
  double init_scale = 0.1;
};

// One non-residual block (input_dim -> hidden -> hidden) plus a hidden -> 1 head,
// coefficients drawn uniformly from [-init_scale, init_scale].
ProKanNetwork make_network(const NetworkShape& shape, const HyperParams& hp, std::mt19937_64& rng);

// Inputs to every layer in canonical order, recorded by network_forward.
struct ForwardCache {
  std::vector<std::vector<double>> layer_inputs;
};

struct ForwardResult {
  double logit = 0.0;
  ForwardCache cache;
};

ForwardResult network_forward(const ProKanNetwork& net, std::span<const double> x);

// Forward pass without keeping the cache.
double network_logit(const ProKanNetwork& net, std::span<const double> x);

// Per-layer coefficient gradients in canonical layer order.
struct GradientSet {
  std::vector<std::vector<double>> layers;
  std::vector<double> input_grad;

  static GradientSet zeros_like(const ProKanNetwork& net);
  void set_zero();
  double max_abs() const;
};

GradientSet network_backward(const ProKanNetwork& net, const ForwardCache& cache,
                             double loss_grad);

// Adds this sample's gradients into `accum` (which must match the net's shape).
void network_backward_into(const ProKanNetwork& net, const ForwardCache& cache,
                           double loss_grad, GradientSet& accum);

// Appends a zero-initialized residual block (hidden -> hidden -> hidden) with
// the grid size and degree of `hp`. The network function is unchanged.
ProKanNetwork insert_block(const ProKanNetwork& net, const HyperParams& hp, int max_blocks);

std::size_t count_parameters(const ProKanNetwork& net);

}  // namespace prokan
