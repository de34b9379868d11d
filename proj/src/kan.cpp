#include "prokan/kan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "prokan/error.hpp"

namespace prokan {

namespace {

constexpr int kMaxBasisScratch = 16;

void check_length(std::size_t got, int expected, const char* what) {
  if (got != static_cast<std::size_t>(expected)) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": expected length " +
                                                   std::to_string(expected) + ", got " +
                                                   std::to_string(got));
  }
}

}  // namespace

KanLayer::KanLayer(int in_dim, int out_dim, int grid_size, int degree, double domain_min,
                   double domain_max)
    : in_dim_(in_dim), out_dim_(out_dim), grid_size_(grid_size),
      knots_(make_uniform_knots(domain_min, domain_max, grid_size, degree)) {
  if (in_dim < 1 || out_dim < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "layer dimensions must be positive");
  }
  coefficients_.assign(static_cast<std::size_t>(in_dim) * out_dim * knots_.num_basis(), 0.0);
}

std::span<double> KanLayer::edge_coefficients(int p, int q) {
  const auto nb = static_cast<std::size_t>(num_basis());
  return std::span<double>(coefficients_).subspan((static_cast<std::size_t>(p) * out_dim_ + q) * nb, nb);
}

std::span<const double> KanLayer::edge_coefficients(int p, int q) const {
  const auto nb = static_cast<std::size_t>(num_basis());
  return std::span<const double>(coefficients_)
      .subspan((static_cast<std::size_t>(p) * out_dim_ + q) * nb, nb);
}

SplineFunction KanLayer::edge(int p, int q) const {
  if (p < 0 || p >= in_dim_ || q < 0 || q >= out_dim_) {
    throw Error(ErrorCode::kIndexOutOfRange, "edge index out of range");
  }
  auto c = edge_coefficients(p, q);
  return SplineFunction(knots_, std::vector<double>(c.begin(), c.end()));
}

std::vector<double> layer_forward(const KanLayer& layer, std::span<const double> x) {
  check_length(x.size(), layer.in_dim(), "layer_forward");
  const int out = layer.out_dim();
  const int nb = layer.num_basis();
  const int order = layer.degree() + 1;
  const auto& kv = layer.knots();
  const auto coef = layer.coefficients();

  std::vector<double> y(static_cast<std::size_t>(out), 0.0);
  std::array<double, kMaxBasisScratch> basis{};
  for (int p = 0; p < layer.in_dim(); ++p) {
    const int first = nonzero_basis(kv, clamp_to_domain(kv, x[p]), basis);
    const double* row = coef.data() + static_cast<std::size_t>(p) * out * nb + first;
    for (int q = 0; q < out; ++q) {
      const double* c = row + static_cast<std::size_t>(q) * nb;
      double v = 0.0;
      for (int j = 0; j < order; ++j) v += c[j] * basis[j];
      y[q] += v;
    }
  }
  return y;
}

void layer_backward_into(const KanLayer& layer, std::span<const double> x,
                         std::span<const double> upstream_grad, std::span<double> input_grad,
                         std::span<double> coeff_grads) {
  check_length(x.size(), layer.in_dim(), "layer_backward input");
  check_length(upstream_grad.size(), layer.out_dim(), "layer_backward upstream");
  check_length(input_grad.size(), layer.in_dim(), "layer_backward input_grad");
  if (coeff_grads.size() != layer.parameter_count()) {
    throw Error(ErrorCode::kShapeMismatch, "coefficient gradient buffer has wrong size");
  }
  const int out = layer.out_dim();
  const int nb = layer.num_basis();
  const int order = layer.degree() + 1;
  const auto& kv = layer.knots();
  const auto coef = layer.coefficients();

  std::array<double, kMaxBasisScratch> basis{};
  std::array<double, kMaxBasisScratch> derivs{};
  for (int p = 0; p < layer.in_dim(); ++p) {
    const double xp = x[p];
    // The clamp is flat outside the domain, so no gradient flows to the input there.
    const bool inside = xp >= kv.domain_min() && xp <= kv.domain_max();
    const int first = nonzero_basis(kv, clamp_to_domain(kv, xp), basis, derivs);
    const std::size_t row = static_cast<std::size_t>(p) * out * nb + first;
    double g_in = 0.0;
    for (int q = 0; q < out; ++q) {
      const double g = upstream_grad[q];
      const std::size_t off = row + static_cast<std::size_t>(q) * nb;
      double slope = 0.0;
      for (int j = 0; j < order; ++j) {
        coeff_grads[off + j] += g * basis[j];
        slope += coef[off + j] * derivs[j];
      }
      g_in += g * slope;
    }
    input_grad[p] = (inside && layer.degree() > 0) ? g_in : 0.0;
  }
}

LayerGradients layer_backward(const KanLayer& layer, std::span<const double> x,
                              std::span<const double> upstream_grad) {
  LayerGradients grads;
  grads.input_grad.assign(static_cast<std::size_t>(layer.in_dim()), 0.0);
  grads.coeff_grads.assign(layer.parameter_count(), 0.0);
  layer_backward_into(layer, x, upstream_grad, grads.input_grad, grads.coeff_grads);
  return grads;
}

std::size_t KanBlock::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

ProKanNetwork::ProKanNetwork(int input_dim, int hidden_width, std::vector<KanBlock> blocks,
                             KanLayer head)
    : input_dim_(input_dim), hidden_width_(hidden_width), blocks_(std::move(blocks)),
      head_(std::move(head)) {
  validate();
}

void ProKanNetwork::validate() const {
  if (input_dim_ < 1 || hidden_width_ < 1) {
    throw Error(ErrorCode::kDimensionMismatch, "network dimensions must be positive");
  }
  if (blocks_.empty()) throw Error(ErrorCode::kDimensionMismatch, "network needs >= 1 block");
  int width = input_dim_;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& block = blocks_[b];
    if (block.layers.empty()) throw Error(ErrorCode::kDimensionMismatch, "empty block");
    for (const auto& layer : block.layers) {
      if (layer.in_dim() != width) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "layer dimensions do not chain in block " + std::to_string(b));
      }
      width = layer.out_dim();
    }
    if (block.residual && (block.in_dim() != hidden_width_ || block.out_dim() != hidden_width_)) {
      throw Error(ErrorCode::kDimensionMismatch, "residual block must preserve hidden width");
    }
  }
  if (width != hidden_width_) {
    throw Error(ErrorCode::kDimensionMismatch, "last block must output hidden width");
  }
  if (head_.in_dim() != hidden_width_ || head_.out_dim() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "output head must map hidden width to 1");
  }
}

std::vector<const KanLayer*> ProKanNetwork::layers() const {
  std::vector<const KanLayer*> out;
  for (const auto& b : blocks_)
    for (const auto& l : b.layers) out.push_back(&l);
  out.push_back(&head_);
  return out;
}

std::vector<KanLayer*> ProKanNetwork::layers() {
  std::vector<KanLayer*> out;
  for (auto& b : blocks_)
    for (auto& l : b.layers) out.push_back(&l);
  out.push_back(&head_);
  return out;
}

std::size_t ProKanNetwork::layer_count() const {
  std::size_t n = 1;
  for (const auto& b : blocks_) n += b.layers.size();
  return n;
}

void ProKanNetwork::append_block(KanBlock block) {
  blocks_.push_back(std::move(block));
  try {
    validate();
  } catch (...) {
    blocks_.pop_back();
    throw;
  }
}

ProKanNetwork make_network(const NetworkShape& shape, const HyperParams& hp,
                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> init(-shape.init_scale, shape.init_scale);
  auto random_layer = [&](int in, int out) {
    KanLayer layer(in, out, hp.grid_size, hp.degree, shape.domain_min, shape.domain_max);
    for (double& c : layer.coefficients()) c = init(rng);
    return layer;
  };
  KanBlock first;
  first.residual = false;
  first.layers.push_back(random_layer(shape.input_dim, shape.hidden_width));
  first.layers.push_back(random_layer(shape.hidden_width, shape.hidden_width));
  KanLayer head = random_layer(shape.hidden_width, 1);
  std::vector<KanBlock> blocks;
  blocks.push_back(std::move(first));
  return ProKanNetwork(shape.input_dim, shape.hidden_width, std::move(blocks), std::move(head));
}

ForwardResult network_forward(const ProKanNetwork& net, std::span<const double> x) {
  check_length(x.size(), net.input_dim(), "network_forward");
  ForwardResult result;
  auto& inputs = result.cache.layer_inputs;
  inputs.reserve(net.layer_count());

  std::vector<double> h(x.begin(), x.end());
  for (const auto& block : net.blocks()) {
    std::vector<double> block_in = h;
    for (const auto& layer : block.layers) {
      inputs.push_back(h);
      h = layer_forward(layer, h);
    }
    if (block.residual) {
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += block_in[i];
    }
  }
  inputs.push_back(h);
  result.logit = layer_forward(net.head(), h)[0];
  return result;
}

double network_logit(const ProKanNetwork& net, std::span<const double> x) {
  check_length(x.size(), net.input_dim(), "network_logit");
  std::vector<double> h(x.begin(), x.end());
  for (const auto& block : net.blocks()) {
    std::vector<double> next = h;
    for (const auto& layer : block.layers) next = layer_forward(layer, next);
    if (block.residual) {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] += h[i];
    }
    h = std::move(next);
  }
  return layer_forward(net.head(), h)[0];
}

GradientSet GradientSet::zeros_like(const ProKanNetwork& net) {
  GradientSet g;
  for (const KanLayer* layer : net.layers()) g.layers.emplace_back(layer->parameter_count(), 0.0);
  g.input_grad.assign(static_cast<std::size_t>(net.input_dim()), 0.0);
  return g;
}

void GradientSet::set_zero() {
  for (auto& l : layers) std::fill(l.begin(), l.end(), 0.0);
  std::fill(input_grad.begin(), input_grad.end(), 0.0);
}

double GradientSet::max_abs() const {
  double m = 0.0;
  for (const auto& l : layers)
    for (double v : l) m = std::max(m, std::abs(v));
  return m;
}

void network_backward_into(const ProKanNetwork& net, const ForwardCache& cache, double loss_grad,
                           GradientSet& accum) {
  const auto layers = net.layers();
  if (cache.layer_inputs.size() != layers.size() || accum.layers.size() != layers.size()) {
    throw Error(ErrorCode::kStaleCache, "cache does not match network depth");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (cache.layer_inputs[l].size() != static_cast<std::size_t>(layers[l]->in_dim())) {
      throw Error(ErrorCode::kStaleCache, "cached activation shape disagrees with layer " +
                                              std::to_string(l));
    }
  }

  std::size_t l = layers.size() - 1;
  std::vector<double> upstream{loss_grad};
  std::vector<double> down(static_cast<std::size_t>(net.hidden_width()));
  layer_backward_into(net.head(), cache.layer_inputs[l], upstream, down, accum.layers[l]);
  upstream.swap(down);

  for (auto b = net.blocks().size(); b-- > 0;) {
    const auto& block = net.blocks()[b];
    const std::vector<double> block_grad_out = upstream;
    for (auto i = block.layers.size(); i-- > 0;) {
      --l;
      const auto& layer = block.layers[i];
      down.assign(static_cast<std::size_t>(layer.in_dim()), 0.0);
      layer_backward_into(layer, cache.layer_inputs[l], upstream, down, accum.layers[l]);
      upstream.swap(down);
    }
    if (block.residual) {
      for (std::size_t i = 0; i < upstream.size(); ++i) upstream[i] += block_grad_out[i];
    }
  }
  accum.input_grad.resize(upstream.size());
  for (std::size_t i = 0; i < upstream.size(); ++i) accum.input_grad[i] += upstream[i];
}

GradientSet network_backward(const ProKanNetwork& net, const ForwardCache& cache,
                             double loss_grad) {
  GradientSet g = GradientSet::zeros_like(net);
  network_backward_into(net, cache, loss_grad, g);
  return g;
}

ProKanNetwork insert_block(const ProKanNetwork& net, const HyperParams& hp, int max_blocks) {
  if (static_cast<int>(net.block_count()) >= max_blocks) {
    throw Error(ErrorCode::kMaxBlocksExceeded,
                "network already has " + std::to_string(net.block_count()) + " of " +
                    std::to_string(max_blocks) + " blocks");
  }
  const auto& kv = net.head().knots();
  const int w = net.hidden_width();
  KanBlock block;
  block.residual = true;
  block.layers.emplace_back(w, w, hp.grid_size, hp.degree, kv.domain_min(), kv.domain_max());
  block.layers.emplace_back(w, w, hp.grid_size, hp.degree, kv.domain_min(), kv.domain_max());
  ProKanNetwork grown = net;
  grown.append_block(std::move(block));
  return grown;
}

std::size_t count_parameters(const ProKanNetwork& net) {
  std::size_t n = net.head().parameter_count();
  for (const auto& b : net.blocks()) n += b.parameter_count();
  return n;
}

}  // namespace prokan
