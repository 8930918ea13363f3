#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/rng.hpp"
#include "ams/types.hpp"

namespace ams::nn {

// Trainable parameters of one branch backbone: a hidden linear layer with
// ReLU/dropout followed by a linear CAS head with per-element sigmoid.
struct BranchParams {
  Matrix transform_weights;             // D x D'
  std::vector<double> transform_bias;   // D'
  Matrix cas_weights;                   // D' x C
  std::vector<double> cas_bias;         // C

  std::size_t input_dim() const { return transform_weights.rows(); }
  std::size_t hidden_dim() const { return transform_weights.cols(); }
  std::size_t num_classes() const { return cas_weights.cols(); }

  std::size_t param_count() const {
    return transform_weights.size() + transform_bias.size() + cas_weights.size() +
           cas_bias.size();
  }

  static BranchParams zeros(std::size_t d, std::size_t hidden, std::size_t c) {
    BranchParams p;
    p.transform_weights = Matrix(d, hidden);
    p.transform_bias.assign(hidden, 0.0);
    p.cas_weights = Matrix(hidden, c);
    p.cas_bias.assign(c, 0.0);
    return p;
  }

  // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static BranchParams init(std::size_t d, std::size_t hidden, std::size_t c, Rng& rng) {
    BranchParams p = zeros(d, hidden, c);
    const double b1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& w : p.transform_weights.storage()) w = rng.uniform(-b1, b1);
    for (double& w : p.transform_bias) w = rng.uniform(-b1, b1);
    const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : p.cas_weights.storage()) w = rng.uniform(-b2, b2);
    for (double& w : p.cas_bias) w = rng.uniform(-b2, b2);
    return p;
  }

  bool same_shape(const BranchParams& o) const {
    return transform_weights.same_shape(o.transform_weights) &&
           transform_bias.size() == o.transform_bias.size() &&
           cas_weights.same_shape(o.cas_weights) && cas_bias.size() == o.cas_bias.size();
  }

  bool operator==(const BranchParams& o) const {
    return transform_weights == o.transform_weights && transform_bias == o.transform_bias &&
           cas_weights == o.cas_weights && cas_bias == o.cas_bias;
  }

  // Visits every parameter in a fixed order; F is invoked with double&.
  template <typename F>
  void for_each(F&& f) {
    for (double& w : transform_weights.storage()) f(w);
    for (double& w : transform_bias) f(w);
    for (double& w : cas_weights.storage()) f(w);
    for (double& w : cas_bias) f(w);
  }

  template <typename F>
  void for_each(F&& f) const {
    for (const double& w : transform_weights.storage()) f(w);
    for (const double& w : transform_bias) f(w);
    for (const double& w : cas_weights.storage()) f(w);
    for (const double& w : cas_bias) f(w);
  }
};

// Applies f(param, other_param) pairwise over two identically shaped parameter sets.
template <typename F>
void zip_params(BranchParams& a, const BranchParams& b, F&& f) {
  if (!a.same_shape(b)) throw ValidationError("zip_params: shape mismatch");
  auto& aw = a.transform_weights.storage();
  const auto& bw = b.transform_weights.storage();
  for (std::size_t i = 0; i < aw.size(); ++i) f(aw[i], bw[i]);
  for (std::size_t i = 0; i < a.transform_bias.size(); ++i)
    f(a.transform_bias[i], b.transform_bias[i]);
  auto& ac = a.cas_weights.storage();
  const auto& bc = b.cas_weights.storage();
  for (std::size_t i = 0; i < ac.size(); ++i) f(ac[i], bc[i]);
  for (std::size_t i = 0; i < a.cas_bias.size(); ++i) f(a.cas_bias[i], b.cas_bias[i]);
}

struct AdamState {
  BranchParams first_moment;
  BranchParams second_moment;
  std::int64_t step_count = 0;

  static AdamState zeros_like(const BranchParams& p) {
    AdamState s;
    s.first_moment = BranchParams::zeros(p.input_dim(), p.hidden_dim(), p.num_classes());
    s.second_moment = BranchParams::zeros(p.input_dim(), p.hidden_dim(), p.num_classes());
    return s;
  }
};

enum class SamplingMode { adaptive, uniform, random, erase };
enum class AggregationMode { maximum, average, random };
enum class SamplingStrategy { deterministic, stochastic };

struct Hyperparams {
  double lambda_balance = 1.0;   // lambda
  double beta_fusion = 0.15;     // beta
  double eta_sampling = 0.75;    // eta
  std::size_t interp_factor = 20;  // H
  double theta_cls = 0.25;
  double theta_loc_factor = 0.7;
  std::size_t T = 100;
  std::size_t D = 16;
  std::size_t hidden_dim = 64;  // D'
  std::size_t C = 4;
  std::size_t topk_divisor = 8;
  double dropout_rate = 0.5;
  // The paper trains at 1e-4 on I3D-scale data; the desk-scale default is
  // larger so the bundled synthetic benchmark converges in the same epoch
  // budget.
  double learning_rate = 2.4e-3;
  std::size_t phase0_epochs = 20;
  std::size_t phase_epochs = 5;
  std::size_t num_iterations = 3;
  std::uint64_t seed = 0;

  std::size_t topk() const {
    return std::max<std::size_t>(1, T / topk_divisor);
  }

  void validate() const {
    require(eta_sampling > 0.0, "hyperparams: eta_sampling must be > 0");
    require(interp_factor >= 1, "hyperparams: interp_factor must be >= 1");
    require(theta_cls > 0.0 && theta_cls < 1.0, "hyperparams: theta_cls must be in (0,1)");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0,
            "hyperparams: dropout_rate must be in [0,1)");
    require(T >= 1 && D >= 1 && hidden_dim >= 1 && C >= 1, "hyperparams: dims must be positive");
    require(topk_divisor >= 1, "hyperparams: topk_divisor must be positive");
    require(learning_rate > 0.0, "hyperparams: learning_rate must be positive");
  }
};

// Binary mask over the D' hidden units; present only in training mode.
using DropoutMask = std::vector<std::uint8_t>;

inline DropoutMask draw_dropout_mask(std::size_t hidden, double rate, Rng& rng) {
  DropoutMask m(hidden);
  for (auto& b : m) b = rng.uniform01() >= rate ? 1 : 0;
  return m;
}

// Indices of the k largest entries per class channel, ties broken toward the
// earlier snippet. The same selection is used by the forward aggregation and
// by the gradient routing so the two always agree.
inline std::vector<std::vector<std::size_t>> topk_indices(const Cas& cas, std::size_t k) {
  require(k >= 1 && k <= cas.rows(), "topk: k out of range");
  const std::size_t t_len = cas.rows(), c_len = cas.cols();
  std::vector<std::vector<std::size_t>> sel(c_len);
  std::vector<std::size_t> order(t_len);
  for (std::size_t c = 0; c < c_len; ++c) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return cas(a, c) > cas(b, c); });
    sel[c].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return sel;
}

inline std::vector<double> topk_mean_aggregate(const Cas& cas, std::size_t k) {
  const auto sel = topk_indices(cas, k);
  std::vector<double> out(cas.cols());
  for (std::size_t c = 0; c < cas.cols(); ++c) {
    double s = 0.0;
    for (std::size_t t : sel[c]) s += cas(t, c);
    out[c] = s / static_cast<double>(k);
  }
  return out;
}

// Converts a gradient w.r.t. the top-k aggregated category probabilities into
// a gradient w.r.t. the CAS: each class channel routes d/k to its k selected
// snippets only.
inline Matrix route_topk_grad(const Cas& cas, std::size_t k,
                              const std::vector<double>& prob_grads) {
  require(prob_grads.size() == cas.cols(), "route_topk_grad: class count mismatch");
  Matrix out(cas.rows(), cas.cols());
  const auto sel = topk_indices(cas, k);
  for (std::size_t c = 0; c < cas.cols(); ++c)
    for (std::size_t t : sel[c]) out(t, c) += prob_grads[c] / static_cast<double>(k);
  return out;
}

struct ForwardResult {
  Cas cas;                            // T x C, entries in (0,1)
  std::vector<double> category_probs; // C
};

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Shared by forward and backward so both see identical intermediates.
inline void run_hidden(const FeatureSequence& features, const BranchParams& params,
                       const std::optional<DropoutMask>& mask, double dropout_rate,
                       Matrix& hidden_pre, Matrix& hidden) {
  const std::size_t t_len = features.rows(), d = features.cols(), h = params.hidden_dim();
  require_shape(params.transform_weights, d, h, "backbone: transform_weights");
  require(params.transform_bias.size() == h, "backbone: transform_bias size");
  require_shape(params.cas_weights, h, params.num_classes(), "backbone: cas_weights");
  require(params.cas_bias.size() == params.num_classes(), "backbone: cas_bias size");
  require_finite(features, "backbone: features");
  if (mask && mask->size() != h) throw ContractError("backbone: dropout mask size mismatch");

  hidden_pre = Matrix(t_len, h);
  hidden = Matrix(t_len, h);
  const double keep_scale = mask ? 1.0 / (1.0 - dropout_rate) : 1.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < h; ++j) {
      double z = params.transform_bias[j];
      for (std::size_t i = 0; i < d; ++i) z += features(t, i) * params.transform_weights(i, j);
      hidden_pre(t, j) = z;
      double a = z > 0.0 ? z : 0.0;
      if (mask) a = (*mask)[j] ? a * keep_scale : 0.0;
      hidden(t, j) = a;
    }
  }
}

}  // namespace detail

// Backbone network h(.): hidden = relu(features * W1 + b1) with optional
// dropout, cas = sigmoid(hidden * W2 + b2), category probabilities by top-k
// mean over each class channel.
inline ForwardResult backbone_forward(const FeatureSequence& features, const BranchParams& params,
                                      const Hyperparams& hyper,
                                      const std::optional<DropoutMask>& dropout_mask = {}) {
  Matrix hidden_pre, hidden;
  detail::run_hidden(features, params, dropout_mask, hyper.dropout_rate, hidden_pre, hidden);
  const std::size_t t_len = features.rows(), h = params.hidden_dim(), c_len = params.num_classes();
  ForwardResult res;
  res.cas = Matrix(t_len, c_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < c_len; ++c) {
      double z = params.cas_bias[c];
      for (std::size_t j = 0; j < h; ++j) z += hidden(t, j) * params.cas_weights(j, c);
      res.cas(t, c) = detail::sigmoid(z);
    }
  }
  const std::size_t k = std::min(hyper.topk(), t_len);
  res.category_probs = topk_mean_aggregate(res.cas, k);
  return res;
}

// Exact reverse-mode gradients of a scalar loss given its gradient w.r.t. the
// CAS. Must be called with the same features/params/mask as the paired
// forward pass.
inline BranchParams backbone_backward(const FeatureSequence& features, const BranchParams& params,
                                      const Hyperparams& hyper,
                                      const std::optional<DropoutMask>& dropout_mask,
                                      const Matrix& loss_grads_wrt_cas) {
  Matrix hidden_pre, hidden;
  detail::run_hidden(features, params, dropout_mask, hyper.dropout_rate, hidden_pre, hidden);
  const std::size_t t_len = features.rows(), d = features.cols();
  const std::size_t h = params.hidden_dim(), c_len = params.num_classes();
  require_shape(loss_grads_wrt_cas, t_len, c_len, "backbone_backward: loss_grads_wrt_cas");
  require_finite(loss_grads_wrt_cas, "backbone_backward: loss_grads_wrt_cas");

  BranchParams grads = BranchParams::zeros(d, h, c_len);
  const double keep_scale = dropout_mask ? 1.0 / (1.0 - hyper.dropout_rate) : 1.0;

  // dL/dz2 through the sigmoid, then the CAS head parameters.
  Matrix dz2(t_len, c_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < c_len; ++c) {
      double z = params.cas_bias[c];
      for (std::size_t j = 0; j < h; ++j) z += hidden(t, j) * params.cas_weights(j, c);
      const double s = detail::sigmoid(z);
      dz2(t, c) = loss_grads_wrt_cas(t, c) * s * (1.0 - s);
    }
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < c_len; ++c) {
      const double g = dz2(t, c);
      grads.cas_bias[c] += g;
      for (std::size_t j = 0; j < h; ++j) grads.cas_weights(j, c) += hidden(t, j) * g;
    }
  }

  // Back through dropout scaling, ReLU (subgradient 0 at 0), and the
  // transform layer.
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t j = 0; j < h; ++j) {
      double dh = 0.0;
      for (std::size_t c = 0; c < c_len; ++c) dh += dz2(t, c) * params.cas_weights(j, c);
      if (dropout_mask) dh = (*dropout_mask)[j] ? dh * keep_scale : 0.0;
      const double dpre = hidden_pre(t, j) > 0.0 ? dh : 0.0;
      grads.transform_bias[j] += dpre;
      for (std::size_t i = 0; i < d; ++i)
        grads.transform_weights(i, j) += features(t, i) * dpre;
    }
  }
  return grads;
}

// Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8.
inline void adam_update(BranchParams& params, const BranchParams& grads, AdamState& state,
                        double learning_rate) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  if (!params.same_shape(grads)) throw ValidationError("adam_update: grads shape mismatch");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step_count));
  zip_params(state.first_moment, grads, [&](double& m, const double& g) {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
  });
  zip_params(state.second_moment, grads, [&](double& v, const double& g) {
    v = kBeta2 * v + (1.0 - kBeta2) * g * g;
  });
  // Walk the three parameter sets in lockstep.
  std::vector<double*> p_slots, m_slots, v_slots;
  params.for_each([&](double& w) { p_slots.push_back(&w); });
  state.first_moment.for_each([&](double& w) { m_slots.push_back(&w); });
  state.second_moment.for_each([&](double& w) { v_slots.push_back(&w); });
  for (std::size_t i = 0; i < p_slots.size(); ++i) {
    const double m_hat = *m_slots[i] / bc1;
    const double v_hat = *v_slots[i] / bc2;
    *p_slots[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
  }
}

// Central-difference gradient check. loss_fn must be a deterministic function
// of the parameters (fixed inputs, fixed dropout mask); this is verified by
// evaluating it twice. Returns max over parameters of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
template <typename LossFn>
double grad_check(const LossFn& loss_fn, const BranchParams& analytic_grads, BranchParams params,
                  double step) {
  if (!params.same_shape(analytic_grads))
    throw ValidationError("grad_check: analytic grads shape mismatch");
  const double l0 = loss_fn(static_cast<const BranchParams&>(params));
  const double l1 = loss_fn(static_cast<const BranchParams&>(params));
  if (l0 != l1) throw ContractError("grad_check: loss closure is not deterministic");

  std::vector<double*> slots;
  params.for_each([&](double& w) { slots.push_back(&w); });
  std::vector<const double*> grad_slots;
  analytic_grads.for_each([&](const double& w) { grad_slots.push_back(&w); });

  double max_rel = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double saved = *slots[i];
    *slots[i] = saved + step;
    const double lp = loss_fn(static_cast<const BranchParams&>(params));
    *slots[i] = saved - step;
    const double lm = loss_fn(static_cast<const BranchParams&>(params));
    *slots[i] = saved;
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = *grad_slots[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
    max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
  }
  return max_rel;
}

}  // namespace ams::nn
