#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ams/errors.hpp"
#include "ams/infer.hpp"
#include "ams/matrix.hpp"
#include "ams/nn.hpp"
#include "ams/rng.hpp"
#include "ams/sampler.hpp"
#include "ams/synthgen.hpp"
#include "ams/types.hpp"

namespace ams::supervision {

using infer::adaptive_threshold;

enum class Phase { zero, one, two };
enum class SupervisionMode { mutual, self, none };
enum class BranchCount { one, dual };

inline const char* phase_name(Phase p) {
  switch (p) {
    case Phase::zero: return "zero";
    case Phase::one: return "one";
    case Phase::two: return "two";
  }
  return "?";
}

// Binary T x C location pseudo-labels; a bit can be set only on a channel
// whose video-level label is positive.
struct PseudoLabelMask {
  Matrix bits;
  double alpha_used = 0.0;
};

inline PseudoLabelMask make_pseudo_labels(const Cas& cas, const VideoLabelVector& label,
                                          double alpha) {
  require(std::isfinite(alpha), "make_pseudo_labels: alpha must be finite");
  require(label.size() == cas.cols(), "make_pseudo_labels: label size mismatch");
  PseudoLabelMask mask;
  mask.alpha_used = alpha;
  mask.bits = Matrix(cas.rows(), cas.cols());
  for (std::size_t t = 0; t < cas.rows(); ++t)
    for (std::size_t k = 0; k < cas.cols(); ++k)
      mask.bits(t, k) = (cas(t, k) > alpha && label[k]) ? 1.0 : 0.0;
  return mask;
}

namespace detail {

constexpr double kClip = 1e-7;

// Binary cross-entropy on a clipped probability. The gradient is zero outside
// the clip interval so it stays consistent with the clipped forward value.
inline double bce(double p, bool positive, double& dgrad) {
  const double pc = std::clamp(p, kClip, 1.0 - kClip);
  const bool inside = p >= kClip && p <= 1.0 - kClip;
  if (positive) {
    dgrad = inside ? -1.0 / pc : 0.0;
    return -std::log(pc);
  }
  dgrad = inside ? 1.0 / (1.0 - pc) : 0.0;
  return -std::log(1.0 - pc);
}

}  // namespace detail

struct LocalizationLoss {
  double value = 0.0;
  Matrix grad;  // d value / d cas, same shape as cas
};

// Eq.-(9)-style weighted cross entropy: per class, the positive and negative
// snippet sets are each averaged separately, then the class terms are averaged
// over C. An empty positive (or negative) set drops that half.
inline LocalizationLoss localization_loss(const Cas& cas, const PseudoLabelMask& mask) {
  require(cas.same_shape(mask.bits), "localization_loss: shape mismatch");
  const std::size_t t_len = cas.rows(), c_len = cas.cols();
  LocalizationLoss out;
  out.grad = Matrix(t_len, c_len);
  for (std::size_t k = 0; k < c_len; ++k) {
    std::size_t t_pos = 0;
    for (std::size_t t = 0; t < t_len; ++t)
      if (mask.bits(t, k) != 0.0) ++t_pos;
    const std::size_t t_neg = t_len - t_pos;
    double class_term = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const bool positive = mask.bits(t, k) != 0.0;
      const double denom = static_cast<double>(positive ? t_pos : t_neg);
      double dgrad;
      const double h = detail::bce(cas(t, k), positive, dgrad);
      class_term += h / denom;
      out.grad(t, k) = dgrad / (denom * static_cast<double>(c_len));
    }
    out.value += class_term;
  }
  out.value /= static_cast<double>(c_len);
  return out;
}

struct ClassificationLoss {
  double value = 0.0;
  std::vector<double> grad;  // d value / d category_probs
};

// Eq. (10): mean over classes of binary cross entropy between the aggregated
// category probability and the video label.
inline ClassificationLoss classification_loss(const std::vector<double>& category_probs,
                                              const VideoLabelVector& label) {
  require(category_probs.size() == label.size(), "classification_loss: size mismatch");
  const auto c_len = static_cast<double>(label.size());
  ClassificationLoss out;
  out.grad.resize(label.size());
  for (std::size_t k = 0; k < label.size(); ++k) {
    double dgrad;
    out.value += detail::bce(category_probs[k], label[k] != 0, dgrad) / c_len;
    out.grad[k] = dgrad / c_len;
  }
  return out;
}

inline double total_loss(double basic, double local, double lambda) {
  return basic + lambda * local;
}

struct LossRecord {
  std::size_t epoch = 0;  // global epoch counter across phases
  Phase phase = Phase::zero;
  double l_basic = 0.0;
  double l_local = 0.0;
  double l_total = 0.0;
};

// Auxiliary basic-loss term: returns (value, gradient w.r.t. the CAS). The
// basic loss here is the classification loss alone; co-activity style terms
// plug in through this hook.
using AuxBasicLoss =
    std::function<std::pair<double, Matrix>(const nn::ForwardResult&, const VideoLabelVector&)>;

struct TrainOptions {
  nn::Hyperparams hyper;
  SupervisionMode supervision = SupervisionMode::mutual;
  nn::SamplingMode sampling_mode = nn::SamplingMode::adaptive;
  nn::AggregationMode aggregation_mode = nn::AggregationMode::maximum;
  nn::SamplingStrategy strategy = nn::SamplingStrategy::deterministic;
  BranchCount branch_count = BranchCount::dual;
  bool use_sampler = true;
  std::size_t modality = 0;
  std::vector<double> iou_thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  bool collect_metrics = true;
  AuxBasicLoss aux_basic_loss;
};

struct TrainingState {
  nn::Hyperparams hyper;  // effective values, dims taken from the dataset
  nn::BranchParams base_params, supp_params;
  nn::AdamState base_adam, supp_adam;
  std::vector<PseudoLabelMask> pseudo_labels;  // parallel to train video list
  std::vector<std::size_t> train_videos;       // indices into the dataset
  Phase phase = Phase::zero;
  int iteration = 0;
  std::vector<LossRecord> loss_history;
  std::size_t epoch_counter = 0;
  Rng train_rng{0};  // shuffle, dropout, and in-phase sampler draws only
};

struct IterationMetrics {
  int iteration = 0;
  infer::MapTable table;
};

struct RunResult {
  TrainingState state;
  std::vector<IterationMetrics> metrics;
};

// Input for the supplementary branch, with the sampler state kept for
// diagnostics. With the sampler disabled the branch is fed the original
// features and no alignment is needed.
struct SuppInput {
  FeatureSequence features;
  std::optional<sampler::TimestampSet> timestamps;
  sampler::AggregatedCas aggregated;
  sampler::SamplingWeights weights;
};

namespace detail {

inline SuppInput build_supp_input(const FeatureSequence& orig, const Cas& base_cas,
                                  const VideoLabelVector& label_for_agg, const TrainOptions& opt,
                                  Rng& rng) {
  SuppInput in;
  if (!opt.use_sampler) {
    in.features = orig;
    return in;
  }
  auto s = sampler::adaptive_sample(orig, base_cas, label_for_agg, opt.hyper, rng,
                                    opt.sampling_mode, opt.aggregation_mode, opt.strategy);
  in.features = std::move(s.features);
  in.timestamps = std::move(s.timestamps);
  in.aggregated = std::move(s.aggregated);
  in.weights = std::move(s.weights);
  return in;
}

inline Cas eval_cas(const FeatureSequence& features, const nn::BranchParams& params,
                    const nn::Hyperparams& hyper) {
  return nn::backbone_forward(features, params, hyper).cas;
}

inline Cas aligned_supp_cas(const Cas& raw, const SuppInput& in, const nn::Hyperparams& hyper,
                            std::size_t t_len, sampler::AlignCoeffs* coeffs = nullptr) {
  if (!in.timestamps) {
    if (coeffs) {
      coeffs->lo.resize(t_len);
      coeffs->hi.resize(t_len);
      coeffs->frac.assign(t_len, 0.0);
      for (std::size_t j = 0; j < t_len; ++j) coeffs->lo[j] = coeffs->hi[j] = j;
    }
    return raw;
  }
  return sampler::temporal_align(raw, *in.timestamps, hyper.interp_factor, t_len, coeffs);
}

struct StepLosses {
  double l_basic = 0.0, l_local = 0.0, l_total = 0.0;
};

// One optimizer step of one branch on one video. When align_input is set the
// localization loss is evaluated on the temporally aligned CAS and its
// gradient routed back through the alignment.
inline StepLosses train_step(nn::BranchParams& params, nn::AdamState& adam,
                             const FeatureSequence& input, const VideoLabelVector& label,
                             const PseudoLabelMask* mask, const SuppInput* align_input,
                             std::size_t uniform_t, const TrainOptions& opt, Rng& rng) {
  const auto& hyper = opt.hyper;
  const auto dropout = nn::draw_dropout_mask(hyper.hidden_dim, hyper.dropout_rate, rng);
  const auto fwd = nn::backbone_forward(input, params, hyper, dropout);
  const std::size_t k = std::min(hyper.topk(), input.rows());

  const auto cls = classification_loss(fwd.category_probs, label);
  Matrix dcas = nn::route_topk_grad(fwd.cas, k, cls.grad);

  double l_basic = cls.value;
  if (opt.aux_basic_loss) {
    auto [aux_value, aux_grad] = opt.aux_basic_loss(fwd, label);
    require(aux_grad.same_shape(fwd.cas), "train_step: aux loss gradient shape mismatch");
    l_basic += aux_value;
    for (std::size_t i = 0; i < dcas.size(); ++i)
      dcas.storage()[i] += aux_grad.storage()[i];
  }

  double l_local = 0.0;
  if (mask != nullptr) {
    LocalizationLoss loc;
    Matrix dcas_local;
    if (align_input != nullptr && align_input->timestamps) {
      sampler::AlignCoeffs coeffs;
      const Cas aligned =
          sampler::temporal_align(fwd.cas, *align_input->timestamps, hyper.interp_factor,
                                  uniform_t, &coeffs);
      loc = localization_loss(aligned, *mask);
      dcas_local = sampler::align_backward(coeffs, loc.grad, fwd.cas.rows());
    } else {
      loc = localization_loss(fwd.cas, *mask);
      dcas_local = std::move(loc.grad);
    }
    l_local = loc.value;
    for (std::size_t i = 0; i < dcas.size(); ++i)
      dcas.storage()[i] += hyper.lambda_balance * dcas_local.storage()[i];
  }

  const double l_total = total_loss(l_basic, l_local, hyper.lambda_balance);
  if (!std::isfinite(l_total))
    throw NumericError("train_step: non-finite loss (basic=" + std::to_string(l_basic) +
                       ", local=" + std::to_string(l_local) + ")");

  const auto grads = nn::backbone_backward(input, params, hyper, dropout, dcas);
  nn::adam_update(params, grads, adam, hyper.learning_rate);
  return {l_basic, l_local, l_total};
}

inline const FeatureSequence& video_features(const synthgen::SyntheticVideo& v,
                                             std::size_t modality) {
  require(modality < v.modalities.size(), "train: modality index out of range");
  return v.modalities[modality];
}

// Pseudo-labels from the base branch's CAS on the original features.
inline PseudoLabelMask labels_from_base(const synthgen::SyntheticVideo& v,
                                        const TrainingState& state, const TrainOptions& opt) {
  const Cas cas = eval_cas(video_features(v, opt.modality), state.base_params, state.hyper);
  const double alpha = adaptive_threshold(cas, state.hyper.theta_loc_factor);
  return make_pseudo_labels(cas, v.label, alpha);
}

// Pseudo-labels from the supplementary branch's aligned CAS; the sampler draws
// come from a dedicated rng so regeneration never perturbs the training
// stream.
inline PseudoLabelMask labels_from_supp(const synthgen::SyntheticVideo& v,
                                        const TrainingState& state, const TrainOptions& opt,
                                        Rng& regen_rng) {
  const auto& orig = video_features(v, opt.modality);
  TrainOptions eff = opt;
  eff.hyper = state.hyper;
  const Cas base_cas = eval_cas(orig, state.base_params, state.hyper);
  const SuppInput in = build_supp_input(orig, base_cas, v.label, eff, regen_rng);
  const Cas raw = eval_cas(in.features, state.supp_params, state.hyper);
  const Cas aligned = aligned_supp_cas(raw, in, state.hyper, orig.rows());
  const double alpha = adaptive_threshold(aligned, state.hyper.theta_loc_factor);
  return make_pseudo_labels(aligned, v.label, alpha);
}

// Caller-supplied hyperparameters win, except the dims pinned by the dataset
// at phase zero.
inline TrainOptions effective_options(const TrainingState& state, const TrainOptions& opt) {
  TrainOptions eff = opt;
  eff.hyper.T = state.hyper.T;
  eff.hyper.D = state.hyper.D;
  eff.hyper.C = state.hyper.C;
  return eff;
}

inline void regenerate_labels(TrainingState& state, const synthgen::Dataset& ds,
                              const TrainOptions& opt, bool from_supp, std::uint64_t salt) {
  for (std::size_t i = 0; i < state.train_videos.size(); ++i) {
    const auto& video = ds.videos[state.train_videos[i]];
    if (from_supp) {
      Rng regen_rng(mix_seed(state.hyper.seed, salt * 1000003ULL + i));
      state.pseudo_labels[i] = labels_from_supp(video, state, opt, regen_rng);
    } else {
      state.pseudo_labels[i] = labels_from_base(video, state, opt);
    }
  }
}

}  // namespace detail

// Branch outputs of one modality at inference (no dropout). At test time the
// sampler aggregates over the predicted classes (those whose base-branch
// category probability clears theta_cls), falling back to all classes when
// none does.
inline infer::ModalityOutput branch_outputs(const synthgen::SyntheticVideo& video,
                                            const nn::BranchParams& base,
                                            const nn::BranchParams& supp,
                                            const TrainOptions& opt, double weight,
                                            std::uint64_t video_salt,
                                            SuppInput* diag = nullptr) {
  const auto& orig = detail::video_features(video, opt.modality);
  infer::ModalityOutput out;
  out.weight = weight;
  out.cas_base = detail::eval_cas(orig, base, opt.hyper);
  if (opt.branch_count == BranchCount::one) {
    out.cas_supp = out.cas_base;  // fuse then reproduces the base CAS exactly
    return out;
  }
  VideoLabelVector agg_label(out.cas_base.cols(), 0);
  const std::size_t k = std::min(opt.hyper.topk(), out.cas_base.rows());
  for (int c : infer::classify_video(out.cas_base, k, opt.hyper.theta_cls))
    agg_label[static_cast<std::size_t>(c)] = 1;
  if (positive_classes(agg_label).empty()) agg_label.assign(out.cas_base.cols(), 1);

  Rng rng(mix_seed(opt.hyper.seed, 0xE7A1000000ULL + video_salt));
  SuppInput in = detail::build_supp_input(orig, out.cas_base, agg_label, opt, rng);
  const Cas raw = detail::eval_cas(in.features, supp, opt.hyper);
  out.cas_supp = detail::aligned_supp_cas(raw, in, opt.hyper, orig.rows());
  if (diag) *diag = std::move(in);
  return out;
}

struct EvalOutput {
  Cas final_cas;
  std::vector<int> classes;
  double theta_loc = 0.0;
  std::vector<ActionProposal> proposals;
};

inline EvalOutput evaluate_video(const std::vector<infer::ModalityOutput>& modalities,
                                 const nn::Hyperparams& hyper) {
  EvalOutput out;
  out.final_cas = infer::fuse_cas(modalities);
  const std::size_t k = std::min(hyper.topk(), out.final_cas.rows());
  out.classes = infer::classify_video(out.final_cas, k, hyper.theta_cls);
  out.theta_loc = adaptive_threshold(out.final_cas, hyper.theta_loc_factor);
  out.proposals = infer::extract_proposals(out.final_cas, out.classes, out.theta_loc);
  return out;
}

// Single-modality mAP over the given videos with the current parameters.
inline infer::MapTable evaluate_map(const TrainingState& state, const synthgen::Dataset& ds,
                                    const TrainOptions& opt,
                                    const std::vector<std::size_t>& indices) {
  TrainOptions eff = opt;
  eff.hyper = state.hyper;
  std::vector<infer::VideoDetections> dets;
  for (std::size_t idx : indices) {
    const auto& video = ds.videos[idx];
    const auto mo = branch_outputs(video, state.base_params, state.supp_params, eff, 1.0, idx);
    const auto ev = evaluate_video({mo}, state.hyper);
    dets.push_back({ev.proposals, video.ground_truth});
  }
  return infer::map_table(dets, opt.iou_thresholds);
}

// Videos carrying localization ground truth. The training loop never reads the
// intervals, so the per-iteration trend metric pools every labeled video.
inline std::vector<std::size_t> videos_with_ground_truth(const synthgen::Dataset& ds) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.videos.size(); ++i)
    if (!ds.videos[i].ground_truth.empty()) out.push_back(i);
  return out;
}

inline infer::MapTable evaluate_map(const TrainingState& state, const synthgen::Dataset& ds,
                                    const TrainOptions& opt) {
  return evaluate_map(state, ds, opt, videos_with_ground_truth(ds));
}

// Phase zero: train the base branch with the classification loss only, then
// generate the initial pseudo-labels from its CAS.
inline TrainingState train_phase0(const synthgen::Dataset& ds, const TrainOptions& opt) {
  opt.hyper.validate();
  TrainingState state;
  state.hyper = opt.hyper;
  state.train_videos = ds.train_indices();
  require(!state.train_videos.empty(), "train_phase0: empty training split");

  const auto& first = ds.videos[state.train_videos.front()];
  require(opt.modality < first.modalities.size(), "train_phase0: modality index out of range");
  state.hyper.T = first.modalities[opt.modality].rows();
  state.hyper.D = first.modalities[opt.modality].cols();
  state.hyper.C = first.label.size();
  for (std::size_t idx : state.train_videos) {
    const auto& v = ds.videos[idx];
    require(positive_classes(v.label).size() >= 1,
            "train_phase0: training video " + v.id + " has no positive label");
    require(opt.modality < v.modalities.size(), "train_phase0: missing modality in " + v.id);
    require_shape(v.modalities[opt.modality], state.hyper.T, state.hyper.D,
                  "train_phase0: features of " + v.id);
    require(v.label.size() == state.hyper.C, "train_phase0: label size of " + v.id);
  }

  // The two branches are identical backbones and start from the same seeded
  // init; they diverge through their inputs and supervision, not their init.
  Rng base_init(mix_seed(state.hyper.seed, 0xBA5E + opt.modality));
  state.base_params = nn::BranchParams::init(state.hyper.D, state.hyper.hidden_dim, state.hyper.C,
                                             base_init);
  state.supp_params = state.base_params;
  state.base_adam = nn::AdamState::zeros_like(state.base_params);
  state.supp_adam = nn::AdamState::zeros_like(state.supp_params);
  state.train_rng = Rng(mix_seed(state.hyper.seed, 0x7EA1 + opt.modality));

  TrainOptions eff = opt;
  eff.hyper = state.hyper;
  std::vector<std::size_t> order(state.train_videos.size());
  for (std::size_t e = 0; e < state.hyper.phase0_epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    state.train_rng.shuffle(order);
    detail::StepLosses sum;
    for (std::size_t i : order) {
      const auto& video = ds.videos[state.train_videos[i]];
      const auto step = detail::train_step(state.base_params, state.base_adam,
                                           detail::video_features(video, opt.modality), video.label,
                                           nullptr, nullptr, state.hyper.T, eff, state.train_rng);
      sum.l_basic += step.l_basic;
      sum.l_local += step.l_local;
      sum.l_total += step.l_total;
    }
    const auto n = static_cast<double>(order.size());
    state.loss_history.push_back(
        {++state.epoch_counter, Phase::zero, sum.l_basic / n, sum.l_local / n, sum.l_total / n});
  }

  state.pseudo_labels.resize(state.train_videos.size());
  detail::regenerate_labels(state, ds, eff, /*from_supp=*/false, /*salt=*/0);
  state.phase = Phase::zero;
  state.iteration = 0;
  return state;
}

// Phase one: the base branch is frozen (its CAS drives the sampler), the
// supplementary branch trains on the sampler-built inputs. Pseudo-labels come
// from the base branch (mutual) or from the supplementary branch's own prior
// CAS (self), and are regenerated from the supplementary branch afterwards.
inline void train_phase_one(TrainingState& state, const synthgen::Dataset& ds,
                            const TrainOptions& opt) {
  if (opt.branch_count != BranchCount::dual) return;
  const TrainOptions eff = detail::effective_options(state, opt);
  state.hyper = eff.hyper;
  const std::uint64_t iter_salt = static_cast<std::uint64_t>(state.iteration) * 16 + 1;
  state.phase = Phase::one;
  if (opt.supervision == SupervisionMode::self)
    detail::regenerate_labels(state, ds, eff, /*from_supp=*/true, iter_salt);
  // Classification-only setups treat the supplementary branch as a full
  // classifier of its own, so it gets the same training budget the base
  // branch has accumulated rather than one short alternation.
  const std::size_t phase_one_epochs =
      opt.supervision == SupervisionMode::none
          ? eff.hyper.phase0_epochs + eff.hyper.phase_epochs
          : eff.hyper.phase_epochs;
  std::vector<std::size_t> order(state.train_videos.size());
  for (std::size_t e = 0; e < phase_one_epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    state.train_rng.shuffle(order);
    detail::StepLosses sum;
    for (std::size_t i : order) {
      const auto& video = ds.videos[state.train_videos[i]];
      const auto& orig = detail::video_features(video, opt.modality);
      const Cas base_cas = detail::eval_cas(orig, state.base_params, state.hyper);
      const SuppInput in =
          detail::build_supp_input(orig, base_cas, video.label, eff, state.train_rng);
      const PseudoLabelMask* mask =
          opt.supervision != SupervisionMode::none ? &state.pseudo_labels[i] : nullptr;
      const auto step = detail::train_step(state.supp_params, state.supp_adam, in.features,
                                           video.label, mask, &in, state.hyper.T, eff,
                                           state.train_rng);
      sum.l_basic += step.l_basic;
      sum.l_local += step.l_local;
      sum.l_total += step.l_total;
    }
    const auto n = static_cast<double>(order.size());
    state.loss_history.push_back(
        {++state.epoch_counter, Phase::one, sum.l_basic / n, sum.l_local / n, sum.l_total / n});
  }
  if (opt.supervision != SupervisionMode::none)
    detail::regenerate_labels(state, ds, eff, /*from_supp=*/true, iter_salt + 1);
}

// Phase two: the base branch trains on the original features with the current
// pseudo-labels (from the supplementary branch in mutual mode, from itself in
// self mode); labels are regenerated from the base branch afterwards.
inline void train_phase_two(TrainingState& state, const synthgen::Dataset& ds,
                            const TrainOptions& opt) {
  const TrainOptions eff = detail::effective_options(state, opt);
  state.hyper = eff.hyper;
  const std::uint64_t iter_salt = static_cast<std::uint64_t>(state.iteration) * 16 + 1;
  state.phase = Phase::two;
  if (opt.supervision == SupervisionMode::self)
    detail::regenerate_labels(state, ds, eff, /*from_supp=*/false, iter_salt + 2);
  std::vector<std::size_t> order(state.train_videos.size());
  for (std::size_t e = 0; e < state.hyper.phase_epochs; ++e) {
    std::iota(order.begin(), order.end(), 0);
    state.train_rng.shuffle(order);
    detail::StepLosses sum;
    for (std::size_t i : order) {
      const auto& video = ds.videos[state.train_videos[i]];
      const PseudoLabelMask* mask =
          opt.supervision != SupervisionMode::none ? &state.pseudo_labels[i] : nullptr;
      const auto step = detail::train_step(state.base_params, state.base_adam,
                                           detail::video_features(video, opt.modality), video.label,
                                           mask, nullptr, state.hyper.T, eff, state.train_rng);
      sum.l_basic += step.l_basic;
      sum.l_local += step.l_local;
      sum.l_total += step.l_total;
    }
    const auto n = static_cast<double>(order.size());
    state.loss_history.push_back(
        {++state.epoch_counter, Phase::two, sum.l_basic / n, sum.l_local / n, sum.l_total / n});
  }
  if (opt.supervision != SupervisionMode::none)
    detail::regenerate_labels(state, ds, eff, /*from_supp=*/false, iter_salt + 3);
}

inline void train_iteration(TrainingState& state, const synthgen::Dataset& ds,
                            const TrainOptions& opt) {
  train_phase_one(state, ds, opt);
  train_phase_two(state, ds, opt);
  state.iteration += 1;
}

// Phase zero followed by num_iterations alternating iterations, with a metrics
// snapshot after phase zero (iteration 0) and after each iteration.
inline RunResult run_training(const synthgen::Dataset& ds, const TrainOptions& opt) {
  RunResult res;
  res.state = train_phase0(ds, opt);
  const auto eval_videos = videos_with_ground_truth(ds);
  const bool metrics = opt.collect_metrics && !eval_videos.empty();
  if (metrics) res.metrics.push_back({0, evaluate_map(res.state, ds, opt, eval_videos)});
  for (std::size_t it = 0; it < opt.hyper.num_iterations; ++it) {
    train_iteration(res.state, ds, opt);
    if (metrics)
      res.metrics.push_back({res.state.iteration, evaluate_map(res.state, ds, opt, eval_videos)});
  }
  return res;
}

}  // namespace ams::supervision
