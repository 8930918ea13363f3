#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/nn.hpp"
#include "ams/rng.hpp"
#include "ams/types.hpp"

namespace ams::sampler {

using nn::AggregationMode;
using nn::SamplingMode;
using nn::SamplingStrategy;

// Class-agnostic aggregation m of a CAS over the ground-truth channels.
struct AggregatedCas {
  std::vector<double> values;  // length T, entries in [0,1]
  AggregationMode mode = AggregationMode::maximum;
};

struct SamplingWeights {
  std::vector<double> values;  // length T
  double eta = 0.0;
  // erase mode with every weight zero falls back to uniform.
  bool fell_back_to_uniform = false;
};

struct CumulativeDistribution {
  std::vector<double> values;  // length H*T, nondecreasing prefix sums
  double total() const { return values.empty() ? 0.0 : values.back(); }
};

// Sorted 1-based indices into the interpolated sequence; length equals the
// number of requested samples. Duplicates are allowed.
struct TimestampSet {
  std::vector<int> indices;
};

inline AggregatedCas aggregate_cas(const Cas& cas, const VideoLabelVector& label,
                                   AggregationMode mode, Rng& rng) {
  require(label.size() == cas.cols(), "aggregate_cas: label size mismatch");
  const auto gt = positive_classes(label);
  require(!gt.empty(), "aggregate_cas: label has no positive class");
  AggregatedCas out;
  out.mode = mode;
  out.values.resize(cas.rows());
  std::size_t random_channel = 0;
  if (mode == AggregationMode::random)
    random_channel = gt[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(gt.size()) - 1))];
  for (std::size_t t = 0; t < cas.rows(); ++t) {
    switch (mode) {
      case AggregationMode::maximum: {
        double m = cas(t, gt[0]);
        for (std::size_t k : gt) m = std::max(m, cas(t, k));
        out.values[t] = m;
        break;
      }
      case AggregationMode::average: {
        double s = 0.0;
        for (std::size_t k : gt) s += cas(t, k);
        out.values[t] = s / static_cast<double>(gt.size());
        break;
      }
      case AggregationMode::random:
        out.values[t] = cas(t, random_channel);
        break;
    }
  }
  return out;
}

// Sampling weight sequence. Adaptive mode is w = max(m) - m + eta, negatively
// correlated with the aggregated CAS. Erase mode is the binary prior-art
// variant: weight 0 wherever m exceeds alpha_erase.
inline SamplingWeights sampling_weights(const AggregatedCas& m, double eta, SamplingMode mode,
                                        Rng* rng = nullptr, double alpha_erase = 0.0) {
  require(!m.values.empty(), "sampling_weights: empty aggregated CAS");
  SamplingWeights out;
  out.eta = eta;
  out.values.resize(m.values.size());
  switch (mode) {
    case SamplingMode::adaptive: {
      require(eta > 0.0, "sampling_weights: adaptive mode requires eta > 0");
      const double peak = *std::max_element(m.values.begin(), m.values.end());
      for (std::size_t t = 0; t < m.values.size(); ++t)
        out.values[t] = peak - m.values[t] + eta;
      break;
    }
    case SamplingMode::uniform:
      std::fill(out.values.begin(), out.values.end(), 1.0);
      break;
    case SamplingMode::random: {
      require(rng != nullptr, "sampling_weights: random mode requires an rng");
      for (double& w : out.values) w = rng->uniform_pos();
      break;
    }
    case SamplingMode::erase: {
      bool any = false;
      for (std::size_t t = 0; t < m.values.size(); ++t) {
        out.values[t] = m.values[t] > alpha_erase ? 0.0 : 1.0;
        any = any || out.values[t] > 0.0;
      }
      if (!any) {
        std::fill(out.values.begin(), out.values.end(), 1.0);
        out.fell_back_to_uniform = true;
      }
      break;
    }
  }
  return out;
}

// Linear up-sampling from length T to length H*T. Output index i (1-based)
// takes the value at source coordinate (i-1)*(T-1)/(H*T-1) + 1, so both
// endpoints are preserved exactly.
inline std::vector<double> interpolate_linear(const std::vector<double>& seq, std::size_t h) {
  require(seq.size() >= 2, "interpolate_linear: need at least 2 samples");
  require(h >= 1, "interpolate_linear: factor must be >= 1");
  const std::size_t t_len = seq.size(), out_len = h * t_len;
  std::vector<double> out(out_len);
  const double scale = static_cast<double>(t_len - 1) / static_cast<double>(out_len - 1);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double src = static_cast<double>(i) * scale;
    const auto lo = static_cast<std::size_t>(src);
    const std::size_t hi = std::min(lo + 1, t_len - 1);
    const double f = src - static_cast<double>(lo);
    out[i] = seq[lo] + f * (seq[hi] - seq[lo]);
  }
  return out;
}

inline Matrix interpolate_linear(const Matrix& seq, std::size_t h) {
  require(seq.rows() >= 2, "interpolate_linear: need at least 2 rows");
  require(h >= 1, "interpolate_linear: factor must be >= 1");
  const std::size_t t_len = seq.rows(), out_len = h * t_len, d = seq.cols();
  Matrix out(out_len, d);
  const double scale = static_cast<double>(t_len - 1) / static_cast<double>(out_len - 1);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double src = static_cast<double>(i) * scale;
    const auto lo = static_cast<std::size_t>(src);
    const std::size_t hi = std::min(lo + 1, t_len - 1);
    const double f = src - static_cast<double>(lo);
    for (std::size_t c = 0; c < d; ++c)
      out(i, c) = seq(lo, c) + f * (seq(hi, c) - seq(lo, c));
  }
  return out;
}

inline CumulativeDistribution cumulate(const std::vector<double>& weights) {
  CumulativeDistribution g;
  g.values.resize(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, "cumulate: negative weight");
    acc += weights[i];
    g.values[i] = acc;
  }
  require(acc > 0.0, "cumulate: total mass is zero");
  return g;
}

// Inverse-CDF sampling of `count` timestamps. The deterministic strategy
// places targets at the stratum midpoints u_i = ((i-0.5)/count)*total and maps
// each through the right-continuous inverse, K_i = min{t : G(t) >= u_i}. The
// stochastic strategy draws one uniform target per stratum instead. The
// comparison carries a 1e-9*total slack so that accumulated summation
// rounding cannot push an exact-tie target past its snippet.
inline TimestampSet sample_timestamps(const CumulativeDistribution& g, std::size_t count,
                                      SamplingStrategy strategy = SamplingStrategy::deterministic,
                                      Rng* rng = nullptr) {
  require(!g.values.empty(), "sample_timestamps: empty CDF");
  require(count >= 1, "sample_timestamps: count must be >= 1");
  if (strategy == SamplingStrategy::stochastic)
    require(rng != nullptr, "sample_timestamps: stochastic strategy requires an rng");
  const double total = g.total();
  TimestampSet out;
  out.indices.resize(count);
  const double slack = 1e-9 * total;
  for (std::size_t i = 1; i <= count; ++i) {
    double u;
    if (strategy == SamplingStrategy::deterministic) {
      u = (static_cast<double>(i) - 0.5) / static_cast<double>(count) * total;
    } else {
      const double r = rng->uniform_pos();  // (0,1] keeps u inside the stratum
      u = (static_cast<double>(i - 1) + r) / static_cast<double>(count) * total;
    }
    const auto it = std::lower_bound(g.values.begin(), g.values.end(), u - slack);
    const auto idx = static_cast<int>(std::distance(g.values.begin(), it));
    out.indices[i - 1] = std::min(idx, static_cast<int>(g.values.size()) - 1) + 1;
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

// The index operation: row j of the output is the interpolated feature row at
// timestamp K_j, in chronological order.
inline FeatureSequence gather_features(const Matrix& interp_features, const TimestampSet& k) {
  FeatureSequence out(k.indices.size(), interp_features.cols());
  for (std::size_t j = 0; j < k.indices.size(); ++j) {
    const int idx = k.indices[j];
    require(idx >= 1 && idx <= static_cast<int>(interp_features.rows()),
            "gather_features: timestamp out of range");
    for (std::size_t c = 0; c < interp_features.cols(); ++c)
      out(j, c) = interp_features(static_cast<std::size_t>(idx - 1), c);
  }
  return out;
}

// Linear-interpolation coefficients of one alignment, kept so gradients can be
// routed back from the aligned CAS to the raw one.
struct AlignCoeffs {
  std::vector<std::size_t> lo, hi;  // raw row indices
  std::vector<double> frac;         // out[j] = (1-frac)*raw[lo] + frac*raw[hi]
};

// Maps the supplementary CAS, whose row j lives at interpolated-time
// coordinate K_j, back onto the uniform midpoint grid t'_j = (j-0.5)*H.
// Targets outside K's span clamp to the nearest sampled row.
inline Cas temporal_align(const Cas& cas_supp_raw, const TimestampSet& k, std::size_t h,
                          std::size_t t_len, AlignCoeffs* coeffs = nullptr) {
  require(cas_supp_raw.rows() == k.indices.size(), "temporal_align: row/timestamp mismatch");
  require(!k.indices.empty(), "temporal_align: empty timestamp set");
  require(std::is_sorted(k.indices.begin(), k.indices.end()),
          "temporal_align: timestamps must be sorted");
  const std::size_t c_len = cas_supp_raw.cols(), n = k.indices.size();
  Cas out(t_len, c_len);
  if (coeffs) {
    coeffs->lo.assign(t_len, 0);
    coeffs->hi.assign(t_len, 0);
    coeffs->frac.assign(t_len, 0.0);
  }
  for (std::size_t j = 1; j <= t_len; ++j) {
    const double target = (static_cast<double>(j) - 0.5) * static_cast<double>(h);
    std::size_t lo, hi;
    double f;
    if (target <= static_cast<double>(k.indices.front())) {
      lo = hi = 0;
      f = 0.0;
    } else if (target >= static_cast<double>(k.indices.back())) {
      lo = hi = n - 1;
      f = 0.0;
    } else {
      const auto it = std::lower_bound(k.indices.begin(), k.indices.end(), target);
      hi = static_cast<std::size_t>(std::distance(k.indices.begin(), it));
      if (static_cast<double>(k.indices[hi]) == target) {
        lo = hi;
        f = 0.0;
      } else {
        lo = hi - 1;
        const double span = static_cast<double>(k.indices[hi] - k.indices[lo]);
        f = (target - static_cast<double>(k.indices[lo])) / span;
      }
    }
    for (std::size_t c = 0; c < c_len; ++c) {
      const double a = cas_supp_raw(lo, c);
      out(j - 1, c) = f == 0.0 ? a : a + f * (cas_supp_raw(hi, c) - a);
    }
    if (coeffs) {
      coeffs->lo[j - 1] = lo;
      coeffs->hi[j - 1] = hi;
      coeffs->frac[j - 1] = f;
    }
  }
  return out;
}

// Adjoint of temporal_align: routes a gradient on the aligned grid back to the
// raw (sampled-timeline) rows.
inline Matrix align_backward(const AlignCoeffs& coeffs, const Matrix& d_aligned,
                             std::size_t raw_rows) {
  Matrix d_raw(raw_rows, d_aligned.cols());
  for (std::size_t j = 0; j < d_aligned.rows(); ++j) {
    const double f = coeffs.frac[j];
    for (std::size_t c = 0; c < d_aligned.cols(); ++c) {
      d_raw(coeffs.lo[j], c) += (1.0 - f) * d_aligned(j, c);
      if (f != 0.0) d_raw(coeffs.hi[j], c) += f * d_aligned(j, c);
    }
  }
  return d_raw;
}

struct SampleResult {
  FeatureSequence features;  // T x D input for the supplementary branch
  TimestampSet timestamps;   // K, needed later for temporal alignment
  AggregatedCas aggregated;  // diagnostics
  SamplingWeights weights;   // diagnostics
};

// The full sampler S(F, M): aggregate -> weights -> interpolate (weights and
// features) -> cumulate -> inverse-CDF timestamps -> gather.
inline SampleResult adaptive_sample(const FeatureSequence& features, const Cas& cas_base,
                                    const VideoLabelVector& label, const nn::Hyperparams& hyper,
                                    Rng& rng,
                                    SamplingMode weight_mode = SamplingMode::adaptive,
                                    AggregationMode agg_mode = AggregationMode::maximum,
                                    SamplingStrategy strategy = SamplingStrategy::deterministic) {
  require(features.rows() == cas_base.rows(), "adaptive_sample: feature/CAS length mismatch");
  SampleResult res;
  res.aggregated = aggregate_cas(cas_base, label, agg_mode, rng);
  double alpha_erase = 0.0;
  if (weight_mode == SamplingMode::erase) {
    double s = 0.0;
    for (double v : res.aggregated.values) s += v;
    alpha_erase = hyper.theta_loc_factor * s / static_cast<double>(res.aggregated.values.size());
  }
  res.weights =
      sampling_weights(res.aggregated, hyper.eta_sampling, weight_mode, &rng, alpha_erase);
  const auto w_interp = interpolate_linear(res.weights.values, hyper.interp_factor);
  const auto f_interp = interpolate_linear(features, hyper.interp_factor);
  const auto g = cumulate(w_interp);
  res.timestamps = sample_timestamps(g, features.rows(), strategy, &rng);
  res.features = gather_features(f_interp, res.timestamps);
  return res;
}

}  // namespace ams::sampler
