#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/nn.hpp"
#include "ams/types.hpp"

namespace ams::infer {

// One modality's pair of branch CASs plus its fusion weight.
struct ModalityOutput {
  Cas cas_base;
  Cas cas_supp;  // temporally aligned
  double weight = 1.0;
};

// M_final = 1/2 * sum_m weight_m * (cas_base_m + cas_supp_m). With two
// modalities the convention is weight 1.0 for flow and beta for RGB. Fused
// values may exceed 1; thresholds operate on the raw fused values.
inline Cas fuse_cas(const std::vector<ModalityOutput>& outputs) {
  require(!outputs.empty(), "fuse_cas: need at least one modality");
  const auto& first = outputs.front().cas_base;
  Cas out(first.rows(), first.cols());
  for (const auto& mo : outputs) {
    require(mo.weight >= 0.0, "fuse_cas: negative weight");
    if (!mo.cas_base.same_shape(first) || !mo.cas_supp.same_shape(first))
      throw ValidationError("fuse_cas: CAS shape mismatch");
    for (std::size_t i = 0; i < out.size(); ++i)
      out.storage()[i] += mo.weight * (mo.cas_base.storage()[i] + mo.cas_supp.storage()[i]);
  }
  for (double& v : out.storage()) v *= 0.5;
  return out;
}

// theta_loc = factor * avg(M), computed over all T x C entries.
inline double adaptive_threshold(const Matrix& cas, double factor = 0.7) {
  require(!cas.empty(), "adaptive_threshold: empty CAS");
  return factor * cas.mean();
}

// Classes whose top-k mean category probability strictly exceeds theta_cls.
inline std::vector<int> classify_video(const Cas& final_cas, std::size_t k, double theta_cls) {
  const auto probs = nn::topk_mean_aggregate(final_cas, std::min(k, final_cas.rows()));
  std::vector<int> classes;
  for (std::size_t c = 0; c < probs.size(); ++c)
    if (probs[c] > theta_cls) classes.push_back(static_cast<int>(c));
  return classes;
}

// Per selected class, maximal consecutive runs of snippets with value
// strictly above theta_loc become proposals scored by the run's peak value.
// Output sorted by score descending (stable, so earlier classes/runs first on
// ties).
inline std::vector<ActionProposal> extract_proposals(const Cas& final_cas,
                                                     const std::vector<int>& classes,
                                                     double theta_loc) {
  require(std::isfinite(theta_loc), "extract_proposals: theta_loc must be finite");
  std::vector<ActionProposal> out;
  const std::size_t t_len = final_cas.rows();
  for (int c : classes) {
    require(c >= 0 && c < static_cast<int>(final_cas.cols()), "extract_proposals: bad class id");
    std::size_t t = 0;
    while (t < t_len) {
      if (final_cas(t, static_cast<std::size_t>(c)) > theta_loc) {
        const std::size_t start = t;
        double peak = final_cas(t, static_cast<std::size_t>(c));
        while (t + 1 < t_len && final_cas(t + 1, static_cast<std::size_t>(c)) > theta_loc) {
          ++t;
          peak = std::max(peak, final_cas(t, static_cast<std::size_t>(c)));
        }
        out.push_back({static_cast<int>(start) + 1, static_cast<int>(t) + 1, c, peak});
      }
      ++t;
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ActionProposal& a, const ActionProposal& b) { return a.score > b.score; });
  return out;
}

// Temporal IoU of two inclusive snippet intervals, each treated as the
// half-open span [start, end+1).
inline double tiou(int a_start, int a_end, int b_start, int b_end) {
  require(a_start <= a_end && b_start <= b_end, "tiou: invalid interval");
  const double inter = std::max(0, std::min(a_end + 1, b_end + 1) - std::max(a_start, b_start));
  const double uni = static_cast<double>((a_end + 1 - a_start) + (b_end + 1 - b_start)) - inter;
  return inter / uni;
}

// A detection or ground-truth instance tagged with the video it belongs to;
// matching never crosses videos.
struct TaggedProposal {
  int video = 0;
  ActionProposal p;
};
struct TaggedInstance {
  int video = 0;
  GroundTruthInstance g;
};

// Greedy one-to-one matching in descending score order: a proposal is a true
// positive iff it overlaps an unmatched same-video ground-truth instance with
// T-IoU >= threshold (ties on IoU resolved toward the earlier instance). AP is
// the all-point sum of precision * delta-recall over the ranked list.
inline double average_precision(std::vector<TaggedProposal> proposals,
                                const std::vector<TaggedInstance>& gts, double iou_threshold) {
  if (gts.empty()) return 0.0;
  std::stable_sort(proposals.begin(), proposals.end(),
                   [](const TaggedProposal& a, const TaggedProposal& b) {
                     return a.p.score > b.p.score;
                   });
  std::vector<bool> matched(gts.size(), false);
  const double num_gt = static_cast<double>(gts.size());
  double tp = 0.0, ap = 0.0, prev_recall = 0.0;
  for (std::size_t rank = 0; rank < proposals.size(); ++rank) {
    const auto& det = proposals[rank];
    double best_iou = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (matched[g] || gts[g].video != det.video) continue;
      const double v = tiou(det.p.start, det.p.end, gts[g].g.start, gts[g].g.end);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      matched[best_g] = true;
      tp += 1.0;
    }
    const double recall = tp / num_gt;
    const double precision = tp / static_cast<double>(rank + 1);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Single-video convenience overload; proposals and gts must share one class.
inline double average_precision(const std::vector<ActionProposal>& proposals,
                                const std::vector<GroundTruthInstance>& gts,
                                double iou_threshold) {
  std::vector<TaggedProposal> tp;
  tp.reserve(proposals.size());
  for (const auto& p : proposals) tp.push_back({0, p});
  std::vector<TaggedInstance> tg;
  tg.reserve(gts.size());
  for (const auto& g : gts) tg.push_back({0, g});
  return average_precision(std::move(tp), tg, iou_threshold);
}

struct VideoDetections {
  std::vector<ActionProposal> proposals;
  std::vector<GroundTruthInstance> ground_truth;
};

struct MapTable {
  std::vector<std::pair<double, double>> rows;       // (iou_threshold, mAP)
  std::vector<std::pair<std::pair<double, double>, double>> averages;  // (range, avg mAP)
};

// mAP per threshold = mean AP over the classes present in the ground truth.
// Also reports the mean over each requested inclusive threshold range.
inline MapTable map_table(const std::vector<VideoDetections>& videos,
                          const std::vector<double>& iou_thresholds,
                          const std::vector<std::pair<double, double>>& ranges = {}) {
  require(!iou_thresholds.empty(), "map_table: no thresholds");
  std::set<int> classes;
  for (const auto& v : videos)
    for (const auto& g : v.ground_truth) classes.insert(g.category);

  MapTable table;
  for (double thr : iou_thresholds) {
    double sum = 0.0;
    for (int c : classes) {
      std::vector<TaggedProposal> props;
      std::vector<TaggedInstance> gts;
      for (std::size_t v = 0; v < videos.size(); ++v) {
        for (const auto& p : videos[v].proposals)
          if (p.category == c) props.push_back({static_cast<int>(v), p});
        for (const auto& g : videos[v].ground_truth)
          if (g.category == c) gts.push_back({static_cast<int>(v), g});
      }
      sum += average_precision(std::move(props), gts, thr);
    }
    table.rows.emplace_back(thr, classes.empty() ? 0.0 : sum / static_cast<double>(classes.size()));
  }
  for (const auto& r : ranges) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [thr, v] : table.rows) {
      if (thr >= r.first - 1e-12 && thr <= r.second + 1e-12) {
        sum += v;
        ++n;
      }
    }
    table.averages.push_back({r, n == 0 ? 0.0 : sum / static_cast<double>(n)});
  }
  return table;
}

}  // namespace ams::infer
