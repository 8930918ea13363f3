// Acceptance suite: prints one pass/fail line per criterion and exits nonzero
// if any fails. Trend criteria run the full pipeline on the bundled synthetic
// benchmark (60 videos, T=100, D=16, C=4) over seeds 0..2.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ams/cli.hpp"
#include "ams/infer.hpp"
#include "ams/io.hpp"
#include "ams/nn.hpp"
#include "ams/rng.hpp"
#include "ams/sampler.hpp"
#include "ams/supervision.hpp"
#include "ams/synthgen.hpp"

using namespace ams;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!ok) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo, double hi) {
  Matrix m(r, c);
  for (double& v : m.storage()) v = rng.uniform(lo, hi);
  return m;
}

// --- criterion 1: gradient suite ----------------------------------------

void criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const std::size_t T = 4 + static_cast<std::size_t>(rng.uniform_int(0, 12));   // <= 16
    const std::size_t D = 2 + static_cast<std::size_t>(rng.uniform_int(0, 6));    // <= 8
    const std::size_t C = 1 + static_cast<std::size_t>(rng.uniform_int(0, 3));    // <= 4
    const std::size_t H = 3 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    nn::Hyperparams hp;
    hp.T = T;
    hp.D = D;
    hp.hidden_dim = H;
    hp.C = C;
    hp.topk_divisor = 3;
    hp.interp_factor = 4;
    auto params = nn::BranchParams::init(D, H, C, rng);
    auto feats = random_matrix(T, D, rng, -1.0, 1.0);
    VideoLabelVector label(C, 0);
    label[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(C) - 1))] = 1;
    auto mask = supervision::make_pseudo_labels(random_matrix(T, C, rng, 0.0, 1.0), label, 0.5);
    std::optional<nn::DropoutMask> dm;
    if (seed % 2 == 0) dm = nn::draw_dropout_mask(H, hp.dropout_rate, rng);
    const std::size_t k = std::min(hp.topk(), T);

    // Half the cases route the localization loss through temporal alignment.
    std::optional<sampler::TimestampSet> k_set;
    if (seed % 4 < 2) {
      sampler::TimestampSet ks;
      for (std::size_t j = 0; j < T; ++j)
        ks.indices.push_back(static_cast<int>(
            rng.uniform_int(1, static_cast<std::int64_t>(hp.interp_factor * T))));
      std::sort(ks.indices.begin(), ks.indices.end());
      k_set = ks;
    }

    auto loss = [&](const nn::BranchParams& q) {
      auto fr = nn::backbone_forward(feats, q, hp, dm);
      auto cls = supervision::classification_loss(fr.category_probs, label);
      Cas cas_for_loc = fr.cas;
      if (k_set) cas_for_loc = sampler::temporal_align(fr.cas, *k_set, hp.interp_factor, T);
      auto loc = supervision::localization_loss(cas_for_loc, mask);
      return supervision::total_loss(cls.value, loc.value, hp.lambda_balance);
    };
    auto fr = nn::backbone_forward(feats, params, hp, dm);
    auto cls = supervision::classification_loss(fr.category_probs, label);
    Matrix dcas = nn::route_topk_grad(fr.cas, k, cls.grad);
    Matrix dcas_local;
    if (k_set) {
      sampler::AlignCoeffs coeffs;
      auto aligned = sampler::temporal_align(fr.cas, *k_set, hp.interp_factor, T, &coeffs);
      auto loc = supervision::localization_loss(aligned, mask);
      dcas_local = sampler::align_backward(coeffs, loc.grad, T);
    } else {
      dcas_local = supervision::localization_loss(fr.cas, mask).grad;
    }
    for (std::size_t i = 0; i < dcas.size(); ++i)
      dcas.storage()[i] += hp.lambda_balance * dcas_local.storage()[i];
    auto analytic = nn::backbone_backward(feats, params, hp, dm, dcas);

    worst = std::max(worst, nn::grad_check(loss, analytic, params, 1e-5));
    ++cases;
  }
  const double elapsed = seconds_since(t0);
  std::ostringstream ss;
  ss << "gradient suite: " << cases << " instances, max relative error " << worst << " (< 1e-4), "
     << io::fmt(elapsed, "%.2f") << " s (< 10 s)";
  report(1, worst < 1e-4 && elapsed < 10.0, ss.str());
}

// --- criterion 2: sampler mass proportionality ---------------------------

void criterion2() {
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100 && ok; ++seed) {
    Rng rng(2000 + seed);
    const std::size_t len = 20 + static_cast<std::size_t>(rng.uniform_int(0, 60));
    std::vector<double> w(len);
    for (double& v : w) v = rng.uniform(0.05, 3.0);
    auto g = sampler::cumulate(w);
    const std::size_t count = 3 + static_cast<std::size_t>(rng.uniform_int(0, 13));
    auto k = sampler::sample_timestamps(g, count);
    for (std::size_t lo = 1; lo <= len && ok; ++lo) {
      double mass = 0.0;
      for (std::size_t hi = lo; hi <= len; ++hi) {
        mass += w[hi - 1];
        const double share = static_cast<double>(count) * mass / g.total();
        const auto in_block =
            std::count_if(k.indices.begin(), k.indices.end(), [&](int t) {
              return t >= static_cast<int>(lo) && t <= static_cast<int>(hi);
            });
        const double dev = std::abs(static_cast<double>(in_block) - share);
        worst = std::max(worst, dev);
        if (dev > 1.0 + 1e-9) ok = false;
      }
    }
  }
  auto worked = sampler::sample_timestamps(sampler::cumulate({1, 1, 1, 1, 3, 3, 3, 3}), 4);
  const bool worked_ok = worked.indices == std::vector<int>{2, 5, 6, 8};
  std::ostringstream ss;
  ss << "mass proportionality: 100 cases, worst block deviation " << io::fmt(worst, "%.4f")
     << " (<= 1); worked example K=[" << worked.indices[0] << "," << worked.indices[1] << ","
     << worked.indices[2] << "," << worked.indices[3] << "] (expect [2,5,6,8])";
  report(2, ok && worked_ok, ss.str());
}

// --- criterion 3: identity round trip ------------------------------------

void criterion3() {
  bool ok = true;
  int cases = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    Rng rng(3000 + seed);
    const std::size_t T = 4 + static_cast<std::size_t>(rng.uniform_int(0, 20));
    const std::size_t H = 2 * static_cast<std::size_t>(rng.uniform_int(1, 20));  // even
    const std::size_t C = 1 + static_cast<std::size_t>(rng.uniform_int(0, 3));
    nn::Hyperparams hp;
    hp.T = T;
    hp.interp_factor = H;
    hp.eta_sampling = 0.75;
    Matrix feats = random_matrix(T, 5, rng, -2.0, 2.0);
    Cas cas(T, C, rng.uniform01());  // constant aggregated CAS
    VideoLabelVector label(C, 1);
    auto res = sampler::adaptive_sample(feats, cas, label, hp, rng);
    Cas raw = random_matrix(T, C, rng, 0.0, 1.0);
    auto aligned = sampler::temporal_align(raw, res.timestamps, H, T);
    ok = ok && aligned == raw;
    ++cases;
  }
  report(3, ok, "identity round trip: constant aggregated CAS aligns bit-exactly on " +
                    std::to_string(cases) + " seeded cases");
}

// --- criterion 4: uniform and erase limits --------------------------------

void criterion4() {
  bool uniform_ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(4000 + seed);
    const std::size_t T = 6 + static_cast<std::size_t>(rng.uniform_int(0, 24));
    const std::size_t H = 2 + static_cast<std::size_t>(rng.uniform_int(0, 18));
    std::vector<double> m(T);
    for (double& v : m) v = rng.uniform01();
    sampler::AggregatedCas agg;
    agg.values = m;
    auto w = sampler::sampling_weights(agg, 1000.0, nn::SamplingMode::adaptive);
    auto wi = sampler::interpolate_linear(w.values, H);
    auto k = sampler::sample_timestamps(sampler::cumulate(wi), T);
    for (std::size_t j = 1; j <= T; ++j) {
      const double midpoint = (static_cast<double>(j) - 0.5) * static_cast<double>(H);
      if (std::abs(static_cast<double>(k.indices[j - 1]) - midpoint) > 1.0) uniform_ok = false;
    }
  }

  bool erase_ok = true;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(4500 + seed);
    const std::size_t T = 20 + static_cast<std::size_t>(rng.uniform_int(0, 20));
    const std::size_t H = 2 + static_cast<std::size_t>(rng.uniform_int(0, 8));
    std::vector<double> m(T, 0.05);
    const std::size_t p_len = 4 + static_cast<std::size_t>(rng.uniform_int(0, T / 2 - 4));
    const std::size_t p_start =
        1 + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(T - p_len) - 1));
    for (std::size_t t = p_start; t < p_start + p_len; ++t) m[t] = rng.uniform(0.7, 1.0);
    double mean = 0.0;
    for (double v : m) mean += v;
    mean /= static_cast<double>(T);
    const double alpha = 0.7 * mean;
    sampler::AggregatedCas agg;
    agg.values = m;
    auto w = sampler::sampling_weights(agg, 0.75, nn::SamplingMode::erase, nullptr, alpha);
    if (w.fell_back_to_uniform) continue;
    auto wi = sampler::interpolate_linear(w.values, H);
    auto k = sampler::sample_timestamps(sampler::cumulate(wi), T);
    // Source coordinates strictly inside any maximal erased run are off-limits.
    std::vector<std::pair<double, double>> runs;
    std::size_t t = 0;
    while (t < T) {
      if (m[t] > alpha) {
        const std::size_t a = t;
        while (t + 1 < T && m[t + 1] > alpha) ++t;
        runs.emplace_back(static_cast<double>(a + 1), static_cast<double>(t + 1));
      }
      ++t;
    }
    for (int idx : k.indices) {
      const double src = static_cast<double>(idx - 1) * static_cast<double>(T - 1) /
                             static_cast<double>(H * T - 1) +
                         1.0;
      for (const auto& [a, b] : runs)
        if (src > a && src < b) erase_ok = false;
    }
  }
  report(4, uniform_ok && erase_ok,
         std::string("limits: eta=1000 stays within 1 interpolated unit of the midpoint grid (") +
             (uniform_ok ? "ok" : "violated") + "); erase mode never samples inside a plateau (" +
             (erase_ok ? "ok" : "violated") + ")");
}

// --- criterion 5: evaluation oracle ---------------------------------------
// Brute-force reference: counting IoU, naive greedy matcher, explicit PR
// arrays. Written against the spec, not against the library.

namespace oracle {

struct Det {
  int video, s, e;
  double score;
};
struct Gt {
  int video, s, e;
};

double iou(int s1, int e1, int s2, int e2) {
  int inter = 0;
  for (int t = std::min(s1, s2); t <= std::max(e1, e2); ++t)
    if (t >= s1 && t <= e1 && t >= s2 && t <= e2) ++inter;
  return static_cast<double>(inter) /
         static_cast<double>((e1 - s1 + 1) + (e2 - s2 + 1) - inter);
}

double ap(std::vector<Det> dets, const std::vector<Gt>& gts, double thr) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Det& a, const Det& b) { return a.score > b.score; });
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> tp_flags;
  for (const auto& d : dets) {
    double best = -1.0;
    std::size_t best_g = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].video != d.video) continue;
      const double v = iou(d.s, d.e, gts[g].s, gts[g].e);
      if (v >= thr && v > best) {
        best = v;
        best_g = g;
      }
    }
    if (best_g < gts.size()) {
      used[best_g] = true;
      tp_flags.push_back(true);
    } else {
      tp_flags.push_back(false);
    }
  }
  if (gts.empty()) return 0.0;
  std::vector<double> precision, recall;
  int tps = 0;
  for (std::size_t i = 0; i < tp_flags.size(); ++i) {
    if (tp_flags[i]) ++tps;
    precision.push_back(static_cast<double>(tps) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tps) / static_cast<double>(gts.size()));
  }
  double area = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    area += (recall[i] - prev) * precision[i];
    prev = recall[i];
  }
  return area;
}

}  // namespace oracle

void criterion5() {
  bool ok = true;
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(5000 + seed);
    const int n_props = 1 + static_cast<int>(rng.uniform_int(0, 9));
    const int n_gts = static_cast<int>(rng.uniform_int(0, 5));
    std::vector<infer::TaggedProposal> props;
    std::vector<infer::TaggedInstance> gts;
    std::vector<oracle::Det> odets;
    std::vector<oracle::Gt> ogts;
    for (int i = 0; i < n_props; ++i) {
      const int video = static_cast<int>(rng.uniform_int(0, 2));
      const int s = static_cast<int>(rng.uniform_int(1, 50));
      const int e = s + static_cast<int>(rng.uniform_int(0, 15));
      const double score = rng.uniform01();
      props.push_back({video, {s, e, 0, score}});
      odets.push_back({video, s, e, score});
    }
    for (int i = 0; i < n_gts; ++i) {
      const int video = static_cast<int>(rng.uniform_int(0, 2));
      const int s = static_cast<int>(rng.uniform_int(1, 50));
      const int e = s + static_cast<int>(rng.uniform_int(0, 15));
      gts.push_back({video, {s, e, 0}});
      ogts.push_back({video, s, e});
    }
    for (double thr : {0.1, 0.3, 0.5, 0.7}) {
      if (infer::average_precision(props, gts, thr) != oracle::ap(odets, ogts, thr)) {
        ok = false;
        ++mismatches;
      }
    }
  }
  report(5, ok, "evaluation oracle: 200 seeded instances x 4 thresholds, " +
                    std::to_string(mismatches) + " mismatches (exact comparison)");
}

// --- criterion 6: pseudo-label oracle -------------------------------------

void criterion6() {
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(6000 + seed);
    const std::size_t T = 3 + static_cast<std::size_t>(rng.uniform_int(0, 9));
    const std::size_t C = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
    Cas cas = random_matrix(T, C, rng, 0.0, 1.0);
    const double alpha = rng.uniform01();
    // Plant exact-boundary entries.
    cas(rng.uniform_int(0, static_cast<std::int64_t>(T) - 1),
        rng.uniform_int(0, static_cast<std::int64_t>(C) - 1)) = alpha;
    VideoLabelVector label(C);
    for (auto& b : label) b = rng.uniform01() < 0.5 ? 1 : 0;
    auto mask = supervision::make_pseudo_labels(cas, label, alpha);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < C; ++k) {
        const double expect = (cas(t, k) > alpha && label[k] == 1) ? 1.0 : 0.0;
        if (mask.bits(t, k) != expect) ok = false;
      }
  }
  report(6, ok, "pseudo-label oracle: 100 seeded CAS/label/alpha triples, elementwise brute "
                "force incl. boundaries");
}

// --- criteria 7-9: benchmark trends ---------------------------------------

struct SetupRun {
  double mean = 0.0;                        // avg of mAP@{0.3,0.5} over seeds
  std::vector<std::vector<double>> map05;   // per seed, per iteration
};

SetupRun run_setup(char preset, nn::SamplingMode weight_mode) {
  SetupRun out;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    synthgen::DatasetSpec spec;  // bundled benchmark defaults
    spec.seed = seed;
    auto ds = synthgen::generate_dataset(spec);
    cli::RunConfig cfg;
    cli::apply_preset(cfg, preset);
    cfg.sampling_mode = weight_mode;
    cfg.hyper.seed = seed;
    cfg.iou_thresholds = {0.3, 0.5};
    auto opt = cli::to_train_options(cfg, 0);
    auto run = supervision::run_training(ds, opt);
    const auto& rows = run.metrics.back().table.rows;
    out.mean += 0.5 * (rows[0].second + rows[1].second) / 3.0;
    std::vector<double> trace;
    for (const auto& im : run.metrics) trace.push_back(im.table.rows[1].second);
    out.map05.push_back(trace);
  }
  return out;
}

// Means recorded at the first full run of this suite; pinned at +/- 2 mAP
// points. Ordering is the hard gate.
constexpr double kPinnedA = 0.3867, kPinnedB = 0.4006, kPinnedC = 0.7252, kPinnedD = 0.7176,
                 kPinnedE = 0.7235, kPinnedF = 0.8612, kPinnedUniform = 0.7737,
                 kPinnedRandom = 0.8489;
constexpr double kPinTolerance = 0.02;

void criteria789() {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<char, SetupRun> runs;
  for (char p : {'A', 'B', 'C', 'D', 'E', 'F'})
    runs[p] = run_setup(p, nn::SamplingMode::adaptive);
  auto uniform = run_setup('F', nn::SamplingMode::uniform);
  auto random = run_setup('F', nn::SamplingMode::random);
  const double elapsed = seconds_since(t0);

  const double a = runs['A'].mean, b = runs['B'].mean, c = runs['C'].mean, d = runs['D'].mean,
               e = runs['E'].mean, f = runs['F'].mean;
  {
    const bool ordering = f > e && e > b && c > b;
    const bool gap_ab = std::abs(b - a) <= kPinTolerance;
    const bool mutual_vs_self = e >= d;
    const bool pins = std::abs(a - kPinnedA) <= kPinTolerance &&
                      std::abs(b - kPinnedB) <= kPinTolerance &&
                      std::abs(c - kPinnedC) <= kPinTolerance &&
                      std::abs(d - kPinnedD) <= kPinTolerance &&
                      std::abs(e - kPinnedE) <= kPinTolerance &&
                      std::abs(f - kPinnedF) <= kPinTolerance;
    const bool time_ok = elapsed < 900.0;
    std::ostringstream ss;
    ss << "ablation ordering: A=" << io::fmt(a) << " B=" << io::fmt(b) << " C=" << io::fmt(c)
       << " D=" << io::fmt(d) << " E=" << io::fmt(e) << " F=" << io::fmt(f)
       << "; F>E>B " << (f > e && e > b ? "ok" : "violated") << ", C>B "
       << (c > b ? "ok" : "violated") << ", |B-A|=" << io::fmt(std::abs(b - a))
       << " (<= 0.02), E>=D " << (mutual_vs_self ? "ok" : "violated") << ", pinned means "
       << (pins ? "ok" : "drifted") << ", " << io::fmt(elapsed, "%.1f") << " s (< 900)";
    report(7, ordering && gap_ab && mutual_vs_self && pins && time_ok, ss.str());
  }
  {
    bool final_ge = true;
    for (const auto& trace : runs['F'].map05)
      final_ge = final_ge && trace.back() >= trace.front();
    std::vector<double> gains;
    for (std::size_t k = 1; k < runs['F'].map05[0].size(); ++k) {
      double g = 0.0;
      for (const auto& trace : runs['F'].map05) g += (trace[k] - trace[k - 1]) / 3.0;
      gains.push_back(g);
    }
    bool noninc = true;
    for (std::size_t k = 1; k < gains.size(); ++k)
      noninc = noninc && gains[k] <= gains[k - 1];
    std::ostringstream ss;
    ss << "iteration trend: mAP@0.5 final >= initial on all seeds ("
       << (final_ge ? "ok" : "violated") << "); mean gains";
    for (double g : gains) ss << " " << io::fmt(g, "%+.4f");
    ss << " non-increasing (" << (noninc ? "ok" : "violated") << ")";
    report(8, final_ge && noninc, ss.str());
  }
  {
    const bool ordering = f >= random.mean && random.mean >= uniform.mean;
    const bool pins = std::abs(uniform.mean - kPinnedUniform) <= kPinTolerance &&
                      std::abs(random.mean - kPinnedRandom) <= kPinTolerance;
    std::ostringstream ss;
    ss << "sampling-weight trend: adaptive=" << io::fmt(f) << " random=" << io::fmt(random.mean)
       << " uniform=" << io::fmt(uniform.mean) << "; adaptive >= random >= uniform "
       << (ordering ? "ok" : "violated") << ", pinned means " << (pins ? "ok" : "drifted");
    report(9, ordering && pins, ss.str());
  }
}

// --- criterion 10: CLI determinism ----------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion10() {
  const std::string work = "/tmp/ams_acceptance";
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string bin = AMS_CLI_PATH;
  auto shell = [&](const std::string& args) {
    const int status = std::system((bin + " " + args + " > " + work + "/log 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };

  const auto t0 = std::chrono::steady_clock::now();
  bool ok = shell("generate --out " + work + "/bench.json") == 0;
  ok = ok && shell("train --dataset " + work + "/bench.json -o " + work + "/run1") == 0;
  const double train_seconds = seconds_since(t0);
  ok = ok && shell("train --dataset " + work + "/bench.json -o " + work + "/run2") == 0;
  const bool metrics_same =
      ok && slurp(work + "/run1/metrics.csv") == slurp(work + "/run2/metrics.csv") &&
      !slurp(work + "/run1/metrics.csv").empty();
  const bool loss_same =
      ok && slurp(work + "/run1/loss_history.csv") == slurp(work + "/run2/loss_history.csv");
  const bool ckpt_same =
      ok && slurp(work + "/run1/checkpoint.json") == slurp(work + "/run2/checkpoint.json");
  std::ostringstream ss;
  ss << "determinism: default-config cmd_train twice -> metrics "
     << (metrics_same ? "byte-identical" : "DIFFER") << ", loss history "
     << (loss_same ? "byte-identical" : "DIFFER") << ", checkpoint "
     << (ckpt_same ? "byte-identical" : "DIFFER") << "; one run took "
     << io::fmt(train_seconds, "%.1f") << " s (< 120)";
  report(10, ok && metrics_same && loss_same && ckpt_same && train_seconds < 120.0, ss.str());
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criteria789();
  criterion10();
  std::printf("%d of 10 criteria passed (%.1f s total)\n", 10 - g_failures,
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
