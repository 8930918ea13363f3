#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ams/errors.hpp"
#include "ams/infer.hpp"
#include "ams/io.hpp"
#include "ams/nn.hpp"
#include "ams/supervision.hpp"
#include "ams/synthgen.hpp"

namespace ams::cli {

using json = nlohmann::json;

// Full pipeline configuration. The defaults reproduce the strongest setup (F):
// dual branches, adaptive sampler, mutual supervision, eta=0.75, lambda=1.0,
// beta=0.15, H=20, theta_cls=0.25, three iterations.
struct RunConfig {
  nn::Hyperparams hyper;
  std::string dataset_path;
  std::string output_dir;
  supervision::SupervisionMode supervision_mode = supervision::SupervisionMode::mutual;
  nn::SamplingMode sampling_mode = nn::SamplingMode::adaptive;
  nn::AggregationMode aggregation_mode = nn::AggregationMode::maximum;
  nn::SamplingStrategy sampling_strategy = nn::SamplingStrategy::deterministic;
  supervision::BranchCount branch_count = supervision::BranchCount::dual;
  bool use_sampler = true;
  std::vector<double> iou_thresholds{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
  std::vector<std::pair<double, double>> report_ranges{{0.1, 0.5}, {0.3, 0.7}};
  std::size_t ablate_seeds = 3;

  void validate() const {
    hyper.validate();
    require(!iou_thresholds.empty(), "config: iou_thresholds must be nonempty");
    for (double t : iou_thresholds)
      require(t > 0.0 && t < 1.0, "config: iou thresholds must lie in (0,1)");
    require(ablate_seeds >= 1, "config: ablate_seeds must be >= 1");
  }
};

inline std::string default_output_dir() {
  const char* env = std::getenv("AMS_OUTPUT_DIR");
  return env && *env ? env : ".";
}

// Table-III-style presets.
//   A: one branch, no sampler, no location supervision, single iteration
//   B: dual branches, otherwise as A
//   C: B plus the adaptive sampler
//   D: B plus self-training location supervision, multiple iterations
//   E: B plus mutual location supervision, multiple iterations
//   F: full framework (sampler + mutual supervision, multiple iterations)
inline void apply_preset(RunConfig& cfg, char preset) {
  using supervision::BranchCount;
  using supervision::SupervisionMode;
  cfg.branch_count = preset == 'A' ? BranchCount::one : BranchCount::dual;
  cfg.use_sampler = preset == 'C' || preset == 'F';
  cfg.sampling_mode = nn::SamplingMode::adaptive;
  switch (preset) {
    case 'A':
    case 'B':
    case 'C':
      cfg.supervision_mode = SupervisionMode::none;
      cfg.hyper.num_iterations = 1;
      break;
    case 'D':
      cfg.supervision_mode = SupervisionMode::self;
      cfg.hyper.num_iterations = 3;
      break;
    case 'E':
      cfg.supervision_mode = SupervisionMode::mutual;
      cfg.hyper.num_iterations = 3;
      break;
    case 'F':
      cfg.supervision_mode = SupervisionMode::mutual;
      cfg.hyper.num_iterations = 3;
      break;
    default:
      throw ValidationError(std::string("unknown preset: ") + preset);
  }
}

inline RunConfig config_from_json(const json& j, RunConfig cfg = {}) {
  try {
    if (j.contains("hyperparams")) cfg.hyper = io::hyper_from_json(j.at("hyperparams"), cfg.hyper);
    if (j.contains("dataset")) cfg.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("supervision_mode"))
      cfg.supervision_mode = io::supervision_mode_from(j.at("supervision_mode").get<std::string>());
    if (j.contains("sampling_mode"))
      cfg.sampling_mode = io::sampling_mode_from(j.at("sampling_mode").get<std::string>());
    if (j.contains("aggregation_mode"))
      cfg.aggregation_mode =
          io::aggregation_mode_from(j.at("aggregation_mode").get<std::string>());
    if (j.contains("sampling_strategy"))
      cfg.sampling_strategy = io::strategy_from(j.at("sampling_strategy").get<std::string>());
    if (j.contains("branch_count"))
      cfg.branch_count = io::branch_count_from(j.at("branch_count").get<std::string>());
    if (j.contains("use_sampler")) cfg.use_sampler = j.at("use_sampler").get<bool>();
    if (j.contains("iou_thresholds"))
      cfg.iou_thresholds = j.at("iou_thresholds").get<std::vector<double>>();
    if (j.contains("report_ranges")) {
      cfg.report_ranges.clear();
      for (const auto& r : j.at("report_ranges")) {
        require(r.is_array() && r.size() == 2, "config: report_ranges entries must be [lo,hi]");
        cfg.report_ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
      }
    }
    if (j.contains("ablate_seeds")) cfg.ablate_seeds = j.at("ablate_seeds").get<std::size_t>();
    if (j.contains("preset")) {
      const auto p = j.at("preset").get<std::string>();
      require(p.size() == 1, "config: preset must be a single letter A-F");
      apply_preset(cfg, p[0]);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config: " + path + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

inline supervision::TrainOptions to_train_options(const RunConfig& cfg, std::size_t modality = 0) {
  supervision::TrainOptions opt;
  opt.hyper = cfg.hyper;
  opt.supervision = cfg.supervision_mode;
  opt.sampling_mode = cfg.sampling_mode;
  opt.aggregation_mode = cfg.aggregation_mode;
  opt.strategy = cfg.sampling_strategy;
  opt.branch_count = cfg.branch_count;
  opt.use_sampler = cfg.use_sampler;
  opt.modality = modality;
  opt.iou_thresholds = cfg.iou_thresholds;
  return opt;
}

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir + ": " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Per-modality fusion weights: the first modality carries weight 1.0, any
// second one carries beta.
inline double modality_weight(const nn::Hyperparams& hyper, std::size_t modality) {
  return modality == 0 ? 1.0 : hyper.beta_fusion;
}

inline infer::MapTable attach_ranges(infer::MapTable table, const RunConfig& cfg) {
  infer::MapTable out = std::move(table);
  out.averages.clear();
  for (const auto& r : cfg.report_ranges) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [thr, v] : out.rows)
      if (thr >= r.first - 1e-12 && thr <= r.second + 1e-12) {
        sum += v;
        ++n;
      }
    out.averages.push_back({r, n == 0 ? 0.0 : sum / static_cast<double>(n)});
  }
  return out;
}

}  // namespace detail

// generate: write a synthetic dataset from a spec file (or the default spec).
inline int cmd_generate(const std::optional<std::string>& spec_path, const std::string& out_path) {
  synthgen::DatasetSpec spec;
  if (spec_path) {
    std::ifstream in(*spec_path);
    if (!in) throw ValidationError("generate: cannot open spec file " + *spec_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError("generate: " + *spec_path + ": " + e.what());
    }
    spec = synthgen::spec_from_json(j);
  }
  const auto ds = synthgen::generate_dataset(spec);
  synthgen::write_dataset(ds, out_path);
  std::cout << "wrote " << ds.videos.size() << " videos (T=" << spec.T << ", D=" << spec.D
            << ", C=" << spec.C << ", modalities=" << spec.modalities << ") to " << out_path
            << "\n";
  return 0;
}

// train: full training run per modality; writes checkpoint.json,
// loss_history[_m<k>].csv and metrics[_m<k>].csv into the output directory.
inline int cmd_train(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.dataset_path.empty(), "train: no dataset path configured");
  const auto ds = synthgen::read_dataset(cfg.dataset_path);
  require(!ds.videos.empty(), "train: dataset is empty");
  const std::string out_dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
  detail::ensure_dir(out_dir);

  const std::size_t n_modalities = ds.videos.front().modalities.size();
  io::Checkpoint cp;
  cp.supervision_mode = cfg.supervision_mode;
  cp.sampling_mode = cfg.sampling_mode;
  cp.aggregation_mode = cfg.aggregation_mode;
  cp.sampling_strategy = cfg.sampling_strategy;
  cp.branch_count = cfg.branch_count;
  cp.use_sampler = cfg.use_sampler;

  for (std::size_t m = 0; m < n_modalities; ++m) {
    auto opt = to_train_options(cfg, m);
    auto run = supervision::run_training(ds, opt);
    cp.hyper = run.state.hyper;
    cp.iteration = run.state.iteration;
    cp.models.push_back({run.state.base_params, run.state.supp_params, run.state.base_adam,
                         run.state.supp_adam});
    const std::string suffix = m == 0 ? "" : "_m" + std::to_string(m);
    io::write_loss_history_csv(run.state.loss_history,
                               detail::join(out_dir, "loss_history" + suffix + ".csv"));
    std::vector<supervision::IterationMetrics> with_ranges;
    for (auto& im : run.metrics)
      with_ranges.push_back({im.iteration, detail::attach_ranges(im.table, cfg)});
    io::write_iteration_metrics_csv(with_ranges,
                                    detail::join(out_dir, "metrics" + suffix + ".csv"));
    if (!run.metrics.empty()) {
      const auto& last = with_ranges.back().table;
      std::cout << "modality " << m << ": ";
      for (const auto& [thr, v] : last.rows)
        std::cout << "mAP@" << io::fmt(thr, "%.2f") << "=" << io::fmt(v) << " ";
      std::cout << "\n";
    }
  }
  io::write_checkpoint(cp, detail::join(out_dir, "checkpoint.json"));
  std::cout << "checkpoint written to " << detail::join(out_dir, "checkpoint.json") << "\n";
  return 0;
}

struct EvalResult {
  infer::MapTable table;
  std::vector<std::pair<std::string, std::vector<ActionProposal>>> proposals;
};

// Shared by cmd_eval and the tests: run late fusion + proposal extraction for
// every video in the dataset against a checkpoint.
inline EvalResult evaluate_checkpoint(const io::Checkpoint& cp, const synthgen::Dataset& ds,
                                      const std::vector<double>& thresholds) {
  require(!cp.models.empty(), "eval: checkpoint has no models");
  supervision::TrainOptions opt;
  opt.hyper = cp.hyper;
  opt.supervision = cp.supervision_mode;
  opt.sampling_mode = cp.sampling_mode;
  opt.aggregation_mode = cp.aggregation_mode;
  opt.strategy = cp.sampling_strategy;
  opt.branch_count = cp.branch_count;
  opt.use_sampler = cp.use_sampler;

  EvalResult res;
  std::vector<infer::VideoDetections> dets;
  bool any_gt = false;
  for (std::size_t idx = 0; idx < ds.videos.size(); ++idx) {
    const auto& video = ds.videos[idx];
    require(video.modalities.size() >= cp.models.size(),
            "eval: video " + video.id + " lacks a modality the checkpoint was trained on");
    std::vector<infer::ModalityOutput> mods;
    for (std::size_t m = 0; m < cp.models.size(); ++m) {
      auto mo_opt = opt;
      mo_opt.modality = m;
      mods.push_back(supervision::branch_outputs(video, cp.models[m].base, cp.models[m].supp,
                                                 mo_opt, detail::modality_weight(cp.hyper, m),
                                                 idx));
    }
    const auto ev = supervision::evaluate_video(mods, cp.hyper);
    res.proposals.emplace_back(video.id, ev.proposals);
    dets.push_back({ev.proposals, video.ground_truth});
    any_gt = any_gt || !video.ground_truth.empty();
  }
  if (any_gt) res.table = infer::map_table(dets, thresholds);
  return res;
}

inline int cmd_eval(const std::string& checkpoint_path, const std::string& dataset_path,
                    const RunConfig& cfg) {
  const auto cp = io::read_checkpoint(checkpoint_path);
  const auto ds = synthgen::read_dataset(dataset_path);
  const std::string out_dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
  detail::ensure_dir(out_dir);

  auto res = evaluate_checkpoint(cp, ds, cfg.iou_thresholds);
  io::write_proposals_jsonl(res.proposals, detail::join(out_dir, "proposals.jsonl"));
  if (!res.table.rows.empty()) {
    res.table = detail::attach_ranges(std::move(res.table), cfg);
    io::write_metrics_csv(res.table, detail::join(out_dir, "metrics.csv"));
    for (const auto& [thr, v] : res.table.rows)
      std::cout << "mAP@" << io::fmt(thr, "%.2f") << " = " << io::fmt(v) << "\n";
    for (const auto& [range, v] : res.table.averages)
      std::cout << "AVG(" << io::fmt(range.first, "%.2f") << "-" << io::fmt(range.second, "%.2f")
                << ") = " << io::fmt(v) << "\n";
  } else {
    std::cout << "no ground truth in dataset; wrote proposals only\n";
  }
  return 0;
}

// ablate: run the six Table-III setups plus the sampling-weight modes over S
// seeds; one CSV row per (setup, seed) plus mean rows.
inline int cmd_ablate(const RunConfig& cfg) {
  cfg.validate();
  require(!cfg.dataset_path.empty(), "ablate: no dataset path configured");
  const auto base_ds = synthgen::read_dataset(cfg.dataset_path);
  const std::string out_dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
  detail::ensure_dir(out_dir);

  struct Entry {
    std::string name;
    RunConfig run;
  };
  std::vector<Entry> entries;
  for (char p : {'A', 'B', 'C', 'D', 'E', 'F'}) {
    RunConfig c = cfg;
    apply_preset(c, p);
    entries.push_back({std::string("setup_") + p, c});
  }
  for (auto mode : {nn::SamplingMode::uniform, nn::SamplingMode::random}) {
    RunConfig c = cfg;
    apply_preset(c, 'F');
    c.sampling_mode = mode;
    entries.push_back({std::string("weights_") + io::to_string(mode), c});
  }

  // A dataset whose stored spec reproduces its own contents is a synthetic
  // benchmark and gets regenerated per seed; anything else (e.g. ingested
  // real features) is reused as-is and only the training seed varies.
  bool regenerable = false;
  try {
    const auto probe = synthgen::generate_dataset(base_ds.spec);
    regenerable = probe.videos.size() == base_ds.videos.size();
    for (std::size_t i = 0; regenerable && i < probe.videos.size(); ++i)
      regenerable = probe.videos[i].modalities == base_ds.videos[i].modalities &&
                    probe.videos[i].label == base_ds.videos[i].label;
  } catch (const Error&) {
    regenerable = false;
  }

  const std::string path = detail::join(out_dir, "ablation.csv");
  std::ofstream out(path);
  if (!out) throw DataError("ablate: cannot open " + path);
  out << "setup,seed";
  for (double thr : cfg.iou_thresholds) out << ",mAP@" << io::fmt(thr, "%.2f");
  out << ",avg\n";

  for (const auto& entry : entries) {
    std::vector<double> mean_rows(cfg.iou_thresholds.size(), 0.0);
    double mean_avg = 0.0;
    for (std::size_t s = 0; s < cfg.ablate_seeds; ++s) {
      const std::uint64_t seed = cfg.hyper.seed + s;
      synthgen::Dataset ds = base_ds;
      if (regenerable) {
        auto spec = base_ds.spec;
        spec.seed = seed;
        ds = synthgen::generate_dataset(spec);
      }
      RunConfig run_cfg = entry.run;
      run_cfg.hyper.seed = seed;
      auto opt = to_train_options(run_cfg, 0);
      auto run = supervision::run_training(ds, opt);
      const auto& rows = run.metrics.back().table.rows;
      double avg = 0.0;
      out << entry.name << "," << seed;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        out << "," << io::fmt(rows[i].second);
        avg += rows[i].second / static_cast<double>(rows.size());
        mean_rows[i] += rows[i].second / static_cast<double>(cfg.ablate_seeds);
      }
      out << "," << io::fmt(avg) << "\n";
      mean_avg += avg / static_cast<double>(cfg.ablate_seeds);
    }
    out << entry.name << ",mean";
    for (double v : mean_rows) out << "," << io::fmt(v);
    out << "," << io::fmt(mean_avg) << "\n";
    std::cout << entry.name << " mean avg mAP = " << io::fmt(mean_avg) << "\n";
  }
  std::cout << "ablation table written to " << path << "\n";
  return 0;
}

// dump-cas: per-snippet CSV of both branches' CAS, the fused CAS, and the
// sampler diagnostics (m, w, K) of the first modality, for one video and one
// class channel.
inline int cmd_dump_cas(const std::string& checkpoint_path, const std::string& dataset_path,
                        const std::string& video_id, int class_id, const RunConfig& cfg) {
  const auto cp = io::read_checkpoint(checkpoint_path);
  const auto ds = synthgen::read_dataset(dataset_path);
  const std::string out_dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
  detail::ensure_dir(out_dir);

  std::size_t index = ds.videos.size();
  for (std::size_t i = 0; i < ds.videos.size(); ++i)
    if (ds.videos[i].id == video_id) index = i;
  if (index == ds.videos.size())
    throw DataError("dump-cas: video id '" + video_id + "' not found in dataset");
  const auto& video = ds.videos[index];

  supervision::TrainOptions opt;
  opt.hyper = cp.hyper;
  opt.supervision = cp.supervision_mode;
  opt.sampling_mode = cp.sampling_mode;
  opt.aggregation_mode = cp.aggregation_mode;
  opt.strategy = cp.sampling_strategy;
  opt.branch_count = cp.branch_count;
  opt.use_sampler = cp.use_sampler;

  std::vector<infer::ModalityOutput> mods;
  supervision::SuppInput diag;
  for (std::size_t m = 0; m < cp.models.size(); ++m) {
    auto mo_opt = opt;
    mo_opt.modality = m;
    mods.push_back(supervision::branch_outputs(video, cp.models[m].base, cp.models[m].supp,
                                               mo_opt, detail::modality_weight(cp.hyper, m), index,
                                               m == 0 ? &diag : nullptr));
  }
  const auto ev = supervision::evaluate_video(mods, cp.hyper);
  const std::size_t t_len = ev.final_cas.rows();

  if (class_id < 0) {
    const std::size_t k = std::min(cp.hyper.topk(), t_len);
    const auto probs = nn::topk_mean_aggregate(ev.final_cas, k);
    class_id = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[static_cast<std::size_t>(class_id)]) class_id = static_cast<int>(c);
  }
  require(class_id >= 0 && class_id < static_cast<int>(ev.final_cas.cols()),
          "dump-cas: class id out of range");

  const std::string path = detail::join(out_dir, "cas_" + video_id + ".csv");
  std::ofstream out(path);
  if (!out) throw DataError("dump-cas: cannot open " + path);
  out << "snippet,class,base,supp_aligned,final,m,w,k\n";
  const auto c0 = static_cast<std::size_t>(class_id);
  for (std::size_t t = 0; t < t_len; ++t) {
    out << (t + 1) << "," << class_id << "," << io::fmt(mods[0].cas_base(t, c0)) << ","
        << io::fmt(mods[0].cas_supp(t, c0)) << "," << io::fmt(ev.final_cas(t, c0));
    if (diag.timestamps) {
      out << "," << io::fmt(diag.aggregated.values[t]) << "," << io::fmt(diag.weights.values[t])
          << "," << diag.timestamps->indices[t];
    } else {
      out << ",,,";
    }
    out << "\n";
  }
  std::cout << "CAS dump for " << video_id << " (class " << class_id << ") written to " << path
            << "\n";
  return 0;
}

}  // namespace ams::cli
