#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ams/errors.hpp"
#include "ams/infer.hpp"
#include "ams/matrix.hpp"
#include "ams/nn.hpp"
#include "ams/supervision.hpp"
#include "ams/types.hpp"

namespace ams::io {

using json = nlohmann::json;

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// enum <-> string -------------------------------------------------------

inline const char* to_string(nn::SamplingMode m) {
  switch (m) {
    case nn::SamplingMode::adaptive: return "adaptive";
    case nn::SamplingMode::uniform: return "uniform";
    case nn::SamplingMode::random: return "random";
    case nn::SamplingMode::erase: return "erase";
  }
  return "?";
}
inline const char* to_string(nn::AggregationMode m) {
  switch (m) {
    case nn::AggregationMode::maximum: return "maximum";
    case nn::AggregationMode::average: return "average";
    case nn::AggregationMode::random: return "random";
  }
  return "?";
}
inline const char* to_string(nn::SamplingStrategy s) {
  return s == nn::SamplingStrategy::deterministic ? "deterministic" : "stochastic";
}
inline const char* to_string(supervision::SupervisionMode m) {
  switch (m) {
    case supervision::SupervisionMode::mutual: return "mutual";
    case supervision::SupervisionMode::self: return "self";
    case supervision::SupervisionMode::none: return "none";
  }
  return "?";
}
inline const char* to_string(supervision::BranchCount b) {
  return b == supervision::BranchCount::one ? "one" : "dual";
}

inline nn::SamplingMode sampling_mode_from(const std::string& s) {
  if (s == "adaptive") return nn::SamplingMode::adaptive;
  if (s == "uniform") return nn::SamplingMode::uniform;
  if (s == "random") return nn::SamplingMode::random;
  if (s == "erase") return nn::SamplingMode::erase;
  throw ValidationError("unknown sampling_mode: " + s);
}
inline nn::AggregationMode aggregation_mode_from(const std::string& s) {
  if (s == "maximum") return nn::AggregationMode::maximum;
  if (s == "average") return nn::AggregationMode::average;
  if (s == "random") return nn::AggregationMode::random;
  throw ValidationError("unknown aggregation_mode: " + s);
}
inline nn::SamplingStrategy strategy_from(const std::string& s) {
  if (s == "deterministic") return nn::SamplingStrategy::deterministic;
  if (s == "stochastic") return nn::SamplingStrategy::stochastic;
  throw ValidationError("unknown sampling_strategy: " + s);
}
inline supervision::SupervisionMode supervision_mode_from(const std::string& s) {
  if (s == "mutual") return supervision::SupervisionMode::mutual;
  if (s == "self") return supervision::SupervisionMode::self;
  if (s == "none") return supervision::SupervisionMode::none;
  throw ValidationError("unknown supervision_mode: " + s);
}
inline supervision::BranchCount branch_count_from(const std::string& s) {
  if (s == "one") return supervision::BranchCount::one;
  if (s == "dual") return supervision::BranchCount::dual;
  throw ValidationError("unknown branch_count: " + s);
}

// hyperparams -----------------------------------------------------------

inline json hyper_to_json(const nn::Hyperparams& h) {
  return json{{"lambda_balance", h.lambda_balance},
              {"beta_fusion", h.beta_fusion},
              {"eta_sampling", h.eta_sampling},
              {"interp_factor", h.interp_factor},
              {"theta_cls", h.theta_cls},
              {"theta_loc_factor", h.theta_loc_factor},
              {"T", h.T},
              {"D", h.D},
              {"D_hidden", h.hidden_dim},
              {"C", h.C},
              {"topk_divisor", h.topk_divisor},
              {"dropout_rate", h.dropout_rate},
              {"learning_rate", h.learning_rate},
              {"phase0_epochs", h.phase0_epochs},
              {"phase_epochs", h.phase_epochs},
              {"num_iterations", h.num_iterations},
              {"seed", h.seed}};
}

inline nn::Hyperparams hyper_from_json(const json& j, nn::Hyperparams h = {}) {
  try {
    if (j.contains("lambda_balance")) h.lambda_balance = j.at("lambda_balance").get<double>();
    if (j.contains("beta_fusion")) h.beta_fusion = j.at("beta_fusion").get<double>();
    if (j.contains("eta_sampling")) h.eta_sampling = j.at("eta_sampling").get<double>();
    if (j.contains("interp_factor")) h.interp_factor = j.at("interp_factor").get<std::size_t>();
    if (j.contains("theta_cls")) h.theta_cls = j.at("theta_cls").get<double>();
    if (j.contains("theta_loc_factor"))
      h.theta_loc_factor = j.at("theta_loc_factor").get<double>();
    if (j.contains("T")) h.T = j.at("T").get<std::size_t>();
    if (j.contains("D")) h.D = j.at("D").get<std::size_t>();
    if (j.contains("D_hidden")) h.hidden_dim = j.at("D_hidden").get<std::size_t>();
    if (j.contains("C")) h.C = j.at("C").get<std::size_t>();
    if (j.contains("topk_divisor")) h.topk_divisor = j.at("topk_divisor").get<std::size_t>();
    if (j.contains("dropout_rate")) h.dropout_rate = j.at("dropout_rate").get<double>();
    if (j.contains("learning_rate")) h.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("phase0_epochs")) h.phase0_epochs = j.at("phase0_epochs").get<std::size_t>();
    if (j.contains("phase_epochs")) h.phase_epochs = j.at("phase_epochs").get<std::size_t>();
    if (j.contains("num_iterations"))
      h.num_iterations = j.at("num_iterations").get<std::size_t>();
    if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("hyperparams: ") + e.what());
  }
  return h;
}

// checkpoint ------------------------------------------------------------

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  std::vector<std::vector<double>> rows;
  for (const auto& jr : j) rows.push_back(jr.get<std::vector<double>>());
  return Matrix::from_rows(rows);
}

inline json params_to_json(const nn::BranchParams& p) {
  return json{{"transform_weights", matrix_to_json(p.transform_weights)},
              {"transform_bias", p.transform_bias},
              {"cas_weights", matrix_to_json(p.cas_weights)},
              {"cas_bias", p.cas_bias}};
}

inline nn::BranchParams params_from_json(const json& j) {
  nn::BranchParams p;
  p.transform_weights = matrix_from_json(j.at("transform_weights"));
  p.transform_bias = j.at("transform_bias").get<std::vector<double>>();
  p.cas_weights = matrix_from_json(j.at("cas_weights"));
  p.cas_bias = j.at("cas_bias").get<std::vector<double>>();
  return p;
}

inline json adam_to_json(const nn::AdamState& s) {
  return json{{"first_moment", params_to_json(s.first_moment)},
              {"second_moment", params_to_json(s.second_moment)},
              {"step_count", s.step_count}};
}

inline nn::AdamState adam_from_json(const json& j) {
  nn::AdamState s;
  s.first_moment = params_from_json(j.at("first_moment"));
  s.second_moment = params_from_json(j.at("second_moment"));
  s.step_count = j.at("step_count").get<std::int64_t>();
  return s;
}

struct ModalityModel {
  nn::BranchParams base, supp;
  nn::AdamState base_adam, supp_adam;
};

struct Checkpoint {
  int version = 1;
  nn::Hyperparams hyper;
  supervision::SupervisionMode supervision_mode = supervision::SupervisionMode::mutual;
  nn::SamplingMode sampling_mode = nn::SamplingMode::adaptive;
  nn::AggregationMode aggregation_mode = nn::AggregationMode::maximum;
  nn::SamplingStrategy sampling_strategy = nn::SamplingStrategy::deterministic;
  supervision::BranchCount branch_count = supervision::BranchCount::dual;
  bool use_sampler = true;
  int iteration = 0;
  std::vector<ModalityModel> models;
};

inline void write_checkpoint(const Checkpoint& cp, const std::string& path) {
  json root;
  root["version"] = cp.version;
  root["hyperparams"] = hyper_to_json(cp.hyper);
  root["supervision_mode"] = to_string(cp.supervision_mode);
  root["sampling_mode"] = to_string(cp.sampling_mode);
  root["aggregation_mode"] = to_string(cp.aggregation_mode);
  root["sampling_strategy"] = to_string(cp.sampling_strategy);
  root["branch_count"] = to_string(cp.branch_count);
  root["use_sampler"] = cp.use_sampler;
  root["iteration"] = cp.iteration;
  root["modalities"] = json::array();
  for (const auto& m : cp.models)
    root["modalities"].push_back(json{{"base", params_to_json(m.base)},
                                      {"supp", params_to_json(m.supp)},
                                      {"base_adam", adam_to_json(m.base_adam)},
                                      {"supp_adam", adam_to_json(m.supp_adam)}});
  std::ofstream out(path);
  if (!out) throw DataError("write_checkpoint: cannot open " + path);
  out << root.dump() << "\n";
  if (!out) throw DataError("write_checkpoint: write failed for " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_checkpoint: cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("read_checkpoint: " + path + ": " + e.what());
  }
  Checkpoint cp;
  try {
    cp.version = root.at("version").get<int>();
    if (cp.version != 1)
      throw DataError("read_checkpoint: unsupported version " + std::to_string(cp.version));
    cp.hyper = hyper_from_json(root.at("hyperparams"));
    cp.supervision_mode = supervision_mode_from(root.at("supervision_mode").get<std::string>());
    cp.sampling_mode = sampling_mode_from(root.at("sampling_mode").get<std::string>());
    cp.aggregation_mode = aggregation_mode_from(root.at("aggregation_mode").get<std::string>());
    cp.sampling_strategy = strategy_from(root.at("sampling_strategy").get<std::string>());
    cp.branch_count = branch_count_from(root.at("branch_count").get<std::string>());
    cp.use_sampler = root.at("use_sampler").get<bool>();
    cp.iteration = root.at("iteration").get<int>();
    for (const auto& jm : root.at("modalities")) {
      ModalityModel m;
      m.base = params_from_json(jm.at("base"));
      m.supp = params_from_json(jm.at("supp"));
      m.base_adam = adam_from_json(jm.at("base_adam"));
      m.supp_adam = adam_from_json(jm.at("supp_adam"));
      cp.models.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw DataError("read_checkpoint: " + path + ": " + e.what());
  }
  return cp;
}

// CSV exports -----------------------------------------------------------

inline void write_loss_history_csv(const std::vector<supervision::LossRecord>& records,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_loss_history_csv: cannot open " + path);
  out << "epoch,phase,L_basic,L_local,L_total\n";
  for (const auto& r : records)
    out << r.epoch << "," << supervision::phase_name(r.phase) << "," << fmt(r.l_basic, "%.9f")
        << "," << fmt(r.l_local, "%.9f") << "," << fmt(r.l_total, "%.9f") << "\n";
}

// Rows (iou_threshold, mAP) followed by AVG(lo-hi) rows; the training variant
// prefixes an iteration column.
inline void write_metrics_csv(const infer::MapTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_metrics_csv: cannot open " + path);
  out << "iou_threshold,mAP\n";
  for (const auto& [thr, v] : table.rows) out << fmt(thr, "%.2f") << "," << fmt(v) << "\n";
  for (const auto& [range, v] : table.averages)
    out << "AVG(" << fmt(range.first, "%.2f") << "-" << fmt(range.second, "%.2f") << ")," << fmt(v)
        << "\n";
}

inline void write_iteration_metrics_csv(const std::vector<supervision::IterationMetrics>& metrics,
                                        const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_iteration_metrics_csv: cannot open " + path);
  out << "iteration,iou_threshold,mAP\n";
  for (const auto& im : metrics) {
    for (const auto& [thr, v] : im.table.rows)
      out << im.iteration << "," << fmt(thr, "%.2f") << "," << fmt(v) << "\n";
    for (const auto& [range, v] : im.table.averages)
      out << im.iteration << ",AVG(" << fmt(range.first, "%.2f") << "-"
          << fmt(range.second, "%.2f") << ")," << fmt(v) << "\n";
  }
}

// One JSON record per line: video_id, start, end, class, score.
inline void write_proposals_jsonl(
    const std::vector<std::pair<std::string, std::vector<ActionProposal>>>& per_video,
    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("write_proposals_jsonl: cannot open " + path);
  for (const auto& [video_id, proposals] : per_video)
    for (const auto& p : proposals) {
      json rec{{"video_id", video_id},
               {"start", p.start},
               {"end", p.end},
               {"class", p.category},
               {"score", p.score}};
      out << rec.dump() << "\n";
    }
}

}  // namespace ams::io
