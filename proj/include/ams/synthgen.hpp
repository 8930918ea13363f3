#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"
#include "ams/rng.hpp"
#include "ams/types.hpp"

namespace ams::synthgen {

using json = nlohmann::json;

// Synthetic videos plant each action instance with a strongly discriminative
// core (core_gain along the class prototype) flanked by weaker regions
// (flank_gain), over Gaussian background noise. A classifier trained with
// category labels alone latches onto the cores, which is the incompleteness
// the sampler and mutual supervision are meant to fix.
struct DatasetSpec {
  std::size_t num_videos = 60;
  std::size_t T = 100;
  std::size_t D = 16;
  std::size_t C = 4;
  std::size_t modalities = 1;
  std::size_t instances_min = 1;
  std::size_t instances_max = 3;
  double core_fraction = 0.4;
  double core_gain = 3.0;
  double flank_gain = 1.0;
  double noise_sigma = 1.0;
  double multi_label_prob = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    require(num_videos >= 1, "dataset spec: num_videos must be positive");
    require(T >= 4 && D >= 1 && C >= 1, "dataset spec: bad dimensions");
    require(modalities == 1 || modalities == 2, "dataset spec: modalities must be 1 or 2");
    require(instances_min <= instances_max, "dataset spec: bad instance range");
    require(core_fraction > 0.0 && core_fraction < 1.0,
            "dataset spec: core_fraction must be in (0,1)");
    require(core_gain > flank_gain && flank_gain > 0.0,
            "dataset spec: need core_gain > flank_gain > 0");
    require(noise_sigma >= 0.0, "dataset spec: noise_sigma must be >= 0");
    require(multi_label_prob >= 0.0 && multi_label_prob <= 1.0,
            "dataset spec: multi_label_prob must be in [0,1]");
  }
};

struct SyntheticVideo {
  std::string id;
  std::vector<FeatureSequence> modalities;  // each T x D
  VideoLabelVector label;                   // bit k set iff some instance has category k
  std::vector<GroundTruthInstance> ground_truth;
  std::optional<double> seconds_per_snippet;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<SyntheticVideo> videos;

  // Deterministic 70/30 split: within every block of 10 videos the last 3 are
  // the test split.
  bool is_test(std::size_t index) const { return index % 10 >= 7; }

  std::vector<std::size_t> train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (!is_test(i)) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < videos.size(); ++i)
      if (is_test(i)) out.push_back(i);
    return out;
  }
};

// Seeded, roughly orthogonal unit prototype directions, one per class.
inline std::vector<std::vector<double>> class_prototypes(const DatasetSpec& spec) {
  Rng rng(mix_seed(spec.seed, 0xBEEF));
  std::vector<std::vector<double>> protos(spec.C, std::vector<double>(spec.D));
  for (auto& p : protos)
    for (double& v : p) v = rng.normal();
  // Gram-Schmidt while directions remain independent (C <= D).
  for (std::size_t c = 0; c < protos.size(); ++c) {
    for (std::size_t prev = 0; prev < std::min(c, spec.D); ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < spec.D; ++i) dot += protos[c][i] * protos[prev][i];
      for (std::size_t i = 0; i < spec.D; ++i) protos[c][i] -= dot * protos[prev][i];
    }
    double norm = 0.0;
    for (double v : protos[c]) norm += v * v;
    norm = std::sqrt(norm);
    require(norm > 1e-9, "class_prototypes: degenerate direction");
    for (double& v : protos[c]) v /= norm;
  }
  return protos;
}

inline Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  const auto protos = class_prototypes(spec);
  const std::size_t min_len = std::max<std::size_t>(4, spec.T / 12);
  const std::size_t max_len = std::max(min_len, spec.T / 5);
  require(spec.instances_max * min_len <= spec.T,
          "generate_dataset: instance count infeasible for T");

  Dataset ds;
  ds.spec = spec;
  ds.videos.resize(spec.num_videos);
  for (std::size_t v = 0; v < spec.num_videos; ++v) {
    Rng rng(mix_seed(spec.seed, v + 1));
    SyntheticVideo& video = ds.videos[v];
    {
      std::ostringstream oss;
      oss << "v" << (v < 10 ? "00" : v < 100 ? "0" : "") << v;
      video.id = oss.str();
    }
    const auto n_inst =
        static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.instances_min),
                                                 static_cast<std::int64_t>(spec.instances_max)));

    // Video-level category pool: one class, or two with multi_label_prob.
    std::vector<int> pool{static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.C) - 1))};
    if (spec.C > 1 && rng.uniform01() < spec.multi_label_prob) {
      int second = pool[0];
      while (second == pool[0])
        second = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.C) - 1));
      pool.push_back(second);
    }

    // Draw instance lengths (clamped so the remaining instances still fit),
    // then place them left to right with random gaps.
    std::vector<std::size_t> lengths(n_inst);
    std::size_t total_len = 0;
    for (std::size_t i = 0; i < n_inst; ++i) {
      const std::size_t reserve = (n_inst - 1 - i) * min_len;
      const std::size_t budget = spec.T - total_len - reserve;
      const std::size_t hi = std::min(max_len, budget);
      lengths[i] = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(min_len),
                                                            static_cast<std::int64_t>(hi)));
      total_len += lengths[i];
    }
    std::size_t free = spec.T - total_len;
    std::size_t cursor = 0;  // 0-based
    for (std::size_t i = 0; i < n_inst; ++i) {
      // Cap each gap near the per-slot average so instances spread out.
      const std::size_t cap = std::min(free, 2 * (free / (n_inst - i) + 1));
      const auto gap = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cap)));
      cursor += gap;
      free -= gap;
      GroundTruthInstance g;
      g.start = static_cast<int>(cursor) + 1;
      g.end = static_cast<int>(cursor + lengths[i]);
      // Each instance takes one class from the pool; the first instances cover
      // the pool so every labeled class has at least one instance.
      g.category = i < pool.size()
                       ? pool[i]
                       : pool[static_cast<std::size_t>(
                             rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
      video.ground_truth.push_back(g);
      cursor += lengths[i];
    }

    video.label.assign(spec.C, 0);
    for (const auto& g : video.ground_truth) video.label[static_cast<std::size_t>(g.category)] = 1;

    // Signal (shared across modalities) + per-modality independent noise.
    Matrix signal(spec.T, spec.D);
    for (const auto& g : video.ground_truth) {
      const std::size_t len = static_cast<std::size_t>(g.end - g.start) + 1;
      const auto core_len = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                         std::llround(spec.core_fraction *
                                                                      static_cast<double>(len))));
      const std::size_t core_start = static_cast<std::size_t>(g.start - 1) + (len - core_len) / 2;
      for (int t = g.start; t <= g.end; ++t) {
        const auto t0 = static_cast<std::size_t>(t - 1);
        const bool in_core = t0 >= core_start && t0 < core_start + core_len;
        const double gain = in_core ? spec.core_gain : spec.flank_gain;
        const auto& proto = protos[static_cast<std::size_t>(g.category)];
        for (std::size_t i = 0; i < spec.D; ++i) signal(t0, i) += gain * proto[i];
      }
    }
    video.modalities.resize(spec.modalities);
    for (std::size_t m = 0; m < spec.modalities; ++m) {
      Rng noise_rng(mix_seed(spec.seed, (v + 1) * 131 + m + 7));
      Matrix feat = signal;
      if (spec.noise_sigma > 0.0)
        for (double& x : feat.storage()) x += spec.noise_sigma * noise_rng.normal();
      video.modalities[m] = std::move(feat);
    }
  }
  return ds;
}

inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds) {
  Dataset train, test;
  train.spec = ds.spec;
  test.spec = ds.spec;
  for (std::size_t i = 0; i < ds.videos.size(); ++i)
    (ds.is_test(i) ? test : train).videos.push_back(ds.videos[i]);
  return {train, test};
}

inline json spec_to_json(const DatasetSpec& s) {
  return json{{"num_videos", s.num_videos},
              {"T", s.T},
              {"D", s.D},
              {"C", s.C},
              {"modalities", s.modalities},
              {"instances_per_video", {s.instances_min, s.instances_max}},
              {"core_fraction", s.core_fraction},
              {"core_gain", s.core_gain},
              {"flank_gain", s.flank_gain},
              {"noise_sigma", s.noise_sigma},
              {"multi_label_prob", s.multi_label_prob},
              {"seed", s.seed}};
}

inline DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  try {
    if (j.contains("num_videos")) s.num_videos = j.at("num_videos").get<std::size_t>();
    if (j.contains("T")) s.T = j.at("T").get<std::size_t>();
    if (j.contains("D")) s.D = j.at("D").get<std::size_t>();
    if (j.contains("C")) s.C = j.at("C").get<std::size_t>();
    if (j.contains("modalities")) s.modalities = j.at("modalities").get<std::size_t>();
    if (j.contains("instances_per_video")) {
      const auto& r = j.at("instances_per_video");
      require(r.is_array() && r.size() == 2, "dataset spec: instances_per_video must be [min,max]");
      s.instances_min = r[0].get<std::size_t>();
      s.instances_max = r[1].get<std::size_t>();
    }
    if (j.contains("core_fraction")) s.core_fraction = j.at("core_fraction").get<double>();
    if (j.contains("core_gain")) s.core_gain = j.at("core_gain").get<double>();
    if (j.contains("flank_gain")) s.flank_gain = j.at("flank_gain").get<double>();
    if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("multi_label_prob")) s.multi_label_prob = j.at("multi_label_prob").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw DataError(std::string("dataset spec: ") + e.what());
  }
  return s;
}

// File schema: {"spec": {...}, "videos": [{"id", "label": [bits],
// "gt": [[s,e,c],...], "modalities": [[[row floats]...]...],
// "seconds_per_snippet"?}]}. Start/end are 1-based inclusive snippet indices.
inline void write_dataset(const Dataset& ds, const std::string& path) {
  json root;
  root["spec"] = spec_to_json(ds.spec);
  root["videos"] = json::array();
  for (const auto& v : ds.videos) {
    json jv;
    jv["id"] = v.id;
    jv["label"] = v.label;
    json gt = json::array();
    for (const auto& g : v.ground_truth) gt.push_back({g.start, g.end, g.category});
    jv["gt"] = std::move(gt);
    json mods = json::array();
    for (const auto& m : v.modalities) {
      json rows = json::array();
      for (std::size_t t = 0; t < m.rows(); ++t) {
        json row = json::array();
        for (std::size_t i = 0; i < m.cols(); ++i) row.push_back(m(t, i));
        rows.push_back(std::move(row));
      }
      mods.push_back(std::move(rows));
    }
    jv["modalities"] = std::move(mods);
    if (v.seconds_per_snippet) jv["seconds_per_snippet"] = *v.seconds_per_snippet;
    root["videos"].push_back(std::move(jv));
  }
  std::ofstream out(path);
  if (!out) throw DataError("write_dataset: cannot open " + path);
  out << root.dump() << "\n";
  if (!out) throw DataError("write_dataset: write failed for " + path);
}

inline Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("read_dataset: cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("read_dataset: " + path + ": " + e.what());
  }
  Dataset ds;
  try {
    require(root.contains("spec") && root.contains("videos"),
            "read_dataset: missing 'spec' or 'videos'");
    ds.spec = spec_from_json(root.at("spec"));
    std::size_t index = 0;
    for (const auto& jv : root.at("videos")) {
      SyntheticVideo v;
      const std::string where = "video[" + std::to_string(index) + "]";
      if (!jv.contains("id") || !jv.contains("label") || !jv.contains("gt") ||
          !jv.contains("modalities"))
        throw DataError("read_dataset: " + where + ": missing required field");
      v.id = jv.at("id").get<std::string>();
      for (const auto& b : jv.at("label")) v.label.push_back(b.get<int>() ? 1 : 0);
      for (const auto& g : jv.at("gt")) {
        if (!g.is_array() || g.size() != 3)
          throw DataError("read_dataset: " + where + ": gt entries must be [s,e,c]");
        GroundTruthInstance inst{g[0].get<int>(), g[1].get<int>(), g[2].get<int>()};
        if (inst.start > inst.end)
          throw DataError("read_dataset: " + where + ": gt start > end");
        v.ground_truth.push_back(inst);
      }
      for (const auto& jm : jv.at("modalities")) {
        std::vector<std::vector<double>> rows;
        for (const auto& jr : jm) rows.push_back(jr.get<std::vector<double>>());
        v.modalities.push_back(Matrix::from_rows(rows));
        if (!v.modalities.back().all_finite())
          throw DataError("read_dataset: " + where + ": non-finite feature");
      }
      if (jv.contains("seconds_per_snippet"))
        v.seconds_per_snippet = jv.at("seconds_per_snippet").get<double>();
      ds.videos.push_back(std::move(v));
      ++index;
    }
  } catch (const json::exception& e) {
    throw DataError("read_dataset: " + path + ": " + e.what());
  }
  return ds;
}

}  // namespace ams::synthgen
