#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <string>

#include "ams/synthgen.hpp"

using namespace ams;

namespace {

std::string temp_path(const std::string& name) { return "/tmp/ams_synthgen_" + name; }

double project(const Matrix& feats, std::size_t t, const std::vector<double>& proto) {
  double s = 0.0;
  for (std::size_t i = 0; i < feats.cols(); ++i) s += feats(t, i) * proto[i];
  return s;
}

}  // namespace

TEST_CASE("generate_dataset: determinism, labels, and interval invariants") {
  synthgen::DatasetSpec spec;
  spec.num_videos = 20;
  spec.T = 60;
  spec.seed = 123;

  auto a = synthgen::generate_dataset(spec);
  auto b = synthgen::generate_dataset(spec);
  REQUIRE(a.videos.size() == 20);
  for (std::size_t v = 0; v < a.videos.size(); ++v) {
    CHECK(a.videos[v].modalities[0] == b.videos[v].modalities[0]);
    CHECK(a.videos[v].label == b.videos[v].label);
  }

  for (const auto& video : a.videos) {
    REQUIRE(!video.ground_truth.empty());
    std::set<int> label_classes, gt_classes;
    for (std::size_t k = 0; k < video.label.size(); ++k)
      if (video.label[k]) label_classes.insert(static_cast<int>(k));
    int prev_end = 0;
    for (const auto& g : video.ground_truth) {
      CHECK(g.start >= 1);
      CHECK(g.end <= static_cast<int>(spec.T));
      CHECK(g.start <= g.end);
      CHECK(g.start > prev_end);  // pairwise disjoint, chronological
      prev_end = g.end;
      gt_classes.insert(g.category);
    }
    CHECK(label_classes == gt_classes);
  }
}

TEST_CASE("generate_dataset: noise-free signal levels are exactly the gains") {
  synthgen::DatasetSpec spec;
  spec.num_videos = 6;
  spec.T = 50;
  spec.noise_sigma = 0.0;
  spec.core_gain = 3.0;
  spec.flank_gain = 1.0;
  spec.multi_label_prob = 0.0;
  auto ds = synthgen::generate_dataset(spec);
  const auto protos = synthgen::class_prototypes(spec);

  for (const auto& video : ds.videos) {
    std::set<int> action_snippets;
    for (const auto& g : video.ground_truth) {
      const auto len = static_cast<std::size_t>(g.end - g.start + 1);
      const auto core_len = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(spec.core_fraction * double(len))));
      const std::size_t core_start = static_cast<std::size_t>(g.start - 1) + (len - core_len) / 2;
      for (int t = g.start; t <= g.end; ++t) {
        action_snippets.insert(t);
        const auto t0 = static_cast<std::size_t>(t - 1);
        const bool in_core = t0 >= core_start && t0 < core_start + core_len;
        const double proj =
            project(video.modalities[0], t0, protos[static_cast<std::size_t>(g.category)]);
        CHECK(proj == doctest::Approx(in_core ? 3.0 : 1.0).epsilon(1e-9));
      }
    }
    for (int t = 1; t <= static_cast<int>(spec.T); ++t) {
      if (action_snippets.contains(t)) continue;
      for (std::size_t k = 0; k < spec.C; ++k)
        CHECK(project(video.modalities[0], static_cast<std::size_t>(t - 1), protos[k]) ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("generate_dataset: 70/30 split and modality count") {
  synthgen::DatasetSpec spec;
  spec.num_videos = 60;
  spec.T = 40;
  spec.modalities = 2;
  auto ds = synthgen::generate_dataset(spec);
  CHECK(ds.train_indices().size() == 42);
  CHECK(ds.test_indices().size() == 18);
  for (const auto& v : ds.videos) {
    REQUIRE(v.modalities.size() == 2);
    CHECK_FALSE(v.modalities[0] == v.modalities[1]);  // independent noise
  }
  auto [train, test] = synthgen::split_dataset(ds);
  CHECK(train.videos.size() == 42);
  CHECK(test.videos.size() == 18);
}

TEST_CASE("generate_dataset: validation errors") {
  synthgen::DatasetSpec spec;
  spec.core_gain = 0.5;  // must exceed flank_gain
  CHECK_THROWS_AS(synthgen::generate_dataset(spec), ValidationError);

  synthgen::DatasetSpec infeasible;
  infeasible.T = 12;
  infeasible.instances_min = infeasible.instances_max = 9;  // 9 * min_len > T
  CHECK_THROWS_AS(synthgen::generate_dataset(infeasible), ValidationError);
}

TEST_CASE("write/read round trip is lossless") {
  synthgen::DatasetSpec spec;
  spec.num_videos = 5;
  spec.T = 30;
  spec.D = 4;
  spec.seed = 9;
  auto ds = synthgen::generate_dataset(spec);
  ds.videos[2].seconds_per_snippet = 0.533;

  const auto path = temp_path("roundtrip.json");
  synthgen::write_dataset(ds, path);
  auto back = synthgen::read_dataset(path);

  REQUIRE(back.videos.size() == ds.videos.size());
  CHECK(back.spec.seed == spec.seed);
  CHECK(back.spec.T == spec.T);
  for (std::size_t v = 0; v < ds.videos.size(); ++v) {
    CHECK(back.videos[v].id == ds.videos[v].id);
    CHECK(back.videos[v].label == ds.videos[v].label);
    CHECK(back.videos[v].modalities[0] == ds.videos[v].modalities[0]);
    REQUIRE(back.videos[v].ground_truth.size() == ds.videos[v].ground_truth.size());
    for (std::size_t g = 0; g < ds.videos[v].ground_truth.size(); ++g) {
      CHECK(back.videos[v].ground_truth[g].start == ds.videos[v].ground_truth[g].start);
      CHECK(back.videos[v].ground_truth[g].end == ds.videos[v].ground_truth[g].end);
      CHECK(back.videos[v].ground_truth[g].category == ds.videos[v].ground_truth[g].category);
    }
  }
  CHECK(back.videos[2].seconds_per_snippet.has_value());
  CHECK(*back.videos[2].seconds_per_snippet == doctest::Approx(0.533));
  CHECK_FALSE(back.videos[0].seconds_per_snippet.has_value());
  std::remove(path.c_str());
}

TEST_CASE("read_dataset: truncated file is a parse error, not a crash") {
  const auto path = temp_path("truncated.json");
  {
    synthgen::DatasetSpec spec;
    spec.num_videos = 2;
    spec.T = 20;
    synthgen::write_dataset(synthgen::generate_dataset(spec), path);
  }
  std::string text;
  {
    std::ifstream in(path);
    std::getline(in, text);
  }
  {
    std::ofstream out(path);
    out << text.substr(0, text.size() / 2);
  }
  CHECK_THROWS_AS(synthgen::read_dataset(path), DataError);
  std::remove(path.c_str());

  CHECK_THROWS_AS(synthgen::read_dataset("/tmp/ams_does_not_exist.json"), DataError);
}

TEST_CASE("read_dataset: hand-written minimal fixture parses to the expected structure") {
  const auto path = temp_path("fixture.json");
  {
    std::ofstream out(path);
    out << R"({"spec": {"num_videos": 1, "T": 4, "D": 2, "C": 2, "modalities": 1,
                "instances_per_video": [1, 1], "core_fraction": 0.5, "core_gain": 2.0,
                "flank_gain": 1.0, "noise_sigma": 0.0, "multi_label_prob": 0.0, "seed": 5},
       "videos": [{"id": "clip7", "label": [0, 1], "gt": [[2, 3, 1]],
                   "modalities": [[[0.0, 0.5], [1.5, -2.25], [0.125, 3.0], [4.0, 0.0]]],
                   "seconds_per_snippet": 0.5}]})";
  }
  auto ds = synthgen::read_dataset(path);
  REQUIRE(ds.videos.size() == 1);
  const auto& v = ds.videos[0];
  CHECK(v.id == "clip7");
  CHECK(v.label == VideoLabelVector{0, 1});
  REQUIRE(v.ground_truth.size() == 1);
  CHECK(v.ground_truth[0].start == 2);
  CHECK(v.ground_truth[0].end == 3);
  CHECK(v.ground_truth[0].category == 1);
  REQUIRE(v.modalities.size() == 1);
  REQUIRE(v.modalities[0].rows() == 4);
  CHECK(v.modalities[0](1, 1) == doctest::Approx(-2.25));
  CHECK(*v.seconds_per_snippet == doctest::Approx(0.5));
  CHECK(ds.spec.T == 4);
  CHECK(ds.spec.instances_min == 1);
  std::remove(path.c_str());

  // Malformed gt entry reports the offending video.
  {
    std::ofstream out(path);
    out << R"({"spec": {}, "videos": [{"id": "x", "label": [1], "gt": [[2, 3]],
               "modalities": [[[0.0]]]}]})";
  }
  CHECK_THROWS_WITH_AS(synthgen::read_dataset(path), doctest::Contains("video[0]"), DataError);
  std::remove(path.c_str());
}
