#pragma once

#include <cstdint>
#include <vector>

#include "ams/errors.hpp"
#include "ams/matrix.hpp"

namespace ams {

// T x D matrix of snippet features.
using FeatureSequence = Matrix;

// T x C per-snippet per-class activation probabilities.
using Cas = Matrix;

// C binary entries; y[k] = 1 iff the video contains category k.
using VideoLabelVector = std::vector<std::uint8_t>;

inline std::vector<std::size_t> positive_classes(const VideoLabelVector& label) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < label.size(); ++k)
    if (label[k]) out.push_back(k);
  return out;
}

// Snippet indices are 1-based and inclusive on both ends, matching the
// dataset file format. tiou() treats [start, end] as the half-open span
// [start, end + 1) in snippet units.
struct ActionProposal {
  int start = 1;
  int end = 1;
  int category = 0;
  double score = 0.0;
};

struct GroundTruthInstance {
  int start = 1;
  int end = 1;
  int category = 0;
};

}  // namespace ams
