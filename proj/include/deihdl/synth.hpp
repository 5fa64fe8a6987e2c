#pragma once

#include <cstdint>
#include <vector>

#include "deihdl/dataset.hpp"

namespace deihdl {

/// Detection noise for one synthetic model.
struct NoiseProfile {
  double coord_sigma = 0.0;             // gaussian jitter per corner coordinate
  double miss_rate = 0.0;               // probability a ground-truth box goes undetected
  double false_positive_rate = 0.0;     // per ground-truth slot, probability of a spurious box
  double confidence_calibration = 1.0;  // 1 = confidence equals IoU with the source box
};

struct SyntheticSpec {
  int image_count = 20;
  int category_count = 3;
  int boxes_per_image = 3;
  double image_extent = 640.0;
  double box_size = 64.0;
  std::vector<NoiseProfile> models;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Dataset ground_truth;
  std::vector<ModelRun> runs;
};

/// Test-bed data source. Ground-truth boxes are placed uniformly with
/// bounded pairwise overlap (so single-model fusion never merges them), and
/// each synthetic model re-detects them through its own noise profile:
/// jittered corners, dropped boxes, uniform false positives, and confidence
/// blended between the achieved IoU and uniform noise. Every
/// (model, image, channel) triple draws from its own stream, so changing
/// one noise knob leaves the other channels' draws untouched.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace deihdl
