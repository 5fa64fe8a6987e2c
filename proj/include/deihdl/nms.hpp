#pragma once

#include <vector>

#include "deihdl/dataset.hpp"

namespace deihdl {

/// Plain per-category non-maximum suppression over one image's detections:
/// keeps boxes in descending confidence (ties by input order) and drops any
/// box whose IoU with an already kept box of the same category exceeds the
/// threshold. Baseline for comparison against fusion, nothing more.
std::vector<Detection> nms(const std::vector<Detection>& dets,
                           double iou_threshold);

}  // namespace deihdl
