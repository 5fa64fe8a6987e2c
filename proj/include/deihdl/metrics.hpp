#pragma once

#include <map>
#include <vector>

#include "deihdl/dataset.hpp"

namespace deihdl {

struct MatchOutcome {
  std::vector<bool> detection_is_tp;       // by input detection index
  std::vector<bool> ground_truth_matched;  // by input ground-truth index
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

/// Greedy confidence-ordered matching for one image and one category.
/// Detections are processed in descending confidence (ties by input order);
/// each takes the unmatched ground truth with the highest IoU at or above
/// the threshold (ties by lowest ground-truth index) and counts as a true
/// positive, else as a false positive. Each ground truth matches at most
/// once.
MatchOutcome match_detections(const std::vector<Detection>& dets,
                              const std::vector<GroundTruthBox>& gts,
                              double iou_threshold);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
};

/// One point per pooled detection, ordered by descending confidence cutoff.
/// Recall is non-decreasing along the list.
struct PrCurve {
  std::vector<PrPoint> points;
};

enum class ApScheme {
  points_101,  // mean over max precision at recall >= r, r = 0.00..1.00 step 0.01
  all_points   // exact area under the monotone-envelope PR curve
};

double average_precision(const PrCurve& curve, ApScheme scheme);

/// The 0.50:0.05:0.95 threshold ladder.
std::vector<double> coco_iou_thresholds();

struct EvalConfig {
  std::vector<double> thresholds = coco_iou_thresholds();  // each in (0, 1]
  ApScheme scheme = ApScheme::points_101;
  int max_detections_per_image = 0;  // 0 = uncapped
};

struct EvalReport {
  std::vector<double> thresholds;
  // AP per category, aligned with `thresholds`. Only categories with at
  // least one ground-truth box appear.
  std::map<CategoryId, std::vector<double>> ap_per_category;
  std::vector<double> map_per_threshold;
  double map50 = 0.0;     // mAP at IoU 0.50; NaN when 0.50 was not evaluated
  double map50_95 = 0.0;  // mean of mAP over all evaluated thresholds
  std::map<CategoryId, PrCurve> pr_curves_50;
};

/// Pools matches per category across all images into one PR curve with a
/// global confidence ordering (ties broken by image id, then per-image input
/// order). Categories absent from the ground truth contribute nothing;
/// categories present in the ground truth but missing from the detections
/// score AP 0. Detections for images outside the dataset are ignored.
EvalReport evaluate(const std::map<ImageId, std::vector<Detection>>& detections,
                    const Dataset& ds, const EvalConfig& cfg);

}  // namespace deihdl
