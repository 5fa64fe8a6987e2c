#pragma once

#include <map>
#include <utility>
#include <vector>

#include "deihdl/dataset.hpp"

namespace deihdl {

enum class ConfidenceRescale {
  min_count_over_models,  // conf * min(T, N) / N
  count_over_models,      // conf * T / N, capped at 1
  none
};

struct WbfConfig {
  double iou_match_threshold = 0.55;  // in (0, 1]
  double skip_score_threshold = 0.0;  // boxes with confidence below are dropped
  bool category_agnostic_clustering = true;
  ConfidenceRescale confidence_rescale = ConfidenceRescale::min_count_over_models;
};

/// One input box tagged with its source model and weighted score.
struct WeightedBox {
  Detection detection;
  int model_index = 0;
  int input_order = 0;  // position within the source model's list, for tie-breaks
  double effective_score = 0.0;  // detection.confidence * model weight
};

struct FusedBox {
  BoundingBox box;
  CategoryId category = 0;
  double confidence = 0.0;
  int member_count = 0;  // T
};

/// WBF working state: the member list plus the running fused box, recomputed
/// on every insertion so that later boxes are matched against the current
/// weighted average rather than the first member.
class Cluster {
 public:
  explicit Cluster(WeightedBox first);
  void insert(WeightedBox member);
  const std::vector<WeightedBox>& members() const { return members_; }
  const FusedBox& fused() const { return fused_; }

 private:
  std::vector<WeightedBox> members_;
  FusedBox fused_;
};

/// Score-weighted mean of the member boxes: each coordinate is
/// sum(score_i * coord_i) / sum(score_i). The returned confidence is the
/// pre-rescale value sum(score_i) / T clamped to [0, 1]; the final rescale
/// happens when the cluster is emitted. Rejects empty clusters and clusters
/// whose scores are all zero.
FusedBox fuse_cluster(const std::vector<WeightedBox>& members);

/// Per-category score = sum of member effective scores. Returns the arg-max
/// category (ties go to the smallest id) and the full score map.
std::pair<CategoryId, std::map<CategoryId, double>> resolve_category(
    const std::vector<WeightedBox>& members);

double rescale_confidence(double pre_conf, int member_count, int model_count,
                          ConfidenceRescale mode);

/// Greedy clustering fusion. Boxes are processed by descending effective
/// score (ties by model index, then input order); each joins the first
/// cluster whose current fused box has IoU strictly above the match
/// threshold, else starts a new cluster. Boxes whose effective score is zero
/// are discarded up front: they cannot move a weighted mean and would only
/// distort member counts. Returns fused boxes in cluster-creation order.
std::vector<FusedBox> weighted_boxes_fusion(
    const std::vector<std::vector<Detection>>& per_model_boxes,
    const std::vector<double>& model_weights, const WbfConfig& cfg);

/// Fused boxes as plain detections, for evaluation and serialization.
std::map<ImageId, std::vector<Detection>> to_detections(
    const std::map<ImageId, std::vector<FusedBox>>& fused);

}  // namespace deihdl
