#include "deihdl/wbf.hpp"

#include <algorithm>
#include <stdexcept>

namespace deihdl {

Cluster::Cluster(WeightedBox first) {
  members_.push_back(std::move(first));
  fused_ = fuse_cluster(members_);
}

void Cluster::insert(WeightedBox member) {
  members_.push_back(std::move(member));
  fused_ = fuse_cluster(members_);
}

FusedBox fuse_cluster(const std::vector<WeightedBox>& members) {
  if (members.empty()) throw std::invalid_argument("fuse_cluster: empty cluster");
  if (members.size() == 1) {
    // Exact identity for singletons; the weighted mean would reintroduce
    // rounding through score * coord / score.
    const WeightedBox& m = members.front();
    if (m.effective_score <= 0.0)
      throw std::invalid_argument("fuse_cluster: all effective scores are zero");
    return {m.detection.box, m.detection.category,
            std::clamp(m.effective_score, 0.0, 1.0), 1};
  }
  double score_sum = 0.0;
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  for (const auto& m : members) {
    if (m.effective_score < 0.0)
      throw std::invalid_argument("fuse_cluster: negative effective score");
    score_sum += m.effective_score;
    x_min += m.effective_score * m.detection.box.x_min;
    y_min += m.effective_score * m.detection.box.y_min;
    x_max += m.effective_score * m.detection.box.x_max;
    y_max += m.effective_score * m.detection.box.y_max;
  }
  if (score_sum <= 0.0)
    throw std::invalid_argument("fuse_cluster: all effective scores are zero");
  FusedBox out;
  out.box = {x_min / score_sum, y_min / score_sum, x_max / score_sum,
             y_max / score_sum};
  out.category = resolve_category(members).first;
  out.confidence =
      std::clamp(score_sum / static_cast<double>(members.size()), 0.0, 1.0);
  out.member_count = static_cast<int>(members.size());
  return out;
}

std::pair<CategoryId, std::map<CategoryId, double>> resolve_category(
    const std::vector<WeightedBox>& members) {
  if (members.empty())
    throw std::invalid_argument("resolve_category: empty cluster");
  std::map<CategoryId, double> scores;
  for (const auto& m : members) scores[m.detection.category] += m.effective_score;
  // Ascending id order plus strict improvement makes ties land on the
  // smallest category id.
  CategoryId best = scores.begin()->first;
  double best_score = scores.begin()->second;
  for (const auto& [cat, score] : scores) {
    if (score > best_score) {
      best = cat;
      best_score = score;
    }
  }
  return {best, scores};
}

double rescale_confidence(double pre_conf, int member_count, int model_count,
                          ConfidenceRescale mode) {
  if (member_count < 1 || model_count < 1)
    throw std::invalid_argument("rescale_confidence: counts must be positive");
  switch (mode) {
    case ConfidenceRescale::min_count_over_models:
      return pre_conf * (static_cast<double>(std::min(member_count, model_count)) /
                         static_cast<double>(model_count));
    case ConfidenceRescale::count_over_models:
      return std::min(1.0, pre_conf * (static_cast<double>(member_count) /
                                       static_cast<double>(model_count)));
    case ConfidenceRescale::none:
      return pre_conf;
  }
  return pre_conf;
}

std::vector<FusedBox> weighted_boxes_fusion(
    const std::vector<std::vector<Detection>>& per_model_boxes,
    const std::vector<double>& model_weights, const WbfConfig& cfg) {
  if (per_model_boxes.empty())
    throw std::invalid_argument("weighted_boxes_fusion: needs at least one model");
  if (per_model_boxes.size() != model_weights.size())
    throw std::invalid_argument(
        "weighted_boxes_fusion: box lists and weights have different lengths");
  if (!(cfg.iou_match_threshold > 0.0 && cfg.iou_match_threshold <= 1.0))
    throw std::invalid_argument(
        "weighted_boxes_fusion: iou_match_threshold must be in (0,1]");
  if (!(cfg.skip_score_threshold >= 0.0 && cfg.skip_score_threshold <= 1.0))
    throw std::invalid_argument(
        "weighted_boxes_fusion: skip_score_threshold must be in [0,1]");
  bool any_positive = false;
  for (double w : model_weights) {
    if (w < 0.0)
      throw std::invalid_argument("weighted_boxes_fusion: negative model weight");
    if (w > 0.0) any_positive = true;
  }
  if (!any_positive)
    throw std::invalid_argument("weighted_boxes_fusion: all model weights are zero");

  const int model_count = static_cast<int>(per_model_boxes.size());
  std::vector<WeightedBox> boxes;
  for (int m = 0; m < model_count; ++m) {
    for (std::size_t k = 0; k < per_model_boxes[m].size(); ++k) {
      const Detection& det = per_model_boxes[m][k];
      if (det.confidence < cfg.skip_score_threshold) continue;
      const double eff = det.confidence * model_weights[m];
      if (eff <= 0.0) continue;
      boxes.push_back({det, m, static_cast<int>(k), eff});
    }
  }
  std::sort(boxes.begin(), boxes.end(),
            [](const WeightedBox& a, const WeightedBox& b) {
              if (a.effective_score != b.effective_score)
                return a.effective_score > b.effective_score;
              if (a.model_index != b.model_index)
                return a.model_index < b.model_index;
              return a.input_order < b.input_order;
            });

  std::vector<Cluster> clusters;
  for (auto& wb : boxes) {
    Cluster* home = nullptr;
    for (auto& c : clusters) {
      if (!cfg.category_agnostic_clustering &&
          c.fused().category != wb.detection.category)
        continue;
      if (iou(c.fused().box, wb.detection.box) > cfg.iou_match_threshold) {
        home = &c;
        break;
      }
    }
    if (home)
      home->insert(std::move(wb));
    else
      clusters.emplace_back(std::move(wb));
  }

  std::vector<FusedBox> out;
  out.reserve(clusters.size());
  for (const auto& c : clusters) {
    FusedBox f = c.fused();
    f.confidence = rescale_confidence(f.confidence, f.member_count, model_count,
                                      cfg.confidence_rescale);
    out.push_back(f);
  }
  return out;
}

std::map<ImageId, std::vector<Detection>> to_detections(
    const std::map<ImageId, std::vector<FusedBox>>& fused) {
  std::map<ImageId, std::vector<Detection>> out;
  for (const auto& [img, boxes] : fused) {
    auto& dets = out[img];
    dets.reserve(boxes.size());
    for (const auto& f : boxes)
      dets.push_back({f.box, f.category, f.confidence, img});
  }
  return out;
}

}  // namespace deihdl
