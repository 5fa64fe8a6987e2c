#include "deihdl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace deihdl {

MatchOutcome match_detections(const std::vector<Detection>& dets,
                              const std::vector<GroundTruthBox>& gts,
                              double iou_threshold) {
  MatchOutcome out;
  out.detection_is_tp.assign(dets.size(), false);
  out.ground_truth_matched.assign(gts.size(), false);

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });

  for (std::size_t d : order) {
    double best_iou = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (out.ground_truth_matched[g]) continue;
      const double v = iou(dets[d].box, gts[g].box);
      if (v >= iou_threshold && v > best_iou) {
        best_iou = v;
        best_gt = g;
      }
    }
    if (best_gt < gts.size()) {
      out.ground_truth_matched[best_gt] = true;
      out.detection_is_tp[d] = true;
      ++out.tp;
    } else {
      ++out.fp;
    }
  }
  out.fn = static_cast<int>(gts.size()) - out.tp;
  return out;
}

double average_precision(const PrCurve& curve, ApScheme scheme) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;
  if (scheme == ApScheme::points_101) {
    // Sweep the recall grid from 1.00 down to 0.00; the qualifying point set
    // {j : recall_j >= r} is a growing suffix of the curve, so one pointer
    // and a running max cover all 101 grid values.
    double sum = 0.0;
    double max_prec = 0.0;
    auto j = static_cast<long>(pts.size()) - 1;
    for (int k = 100; k >= 0; --k) {
      const double r = static_cast<double>(k) / 100.0;
      while (j >= 0 && pts[static_cast<std::size_t>(j)].recall >= r) {
        max_prec = std::max(max_prec, pts[static_cast<std::size_t>(j)].precision);
        --j;
      }
      sum += max_prec;
    }
    return sum / 101.0;
  }
  // all_points: suffix-max envelope, then the exact area under it.
  std::vector<double> envelope(pts.size());
  double m = 0.0;
  for (auto j = static_cast<long>(pts.size()) - 1; j >= 0; --j) {
    m = std::max(m, pts[static_cast<std::size_t>(j)].precision);
    envelope[static_cast<std::size_t>(j)] = m;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    ap += (pts[j].recall - prev_recall) * envelope[j];
    prev_recall = pts[j].recall;
  }
  return ap;
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> out;
  for (int k = 50; k <= 95; k += 5) out.push_back(static_cast<double>(k) / 100.0);
  return out;
}

namespace {

struct PooledEntry {
  double confidence;
  ImageId image;
  int input_order;
  bool is_tp;
};

// Work unit for one (category, image): detections in descending-confidence
// order plus the IoU matrix against that image's ground truths, computed
// once and reused across thresholds.
struct CategoryImage {
  ImageId image = 0;
  std::vector<const Detection*> dets;   // sorted by confidence desc, input order
  std::vector<int> input_orders;        // aligned with dets
  std::size_t gt_count = 0;
  std::vector<std::vector<double>> ious;  // [det][gt]
};

}  // namespace

EvalReport evaluate(const std::map<ImageId, std::vector<Detection>>& detections,
                    const Dataset& ds, const EvalConfig& cfg) {
  if (cfg.thresholds.empty())
    throw std::invalid_argument("evaluate: thresholds must be non-empty");
  for (double t : cfg.thresholds)
    if (!(t > 0.0 && t <= 1.0))
      throw std::invalid_argument("evaluate: thresholds must be in (0,1]");

  // Optional per-image cap across categories, by confidence (ties by input
  // order), before anything else sees the detections.
  std::map<ImageId, std::vector<Detection>> capped_storage;
  const std::map<ImageId, std::vector<Detection>>* dets_by_image = &detections;
  if (cfg.max_detections_per_image > 0) {
    for (const auto& [img, dets] : detections) {
      if (dets.size() <= static_cast<std::size_t>(cfg.max_detections_per_image)) {
        capped_storage[img] = dets;
        continue;
      }
      std::vector<std::size_t> order(dets.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dets[a].confidence > dets[b].confidence;
      });
      order.resize(static_cast<std::size_t>(cfg.max_detections_per_image));
      std::sort(order.begin(), order.end());  // keep input order within the image
      auto& kept = capped_storage[img];
      for (std::size_t k : order) kept.push_back(dets[k]);
    }
    dets_by_image = &capped_storage;
  }

  // Group ground truth and detections per category. Only categories with at
  // least one ground-truth box are evaluated.
  std::map<CategoryId, std::map<ImageId, std::vector<const GroundTruthBox*>>> gt_by_cat;
  for (const auto& [img, boxes] : ds.ground_truth)
    for (const auto& gt : boxes) gt_by_cat[gt.category][img].push_back(&gt);

  std::map<CategoryId, std::map<ImageId, std::vector<std::pair<int, const Detection*>>>>
      det_by_cat;
  for (const auto& [img, dets] : *dets_by_image) {
    if (!ds.images.count(img)) continue;
    for (std::size_t k = 0; k < dets.size(); ++k)
      det_by_cat[dets[k].category][img].push_back({static_cast<int>(k), &dets[k]});
  }

  EvalReport report;
  report.thresholds = cfg.thresholds;
  report.map_per_threshold.assign(cfg.thresholds.size(), 0.0);

  std::size_t threshold50 = cfg.thresholds.size();
  for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti)
    if (std::abs(cfg.thresholds[ti] - 0.50) < 1e-12) threshold50 = ti;

  for (const auto& [cat, gt_images] : gt_by_cat) {
    std::size_t total_gt = 0;
    for (const auto& [img, gts] : gt_images) total_gt += gts.size();

    // Assemble per-image work units with precomputed IoUs.
    std::vector<CategoryImage> work;
    const auto det_it = det_by_cat.find(cat);
    if (det_it != det_by_cat.end()) {
      for (const auto& [img, tagged] : det_it->second) {
        CategoryImage ci;
        ci.image = img;
        std::vector<std::size_t> order(tagged.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) {
                           return tagged[a].second->confidence >
                                  tagged[b].second->confidence;
                         });
        for (std::size_t k : order) {
          ci.dets.push_back(tagged[k].second);
          ci.input_orders.push_back(tagged[k].first);
        }
        const auto gt_img = gt_images.find(img);
        const std::vector<const GroundTruthBox*>* gts =
            gt_img == gt_images.end() ? nullptr : &gt_img->second;
        ci.gt_count = gts ? gts->size() : 0;
        ci.ious.assign(ci.dets.size(), std::vector<double>(ci.gt_count, 0.0));
        for (std::size_t d = 0; d < ci.dets.size(); ++d)
          for (std::size_t g = 0; g < ci.gt_count; ++g)
            ci.ious[d][g] = iou(ci.dets[d]->box, (*gts)[g]->box);
        work.push_back(std::move(ci));
      }
    }

    auto& ap_row = report.ap_per_category[cat];
    ap_row.assign(cfg.thresholds.size(), 0.0);

    for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti) {
      const double threshold = cfg.thresholds[ti];
      std::vector<PooledEntry> pooled;
      for (const auto& ci : work) {
        std::vector<bool> gt_used(ci.gt_count, false);
        for (std::size_t d = 0; d < ci.dets.size(); ++d) {
          double best_iou = 0.0;
          std::size_t best_gt = ci.gt_count;
          for (std::size_t g = 0; g < ci.gt_count; ++g) {
            if (gt_used[g]) continue;
            const double v = ci.ious[d][g];
            if (v >= threshold && v > best_iou) {
              best_iou = v;
              best_gt = g;
            }
          }
          const bool is_tp = best_gt < ci.gt_count;
          if (is_tp) gt_used[best_gt] = true;
          pooled.push_back(
              {ci.dets[d]->confidence, ci.image, ci.input_orders[d], is_tp});
        }
      }
      std::sort(pooled.begin(), pooled.end(),
                [](const PooledEntry& a, const PooledEntry& b) {
                  if (a.confidence != b.confidence) return a.confidence > b.confidence;
                  if (a.image != b.image) return a.image < b.image;
                  return a.input_order < b.input_order;
                });
      PrCurve curve;
      curve.points.reserve(pooled.size());
      int tp_count = 0;
      for (std::size_t k = 0; k < pooled.size(); ++k) {
        if (pooled[k].is_tp) ++tp_count;
        curve.points.push_back(
            {total_gt == 0 ? 0.0
                           : static_cast<double>(tp_count) / static_cast<double>(total_gt),
             static_cast<double>(tp_count) / static_cast<double>(k + 1)});
      }
      ap_row[ti] = average_precision(curve, cfg.scheme);
      if (ti == threshold50) report.pr_curves_50[cat] = std::move(curve);
    }
  }

  const double cat_count = static_cast<double>(report.ap_per_category.size());
  for (std::size_t ti = 0; ti < cfg.thresholds.size(); ++ti) {
    double sum = 0.0;
    for (const auto& [cat, row] : report.ap_per_category) sum += row[ti];
    report.map_per_threshold[ti] = cat_count == 0.0 ? 0.0 : sum / cat_count;
  }
  report.map50 = threshold50 < cfg.thresholds.size()
                     ? report.map_per_threshold[threshold50]
                     : std::numeric_limits<double>::quiet_NaN();
  report.map50_95 =
      std::accumulate(report.map_per_threshold.begin(),
                      report.map_per_threshold.end(), 0.0) /
      static_cast<double>(report.map_per_threshold.size());
  return report;
}

}  // namespace deihdl
