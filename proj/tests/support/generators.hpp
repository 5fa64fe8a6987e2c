#pragma once

#include <vector>

#include "deihdl/dataset.hpp"
#include "deihdl/rng.hpp"

namespace deihdl::testing {

inline BoundingBox random_box(Rng& rng, double extent = 100.0,
                              double max_side = 40.0) {
  const double w = rng.uniform(0.5, max_side);
  const double h = rng.uniform(0.5, max_side);
  const double x = rng.uniform(0.0, extent - max_side);
  const double y = rng.uniform(0.0, extent - max_side);
  return {x, y, x + w, y + h};
}

inline Detection random_detection(Rng& rng, ImageId image, int category_count,
                                  double extent = 100.0) {
  Detection det;
  det.box = random_box(rng, extent);
  det.category = static_cast<CategoryId>(rng.next_below(
                     static_cast<std::size_t>(category_count))) + 1;
  det.confidence = rng.uniform(0.01, 1.0);
  det.image = image;
  return det;
}

/// Random per-model box lists for one image, as fed to fusion.
inline std::vector<std::vector<Detection>> random_fusion_instance(
    Rng& rng, int max_models, int max_boxes_total, int category_count = 3) {
  const int models = 1 + static_cast<int>(rng.next_below(
                             static_cast<std::size_t>(max_models)));
  std::vector<std::vector<Detection>> per_model(static_cast<std::size_t>(models));
  const int boxes = 1 + static_cast<int>(rng.next_below(
                            static_cast<std::size_t>(max_boxes_total)));
  for (int b = 0; b < boxes; ++b) {
    const auto m = rng.next_below(static_cast<std::size_t>(models));
    per_model[m].push_back(random_detection(rng, 1, category_count));
  }
  return per_model;
}

struct MicroDataset {
  Dataset dataset;
  std::map<ImageId, std::vector<Detection>> detections;
};

/// Small random dataset plus detections: some detections are jittered copies
/// of ground truth, some are pure noise, so TPs and FPs both occur.
inline MicroDataset random_micro_dataset(Rng& rng, int max_images = 3,
                                         int max_categories = 2,
                                         int max_boxes = 20) {
  MicroDataset out;
  const int images = 1 + static_cast<int>(rng.next_below(
                             static_cast<std::size_t>(max_images)));
  const int categories = 1 + static_cast<int>(rng.next_below(
                                 static_cast<std::size_t>(max_categories)));
  for (int c = 1; c <= categories; ++c) out.dataset.categories.insert(c);
  for (int img = 1; img <= images; ++img) out.dataset.images.insert(img);

  const int total = 2 + static_cast<int>(rng.next_below(
                            static_cast<std::size_t>(max_boxes - 1)));
  for (int k = 0; k < total; ++k) {
    const ImageId img = 1 + static_cast<ImageId>(rng.next_below(
                                static_cast<std::size_t>(images)));
    const double kind = rng.next_double();
    if (kind < 0.45) {
      GroundTruthBox gt;
      gt.box = random_box(rng);
      gt.category = static_cast<CategoryId>(rng.next_below(
                        static_cast<std::size_t>(categories))) + 1;
      gt.image = img;
      out.dataset.ground_truth[img].push_back(gt);
      // Usually also emit a detection near this ground truth.
      if (rng.next_double() < 0.8) {
        Detection det;
        const double jitter = rng.uniform(0.0, 6.0);
        det.box = {gt.box.x_min + jitter, gt.box.y_min,
                   gt.box.x_max + jitter, gt.box.y_max};
        det.category = gt.category;
        det.confidence = rng.uniform(0.05, 1.0);
        det.image = img;
        out.detections[img].push_back(det);
      }
    } else {
      out.detections[img].push_back(random_detection(rng, img, categories));
    }
  }
  return out;
}

}  // namespace deihdl::testing
