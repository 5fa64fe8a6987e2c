#include "deihdl/synth.hpp"

#include <algorithm>
#include <stdexcept>

#include "deihdl/rng.hpp"

namespace deihdl {

namespace {

constexpr std::uint64_t kGroundTruthTag = 0x67740000ull;
constexpr std::uint64_t kModelTag = 0x6d640000ull;
constexpr std::uint64_t kMissChannel = 0;
constexpr std::uint64_t kJitterChannel = 1;
constexpr std::uint64_t kFalsePositiveChannel = 2;

void check_spec(const SyntheticSpec& spec) {
  if (spec.image_count < 1 || spec.category_count < 1 || spec.boxes_per_image < 1)
    throw std::invalid_argument("SyntheticSpec: counts must be positive");
  if (!(spec.box_size > 0.0) || !(spec.image_extent >= spec.box_size))
    throw std::invalid_argument("SyntheticSpec: boxes must fit in the image extent");
  for (const auto& m : spec.models) {
    if (m.coord_sigma < 0.0)
      throw std::invalid_argument("NoiseProfile: sigma must be non-negative");
    for (double rate : {m.miss_rate, m.false_positive_rate, m.confidence_calibration})
      if (!(rate >= 0.0 && rate <= 1.0))
        throw std::invalid_argument("NoiseProfile: rates must be in [0,1]");
  }
}

BoundingBox normalized(double x_min, double y_min, double x_max, double y_max) {
  return {std::min(x_min, x_max), std::min(y_min, y_max), std::max(x_min, x_max),
          std::max(y_min, y_max)};
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  check_spec(spec);
  SyntheticData data;
  data.ground_truth.split = Split::full;
  for (int c = 1; c <= spec.category_count; ++c)
    data.ground_truth.categories.insert(c);

  const double span = spec.image_extent - spec.box_size;
  for (int img = 1; img <= spec.image_count; ++img) {
    data.ground_truth.images.insert(img);
    Rng rng = substream(spec.seed, kGroundTruthTag, static_cast<std::uint64_t>(img));
    auto& boxes = data.ground_truth.ground_truth[img];
    for (int b = 0; b < spec.boxes_per_image; ++b) {
      BoundingBox box;
      // Bounded pairwise overlap keeps per-model boxes from fusing with each
      // other at the default match threshold.
      for (int attempt = 0; attempt < 100; ++attempt) {
        const double x = rng.uniform(0.0, span);
        const double y = rng.uniform(0.0, span);
        box = {x, y, x + spec.box_size, y + spec.box_size};
        bool separated = true;
        for (const auto& other : boxes)
          separated = separated && iou(box, other.box) <= 0.3;
        if (separated) break;
      }
      GroundTruthBox gt;
      gt.box = box;
      gt.category = static_cast<CategoryId>(rng.next_below(
                        static_cast<std::size_t>(spec.category_count))) + 1;
      gt.image = img;
      boxes.push_back(gt);
    }
  }

  for (std::size_t m = 0; m < spec.models.size(); ++m) {
    const NoiseProfile& profile = spec.models[m];
    ModelRun run;
    run.model_name = "model_" + std::to_string(m);
    for (int img = 1; img <= spec.image_count; ++img) {
      Rng miss_rng = substream(spec.seed, kModelTag + m,
                               static_cast<std::uint64_t>(img), kMissChannel);
      Rng jitter_rng = substream(spec.seed, kModelTag + m,
                                 static_cast<std::uint64_t>(img), kJitterChannel);
      Rng fp_rng = substream(spec.seed, kModelTag + m,
                             static_cast<std::uint64_t>(img), kFalsePositiveChannel);
      auto& dets = run.detections[img];
      for (const auto& gt : data.ground_truth.ground_truth[img]) {
        const bool missed = miss_rng.next_double() < profile.miss_rate;
        if (missed) continue;
        const double s = profile.coord_sigma;
        const BoundingBox jittered = normalized(
            gt.box.x_min + s * jitter_rng.gaussian(),
            gt.box.y_min + s * jitter_rng.gaussian(),
            gt.box.x_max + s * jitter_rng.gaussian(),
            gt.box.y_max + s * jitter_rng.gaussian());
        const double overlap = iou(jittered, gt.box);
        const double noise = jitter_rng.next_double();
        Detection det;
        det.box = jittered;
        det.category = gt.category;
        det.confidence = std::clamp(profile.confidence_calibration * overlap +
                                        (1.0 - profile.confidence_calibration) * noise,
                                    0.01, 1.0);
        det.image = img;
        dets.push_back(det);
      }
      for (int slot = 0; slot < spec.boxes_per_image; ++slot) {
        if (fp_rng.next_double() >= profile.false_positive_rate) continue;
        const double w = spec.box_size * fp_rng.uniform(0.5, 1.5);
        const double h = spec.box_size * fp_rng.uniform(0.5, 1.5);
        const double x = fp_rng.uniform(0.0, std::max(0.0, spec.image_extent - w));
        const double y = fp_rng.uniform(0.0, std::max(0.0, spec.image_extent - h));
        Detection det;
        det.box = {x, y, x + w, y + h};
        det.category = static_cast<CategoryId>(fp_rng.next_below(
                           static_cast<std::size_t>(spec.category_count))) + 1;
        det.confidence = fp_rng.uniform(0.05, 0.95);
        det.image = img;
        dets.push_back(det);
      }
    }
    data.runs.push_back(std::move(run));
  }
  return data;
}

}  // namespace deihdl
