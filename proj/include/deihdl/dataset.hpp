#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "deihdl/geometry.hpp"

namespace deihdl {

using ImageId = std::int64_t;
using CategoryId = std::int64_t;

struct Detection {
  BoundingBox box;
  CategoryId category = 0;
  double confidence = 0.0;  // in [0, 1]
  ImageId image = 0;
};

struct GroundTruthBox {
  BoundingBox box;
  CategoryId category = 0;
  ImageId image = 0;
};

/// One detector's full prediction set over a dataset, keyed by image.
struct ModelRun {
  std::string model_name;
  std::map<ImageId, std::vector<Detection>> detections;
};

enum class Split { full, validation, test };

struct Dataset {
  std::set<ImageId> images;
  std::map<ImageId, std::vector<GroundTruthBox>> ground_truth;
  std::set<CategoryId> categories;
  Split split = Split::full;

  std::size_t ground_truth_count() const;
};

/// Invariant check results. Validation reports, it never throws.
struct ValidationReport {
  struct Finding {
    std::string kind;  // e.g. "unknown image", "confidence out of range"
    std::string detail;
  };
  std::vector<Finding> findings;

  bool clean() const { return findings.empty(); }
  std::size_t count(const std::string& kind) const;
  std::string summary(std::size_t max_lines = 10) const;
};

ValidationReport validate_dataset(const Dataset& ds,
                                  const std::vector<ModelRun>& runs);

Dataset subset_dataset(const Dataset& ds, const std::set<ImageId>& ids,
                       Split split);

ModelRun restrict_run(const ModelRun& run, const std::set<ImageId>& ids);

/// Deterministic ratio split: image ids are shuffled with the seeded stream
/// and the first round(val_fraction * n) form the validation split.
std::pair<Dataset, Dataset> split_by_ratio(const Dataset& ds,
                                           double val_fraction,
                                           std::uint64_t seed);

}  // namespace deihdl
