#include "deihdl/dataset.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "deihdl/rng.hpp"

namespace deihdl {

std::size_t Dataset::ground_truth_count() const {
  std::size_t n = 0;
  for (const auto& [img, boxes] : ground_truth) n += boxes.size();
  return n;
}

std::size_t ValidationReport::count(const std::string& kind) const {
  std::size_t n = 0;
  for (const auto& f : findings)
    if (f.kind == kind) ++n;
  return n;
}

std::string ValidationReport::summary(std::size_t max_lines) const {
  std::ostringstream out;
  out << findings.size() << " finding(s)";
  for (std::size_t i = 0; i < findings.size() && i < max_lines; ++i)
    out << "\n  " << findings[i].kind << ": " << findings[i].detail;
  if (findings.size() > max_lines)
    out << "\n  ... and " << (findings.size() - max_lines) << " more";
  return out.str();
}

namespace {

void check_box(const BoundingBox& b, const std::string& where,
               ValidationReport& report) {
  if (!b.valid())
    report.findings.push_back({"invalid box", where + " has inverted or non-finite coordinates"});
}

}  // namespace

ValidationReport validate_dataset(const Dataset& ds,
                                  const std::vector<ModelRun>& runs) {
  ValidationReport report;
  for (const auto& [img, boxes] : ds.ground_truth) {
    if (!ds.images.count(img))
      report.findings.push_back(
          {"unknown image", "ground truth references image " + std::to_string(img)});
    for (std::size_t k = 0; k < boxes.size(); ++k) {
      const auto& gt = boxes[k];
      check_box(gt.box, "ground truth box " + std::to_string(k) + " of image " +
                            std::to_string(img),
                report);
      if (gt.image != img)
        report.findings.push_back(
            {"image key mismatch", "ground-truth box stored under image " +
                                       std::to_string(img) + " claims image " +
                                       std::to_string(gt.image)});
      if (!ds.categories.count(gt.category))
        report.findings.push_back(
            {"unknown category", "ground truth in image " + std::to_string(img) +
                                     " uses category " + std::to_string(gt.category)});
    }
  }
  for (const auto& run : runs) {
    for (const auto& [img, dets] : run.detections) {
      if (!ds.images.count(img))
        report.findings.push_back(
            {"unknown image", run.model_name + " has detections for image " +
                                  std::to_string(img)});
      for (std::size_t k = 0; k < dets.size(); ++k) {
        const auto& d = dets[k];
        if (d.image != img)
          report.findings.push_back(
              {"image key mismatch",
               run.model_name + " detection stored under image " +
                   std::to_string(img) + " claims image " + std::to_string(d.image)});
        if (!(d.confidence >= 0.0 && d.confidence <= 1.0))
          report.findings.push_back(
              {"confidence out of range",
               run.model_name + " image " + std::to_string(img) + " detection " +
                   std::to_string(k) + " has confidence " + std::to_string(d.confidence)});
        check_box(d.box, run.model_name + " detection " + std::to_string(k) +
                             " of image " + std::to_string(img),
                  report);
      }
    }
  }
  return report;
}

Dataset subset_dataset(const Dataset& ds, const std::set<ImageId>& ids,
                       Split split) {
  Dataset out;
  out.split = split;
  out.categories = ds.categories;
  for (ImageId img : ids) {
    if (!ds.images.count(img)) continue;
    out.images.insert(img);
    auto it = ds.ground_truth.find(img);
    if (it != ds.ground_truth.end()) out.ground_truth[img] = it->second;
  }
  return out;
}

ModelRun restrict_run(const ModelRun& run, const std::set<ImageId>& ids) {
  ModelRun out;
  out.model_name = run.model_name;
  for (const auto& [img, dets] : run.detections)
    if (ids.count(img)) out.detections[img] = dets;
  return out;
}

std::pair<Dataset, Dataset> split_by_ratio(const Dataset& ds,
                                           double val_fraction,
                                           std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction <= 1.0))
    throw std::invalid_argument("split_by_ratio: fraction must be in [0,1]");
  std::vector<ImageId> ids(ds.images.begin(), ds.images.end());
  Rng rng = substream(seed, 0x53504C49ull);  // split stream
  for (std::size_t i = ids.size(); i > 1; --i)
    std::swap(ids[i - 1], ids[rng.next_below(i)]);
  const auto val_count =
      static_cast<std::size_t>(static_cast<double>(ids.size()) * val_fraction + 0.5);
  std::set<ImageId> val_ids(ids.begin(), ids.begin() + static_cast<long>(val_count));
  std::set<ImageId> test_ids(ids.begin() + static_cast<long>(val_count), ids.end());
  return {subset_dataset(ds, val_ids, Split::validation),
          subset_dataset(ds, test_ids, Split::test)};
}

}  // namespace deihdl
