#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "deihdl/dataset.hpp"

namespace deihdl {

/// Malformed input file; the message names the file and the offending
/// records.
class IngestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses COCO annotation JSON (images, annotations with bbox [x,y,w,h],
/// categories) into a Dataset, converting boxes to corner form.
Dataset load_ground_truth(const std::filesystem::path& path);

/// Parses a COCO results array [{image_id, category_id, bbox, score}].
ModelRun load_detections(const std::filesystem::path& path,
                         const std::string& model_name);

void write_ground_truth(const Dataset& ds, const std::filesystem::path& path,
                        double image_extent = 0.0);

/// COCO results array. bbox values and scores are rounded to six fractional
/// digits so a write/load round trip reproduces the in-memory set to 1e-6.
void write_detections(const std::map<ImageId, std::vector<Detection>>& dets,
                      const std::filesystem::path& path);

std::set<ImageId> load_image_id_list(const std::filesystem::path& path);
void write_image_id_list(const std::set<ImageId>& ids,
                         const std::filesystem::path& path);

}  // namespace deihdl
