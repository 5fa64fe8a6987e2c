#include "deihdl/coco_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace deihdl {

namespace {

using nlohmann::json;

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
}

const json& require_key(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw IngestError(where + ": missing required key '" + key + "'");
  return *it;
}

double require_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw IngestError(where + ": expected a number");
  return v.get<double>();
}

std::int64_t require_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw IngestError(where + ": expected an integer");
  return v.get<std::int64_t>();
}

// COCO [x, y, w, h] -> corner form. Pushes an error string instead of
// throwing so callers can report every bad record at once.
bool read_bbox(const json& v, const std::string& where, BoundingBox& out,
               std::vector<std::string>& errors) {
  if (!v.is_array() || v.size() != 4) {
    errors.push_back(where + ": bbox must be an array of four numbers");
    return false;
  }
  double vals[4];
  for (std::size_t k = 0; k < 4; ++k) {
    if (!v[k].is_number()) {
      errors.push_back(where + ": bbox must be an array of four numbers");
      return false;
    }
    vals[k] = v[k].get<double>();
    if (!std::isfinite(vals[k])) {
      errors.push_back(where + ": bbox has a non-finite value");
      return false;
    }
  }
  if (vals[2] < 0.0 || vals[3] < 0.0) {
    errors.push_back(where + ": bbox has negative width or height");
    return false;
  }
  out = {vals[0], vals[1], vals[0] + vals[2], vals[1] + vals[3]};
  return true;
}

[[noreturn]] void throw_collected(const std::filesystem::path& path,
                                  const std::vector<std::string>& errors) {
  std::ostringstream msg;
  msg << path.string() << ": " << errors.size() << " bad record(s)";
  for (std::size_t k = 0; k < errors.size() && k < 10; ++k) msg << "\n  " << errors[k];
  if (errors.size() > 10) msg << "\n  ... and " << (errors.size() - 10) << " more";
  throw IngestError(msg.str());
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

Dataset load_ground_truth(const std::filesystem::path& path) {
  const json root = parse_file(path);
  const std::string where = path.string();
  if (!root.is_object()) throw IngestError(where + ": top level must be an object");

  Dataset ds;
  const json& images = require_key(root, "images", where);
  if (!images.is_array()) throw IngestError(where + ": 'images' must be an array");
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::string loc = where + ": images[" + std::to_string(k) + "]";
    const ImageId id = require_integer(require_key(images[k], "id", loc), loc);
    if (!ds.images.insert(id).second)
      throw IngestError(loc + ": duplicate image id " + std::to_string(id));
  }

  const json& categories = require_key(root, "categories", where);
  if (!categories.is_array())
    throw IngestError(where + ": 'categories' must be an array");
  for (std::size_t k = 0; k < categories.size(); ++k) {
    const std::string loc = where + ": categories[" + std::to_string(k) + "]";
    ds.categories.insert(require_integer(require_key(categories[k], "id", loc), loc));
  }

  const json& annotations = require_key(root, "annotations", where);
  if (!annotations.is_array())
    throw IngestError(where + ": 'annotations' must be an array");
  std::vector<std::string> errors;
  for (std::size_t k = 0; k < annotations.size(); ++k) {
    const std::string loc = where + ": annotations[" + std::to_string(k) + "]";
    const json& ann = annotations[k];
    GroundTruthBox gt;
    gt.image = require_integer(require_key(ann, "image_id", loc), loc);
    gt.category = require_integer(require_key(ann, "category_id", loc), loc);
    if (!ds.images.count(gt.image)) {
      errors.push_back(loc + ": unknown image_id " + std::to_string(gt.image));
      continue;
    }
    if (!ds.categories.count(gt.category)) {
      errors.push_back(loc + ": unknown category_id " + std::to_string(gt.category));
      continue;
    }
    if (!read_bbox(require_key(ann, "bbox", loc), loc, gt.box, errors)) continue;
    ds.ground_truth[gt.image].push_back(gt);
  }
  if (!errors.empty()) throw_collected(path, errors);
  return ds;
}

ModelRun load_detections(const std::filesystem::path& path,
                         const std::string& model_name) {
  const json root = parse_file(path);
  const std::string where = path.string();
  if (!root.is_array()) throw IngestError(where + ": top level must be an array");

  ModelRun run;
  run.model_name = model_name;
  std::vector<std::string> errors;
  for (std::size_t k = 0; k < root.size(); ++k) {
    const std::string loc = where + ": [" + std::to_string(k) + "]";
    const json& rec = root[k];
    if (!rec.is_object()) {
      errors.push_back(loc + ": record must be an object");
      continue;
    }
    Detection det;
    det.image = require_integer(require_key(rec, "image_id", loc), loc);
    det.category = require_integer(require_key(rec, "category_id", loc), loc);
    det.confidence = require_number(require_key(rec, "score", loc), loc);
    if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
      errors.push_back(loc + ": score " + std::to_string(det.confidence) +
                       " outside [0,1]");
      continue;
    }
    if (!read_bbox(require_key(rec, "bbox", loc), loc, det.box, errors)) continue;
    run.detections[det.image].push_back(det);
  }
  if (!errors.empty()) throw_collected(path, errors);
  return run;
}

void write_ground_truth(const Dataset& ds, const std::filesystem::path& path,
                        double image_extent) {
  json root;
  root["images"] = json::array();
  for (ImageId img : ds.images) {
    json rec{{"id", img}};
    if (image_extent > 0.0) {
      rec["width"] = image_extent;
      rec["height"] = image_extent;
    }
    root["images"].push_back(rec);
  }
  root["categories"] = json::array();
  for (CategoryId cat : ds.categories)
    root["categories"].push_back({{"id", cat}, {"name", "cat_" + std::to_string(cat)}});
  root["annotations"] = json::array();
  std::int64_t next_id = 1;
  for (const auto& [img, boxes] : ds.ground_truth) {
    for (const auto& gt : boxes) {
      root["annotations"].push_back(
          {{"id", next_id++},
           {"image_id", img},
           {"category_id", gt.category},
           {"bbox",
            {round6(gt.box.x_min), round6(gt.box.y_min), round6(gt.box.width()),
             round6(gt.box.height())}},
           {"area", round6(box_area(gt.box))},
           {"iscrowd", 0}});
    }
  }
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot open for writing");
  out << root.dump(1) << "\n";
}

void write_detections(const std::map<ImageId, std::vector<Detection>>& dets,
                      const std::filesystem::path& path) {
  json root = json::array();
  for (const auto& [img, list] : dets) {
    for (const auto& d : list) {
      root.push_back({{"image_id", img},
                      {"category_id", d.category},
                      {"bbox",
                       {round6(d.box.x_min), round6(d.box.y_min),
                        round6(d.box.width()), round6(d.box.height())}},
                      {"score", round6(d.confidence)}});
    }
  }
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot open for writing");
  out << root.dump(1) << "\n";
}

std::set<ImageId> load_image_id_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open file");
  std::set<ImageId> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ids.insert(std::stoll(line));
    } catch (const std::exception&) {
      throw IngestError(path.string() + ":" + std::to_string(line_no) +
                        ": not an image id: '" + line + "'");
    }
  }
  return ids;
}

void write_image_id_list(const std::set<ImageId>& ids,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot open for writing");
  for (ImageId id : ids) out << id << "\n";
}

}  // namespace deihdl
