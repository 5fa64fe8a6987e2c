#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deihdl/coco_io.hpp"
#include "deihdl/de.hpp"
#include "deihdl/metrics.hpp"
#include "deihdl/synth.hpp"
#include "deihdl/wbf.hpp"

namespace deihdl {

/// Result of one optimization run: the weights, how they scored, and a
/// fingerprint of the configuration that produced them. The creation
/// timestamp is persisted in the side metadata file, never in the profile
/// itself, so profiles from identical seeded runs are byte-identical.
struct WeightProfile {
  std::vector<std::string> model_names;
  std::vector<double> weights;
  double fitness = 0.0;
  std::string fitness_metric;
  std::string config_fingerprint;
  std::string created_at;  // RFC 3339, UTC
};

std::string de_config_fingerprint(const DeConfig& de, const WbfConfig& wbf);

void write_weight_profile(const WeightProfile& profile,
                          const std::filesystem::path& profile_path,
                          const std::filesystem::path& meta_path,
                          double wallclock_s);
WeightProfile load_weight_profile(const std::filesystem::path& path);

/// Validation/test assignment: explicit id lists win over the ratio split.
struct SplitSpec {
  double validation_fraction = 0.5;
  std::optional<std::uint64_t> seed;  // defaults to the optimizer seed
  std::optional<std::filesystem::path> validation_ids_file;
  std::optional<std::filesystem::path> test_ids_file;
};

std::pair<Dataset, Dataset> assign_split(const Dataset& full, const SplitSpec& split,
                                         std::uint64_t default_seed);

struct SynthOptions {
  SyntheticSpec spec;
  std::filesystem::path out_dir;
};
void cmd_synth(const SynthOptions& opts);

struct FuseOptions {
  std::vector<std::filesystem::path> detection_files;
  std::vector<double> weights;  // ignored when a profile is given
  std::optional<std::filesystem::path> profile;
  WbfConfig wbf;
  std::string method = "wbf";  // "wbf" or "nms"
  double nms_iou_threshold = 0.5;
  std::filesystem::path out_file;
};
void cmd_fuse(const FuseOptions& opts);

struct EvalOptions {
  std::filesystem::path ground_truth;
  std::vector<std::filesystem::path> detection_files;
  std::filesystem::path out_dir;
  EvalConfig eval;
  std::optional<std::filesystem::path> image_ids_file;
};
void cmd_eval(const EvalOptions& opts);

struct OptimizeOptions {
  std::filesystem::path ground_truth;
  std::vector<std::filesystem::path> detection_files;
  std::filesystem::path out_dir;
  DeConfig de;
  WbfConfig wbf;
  SplitSpec split;
  int workers = 1;
  bool include_one_hot_seeding = false;
};

struct OptimizeOutcome {
  WeightProfile profile;
  ConvergenceHistory history;
  double wallclock_s = 0.0;
};
OptimizeOutcome cmd_optimize(const OptimizeOptions& opts);

struct SweepOptions {
  OptimizeOptions base;
  std::string axis;  // "np" or "generations"
  std::vector<int> values;
};
void cmd_sweep(const SweepOptions& opts);

struct BenchOptions {
  std::filesystem::path out_dir;
  std::vector<int> box_counts = {250, 500, 1000, 2000};
  int generations_base = 12;
  int population_base = 8;
  int repeats = 3;
  std::uint64_t seed = 1;
};
void cmd_bench(const BenchOptions& opts);

}  // namespace deihdl
