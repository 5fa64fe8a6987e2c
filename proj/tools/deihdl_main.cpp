#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deihdl/commands.hpp"

namespace {

using namespace deihdl;

// Raw flag holders; values are applied to the option structs after parsing.
struct WbfFlags {
  bool per_category = false;
  std::string rescale = "min-tn";
};

struct SplitFlags {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string val_ids;
  std::string test_ids;
};

ConfidenceRescale parse_rescale(const std::string& name) {
  if (name == "min-tn") return ConfidenceRescale::min_count_over_models;
  if (name == "tn") return ConfidenceRescale::count_over_models;
  if (name == "none") return ConfidenceRescale::none;
  throw CLI::ValidationError("--rescale", "expected one of min-tn|tn|none");
}

FitnessMetric parse_metric(const std::string& name) {
  if (name == "map50") return FitnessMetric::map50;
  if (name == "map5095") return FitnessMetric::map50_95;
  throw CLI::ValidationError("--metric", "expected map50 or map5095");
}

void add_wbf_flags(CLI::App* cmd, WbfConfig& wbf, WbfFlags& flags) {
  cmd->add_option("--iou-match-thr", wbf.iou_match_threshold,
                  "IoU above which a box joins an existing cluster")
      ->check(CLI::Range(1e-9, 1.0));
  cmd->add_option("--skip-thr", wbf.skip_score_threshold,
                  "drop boxes with confidence below this before clustering")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_flag("--per-category", flags.per_category,
                "cluster only boxes of the same category");
  cmd->add_option("--rescale", flags.rescale, "confidence rescale: min-tn|tn|none");
}

void apply_wbf_flags(const WbfFlags& flags, WbfConfig& wbf) {
  wbf.category_agnostic_clustering = !flags.per_category;
  wbf.confidence_rescale = parse_rescale(flags.rescale);
}

void add_de_flags(CLI::App* cmd, DeConfig& de, std::string& metric) {
  cmd->add_option("--np", de.population_size, "population size");
  cmd->add_option("--generations", de.generations, "number of generations");
  cmd->add_option("--seed", de.seed, "master seed");
  cmd->add_option("--metric", metric, "fitness metric: map50|map5095");
  cmd->add_option("--tau1", de.tau1, "scale-factor bump probability");
  cmd->add_option("--tau2", de.tau2, "golden-section branch threshold");
  cmd->add_option("--tau3", de.tau3, "hill-climb branch threshold");
  cmd->add_option("--local-search-budget", de.local_search_budget,
                  "extra fitness calls per generation for scale-factor search");
  cmd->add_flag("--strict-reevaluation", de.strict_reevaluation,
                "re-evaluate target fitness every generation instead of caching");
}

void add_split_flags(CLI::App* cmd, SplitSpec& split, SplitFlags& flags) {
  cmd->add_option("--split-ratio", split.validation_fraction,
                  "fraction of images assigned to the validation split")
      ->check(CLI::Range(0.0, 1.0));
  flags.seed_opt = cmd->add_option("--split-seed", flags.seed,
                                   "seed for the ratio split (defaults to --seed)");
  cmd->add_option("--val-ids", flags.val_ids,
                  "file with validation image ids, one per line");
  cmd->add_option("--test-ids", flags.test_ids,
                  "file with test image ids, one per line");
}

void apply_split_flags(const SplitFlags& flags, SplitSpec& split) {
  if (flags.seed_opt && flags.seed_opt->count() > 0) split.seed = flags.seed;
  if (!flags.val_ids.empty()) split.validation_ids_file = flags.val_ids;
  if (!flags.test_ids.empty()) split.test_ids_file = flags.test_ids;
}

NoiseProfile parse_noise_profile(const std::string& text) {
  NoiseProfile profile;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--model", "expected key=value pairs");
    const std::string key = item.substr(0, eq);
    const double value = std::stod(item.substr(eq + 1));
    if (key == "sigma") profile.coord_sigma = value;
    else if (key == "miss") profile.miss_rate = value;
    else if (key == "fp") profile.false_positive_rate = value;
    else if (key == "calib") profile.confidence_calibration = value;
    else throw CLI::ValidationError("--model", "unknown key '" + key + "'");
  }
  return profile;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection-ensemble fusion: weighted boxes fusion with "
               "differential-evolution weight optimization"};
  app.require_subcommand(1);

  // synth
  SynthOptions synth;
  std::string synth_out = "synth_out";
  std::vector<std::string> model_specs;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--images", synth.spec.image_count, "image count");
  synth_cmd->add_option("--categories", synth.spec.category_count, "category count");
  synth_cmd->add_option("--boxes-per-image", synth.spec.boxes_per_image,
                        "ground-truth boxes per image");
  synth_cmd->add_option("--image-extent", synth.spec.image_extent, "image side length");
  synth_cmd->add_option("--box-size", synth.spec.box_size,
                        "ground-truth box side length");
  synth_cmd->add_option("--seed", synth.spec.seed, "master seed");
  synth_cmd->add_option("--model", model_specs,
                        "noise profile 'sigma=S,miss=M,fp=F,calib=C' (repeatable)");
  synth_cmd->add_option("--out-dir", synth_out, "output directory");

  // fuse
  FuseOptions fuse;
  WbfFlags fuse_wbf_flags;
  std::string fuse_out = "fused.json";
  std::string fuse_profile;
  std::vector<std::string> fuse_dets;
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse detection files with fixed weights");
  fuse_cmd->add_option("--dets", fuse_dets, "detection files, one per model")
      ->required();
  fuse_cmd->add_option("--weights", fuse.weights, "per-model fusion weights");
  fuse_cmd->add_option("--profile", fuse_profile, "weight profile from optimize");
  fuse_cmd->add_option("--method", fuse.method, "wbf (default) or nms");
  fuse_cmd->add_option("--nms-iou", fuse.nms_iou_threshold, "NMS suppression threshold");
  fuse_cmd->add_option("--out", fuse_out, "output detections file");
  add_wbf_flags(fuse_cmd, fuse.wbf, fuse_wbf_flags);

  // eval
  EvalOptions eval;
  std::string eval_gt, eval_out = "eval_out", eval_ids;
  std::vector<std::string> eval_dets;
  std::string eval_scheme = "101";
  auto* eval_cmd =
      app.add_subcommand("eval", "score detection files against ground truth");
  eval_cmd->add_option("--gt", eval_gt, "COCO annotation file")->required();
  eval_cmd->add_option("--dets", eval_dets, "detection files to score")->required();
  eval_cmd->add_option("--image-ids", eval_ids, "restrict scoring to these image ids");
  eval_cmd->add_option("--scheme", eval_scheme, "AP interpolation: 101|all");
  eval_cmd->add_option("--max-dets", eval.eval.max_detections_per_image,
                       "cap detections per image (0 = uncapped)");
  eval_cmd->add_option("--out-dir", eval_out, "report directory");

  // optimize
  OptimizeOptions optimize;
  WbfFlags opt_wbf_flags;
  SplitFlags opt_split_flags;
  std::string opt_gt, opt_out = "optimize_out";
  std::vector<std::string> opt_dets;
  std::string opt_metric = "map5095";
  auto* opt_cmd = app.add_subcommand(
      "optimize", "search fusion weights by differential evolution");
  opt_cmd->add_option("--gt", opt_gt, "COCO annotation file")->required();
  opt_cmd->add_option("--dets", opt_dets, "detection files, one per model")->required();
  opt_cmd->add_option("--out-dir", opt_out, "output directory");
  opt_cmd->add_option("--workers", optimize.workers, "parallel fitness evaluations");
  opt_cmd->add_flag("--include-one-hot-seeding", optimize.include_one_hot_seeding,
                    "seed the population with one-hot weight vectors");
  add_de_flags(opt_cmd, optimize.de, opt_metric);
  add_wbf_flags(opt_cmd, optimize.wbf, opt_wbf_flags);
  add_split_flags(opt_cmd, optimize.split, opt_split_flags);

  // sweep
  SweepOptions sweep;
  WbfFlags sweep_wbf_flags;
  SplitFlags sweep_split_flags;
  std::string sweep_gt, sweep_out = "sweep_out";
  std::vector<std::string> sweep_dets;
  std::string sweep_metric = "map5095";
  auto* sweep_cmd = app.add_subcommand(
      "sweep", "optimize repeatedly along one hyperparameter axis");
  sweep_cmd->add_option("--gt", sweep_gt, "COCO annotation file")->required();
  sweep_cmd->add_option("--dets", sweep_dets, "detection files, one per model")
      ->required();
  sweep_cmd->add_option("--axis", sweep.axis, "np or generations")->required();
  sweep_cmd->add_option("--values", sweep.values, "axis values")->required();
  sweep_cmd->add_option("--out-dir", sweep_out, "output directory");
  sweep_cmd->add_option("--workers", sweep.base.workers, "parallel fitness evaluations");
  add_de_flags(sweep_cmd, sweep.base.de, sweep_metric);
  add_wbf_flags(sweep_cmd, sweep.base.wbf, sweep_wbf_flags);
  add_split_flags(sweep_cmd, sweep.base.split, sweep_split_flags);

  // bench
  BenchOptions bench;
  std::string bench_out = "bench_out";
  auto* bench_cmd = app.add_subcommand("bench", "measure fusion and optimizer scaling");
  bench_cmd->add_option("--boxes", bench.box_counts, "box counts for the fusion axis");
  bench_cmd->add_option("--generations-base", bench.generations_base,
                        "generation count that gets doubled");
  bench_cmd->add_option("--np-base", bench.population_base,
                        "population size that gets doubled");
  bench_cmd->add_option("--repeats", bench.repeats, "timing repeats (median wins)");
  bench_cmd->add_option("--seed", bench.seed, "master seed");
  bench_cmd->add_option("--out-dir", bench_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth_cmd) {
      synth.out_dir = synth_out;
      if (model_specs.empty())
        model_specs = {"sigma=0,miss=0,fp=0,calib=1",
                       "sigma=3,miss=0.1,fp=0.3,calib=0.85",
                       "sigma=6,miss=0.2,fp=0.5,calib=0.7"};
      for (const auto& text : model_specs)
        synth.spec.models.push_back(parse_noise_profile(text));
      cmd_synth(synth);
    } else if (*fuse_cmd) {
      for (const auto& f : fuse_dets) fuse.detection_files.emplace_back(f);
      if (!fuse_profile.empty()) fuse.profile = fuse_profile;
      apply_wbf_flags(fuse_wbf_flags, fuse.wbf);
      fuse.out_file = fuse_out;
      cmd_fuse(fuse);
    } else if (*eval_cmd) {
      eval.ground_truth = eval_gt;
      for (const auto& f : eval_dets) eval.detection_files.emplace_back(f);
      if (!eval_ids.empty()) eval.image_ids_file = eval_ids;
      if (eval_scheme == "all") eval.eval.scheme = ApScheme::all_points;
      else if (eval_scheme != "101")
        throw CLI::ValidationError("--scheme", "expected 101 or all");
      eval.out_dir = eval_out;
      cmd_eval(eval);
    } else if (*opt_cmd) {
      optimize.ground_truth = opt_gt;
      for (const auto& f : opt_dets) optimize.detection_files.emplace_back(f);
      optimize.de.fitness_metric = parse_metric(opt_metric);
      apply_wbf_flags(opt_wbf_flags, optimize.wbf);
      apply_split_flags(opt_split_flags, optimize.split);
      optimize.out_dir = opt_out;
      cmd_optimize(optimize);
    } else if (*sweep_cmd) {
      sweep.base.ground_truth = sweep_gt;
      for (const auto& f : sweep_dets) sweep.base.detection_files.emplace_back(f);
      sweep.base.de.fitness_metric = parse_metric(sweep_metric);
      apply_wbf_flags(sweep_wbf_flags, sweep.base.wbf);
      apply_split_flags(sweep_split_flags, sweep.base.split);
      sweep.base.out_dir = sweep_out;
      cmd_sweep(sweep);
    } else if (*bench_cmd) {
      bench.out_dir = bench_out;
      cmd_bench(bench);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
