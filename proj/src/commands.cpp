#include "deihdl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "deihdl/nms.hpp"
#include "deihdl/rng.hpp"
#include "json.hpp"

namespace deihdl {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string format_pct(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IngestError(path.string() + ": cannot open for writing");
  return out;
}

const char* metric_name(FitnessMetric m) {
  return m == FitnessMetric::map50 ? "map50" : "map5095";
}

const char* rescale_name(ConfidenceRescale r) {
  switch (r) {
    case ConfidenceRescale::min_count_over_models: return "min-tn";
    case ConfidenceRescale::count_over_models: return "tn";
    case ConfidenceRescale::none: return "none";
  }
  return "min-tn";
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<ModelRun> load_runs(const std::vector<fs::path>& files) {
  std::vector<ModelRun> runs;
  runs.reserve(files.size());
  for (const auto& f : files) runs.push_back(load_detections(f, f.stem().string()));
  return runs;
}

void write_convergence_csv(const ConvergenceHistory& history, int model_count,
                           const fs::path& path) {
  auto out = open_out(path);
  out << "generation,best_fitness,mean_fitness";
  for (int m = 1; m <= model_count; ++m) out << ",w_" << m;
  out << "\n";
  for (const auto& rec : history.records) {
    out << rec.generation << "," << format_double(rec.best_fitness) << ","
        << format_double(rec.mean_fitness);
    for (double w : rec.best_weights) out << "," << format_double(w);
    out << "\n";
  }
}

void print_eval_table_header() {
  std::printf("%-28s %12s %15s\n", "model", "mAP50 (%)", "mAP50-95 (%)");
}

void print_eval_table_row(const std::string& name, const EvalReport& report) {
  std::printf("%-28s %12s %15s\n", name.c_str(), format_pct(report.map50).c_str(),
              format_pct(report.map50_95).c_str());
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Least-squares slope of log(t) against log(x).
double log_log_slope(const std::vector<std::pair<double, double>>& points) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : points) {
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const auto n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

}  // namespace

std::string de_config_fingerprint(const DeConfig& de, const WbfConfig& wbf) {
  std::ostringstream canon;
  canon << "models=" << de.model_count << ";np=" << de.population_size
        << ";g=" << de.generations << ";tau=" << format_double(de.tau1) << ","
        << format_double(de.tau2) << "," << format_double(de.tau3)
        << ";f=" << format_double(de.scale_factor_min) << ","
        << format_double(de.scale_factor_max) << ","
        << format_double(de.scale_factor_perturbation)
        << ";ls=" << de.local_search_budget << ";metric=" << metric_name(de.fitness_metric)
        << ";seed=" << de.seed << ";strict=" << de.strict_reevaluation
        << ";wbf_iou=" << format_double(wbf.iou_match_threshold)
        << ";wbf_skip=" << format_double(wbf.skip_score_threshold)
        << ";wbf_agnostic=" << wbf.category_agnostic_clustering
        << ";wbf_rescale=" << rescale_name(wbf.confidence_rescale);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(canon.str())));
  return buf;
}

void write_weight_profile(const WeightProfile& profile, const fs::path& profile_path,
                          const fs::path& meta_path, double wallclock_s) {
  json root;
  root["model_names"] = profile.model_names;
  root["weights"] = profile.weights;
  root["fitness"] = profile.fitness;
  root["fitness_metric"] = profile.fitness_metric;
  root["config_fingerprint"] = profile.config_fingerprint;
  open_out(profile_path) << root.dump(1) << "\n";

  json meta;
  meta["created_at"] = profile.created_at;
  meta["wallclock_s"] = wallclock_s;
  open_out(meta_path) << meta.dump(1) << "\n";
}

WeightProfile load_weight_profile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError(path.string() + ": cannot open file");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
  WeightProfile profile;
  try {
    profile.model_names = root.at("model_names").get<std::vector<std::string>>();
    profile.weights = root.at("weights").get<std::vector<double>>();
    profile.fitness = root.at("fitness").get<double>();
    profile.fitness_metric = root.at("fitness_metric").get<std::string>();
    profile.config_fingerprint = root.at("config_fingerprint").get<std::string>();
  } catch (const json::exception& e) {
    throw IngestError(path.string() + ": " + e.what());
  }
  if (profile.weights.size() != profile.model_names.size())
    throw IngestError(path.string() + ": weights and model_names differ in length");
  return profile;
}

std::pair<Dataset, Dataset> assign_split(const Dataset& full, const SplitSpec& split,
                                         std::uint64_t default_seed) {
  if (split.validation_ids_file || split.test_ids_file) {
    if (!split.validation_ids_file || !split.test_ids_file)
      throw std::invalid_argument(
          "assign_split: validation and test id lists must be given together");
    const auto val_ids = load_image_id_list(*split.validation_ids_file);
    const auto test_ids = load_image_id_list(*split.test_ids_file);
    return {subset_dataset(full, val_ids, Split::validation),
            subset_dataset(full, test_ids, Split::test)};
  }
  return split_by_ratio(full, split.validation_fraction,
                        split.seed.value_or(default_seed));
}

void cmd_synth(const SynthOptions& opts) {
  fs::create_directories(opts.out_dir);
  const SyntheticData data = generate_synthetic(opts.spec);
  write_ground_truth(data.ground_truth, opts.out_dir / "gt.json", opts.spec.image_extent);
  std::size_t total = 0;
  for (const auto& run : data.runs) {
    write_detections(run.detections, opts.out_dir / (run.model_name + ".json"));
    for (const auto& [img, dets] : run.detections) total += dets.size();
  }
  std::cout << "synth: " << opts.spec.image_count << " images, "
            << data.ground_truth.ground_truth_count() << " ground-truth boxes, "
            << data.runs.size() << " models, " << total << " detections -> "
            << opts.out_dir.string() << "\n";
}

void cmd_fuse(const FuseOptions& opts) {
  if (opts.detection_files.empty())
    throw std::invalid_argument("fuse: needs at least one detection file");
  std::vector<double> weights = opts.weights;
  if (opts.profile) weights = load_weight_profile(*opts.profile).weights;
  if (weights.empty()) weights.assign(opts.detection_files.size(), 1.0);
  if (weights.size() != opts.detection_files.size())
    throw std::invalid_argument("fuse: weight count does not match model count");
  if (opts.method != "wbf" && opts.method != "nms")
    throw std::invalid_argument("fuse: unknown method '" + opts.method + "'");

  const auto runs = load_runs(opts.detection_files);
  std::set<ImageId> images;
  for (const auto& run : runs)
    for (const auto& [img, dets] : run.detections) images.insert(img);

  std::map<ImageId, std::vector<Detection>> fused;
  std::size_t boxes_in = 0, boxes_out = 0;
  for (ImageId img : images) {
    std::vector<std::vector<Detection>> per_model(runs.size());
    for (std::size_t m = 0; m < runs.size(); ++m) {
      const auto it = runs[m].detections.find(img);
      if (it != runs[m].detections.end()) per_model[m] = it->second;
      boxes_in += per_model[m].size();
    }
    auto& out = fused[img];
    if (opts.method == "nms") {
      std::vector<Detection> pooled;
      for (const auto& list : per_model)
        pooled.insert(pooled.end(), list.begin(), list.end());
      out = nms(pooled, opts.nms_iou_threshold);
    } else {
      for (const auto& f : weighted_boxes_fusion(per_model, weights, opts.wbf))
        out.push_back({f.box, f.category, f.confidence, img});
    }
    boxes_out += out.size();
  }
  if (opts.out_file.has_parent_path())
    fs::create_directories(opts.out_file.parent_path());
  write_detections(fused, opts.out_file);
  std::cout << "fuse(" << opts.method << "): " << images.size() << " images, "
            << boxes_in << " boxes in -> " << boxes_out << " boxes out -> "
            << opts.out_file.string() << "\n";
}

void cmd_eval(const EvalOptions& opts) {
  if (opts.detection_files.empty())
    throw std::invalid_argument("eval: needs at least one detection file");
  fs::create_directories(opts.out_dir);
  Dataset ds = load_ground_truth(opts.ground_truth);
  if (opts.image_ids_file)
    ds = subset_dataset(ds, load_image_id_list(*opts.image_ids_file), Split::test);

  std::size_t threshold50 = opts.eval.thresholds.size();
  for (std::size_t ti = 0; ti < opts.eval.thresholds.size(); ++ti)
    if (std::abs(opts.eval.thresholds[ti] - 0.50) < 1e-12) threshold50 = ti;

  print_eval_table_header();
  for (const auto& file : opts.detection_files) {
    const ModelRun run = load_detections(file, file.stem().string());
    const ModelRun scoped = restrict_run(run, ds.images);
    const EvalReport report = evaluate(scoped.detections, ds, opts.eval);

    json out;
    out["model"] = run.model_name;
    out["map50"] = report.map50;
    out["map50_95"] = report.map50_95;
    out["map50_pct"] = report.map50 * 100.0;
    out["map50_95_pct"] = report.map50_95 * 100.0;
    out["thresholds"] = report.thresholds;
    json per_cat = json::object();
    for (const auto& [cat, row] : report.ap_per_category) {
      double sum = 0.0;
      for (double ap : row) sum += ap;
      json entry;
      entry["ap50"] = threshold50 < row.size()
                          ? row[threshold50]
                          : std::numeric_limits<double>::quiet_NaN();
      entry["ap50_95"] = sum / static_cast<double>(row.size());
      per_cat[std::to_string(cat)] = entry;
    }
    out["per_category_ap"] = per_cat;
    open_out(opts.out_dir / ("report_" + run.model_name + ".json")) << out.dump(1) << "\n";
    print_eval_table_row(run.model_name, report);
  }
}

OptimizeOutcome cmd_optimize(const OptimizeOptions& opts) {
  if (opts.detection_files.size() < 2)
    throw std::invalid_argument("optimize: ensembling needs at least two models");
  fs::create_directories(opts.out_dir);

  const Dataset full = load_ground_truth(opts.ground_truth);
  const auto runs = load_runs(opts.detection_files);
  const ValidationReport report = validate_dataset(full, runs);
  if (!report.clean())
    throw std::invalid_argument("optimize: invalid inputs: " + report.summary());

  auto [validation, test] = assign_split(full, opts.split, opts.de.seed);
  if (validation.images.empty())
    throw std::invalid_argument("optimize: validation split is empty");

  DeConfig de = opts.de;
  de.model_count = static_cast<int>(runs.size());

  const auto t0 = std::chrono::steady_clock::now();
  const DeResult result = run_deihdl(de, validation, runs, opts.wbf,
                                     {opts.workers, opts.include_one_hot_seeding});
  const double wallclock =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  WeightProfile profile;
  for (const auto& run : runs) profile.model_names.push_back(run.model_name);
  profile.weights = result.best.weights;
  profile.fitness = result.best.fitness.value();
  profile.fitness_metric = metric_name(de.fitness_metric);
  profile.config_fingerprint = de_config_fingerprint(de, opts.wbf);
  profile.created_at = utc_timestamp();

  write_weight_profile(profile, opts.out_dir / "weight_profile.json",
                       opts.out_dir / "run_meta.json", wallclock);
  write_convergence_csv(result.history, de.model_count,
                        opts.out_dir / "convergence.csv");
  write_image_id_list(validation.images, opts.out_dir / "split_val_ids.txt");
  write_image_id_list(test.images, opts.out_dir / "split_test_ids.txt");

  {
    auto out = open_out(opts.out_dir / "summary.txt");
    out << "optimized fusion weights\n";
    out << "  metric: " << profile.fitness_metric << "\n";
    out << "  fitness: " << format_double(profile.fitness) << " ("
        << format_pct(profile.fitness) << " %)\n";
    out << "  found in generation: " << result.best_generation << "\n";
    out << "  population: " << de.population_size << ", generations: " << de.generations
        << ", seed: " << de.seed << "\n";
    out << "  fitness evaluations: " << result.fitness_evaluations << "\n";
    for (std::size_t m = 0; m < profile.model_names.size(); ++m)
      out << "  " << profile.model_names[m] << ": "
          << format_double(profile.weights[m]) << "\n";
  }

  std::cout << "optimize: best " << profile.fitness_metric << " "
            << format_pct(profile.fitness) << " % (generation "
            << result.best_generation << ", " << result.fitness_evaluations
            << " evaluations) -> " << opts.out_dir.string() << "\n";
  return {profile, result.history, wallclock};
}

void cmd_sweep(const SweepOptions& opts) {
  if (opts.values.empty()) throw std::invalid_argument("sweep: values must be non-empty");
  if (opts.axis != "np" && opts.axis != "generations")
    throw std::invalid_argument("sweep: axis must be 'np' or 'generations'");
  fs::create_directories(opts.base.out_dir);

  auto csv = open_out(opts.base.out_dir / "sweep.csv");
  csv << "axis,value,best_fitness,wallclock_s\n";
  for (int value : opts.values) {
    OptimizeOptions run = opts.base;
    if (opts.axis == "np")
      run.de.population_size = value;
    else
      run.de.generations = value;
    run.out_dir = opts.base.out_dir /
                  ("run_" + opts.axis + "_" + std::to_string(value));
    const OptimizeOutcome outcome = cmd_optimize(run);
    csv << opts.axis << "," << value << ","
        << format_double(outcome.profile.fitness) << ","
        << format_double(outcome.wallclock_s) << "\n";
  }
  std::cout << "sweep: " << opts.values.size() << " " << opts.axis
            << " values -> " << (opts.base.out_dir / "sweep.csv").string() << "\n";
}

void cmd_bench(const BenchOptions& opts) {
  fs::create_directories(opts.out_dir);
  auto csv = open_out(opts.out_dir / "bench.csv");
  csv << "axis,value,wallclock_s\n";

  std::vector<std::pair<double, double>> wbf_points;
  const WbfConfig wbf_cfg;
  for (int n : opts.box_counts) {
    // Three models sharing n boxes over a fixed extent; clusters form where
    // the random boxes overlap.
    Rng rng = substream(opts.seed, 0xBEEFull, static_cast<std::uint64_t>(n));
    std::vector<std::vector<Detection>> per_model(3);
    for (int k = 0; k < n; ++k) {
      const double w = rng.uniform(20.0, 80.0);
      const double h = rng.uniform(20.0, 80.0);
      const double x = rng.uniform(0.0, 1000.0 - w);
      const double y = rng.uniform(0.0, 1000.0 - h);
      Detection det;
      det.box = {x, y, x + w, y + h};
      det.category = static_cast<CategoryId>(rng.next_below(5)) + 1;
      det.confidence = rng.uniform(0.05, 1.0);
      det.image = 1;
      per_model[static_cast<std::size_t>(k % 3)].push_back(det);
    }
    const std::vector<double> weights = {1.0, 0.8, 0.6};
    const int iters = std::max(1, 20000 / n);
    std::vector<double> times;
    for (int rep = 0; rep < opts.repeats; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int it = 0; it < iters; ++it) {
        const auto fused = weighted_boxes_fusion(per_model, weights, wbf_cfg);
        if (fused.empty()) throw std::logic_error("bench: empty fusion result");
      }
      times.push_back(std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count() /
                      iters);
    }
    const double t = median(times);
    csv << "wbf_boxes," << n << "," << format_double(t) << "\n";
    wbf_points.push_back({static_cast<double>(n), t});
  }

  // One optimize run per axis value, on an in-memory synthetic set sized so
  // each run is long enough to time reliably.
  SyntheticSpec spec;
  spec.image_count = 192;
  spec.category_count = 4;
  spec.boxes_per_image = 6;
  spec.seed = opts.seed;
  spec.models = {{1.0, 0.05, 0.2, 0.9}, {4.0, 0.15, 0.4, 0.8}, {8.0, 0.25, 0.6, 0.7}};
  const SyntheticData data = generate_synthetic(spec);
  auto [validation, test] = split_by_ratio(data.ground_truth, 0.5, opts.seed);

  auto time_optimize = [&](int generations, int population) {
    DeConfig de;
    de.model_count = 3;
    de.generations = generations;
    de.population_size = population;
    de.seed = opts.seed;
    std::vector<double> times;
    for (int rep = 0; rep < opts.repeats; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const DeResult result = run_deihdl(de, validation, data.runs, wbf_cfg, {});
      times.push_back(std::chrono::duration<double>(
          std::chrono::steady_clock::now() - t0).count());
      if (result.history.records.empty())
        throw std::logic_error("bench: empty history");
    }
    return median(times);
  };

  std::vector<std::pair<double, double>> g_points, np_points;
  for (const int g : {opts.generations_base, 2 * opts.generations_base}) {
    const double t = time_optimize(g, opts.population_base);
    csv << "generations," << g << "," << format_double(t) << "\n";
    g_points.push_back({static_cast<double>(g), t});
  }
  for (const int np : {opts.population_base, 2 * opts.population_base}) {
    const double t = time_optimize(opts.generations_base, np);
    csv << "population," << np << "," << format_double(t) << "\n";
    np_points.push_back({static_cast<double>(np), t});
  }

  auto slopes = open_out(opts.out_dir / "bench_slopes.csv");
  slopes << "axis,log_log_slope\n";
  const double wbf_slope = log_log_slope(wbf_points);
  const double g_slope = log_log_slope(g_points);
  const double np_slope = log_log_slope(np_points);
  slopes << "wbf_boxes," << format_double(wbf_slope) << "\n";
  slopes << "generations," << format_double(g_slope) << "\n";
  slopes << "population," << format_double(np_slope) << "\n";
  std::cout << "bench: log-log slope vs boxes " << format_double(wbf_slope)
            << ", vs generations " << format_double(g_slope) << ", vs population "
            << format_double(np_slope) << " -> " << opts.out_dir.string() << "\n";
}

}  // namespace deihdl
