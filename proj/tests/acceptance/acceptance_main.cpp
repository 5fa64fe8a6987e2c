// Acceptance suite: runs every release criterion at its stated tolerance and
// prints one PASS/FAIL line per criterion. Returns non-zero if any fail.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "deihdl/commands.hpp"
#include "deihdl/de.hpp"
#include "deihdl/metrics.hpp"
#include "deihdl/rng.hpp"
#include "deihdl/synth.hpp"
#include "deihdl/wbf.hpp"
#include "support/generators.hpp"
#include "support/metrics_oracle.hpp"
#include "support/wbf_oracle.hpp"

using namespace deihdl;
namespace fs = std::filesystem;

namespace {

fs::path g_cli;
fs::path g_scratch;

#define REQ(cond, msg)                                    \
  do {                                                    \
    if (!(cond)) {                                        \
      log << "    check failed: " << (msg) << "\n";       \
      ok = false;                                         \
    }                                                     \
  } while (0)

int run_cli(const std::string& args) {
  const std::string cmd =
      g_cli.string() + " " + args + " >> " + (g_scratch / "cli.log").string() + " 2>&1";
  return std::system(cmd.c_str());
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    rows.push_back(row);
  }
  return rows;
}

SyntheticSpec planted_spec(int images, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.image_count = images;
  spec.category_count = 3;
  spec.boxes_per_image = 3;
  spec.seed = seed;
  spec.models = {{0.0, 0.0, 0.0, 1.0},
                 {0.0, 1.0, 1.0, 1.0},
                 {0.0, 1.0, 1.0, 1.0}};
  return spec;
}

SyntheticSpec mixed_spec(int images, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.image_count = images;
  spec.category_count = 4;
  spec.boxes_per_image = 3;
  spec.seed = seed;
  spec.models = {{2.0, 0.10, 0.3, 0.9},
                 {5.0, 0.20, 0.5, 0.8},
                 {8.0, 0.30, 0.6, 0.7}};
  return spec;
}

// ---- criterion 1: geometry properties -------------------------------------

bool criterion_geometry(std::ostream& log) {
  bool ok = true;
  const BoundingBox b{3.0, 4.0, 10.0, 12.0};
  REQ(std::abs(iou(b, b) - 1.0) < 1e-12, "identity IoU");
  REQ(iou({0, 0, 1, 1}, {5, 5, 6, 6}) == 0.0, "disjoint IoU");
  REQ(std::abs(iou({0, 0, 2, 2}, {1, 1, 3, 3}) - 1.0 / 7.0) < 1e-12,
      "worked 1/7 example");

  Rng rng(0xACCE01);
  for (int k = 0; k < 10000 && ok; ++k) {
    const BoundingBox a = deihdl::testing::random_box(rng);
    const BoundingBox c = deihdl::testing::random_box(rng);
    const double v = iou(a, c);
    REQ(v == iou(c, a), "symmetry");
    REQ(v >= 0.0 && v <= 1.0, "range");
    REQ(std::abs(iou(a, a) - 1.0) < 1e-12, "identity on random boxes");
    const double dx = rng.uniform(-40.0, 40.0);
    const double dy = rng.uniform(-40.0, 40.0);
    const BoundingBox at{a.x_min + dx, a.y_min + dy, a.x_max + dx, a.y_max + dy};
    const BoundingBox ct{c.x_min + dx, c.y_min + dy, c.x_max + dx, c.y_max + dy};
    REQ(std::abs(iou(at, ct) - v) < 1e-12, "translation invariance");
    const double s = rng.uniform(0.1, 8.0);
    const BoundingBox as{a.x_min * s, a.y_min * s, a.x_max * s, a.y_max * s};
    const BoundingBox cs{c.x_min * s, c.y_min * s, c.x_max * s, c.y_max * s};
    REQ(std::abs(iou(as, cs) - v) < 1e-12, "scale invariance");
  }
  return ok;
}

// ---- criterion 2: WBF vs brute force ---------------------------------------

bool criterion_wbf_oracle(std::ostream& log) {
  bool ok = true;
  Rng rng(0xACCE02);
  for (int k = 0; k < 1000 && ok; ++k) {
    const auto per_model = deihdl::testing::random_fusion_instance(rng, 4, 10);
    std::vector<double> weights(per_model.size());
    bool any = false;
    for (auto& w : weights) {
      w = rng.uniform(0.0, 2.0);
      any = any || w > 0.0;
    }
    if (!any) weights[0] = 1.0;
    WbfConfig cfg;
    cfg.iou_match_threshold = rng.uniform(0.3, 0.8);
    cfg.category_agnostic_clustering = rng.next_double() < 0.7;
    const auto fast = weighted_boxes_fusion(per_model, weights, cfg);
    const auto slow = deihdl::testing::wbf_brute_force(per_model, weights, cfg);
    REQ(fast.size() == slow.size(), "cluster count, instance " + std::to_string(k));
    if (fast.size() != slow.size()) break;
    for (std::size_t i = 0; i < fast.size(); ++i) {
      REQ(std::abs(fast[i].box.x_min - slow[i].box.x_min) <= 1e-9 &&
              std::abs(fast[i].box.y_min - slow[i].box.y_min) <= 1e-9 &&
              std::abs(fast[i].box.x_max - slow[i].box.x_max) <= 1e-9 &&
              std::abs(fast[i].box.y_max - slow[i].box.y_max) <= 1e-9,
          "coordinates, instance " + std::to_string(k));
      REQ(std::abs(fast[i].confidence - slow[i].confidence) <= 1e-9,
          "confidence, instance " + std::to_string(k));
      REQ(fast[i].category == slow[i].category,
          "category, instance " + std::to_string(k));
    }
  }
  return ok;
}

// ---- criterion 3: metrics vs brute force -----------------------------------

bool criterion_metrics_oracle(std::ostream& log) {
  bool ok = true;
  {
    PrCurve curve;
    curve.points = {{0.5, 1.0}, {0.5, 0.5}};
    REQ(average_precision(curve, ApScheme::points_101) == 51.0 / 101.0,
        "hand-derived 51/101 case");
  }
  Rng rng(0xACCE03);
  int evaluated = 0;
  while (evaluated < 500 && ok) {
    const auto micro = deihdl::testing::random_micro_dataset(rng);
    if (micro.dataset.ground_truth_count() == 0) continue;
    ++evaluated;
    const auto fast = evaluate(micro.detections, micro.dataset, {});
    const auto slow = deihdl::testing::evaluate_brute_force(
        micro.detections, micro.dataset, coco_iou_thresholds(),
        ApScheme::points_101);
    REQ(std::abs(fast.map50 - slow.map50) < 1e-9,
        "map50, instance " + std::to_string(evaluated));
    REQ(std::abs(fast.map50_95 - slow.map50_95) < 1e-9,
        "map50_95, instance " + std::to_string(evaluated));
  }
  return ok;
}

// ---- criterion 4: elitist monotonicity -------------------------------------

bool criterion_monotonicity(std::ostream& log) {
  bool ok = true;
  const SyntheticData data = generate_synthetic(mixed_spec(60, 0xACCE04));
  auto [validation, test] = split_by_ratio(data.ground_truth, 0.5, 0xACCE04);
  DeConfig cfg;
  cfg.model_count = 3;
  cfg.population_size = 10;
  cfg.generations = 40;
  cfg.seed = 4;
  const DeResult result = run_deihdl(cfg, validation, data.runs, {});
  REQ(result.history.records.size() == 41, "history length G+1");
  for (std::size_t g = 1; g < result.history.records.size(); ++g)
    REQ(result.history.records[g].best_fitness >=
            result.history.records[g - 1].best_fitness,
        "best fitness dipped at generation " + std::to_string(g));
  return ok;
}

// ---- criterion 5: planted optimum beats-or-ties singles --------------------

bool criterion_planted_optimum(std::ostream& log) {
  bool ok = true;
  const SyntheticSpec spec = planted_spec(200, 0xACCE05);
  const SyntheticData data = generate_synthetic(spec);
  auto [validation, test] = split_by_ratio(data.ground_truth, 0.5, 0xACCE05);

  EvalConfig eval_cfg;
  const auto test_map50 = [&](const std::map<ImageId, std::vector<Detection>>& dets) {
    std::map<ImageId, std::vector<Detection>> scoped;
    for (ImageId img : test.images) {
      const auto it = dets.find(img);
      if (it != dets.end()) scoped[img] = it->second;
    }
    return evaluate(scoped, test, eval_cfg).map50;
  };

  double best_single = 0.0;
  for (const auto& run : data.runs)
    best_single = std::max(best_single, test_map50(run.detections));
  log << "    best single model test mAP50: " << best_single << "\n";

  const WbfConfig wbf_cfg;
  const auto fuse_all = [&](const std::vector<double>& weights) {
    std::map<ImageId, std::vector<Detection>> fused;
    for (ImageId img : data.ground_truth.images) {
      std::vector<std::vector<Detection>> per_model(data.runs.size());
      for (std::size_t m = 0; m < data.runs.size(); ++m) {
        const auto it = data.runs[m].detections.find(img);
        if (it != data.runs[m].detections.end()) per_model[m] = it->second;
      }
      for (const auto& f : weighted_boxes_fusion(per_model, weights, wbf_cfg))
        fused[img].push_back({f.box, f.category, f.confidence, img});
    }
    return fused;
  };

  DeConfig cfg;
  cfg.model_count = 3;
  cfg.population_size = 10;
  cfg.generations = 40;
  cfg.seed = 5;

  const DeResult plain = run_deihdl(cfg, validation, data.runs, wbf_cfg, {1, false});
  const double ensemble = test_map50(fuse_all(plain.best.weights));
  log << "    DE ensemble test mAP50: " << ensemble << "\n";
  REQ(ensemble >= best_single - 0.005, "ensemble within 0.005 of best single");

  const DeResult seeded = run_deihdl(cfg, validation, data.runs, wbf_cfg, {1, true});
  const double seeded_ensemble = test_map50(fuse_all(seeded.best.weights));
  log << "    one-hot seeded ensemble test mAP50: " << seeded_ensemble << "\n";
  REQ(seeded_ensemble >= best_single, "one-hot seeded ensemble, no tolerance");
  return ok;
}

// ---- criterion 6: sweep over G reproduces the convergence shape ------------

bool criterion_sweep(std::ostream& log) {
  bool ok = true;
  const fs::path dir = g_scratch / "sweep";
  REQ(run_cli("synth --images 40 --seed 21 --out-dir " + (dir / "s").string()) == 0,
      "synth exit code");
  const std::string dets = (dir / "s" / "model_0.json").string() + " " +
                           (dir / "s" / "model_1.json").string() + " " +
                           (dir / "s" / "model_2.json").string();
  REQ(run_cli("sweep --gt " + (dir / "s" / "gt.json").string() + " --dets " + dets +
              " --axis generations --values 0 10 40 --np 10 --seed 23" +
              " --out-dir " + (dir / "out").string()) == 0,
      "sweep exit code");

  const auto rows = read_csv(dir / "out" / "sweep.csv");
  REQ(rows.size() == 4, "header plus three rows");
  if (rows.size() == 4) {
    REQ(rows[0].size() == 4 && rows[0][0] == "axis" && rows[0][3] == "wallclock_s",
        "sweep CSV header");
    const double f0 = std::stod(rows[1][2]);
    const double f10 = std::stod(rows[2][2]);
    const double f40 = std::stod(rows[3][2]);
    log << "    best fitness at G=0/10/40: " << f0 << " / " << f10 << " / " << f40
        << "\n";
    REQ(f40 >= f0, "G=40 at least G=0 (exact)");
    REQ(f10 >= f0 && f40 >= f10, "monotone across shared-seed prefixes");
  }
  // The per-run convergence curve behind the sweep is re-plottable: one row
  // per generation, non-decreasing best fitness.
  const auto curve = read_csv(dir / "out" / "run_generations_40" / "convergence.csv");
  REQ(curve.size() == 42, "41 generation rows behind G=40");
  for (std::size_t r = 2; r < curve.size(); ++r)
    REQ(std::stod(curve[r][1]) >= std::stod(curve[r - 1][1]),
        "convergence curve non-decreasing");
  return ok;
}

// ---- criterion 7: byte-identical optimize across invocations and workers ---

bool criterion_determinism(std::ostream& log) {
  bool ok = true;
  const fs::path dir = g_scratch / "determinism";
  REQ(run_cli("synth --images 30 --seed 31 --out-dir " + (dir / "s").string()) == 0,
      "synth exit code");
  const std::string base =
      "optimize --gt " + (dir / "s" / "gt.json").string() + " --dets " +
      (dir / "s" / "model_0.json").string() + " " +
      (dir / "s" / "model_1.json").string() + " " +
      (dir / "s" / "model_2.json").string() + " --np 10 --generations 15 --seed 37";
  REQ(run_cli(base + " --workers 1 --out-dir " + (dir / "a").string()) == 0, "run a");
  REQ(run_cli(base + " --workers 1 --out-dir " + (dir / "b").string()) == 0, "run b");
  REQ(run_cli(base + " --workers 8 --out-dir " + (dir / "c").string()) == 0, "run c");
  REQ(run_cli(base + " --workers 8 --out-dir " + (dir / "d").string()) == 0, "run d");
  const std::string a = read_file(dir / "a" / "convergence.csv");
  REQ(!a.empty(), "convergence CSV exists");
  REQ(a == read_file(dir / "b" / "convergence.csv"), "identical across invocations");
  REQ(a == read_file(dir / "c" / "convergence.csv"), "identical for 8 workers");
  REQ(a == read_file(dir / "d" / "convergence.csv"), "identical 8-worker repeat");
  REQ(read_file(dir / "a" / "weight_profile.json") ==
          read_file(dir / "d" / "weight_profile.json"),
      "identical weight profiles");
  return ok;
}

// ---- criterion 8: wallclock doubles when G or NP doubles --------------------

bool criterion_bench(std::ostream& log) {
  bool ok = true;
  const fs::path dir = g_scratch / "bench";
  REQ(run_cli("bench --generations-base 12 --np-base 8 --repeats 3 --seed 41"
              " --boxes 250 500 1000 2000 --out-dir " + dir.string()) == 0,
      "bench exit code");
  const auto rows = read_csv(dir / "bench.csv");
  double g1 = 0, g2 = 0, np1 = 0, np2 = 0;
  for (const auto& row : rows) {
    if (row.size() != 3 || row[0] == "axis") continue;
    const double value = std::stod(row[1]);
    const double t = std::stod(row[2]);
    if (row[0] == "generations") (value == 12 ? g1 : g2) = t;
    if (row[0] == "population") (value == 8 ? np1 : np2) = t;
  }
  REQ(g1 > 0 && g2 > 0 && np1 > 0 && np2 > 0, "bench rows present");
  if (ok) {
    const double g_ratio = g2 / g1;
    const double np_ratio = np2 / np1;
    log << "    doubling ratios: generations " << g_ratio << ", population "
        << np_ratio << "\n";
    REQ(g_ratio >= 1.6 && g_ratio <= 2.6, "generation doubling within [1.6, 2.6]");
    REQ(np_ratio >= 1.6 && np_ratio <= 2.6, "population doubling within [1.6, 2.6]");
  }
  return ok;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<bool(std::ostream&)> body;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance_tests <path-to-cli> [scratch-dir]\n";
    return 2;
  }
  g_cli = argv[1];
  g_scratch = argc > 2 ? fs::path(argv[2])
                       : fs::temp_directory_path() /
                             ("deihdl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(g_scratch);

  const std::vector<Criterion> criteria = {
      {1, "geometry property suite (10k random pairs, worked examples to 1e-12)",
       5.0, criterion_geometry},
      {2, "WBF equals brute-force re-implementation (1000 instances, 1e-9)", 30.0,
       criterion_wbf_oracle},
      {3, "metrics equal brute-force evaluator (500 micro datasets, 1e-9)", 60.0,
       criterion_metrics_oracle},
      {4, "elitist monotonicity over G=40, NP=10 (exact)", 120.0,
       criterion_monotonicity},
      {5, "planted optimum: ensemble beats or ties the best single model", 300.0,
       criterion_planted_optimum},
      {6, "sweep over G in {0,10,40}: monotone fitness, re-plottable CSV", 600.0,
       criterion_sweep},
      {7, "optimize is byte-identical across invocations and 1 vs 8 workers",
       300.0, criterion_determinism},
      {8, "wallclock doubles within [1.6,2.6] when G or NP doubles", 600.0,
       criterion_bench},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    std::ostringstream log;
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = false;
    try {
      ok = criterion.body(log);
    } catch (const std::exception& e) {
      log << "    exception: " << e.what() << "\n";
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (elapsed >= criterion.limit_s) {
      log << "    runtime " << elapsed << "s exceeded the " << criterion.limit_s
          << "s limit\n";
      ok = false;
    }
    std::printf("%s  %d. %s (%.1fs)\n", ok ? "PASS" : "FAIL", criterion.id,
                criterion.name, elapsed);
    const std::string detail = log.str();
    if (!detail.empty()) std::fputs(detail.c_str(), stdout);
    if (!ok) ++failures;
  }
  if (failures == 0) {
    std::error_code ec;
    fs::remove_all(g_scratch, ec);
  } else {
    std::printf("scratch kept at %s\n", g_scratch.string().c_str());
  }
  return failures == 0 ? 0 : 1;
}
