#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "deihdl/dataset.hpp"
#include "deihdl/metrics.hpp"
#include "deihdl/rng.hpp"
#include "deihdl/wbf.hpp"

namespace deihdl {

enum class FitnessMetric { map50, map50_95 };

struct DeConfig {
  int model_count = 3;      // length of every weight vector
  int population_size = 10; // NP; at least 4 (a target plus three distinct others)
  int generations = 40;     // G
  double tau1 = 0.1;
  double tau2 = 0.03;
  double tau3 = 0.07;  // must satisfy tau2 < tau3
  double scale_factor_min = 0.1;
  double scale_factor_max = 1.0;
  double scale_factor_perturbation = 0.1;  // amplitude of the random bump branch
  // Shared per-generation budget of extra fitness calls the scale-factor
  // local searches may spend. 0 turns both search branches into no-ops.
  int local_search_budget = 0;
  FitnessMetric fitness_metric = FitnessMetric::map50_95;
  std::uint64_t seed = 0;
  // Re-evaluate target fitness every generation instead of caching it.
  // Fitness is deterministic given the weights, so results are identical;
  // this only changes the evaluation count.
  bool strict_reevaluation = false;
};

void validate_config(const DeConfig& cfg);

struct Individual {
  std::vector<double> weights;  // each in [0, 1]
  double scale_factor = 0.0;    // within [scale_factor_min, scale_factor_max]
  std::optional<double> fitness;
};

struct Population {
  std::vector<Individual> individuals;  // exactly NP members
  int generation = 0;
};

struct GenerationRecord {
  int generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  std::vector<double> best_weights;
  double scale_factor_min = 0.0;
  double scale_factor_mean = 0.0;
  double scale_factor_max = 0.0;
};

struct ConvergenceHistory {
  std::vector<GenerationRecord> records;  // one per generation, 0..G
};

/// NP individuals with weights drawn uniformly on [0, 1) from the seeded
/// stream, scale factors at the midpoint of their range, fitness unset.
Population initialize_population(const DeConfig& cfg);

/// Draws three indices, pairwise distinct and distinct from `exclude`.
std::array<std::size_t, 3> draw_distinct_indices(Rng& rng,
                                                 std::size_t population_size,
                                                 std::size_t exclude);

/// rand/1 mutant: base + F * (a - b), clamped per component to [0, 1].
std::vector<double> mutant_vector(const std::vector<double>& base,
                                  const std::vector<double>& a,
                                  const std::vector<double>& b, double scale);

/// Spec operation form: draws r1, r2, r3 itself and returns the mutant.
std::vector<double> mutate(std::size_t target_index, const Population& pop,
                           double scale, Rng& rng);

/// Hooks the scale-factor rule needs to run its local-search branches: a
/// fitness view of the scale factor and the shared per-generation budget.
/// With no budget (or no callback) both search branches fall through.
struct ScaleSearchContext {
  std::function<double(double)> trial_fitness_of_scale;
  int* remaining_budget = nullptr;
};

/// The adaptation rule with its three uniform draws made explicit, evaluated
/// in printed order: golden-section search when rand3 < tau2, hill climb
/// when tau2 <= rand3 < tau3, a random bump when rand2 < tau1 and
/// rand3 > tau3, otherwise unchanged. The result is clamped to the scale
/// bounds.
double apply_scale_factor_rule(double scale, double rand1, double rand2,
                               double rand3, const DeConfig& cfg,
                               const ScaleSearchContext& ctx);

/// Draws rand1..rand3 from `rng` and applies the rule.
double adapt_scale_factor(double scale, Rng& rng, const DeConfig& cfg,
                          const ScaleSearchContext& ctx);

/// Arithmetic mix target + K * (mutant - target); stays in [0, 1] whenever
/// both inputs do.
std::vector<double> crossover_mix(const std::vector<double>& target,
                                  const std::vector<double>& mutant, double k);

std::vector<double> crossover(const std::vector<double>& target,
                              const std::vector<double>& mutant, Rng& rng);

/// Keeps the trial only on strict fitness improvement.
const Individual& select(const Individual& target, const Individual& trial);

/// Fuses every validation image with the given weights and scores the result
/// with the configured metric. All-zero weight vectors get fitness 0 without
/// fusing. Counts every evaluation it performs.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const Dataset& validation, const std::vector<ModelRun>& runs,
                   WbfConfig wbf_cfg, FitnessMetric metric);

  double operator()(const std::vector<double>& weights) const;

  std::uint64_t evaluation_count() const { return count_; }
  int model_count() const { return model_count_; }

 private:
  const Dataset* validation_;
  WbfConfig wbf_cfg_;
  FitnessMetric metric_;
  EvalConfig eval_cfg_;
  int model_count_ = 0;
  // Boxes never change between evaluations, only the weights do.
  std::map<ImageId, std::vector<std::vector<Detection>>> per_image_boxes_;
  mutable std::atomic<std::uint64_t> count_{0};
};

struct RunOptions {
  int workers = 1;
  // Replaces the first model_count random individuals with one-hot weight
  // vectors; elitist selection then guarantees the run never ends below the
  // best single model's validation fitness.
  bool include_one_hot_seeding = false;
};

struct DeResult {
  Individual best;
  int best_generation = 0;
  ConvergenceHistory history;
  std::uint64_t fitness_evaluations = 0;
};

/// The full optimization loop: initialize, then per generation and per
/// individual draw r1 != r2 != r3 != i, adapt the scale factor, mutate,
/// cross over, evaluate, and keep the strictly better of target and trial.
/// Validation failures of the inputs surface before the first generation.
/// All random draws come from per-(generation, individual) substreams of
/// the master seed, so identical seeds give bit-identical results for any
/// worker count.
DeResult run_deihdl(const DeConfig& cfg, const Dataset& validation,
                    const std::vector<ModelRun>& runs, const WbfConfig& wbf_cfg,
                    const RunOptions& options = {});

}  // namespace deihdl
