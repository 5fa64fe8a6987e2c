#include "deihdl/de.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace deihdl {

namespace {

constexpr std::uint64_t kInitStreamTag = 0;

// Runs fn(0..n-1) on up to `workers` threads. Every index writes only its
// own slot, so results are identical for any worker count.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto thread_count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  pool.reserve(thread_count);
  for (std::size_t t = 0; t < thread_count; ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void validate_config(const DeConfig& cfg) {
  if (cfg.model_count < 1)
    throw std::invalid_argument("DeConfig: model_count must be positive");
  if (cfg.population_size < 4)
    throw std::invalid_argument(
        "DeConfig: population_size must be at least 4 (rand/1 needs a target "
        "plus three distinct others)");
  if (cfg.generations < 0)
    throw std::invalid_argument("DeConfig: generations must be non-negative");
  if (!(cfg.tau2 < cfg.tau3))
    throw std::invalid_argument("DeConfig: tau2 must be below tau3");
  for (double tau : {cfg.tau1, cfg.tau2, cfg.tau3})
    if (!(tau >= 0.0 && tau <= 1.0))
      throw std::invalid_argument("DeConfig: tau values must be in [0,1]");
  if (!(cfg.scale_factor_min <= cfg.scale_factor_max))
    throw std::invalid_argument("DeConfig: scale factor bounds are inverted");
  if (cfg.local_search_budget < 0)
    throw std::invalid_argument("DeConfig: local_search_budget must be >= 0");
}

Population initialize_population(const DeConfig& cfg) {
  validate_config(cfg);
  Rng rng = substream(cfg.seed, kInitStreamTag, 0);
  Population pop;
  pop.generation = 0;
  pop.individuals.resize(static_cast<std::size_t>(cfg.population_size));
  const double mid = 0.5 * (cfg.scale_factor_min + cfg.scale_factor_max);
  for (auto& ind : pop.individuals) {
    ind.weights.resize(static_cast<std::size_t>(cfg.model_count));
    for (auto& w : ind.weights) w = rng.next_double();
    ind.scale_factor = mid;
    ind.fitness.reset();
  }
  return pop;
}

std::array<std::size_t, 3> draw_distinct_indices(Rng& rng,
                                                 std::size_t population_size,
                                                 std::size_t exclude) {
  if (population_size < 4)
    throw std::invalid_argument("draw_distinct_indices: need at least 4 members");
  std::array<std::size_t, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t candidate;
    bool taken;
    do {
      candidate = rng.next_below(population_size);
      taken = candidate == exclude;
      for (std::size_t j = 0; j < k; ++j) taken = taken || candidate == out[j];
    } while (taken);
    out[k] = candidate;
  }
  return out;
}

std::vector<double> mutant_vector(const std::vector<double>& base,
                                  const std::vector<double>& a,
                                  const std::vector<double>& b, double scale) {
  if (base.size() != a.size() || base.size() != b.size())
    throw std::invalid_argument("mutant_vector: mismatched vector lengths");
  std::vector<double> out(base.size());
  for (std::size_t k = 0; k < base.size(); ++k)
    out[k] = clamp_unit(base[k] + scale * (a[k] - b[k]));
  return out;
}

std::vector<double> mutate(std::size_t target_index, const Population& pop,
                           double scale, Rng& rng) {
  const auto idx = draw_distinct_indices(rng, pop.individuals.size(), target_index);
  return mutant_vector(pop.individuals[idx[0]].weights,
                       pop.individuals[idx[1]].weights,
                       pop.individuals[idx[2]].weights, scale);
}

namespace {

// Golden-section search for the fitness-maximizing scale factor over the
// full bounds. Each probe costs one budgeted fitness call.
double golden_section_scale(double lo, double hi,
                            const std::function<double(double)>& fitness,
                            int& budget) {
  const double inv_phi = 0.6180339887498949;
  double best_scale = 0.5 * (lo + hi);
  double best_fitness = -1.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = -1.0, fd = -1.0;
  bool have_c = false, have_d = false;
  while (budget > 0) {
    if (!have_c) {
      fc = fitness(c);
      --budget;
      have_c = true;
      if (fc > best_fitness) { best_fitness = fc; best_scale = c; }
      continue;
    }
    if (!have_d) {
      if (budget == 0) break;
      fd = fitness(d);
      --budget;
      have_d = true;
      if (fd > best_fitness) { best_fitness = fd; best_scale = d; }
      continue;
    }
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      have_c = false;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      have_d = false;
    }
  }
  return best_scale;
}

// Hill climb from the current scale factor: probe +/- step, move on strict
// improvement, halve the step otherwise.
double hill_climb_scale(double start, double lo, double hi,
                        const std::function<double(double)>& fitness,
                        int& budget) {
  double step = 0.1;
  double best_scale = start;
  if (budget <= 0) return best_scale;
  double best_fitness = fitness(best_scale);
  --budget;
  while (budget > 0 && step > 1e-4) {
    const double up = std::clamp(best_scale + step, lo, hi);
    double candidate = up;
    double cand_fitness = fitness(up);
    --budget;
    if (cand_fitness <= best_fitness && budget > 0) {
      const double down = std::clamp(best_scale - step, lo, hi);
      const double f_down = fitness(down);
      --budget;
      if (f_down > cand_fitness) {
        candidate = down;
        cand_fitness = f_down;
      }
    }
    if (cand_fitness > best_fitness) {
      best_fitness = cand_fitness;
      best_scale = candidate;
    } else {
      step *= 0.5;
    }
  }
  return best_scale;
}

}  // namespace

double apply_scale_factor_rule(double scale, double rand1, double rand2,
                               double rand3, const DeConfig& cfg,
                               const ScaleSearchContext& ctx) {
  const bool searchable = ctx.trial_fitness_of_scale && ctx.remaining_budget &&
                          *ctx.remaining_budget > 0;
  double out = scale;
  if (rand3 < cfg.tau2) {
    if (searchable)
      out = golden_section_scale(cfg.scale_factor_min, cfg.scale_factor_max,
                                 ctx.trial_fitness_of_scale, *ctx.remaining_budget);
    // without budget the branch is a no-op and control falls through
  } else if (rand3 < cfg.tau3) {
    if (searchable)
      out = hill_climb_scale(scale, cfg.scale_factor_min, cfg.scale_factor_max,
                             ctx.trial_fitness_of_scale, *ctx.remaining_budget);
  } else if (rand2 < cfg.tau1) {
    out = scale + cfg.scale_factor_perturbation * rand1;
  }
  return std::clamp(out, cfg.scale_factor_min, cfg.scale_factor_max);
}

double adapt_scale_factor(double scale, Rng& rng, const DeConfig& cfg,
                          const ScaleSearchContext& ctx) {
  const double rand1 = rng.next_double();
  const double rand2 = rng.next_double();
  const double rand3 = rng.next_double();
  return apply_scale_factor_rule(scale, rand1, rand2, rand3, cfg, ctx);
}

std::vector<double> crossover_mix(const std::vector<double>& target,
                                  const std::vector<double>& mutant, double k) {
  if (target.size() != mutant.size())
    throw std::invalid_argument("crossover_mix: mismatched vector lengths");
  std::vector<double> out(target.size());
  for (std::size_t i = 0; i < target.size(); ++i)
    out[i] = target[i] + k * (mutant[i] - target[i]);
  return out;
}

std::vector<double> crossover(const std::vector<double>& target,
                              const std::vector<double>& mutant, Rng& rng) {
  return crossover_mix(target, mutant, rng.next_double());
}

const Individual& select(const Individual& target, const Individual& trial) {
  if (!target.fitness || !trial.fitness)
    throw std::invalid_argument("select: both individuals must be evaluated");
  return *trial.fitness > *target.fitness ? trial : target;
}

FitnessEvaluator::FitnessEvaluator(const Dataset& validation,
                                   const std::vector<ModelRun>& runs,
                                   WbfConfig wbf_cfg, FitnessMetric metric)
    : validation_(&validation), wbf_cfg_(wbf_cfg), metric_(metric),
      model_count_(static_cast<int>(runs.size())) {
  if (runs.empty())
    throw std::invalid_argument("FitnessEvaluator: needs at least one model run");
  eval_cfg_.thresholds = metric == FitnessMetric::map50
                             ? std::vector<double>{0.50}
                             : coco_iou_thresholds();
  for (ImageId img : validation.images) {
    auto& lists = per_image_boxes_[img];
    lists.resize(runs.size());
    for (std::size_t m = 0; m < runs.size(); ++m) {
      const auto it = runs[m].detections.find(img);
      if (it != runs[m].detections.end()) lists[m] = it->second;
    }
  }
}

double FitnessEvaluator::operator()(const std::vector<double>& weights) const {
  if (static_cast<int>(weights.size()) != model_count_)
    throw std::invalid_argument("FitnessEvaluator: wrong weight vector length");
  const bool any_positive =
      std::any_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; });
  if (!any_positive) return 0.0;  // degenerate vector carries no signal
  ++count_;

  std::map<ImageId, std::vector<Detection>> fused;
  for (const auto& [img, lists] : per_image_boxes_) {
    const auto boxes = weighted_boxes_fusion(lists, weights, wbf_cfg_);
    auto& dets = fused[img];
    dets.reserve(boxes.size());
    for (const auto& f : boxes) dets.push_back({f.box, f.category, f.confidence, img});
  }
  const EvalReport report = evaluate(fused, *validation_, eval_cfg_);
  return metric_ == FitnessMetric::map50 ? report.map50 : report.map50_95;
}

namespace {

GenerationRecord record_generation(const Population& pop, int generation) {
  GenerationRecord rec;
  rec.generation = generation;
  double sum = 0.0;
  double scale_sum = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < pop.individuals.size(); ++i) {
    const auto& ind = pop.individuals[i];
    sum += ind.fitness.value();
    scale_sum += ind.scale_factor;
    if (ind.fitness.value() > pop.individuals[best].fitness.value()) best = i;
  }
  const auto np = static_cast<double>(pop.individuals.size());
  rec.best_fitness = pop.individuals[best].fitness.value();
  rec.mean_fitness = sum / np;
  rec.best_weights = pop.individuals[best].weights;
  auto [lo, hi] = std::minmax_element(
      pop.individuals.begin(), pop.individuals.end(),
      [](const Individual& a, const Individual& b) {
        return a.scale_factor < b.scale_factor;
      });
  rec.scale_factor_min = lo->scale_factor;
  rec.scale_factor_max = hi->scale_factor;
  rec.scale_factor_mean = scale_sum / np;
  return rec;
}

}  // namespace

DeResult run_deihdl(const DeConfig& cfg, const Dataset& validation,
                    const std::vector<ModelRun>& runs, const WbfConfig& wbf_cfg,
                    const RunOptions& options) {
  validate_config(cfg);
  if (static_cast<int>(runs.size()) != cfg.model_count)
    throw std::invalid_argument("run_deihdl: model_count does not match the runs");
  if (validation.images.empty())
    throw std::invalid_argument("run_deihdl: validation split is empty");

  // Surface input problems before spending any generations. Runs may carry
  // detections for other splits; only the validation slice is checked.
  std::vector<ModelRun> restricted;
  restricted.reserve(runs.size());
  for (const auto& run : runs) restricted.push_back(restrict_run(run, validation.images));
  const ValidationReport report = validate_dataset(validation, restricted);
  if (!report.clean())
    throw std::invalid_argument("run_deihdl: invalid inputs: " + report.summary());

  const FitnessEvaluator evaluate_fitness(validation, restricted, wbf_cfg,
                                          cfg.fitness_metric);
  const auto np = static_cast<std::size_t>(cfg.population_size);

  Population pop = initialize_population(cfg);
  if (options.include_one_hot_seeding) {
    const auto models = static_cast<std::size_t>(cfg.model_count);
    for (std::size_t m = 0; m < models && m < np; ++m) {
      std::fill(pop.individuals[m].weights.begin(), pop.individuals[m].weights.end(), 0.0);
      pop.individuals[m].weights[m] = 1.0;
    }
  }

  parallel_for(np, options.workers, [&](std::size_t i) {
    pop.individuals[i].fitness = evaluate_fitness(pop.individuals[i].weights);
  });

  DeResult result;
  result.history.records.push_back(record_generation(pop, 0));
  std::size_t best_index = 0;
  for (std::size_t i = 1; i < np; ++i)
    if (pop.individuals[i].fitness.value() >
        pop.individuals[best_index].fitness.value())
      best_index = i;
  result.best = pop.individuals[best_index];
  result.best_generation = 0;

  for (int g = 1; g <= cfg.generations; ++g) {
    int search_budget = cfg.local_search_budget;
    std::vector<Individual> trials(np);

    // Sequential phase: all random draws and any budgeted local search, in
    // individual order, so the stream layout is independent of workers.
    for (std::size_t i = 0; i < np; ++i) {
      Rng rng = substream(cfg.seed, static_cast<std::uint64_t>(g), i + 1);
      const auto idx = draw_distinct_indices(rng, np, i);
      const double k = rng.next_double();
      const Individual& target = pop.individuals[i];

      std::map<double, double> probe_cache;
      ScaleSearchContext ctx;
      ctx.remaining_budget = &search_budget;
      ctx.trial_fitness_of_scale = [&](double scale) {
        const auto hit = probe_cache.find(scale);
        if (hit != probe_cache.end()) return hit->second;
        const auto mutant = mutant_vector(pop.individuals[idx[0]].weights,
                                          pop.individuals[idx[1]].weights,
                                          pop.individuals[idx[2]].weights, scale);
        const double fitness = evaluate_fitness(crossover_mix(target.weights, mutant, k));
        probe_cache[scale] = fitness;
        return fitness;
      };
      const double scale = adapt_scale_factor(target.scale_factor, rng, cfg, ctx);

      Individual trial;
      trial.scale_factor = scale;
      const auto mutant = mutant_vector(pop.individuals[idx[0]].weights,
                                        pop.individuals[idx[1]].weights,
                                        pop.individuals[idx[2]].weights, scale);
      trial.weights = crossover_mix(target.weights, mutant, k);
      const auto cached = probe_cache.find(scale);
      if (cached != probe_cache.end()) trial.fitness = cached->second;
      trials[i] = std::move(trial);
    }

    parallel_for(np, options.workers, [&](std::size_t i) {
      if (!trials[i].fitness) trials[i].fitness = evaluate_fitness(trials[i].weights);
      if (cfg.strict_reevaluation)
        pop.individuals[i].fitness = evaluate_fitness(pop.individuals[i].weights);
    });

    for (std::size_t i = 0; i < np; ++i) {
      if (*trials[i].fitness > *pop.individuals[i].fitness)
        pop.individuals[i] = std::move(trials[i]);
    }
    pop.generation = g;
    result.history.records.push_back(record_generation(pop, g));

    for (std::size_t i = 0; i < np; ++i) {
      if (pop.individuals[i].fitness.value() > result.best.fitness.value()) {
        result.best = pop.individuals[i];
        result.best_generation = g;
      }
    }
  }

  result.fitness_evaluations = evaluate_fitness.evaluation_count();
  return result;
}

}  // namespace deihdl
