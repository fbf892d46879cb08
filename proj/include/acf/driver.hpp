#pragma once

#include <algorithm>
#include <chrono>
#include <concepts>
#include <cstddef>
#include <vector>

#include "acf/random.hpp"
#include "acf/scheduler.hpp"
#include "acf/solvers.hpp"
#include "acf/sparse.hpp"

namespace acf {

template <class P>
concept CoordinateProblem = requires(P p, const P cp, std::size_t i, OpCounter& counter,
                                     TrainResult& result) {
  { cp.num_coordinates() } -> std::convertible_to<std::size_t>;
  { p.step(i, counter) } -> std::same_as<StepResult>;
  { cp.objective() } -> std::convertible_to<double>;
  cp.fill(result);
};

// Generic coordinate descent loop. One epoch is a uniform permutation sweep
// or one ACF schedule; the first epoch of an ACF run is a uniform sweep that
// seeds the average gain. The run stops once the latest observed KKT
// violation of every coordinate is below epsilon at the end of a full sweep;
// in ACF mode a passing schedule triggers one verification sweep.
template <CoordinateProblem Problem>
TrainResult run_coordinate_descent(Problem& problem, const SolverConfig& config) {
  TrainResult result;
  OpCounter counter;
  const std::size_t n = problem.num_coordinates();
  const bool adaptive = config.selection == Selection::acf;

  if (n == 0) {
    result.converged = true;
    problem.fill(result);
    result.objective = problem.objective();
    return result;
  }

  UniformScheduler uniform(n, derive_seed(config.seed, 0));
  std::vector<double> prefs =
      config.initial_preferences.empty() ? std::vector<double>(n, 1.0) : config.initial_preferences;
  AcfScheduler scheduler(std::move(prefs), config.acf, derive_seed(config.seed, 1));
  KktMonitor monitor(n);

  // ACF epochs may skip coordinates, so their latest violations can be
  // stale. Convergence is only accepted right after a full sweep.
  bool verify = false;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const bool sweep = !adaptive || scheduler.warming_up() || verify;
    const std::vector<std::size_t> order = sweep ? uniform.next_epoch() : scheduler.generate_schedule();
    for (std::size_t i : order) {
      const StepResult s = problem.step(i, counter);
      ++result.iterations;
      monitor.observe(i, s.violation);
      if (adaptive) scheduler.acf_update(i, std::max(0.0, s.gain));
    }
    ++result.epochs;
    verify = monitor.max() < config.epsilon;
    if (verify && sweep) {
      result.converged = true;
      break;
    }
  }

  problem.fill(result);
  result.objective = problem.objective();
  result.operations = counter.value();
  if (adaptive) {
    auto p = scheduler.preferences();
    result.preferences.assign(p.begin(), p.end());
  }
  return result;
}

}  // namespace acf
