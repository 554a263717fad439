#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cobra/fault_injector.hpp"

namespace cobra {

struct ReductionConfig {
  double epsilon = 1.0;                 // loss tolerance on the saturated scale
  std::size_t max_iterations = 100;     // N_max
  std::size_t patterns_per_iteration = 100;
  std::uint64_t rng_seed = 42;
};

struct TraceEntry {
  std::size_t iteration = 0;  // t, 1-based
  std::size_t subset_size = 0;
  double loss = 0.0;          // loss of the standing subset, saturated scale
};

struct ReductionResult {
  std::vector<BitLocation> reduced;     // I_red
  std::vector<TraceEntry> trace;
  double baseline_loss = 0.0;           // L_orig = loss(I_init)
  LossValue final_loss;                 // re-verified loss(I_red)
};

using SubsetLossFn = std::function<LossValue(std::span<const BitLocation>)>;

// Randomized exclusionary reduction: each iteration tries up to
// patterns_per_iteration random exclusions, drawing n_exc uniformly from
// [1, floor(|I|/2)] (a singleton set tests the empty set), and accepts the
// first exclusion whose loss stays >= L_orig - epsilon. Terminates when an
// iteration accepts nothing or after max_iterations. Draws come from a
// counter-based stream keyed by (seed, t, i), so results are independent of
// evaluation order. Throws std::invalid_argument on an empty initial set.
ReductionResult reduce_subset(const std::vector<BitLocation>& initial,
                              const ReductionConfig& cfg, const SubsetLossFn& loss_fn);

struct BruteForceResult {
  std::vector<std::vector<BitLocation>> minimal_sets;  // all of minimum size
  std::size_t minimum_size = 0;
  double baseline_loss = 0.0;
};

// Exhaustive oracle: enumerates subsets by increasing size and returns every
// smallest-cardinality subset with loss >= L_orig - epsilon. Capped at
// |initial| <= 15. Throws std::invalid_argument beyond the cap.
BruteForceResult brute_force_min_subset(const std::vector<BitLocation>& initial,
                                        double epsilon, const SubsetLossFn& loss_fn);

std::string optimization_trace_csv(const std::vector<TraceEntry>& trace);

}  // namespace cobra
