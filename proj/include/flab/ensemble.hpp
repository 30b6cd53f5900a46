#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flab/fairmetrics.hpp"
#include "flab/synthgen.hpp"
#include "flab/tinynet.hpp"

// Deep-ensemble machinery: a pool of identically configured models trained
// with different seeds, uniform draws of k-member subsets, soft-voting
// aggregation, and accuracy-vs-ensemble-size curves averaged over draws.

namespace flab {

struct EnsemblePool {
  std::vector<ModelParams> models;
  std::string scenario_id;
  int fold = -1;
};

// The subsets evaluated for one ensemble size: every k-subset when there are
// at most n_draws of them, otherwise n_draws independent uniform draws.
struct DrawPlan {
  int k = 0;
  bool exhaustive = false;
  std::vector<std::vector<int>> subsets;  // each sorted ascending
};

DrawPlan draw_subsets(int pool_size, int k, int n_draws, std::uint64_t seed);

// Mean of member probabilities, summed in value order so the result does not
// depend on how the members are listed.
double mean_probability(std::span<const double> member_probabilities);

// Soft vote of an ensemble on one point: mean of the members' probabilities.
double aggregate(std::span<const ModelParams> members, const Vec2& features);

// Draw-averaged metrics for one ensemble size.
struct SizeMetrics {
  int k = 0;
  int n_subsets = 0;
  GroupMetrics metrics;
};

// Metrics for every ensemble size k = 1..pool size, each averaged over the
// subsets of its draw plan (plans derive their seeds per k from `seed`).
// Soft-vote decisions use the shared threshold rule (ties to class 1).
std::vector<SizeMetrics> evaluate_curve(const EnsemblePool& pool, const Dataset& test_set,
                                        int n_draws, std::uint64_t seed);

}  // namespace flab
