#pragma once

#include <span>
#include <string>

#include "flab/synthgen.hpp"

// Per-group accuracy bookkeeping: accuracy gaps (reported in accuracy points,
// i.e. percentages of 100), which group benefits, relative improvement over a
// single model, and the training-ratio sweet spot for a ratio sweep.

namespace flab {

struct GroupMetrics {
  double acc_m = 0.0;
  double acc_f = 0.0;
  double acc_overall = 0.0;  // pooled over all rows
  long long n_m = 0;
  long long n_f = 0;
};

enum class Benefited { M, F, None };

std::string to_string(Benefited b);
Benefited benefited_from_string(const std::string& s);

struct GapReport {
  double abs_gap = 0.0;  // |acc_m - acc_f| in accuracy points
  Benefited benefited = Benefited::None;
};

// One row of an experiment's results table: the metrics of ensembles of size
// k in one (difficulty, ratio, fold) cell, averaged over subset draws.
struct MetricsRecord {
  std::string variant;
  double difficulty = 0.0;  // noise fraction or rotation degrees
  double ratio_m = 0.0;
  int fold = 0;
  int k = 1;
  double acc_m = 0.0;
  double acc_f = 0.0;
  double acc_overall = 0.0;
  double gap_abs = 0.0;  // accuracy points
  Benefited benefited = Benefited::None;
  double rel_imp_m = 0.0;  // % accuracy change for group M vs k=1
  double rel_imp_f = 0.0;
  int n_draws = 0;
};

// Accuracy of hard predictions against clean labels, per group and pooled.
// predictions[i] corresponds to test_set.rows[i]. Both groups must appear.
GroupMetrics group_accuracy(std::span<const Label> predictions, const Dataset& test_set);

GapReport gap(const GroupMetrics& metrics);

// 100 * (acc_at_k - acc_at_1) / acc_at_1; scale-free, so fractions and
// percentages both work. acc_at_1 must be positive.
double relative_improvement(double acc_at_k, double acc_at_1);

// True when growing the ensemble from 1 to k_max shrank the gap while neither
// group lost accuracy. `curve` must hold exactly one record each for k=1 and
// k=k_max (one cell and fold, or a fold-mean curve).
bool positive_sum(std::span<const MetricsRecord> curve, int k_max);

struct OptimalRatio {
  double ratio_max_overall = 0.0;  // fold-mean overall accuracy argmax
  double ratio_min_gap = 0.0;      // fold-mean gap argmin
  bool coincide = false;           // within one grid step of each other
};

// Scan a ratio sweep (single variant, difficulty and k; >= 2 distinct ratios)
// for the best ratio by overall accuracy and by gap. Fold values are averaged
// per ratio first. Exact ties prefer the ratio closest to 0.5, then the
// smaller one. Duplicated records collapse instead of double counting.
OptimalRatio optimal_ratio(std::span<const MetricsRecord> records);

}  // namespace flab
