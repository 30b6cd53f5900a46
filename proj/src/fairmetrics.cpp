#include "flab/fairmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

namespace flab {

std::string to_string(Benefited b) {
  switch (b) {
    case Benefited::M: return "M";
    case Benefited::F: return "F";
    default: return "none";
  }
}

Benefited benefited_from_string(const std::string& s) {
  if (s == "M") return Benefited::M;
  if (s == "F") return Benefited::F;
  if (s == "none") return Benefited::None;
  throw std::invalid_argument("unknown benefited tag '" + s + "'");
}

GroupMetrics group_accuracy(std::span<const Label> predictions, const Dataset& test_set) {
  if (test_set.split != Split::Test)
    throw std::invalid_argument("group_accuracy expects a test split");
  if (predictions.size() != test_set.rows.size())
    throw std::invalid_argument("predictions and test set differ in length");

  long long correct_m = 0, correct_f = 0;
  GroupMetrics gm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const DataRow& row = test_set.rows[i];
    const bool hit = predictions[i] == row.clean_label;
    if (row.group == Group::M) {
      ++gm.n_m;
      correct_m += hit;
    } else {
      ++gm.n_f;
      correct_f += hit;
    }
  }
  if (gm.n_m == 0 || gm.n_f == 0)
    throw std::invalid_argument("test set must contain both groups");
  gm.acc_m = static_cast<double>(correct_m) / static_cast<double>(gm.n_m);
  gm.acc_f = static_cast<double>(correct_f) / static_cast<double>(gm.n_f);
  gm.acc_overall =
      static_cast<double>(correct_m + correct_f) / static_cast<double>(gm.n_m + gm.n_f);
  return gm;
}

GapReport gap(const GroupMetrics& metrics) {
  GapReport rep;
  rep.abs_gap = std::abs(metrics.acc_m - metrics.acc_f) * 100.0;
  if (metrics.acc_m > metrics.acc_f)
    rep.benefited = Benefited::M;
  else if (metrics.acc_f > metrics.acc_m)
    rep.benefited = Benefited::F;
  else
    rep.benefited = Benefited::None;
  return rep;
}

double relative_improvement(double acc_at_k, double acc_at_1) {
  if (!(acc_at_1 > 0.0))
    throw std::domain_error("relative improvement is undefined for acc_at_1 <= 0");
  return 100.0 * (acc_at_k - acc_at_1) / acc_at_1;
}

bool positive_sum(std::span<const MetricsRecord> curve, int k_max) {
  const MetricsRecord* at_1 = nullptr;
  const MetricsRecord* at_k = nullptr;
  for (const MetricsRecord& rec : curve) {
    if (rec.k == 1) {
      if (at_1) throw std::invalid_argument("curve has multiple k=1 records");
      at_1 = &rec;
    }
    if (rec.k == k_max) {
      if (rec.k != 1 && at_k) throw std::invalid_argument("curve has multiple k=k_max records");
      at_k = &rec;
    }
  }
  if (!at_1 || !at_k)
    throw std::invalid_argument("curve must contain records for k=1 and k=k_max");
  return at_k->gap_abs < at_1->gap_abs && at_k->acc_m >= at_1->acc_m &&
         at_k->acc_f >= at_1->acc_f;
}

OptimalRatio optimal_ratio(std::span<const MetricsRecord> records) {
  if (records.empty()) throw std::invalid_argument("optimal_ratio needs records");
  const std::string& variant = records.front().variant;
  const double difficulty = records.front().difficulty;
  const int k = records.front().k;

  // Collapse duplicates; complain about conflicting values for the same key.
  std::map<std::pair<double, int>, const MetricsRecord*> by_key;
  for (const MetricsRecord& rec : records) {
    if (rec.variant != variant || rec.difficulty != difficulty || rec.k != k)
      throw std::invalid_argument(
          "optimal_ratio expects a single variant, difficulty and ensemble size");
    auto [it, inserted] = by_key.try_emplace({rec.ratio_m, rec.fold}, &rec);
    if (!inserted) {
      const MetricsRecord& prev = *it->second;
      if (prev.acc_overall != rec.acc_overall || prev.gap_abs != rec.gap_abs)
        throw std::invalid_argument("conflicting records for one (ratio, fold) key");
    }
  }

  struct Agg {
    double acc_sum = 0.0;
    double gap_sum = 0.0;
    int folds = 0;
  };
  std::map<double, Agg> by_ratio;
  for (const auto& [key, rec] : by_key) {
    Agg& agg = by_ratio[key.first];
    agg.acc_sum += rec->acc_overall;
    agg.gap_sum += rec->gap_abs;
    ++agg.folds;
  }
  if (by_ratio.size() < 2)
    throw std::invalid_argument("optimal_ratio needs at least two distinct ratios");

  std::vector<double> ratios;
  std::vector<double> mean_acc, mean_gap;
  for (const auto& [ratio, agg] : by_ratio) {
    ratios.push_back(ratio);
    mean_acc.push_back(agg.acc_sum / agg.folds);
    mean_gap.push_back(agg.gap_sum / agg.folds);
  }

  // Exact ties prefer balance, then the smaller ratio (ratios are sorted, so
  // scanning in order makes "smaller ratio" the natural fallback). Distances
  // from 0.5 get a tolerance: 0.3 and 0.7 must count as equidistant even
  // though their rounded doubles differ in the last bit.
  const auto better = [&](double cand_val, double cand_ratio, double best_val,
                          double best_ratio, bool maximize) {
    if (cand_val != best_val) return maximize ? cand_val > best_val : cand_val < best_val;
    const double cand_dist = std::abs(cand_ratio - 0.5);
    const double best_dist = std::abs(best_ratio - 0.5);
    if (std::abs(cand_dist - best_dist) < 1e-12) return false;
    return cand_dist < best_dist;
  };

  std::size_t best_acc = 0, best_gap = 0;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    if (better(mean_acc[i], ratios[i], mean_acc[best_acc], ratios[best_acc], true)) best_acc = i;
    if (better(mean_gap[i], ratios[i], mean_gap[best_gap], ratios[best_gap], false)) best_gap = i;
  }

  double grid_step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < ratios.size(); ++i)
    grid_step = std::min(grid_step, ratios[i] - ratios[i - 1]);

  OptimalRatio out;
  out.ratio_max_overall = ratios[best_acc];
  out.ratio_min_gap = ratios[best_gap];
  out.coincide =
      std::abs(out.ratio_max_overall - out.ratio_min_gap) <= grid_step * (1.0 + 1e-9);
  return out;
}

}  // namespace flab
