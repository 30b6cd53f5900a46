#include "flab/ensemble.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>

namespace flab {

namespace {

// C(n, k), saturated at cap+1 so callers can test "more than cap" without
// overflow worries.
std::uint64_t subset_count_capped(int n, int k, std::uint64_t cap) {
  if (k > n - k) k = n - k;
  unsigned __int128 c = 1;
  for (int i = 0; i < k; ++i) {
    c = c * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    if (c > cap) return cap + 1;
  }
  return static_cast<std::uint64_t>(c);
}

}  // namespace

DrawPlan draw_subsets(int pool_size, int k, int n_draws, std::uint64_t seed) {
  if (pool_size < 1) throw std::invalid_argument("pool_size must be >= 1");
  if (k < 1 || k > pool_size)
    throw std::invalid_argument("ensemble size must be in [1, pool_size]");
  if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");

  DrawPlan plan;
  plan.k = k;
  const auto cap = static_cast<std::uint64_t>(n_draws);
  const std::uint64_t total = subset_count_capped(pool_size, k, cap);

  if (total <= cap) {
    // Few enough subsets: enumerate them all, lexicographically.
    plan.exhaustive = true;
    plan.subsets.reserve(total);
    std::vector<int> subset(k);
    std::iota(subset.begin(), subset.end(), 0);
    while (true) {
      plan.subsets.push_back(subset);
      int i = k - 1;
      while (i >= 0 && subset[i] == pool_size - k + i) --i;
      if (i < 0) break;
      ++subset[i];
      for (int j = i + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
    return plan;
  }

  // Independent uniform k-subsets via partial Fisher-Yates.
  plan.exhaustive = false;
  plan.subsets.reserve(n_draws);
  Rng rng(seed);
  std::vector<int> pool(pool_size);
  for (int d = 0; d < n_draws; ++d) {
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(pool_size - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> subset(pool.begin(), pool.begin() + k);
    std::sort(subset.begin(), subset.end());
    plan.subsets.push_back(std::move(subset));
  }
  return plan;
}

double mean_probability(std::span<const double> member_probabilities) {
  if (member_probabilities.empty())
    throw std::invalid_argument("mean probability of zero members is undefined");
  std::vector<double> sorted(member_probabilities.begin(), member_probabilities.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double p : sorted) sum += p;
  return sum / static_cast<double>(sorted.size());
}

double aggregate(std::span<const ModelParams> members, const Vec2& features) {
  if (members.empty()) throw std::invalid_argument("ensemble needs at least one member");
  std::vector<double> probs;
  probs.reserve(members.size());
  for (const ModelParams& m : members) probs.push_back(forward(m, features));
  return mean_probability(probs);
}

std::vector<SizeMetrics> evaluate_curve(const EnsemblePool& pool, const Dataset& test_set,
                                        int n_draws, std::uint64_t seed) {
  if (pool.models.empty()) throw std::invalid_argument("pool has no models");
  if (test_set.split != Split::Test)
    throw std::invalid_argument("evaluate_curve expects a test split");
  if (n_draws < 1) throw std::invalid_argument("n_draws must be >= 1");

  const int pool_size = static_cast<int>(pool.models.size());
  const std::size_t n_rows = test_set.rows.size();

  // Member probabilities are fixed across subsets; compute them once.
  std::vector<std::vector<double>> probs;
  probs.reserve(pool_size);
  for (const ModelParams& m : pool.models) probs.push_back(forward_batch(m, test_set.rows));

  std::vector<std::uint8_t> is_m(n_rows);
  std::vector<Label> clean(n_rows);
  long long n_m = 0, n_f = 0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    is_m[r] = test_set.rows[r].group == Group::M;
    clean[r] = test_set.rows[r].clean_label;
    is_m[r] ? ++n_m : ++n_f;
  }
  if (n_m == 0 || n_f == 0)
    throw std::invalid_argument("test set must contain both groups");

  std::vector<SizeMetrics> curve;
  curve.reserve(pool_size);
  std::vector<double> row_sum(n_rows);

  for (int k = 1; k <= pool_size; ++k) {
    const DrawPlan plan = draw_subsets(pool_size, k, n_draws, derive_seed(seed, {"k", k}));
    double acc_m_sum = 0.0, acc_f_sum = 0.0, acc_all_sum = 0.0;
    for (const std::vector<int>& subset : plan.subsets) {
      std::fill(row_sum.begin(), row_sum.end(), 0.0);
      for (int member : subset) {
        const double* mp = probs[member].data();
        for (std::size_t r = 0; r < n_rows; ++r) row_sum[r] += mp[r];
      }
      const double inv_k = 1.0 / static_cast<double>(k);
      long long correct_m = 0, correct_f = 0;
      for (std::size_t r = 0; r < n_rows; ++r) {
        const Label pred = decide(row_sum[r] * inv_k);
        if (pred == clean[r]) is_m[r] ? ++correct_m : ++correct_f;
      }
      acc_m_sum += static_cast<double>(correct_m) / static_cast<double>(n_m);
      acc_f_sum += static_cast<double>(correct_f) / static_cast<double>(n_f);
      acc_all_sum +=
          static_cast<double>(correct_m + correct_f) / static_cast<double>(n_m + n_f);
    }
    const auto n_subsets = static_cast<double>(plan.subsets.size());
    SizeMetrics sm;
    sm.k = k;
    sm.n_subsets = static_cast<int>(plan.subsets.size());
    sm.metrics.acc_m = acc_m_sum / n_subsets;
    sm.metrics.acc_f = acc_f_sum / n_subsets;
    sm.metrics.acc_overall = acc_all_sum / n_subsets;
    sm.metrics.n_m = n_m;
    sm.metrics.n_f = n_f;
    curve.push_back(sm);
  }
  return curve;
}

}  // namespace flab
