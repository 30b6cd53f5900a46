#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "flab/fairmetrics.hpp"

using namespace flab;

namespace {

Dataset tiny_testset() {
  // 4 M rows (clean labels 0,0,1,1) then 2 F rows (0,1).
  Dataset ds;
  ds.split = Split::Test;
  const auto add = [&](Group g, Label cls) {
    DataRow row;
    row.group = g;
    row.clean_label = cls;
    row.observed_label = cls;
    ds.rows.push_back(row);
  };
  add(Group::M, 0);
  add(Group::M, 0);
  add(Group::M, 1);
  add(Group::M, 1);
  add(Group::F, 0);
  add(Group::F, 1);
  return ds;
}

MetricsRecord rec(double ratio, int fold, int k, double acc_m, double acc_f,
                  double acc_overall, double gap_abs) {
  MetricsRecord r;
  r.variant = "label_noise";
  r.difficulty = 0.4;
  r.ratio_m = ratio;
  r.fold = fold;
  r.k = k;
  r.acc_m = acc_m;
  r.acc_f = acc_f;
  r.acc_overall = acc_overall;
  r.gap_abs = gap_abs;
  return r;
}

MetricsRecord ratio_rec(double ratio, int fold, double acc_overall, double gap_abs) {
  return rec(ratio, fold, 20, 0.0, 0.0, acc_overall, gap_abs);
}

}  // namespace

TEST_CASE("group accuracy from hand-checked predictions") {
  const Dataset ds = tiny_testset();
  // M: predictions 0,1,1,1 -> 3 of 4 correct. F: 1,1 -> 1 of 2 correct.
  const std::vector<Label> pred = {0, 1, 1, 1, 1, 1};
  const GroupMetrics gm = group_accuracy(pred, ds);
  CHECK(gm.acc_m == 0.75);
  CHECK(gm.acc_f == 0.5);
  CHECK(gm.acc_overall == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(gm.n_m == 4);
  CHECK(gm.n_f == 2);
}

TEST_CASE("group accuracy scores against clean labels even when observed differ") {
  Dataset ds = tiny_testset();
  ds.rows[0].observed_label = 1;  // clean label stays 0
  const std::vector<Label> pred = {0, 0, 1, 1, 0, 1};
  const GroupMetrics gm = group_accuracy(pred, ds);
  CHECK(gm.acc_m == 1.0);
  CHECK(gm.acc_f == 1.0);
}

TEST_CASE("group accuracy input validation") {
  const Dataset ds = tiny_testset();
  SUBCASE("length mismatch") {
    const std::vector<Label> pred = {0, 1};
    CHECK_THROWS_AS(group_accuracy(pred, ds), std::invalid_argument);
  }
  SUBCASE("training split") {
    Dataset train = ds;
    train.split = Split::Train;
    const std::vector<Label> pred(6, Label{0});
    CHECK_THROWS_AS(group_accuracy(pred, train), std::invalid_argument);
  }
  SUBCASE("single group") {
    Dataset mono = ds;
    for (DataRow& row : mono.rows) row.group = Group::F;
    const std::vector<Label> pred(6, Label{0});
    CHECK_THROWS_AS(group_accuracy(pred, mono), std::invalid_argument);
  }
}

TEST_CASE("gap is reported in accuracy points with the winner tagged") {
  GroupMetrics gm;
  gm.acc_m = 0.90;
  gm.acc_f = 0.85;
  GapReport rep = gap(gm);
  CHECK(rep.abs_gap == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(rep.benefited == Benefited::M);

  gm.acc_f = 0.98;
  rep = gap(gm);
  CHECK(rep.abs_gap == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(rep.benefited == Benefited::F);

  gm.acc_f = gm.acc_m;
  rep = gap(gm);
  CHECK(rep.abs_gap == 0.0);
  CHECK(rep.benefited == Benefited::None);
}

TEST_CASE("benefited tags round-trip through strings") {
  CHECK(to_string(Benefited::M) == "M");
  CHECK(to_string(Benefited::F) == "F");
  CHECK(to_string(Benefited::None) == "none");
  CHECK(benefited_from_string("M") == Benefited::M);
  CHECK(benefited_from_string("F") == Benefited::F);
  CHECK(benefited_from_string("none") == Benefited::None);
  CHECK_THROWS_AS(benefited_from_string("both"), std::invalid_argument);
}

TEST_CASE("relative improvement matches the frozen reference value") {
  // Independently computed: 100 * (78.3 - 75.3) / 75.3.
  CHECK(relative_improvement(78.3, 75.3) ==
        doctest::Approx(3.9840637450199203).epsilon(1e-14));
  // Scale-free: fractions give the same percentage.
  CHECK(relative_improvement(0.783, 0.753) ==
        doctest::Approx(relative_improvement(78.3, 75.3)).epsilon(1e-12));
  CHECK(relative_improvement(0.7, 0.7) == 0.0);
  CHECK(relative_improvement(0.6, 0.8) == doctest::Approx(-25.0).epsilon(1e-12));
  CHECK_THROWS_AS(relative_improvement(0.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(relative_improvement(0.5, -1.0), std::domain_error);
}

TEST_CASE("positive sum requires a shrinking gap with no group losing") {
  const auto curve_with = [&](double gap20, double am20, double af20) {
    std::vector<MetricsRecord> curve;
    curve.push_back(rec(0.2, 0, 1, 0.90, 0.70, 0.74, 20.0));
    curve.push_back(rec(0.2, 0, 20, am20, af20, 0.0, gap20));
    return curve;
  };

  CHECK(positive_sum(curve_with(10.0, 0.92, 0.82), 20));
  // Gap must shrink strictly.
  CHECK_FALSE(positive_sum(curve_with(20.0, 0.92, 0.82), 20));
  // Neither group may lose accuracy.
  CHECK_FALSE(positive_sum(curve_with(10.0, 0.89, 0.82), 20));
  CHECK_FALSE(positive_sum(curve_with(10.0, 0.92, 0.69), 20));
  // Holding steady on one side still counts while the gap shrinks.
  CHECK(positive_sum(curve_with(19.0, 0.90, 0.71), 20));
}

TEST_CASE("positive sum ignores records at other ensemble sizes") {
  std::vector<MetricsRecord> curve;
  for (int k = 1; k <= 20; ++k)
    curve.push_back(rec(0.2, 0, k, 0.90 + 0.001 * k, 0.70 + 0.005 * k, 0.0, 20.0 - 0.5 * k));
  CHECK(positive_sum(curve, 20));
}

TEST_CASE("positive sum degenerate and malformed curves") {
  SUBCASE("k_max = 1 compares a record with itself, so never positive-sum") {
    std::vector<MetricsRecord> curve = {rec(0.2, 0, 1, 0.9, 0.8, 0.85, 10.0)};
    CHECK_FALSE(positive_sum(curve, 1));
  }
  SUBCASE("missing endpoints") {
    std::vector<MetricsRecord> curve = {rec(0.2, 0, 1, 0.9, 0.8, 0.85, 10.0)};
    CHECK_THROWS_AS(positive_sum(curve, 20), std::invalid_argument);
    std::vector<MetricsRecord> no_base = {rec(0.2, 0, 20, 0.9, 0.8, 0.85, 10.0)};
    CHECK_THROWS_AS(positive_sum(no_base, 20), std::invalid_argument);
  }
  SUBCASE("duplicate endpoints") {
    std::vector<MetricsRecord> curve = {
        rec(0.2, 0, 1, 0.9, 0.8, 0.85, 10.0),
        rec(0.2, 1, 1, 0.9, 0.8, 0.85, 10.0),
        rec(0.2, 0, 20, 0.95, 0.9, 0.92, 5.0),
    };
    CHECK_THROWS_AS(positive_sum(curve, 20), std::invalid_argument);
  }
}

TEST_CASE("optimal ratio finds distinct argmax and argmin") {
  // Accuracy peaks at 0.3, gap bottoms out at 0.7; grid step 0.1, so the two
  // optima are 4 steps apart and must not be reported as coinciding.
  std::vector<MetricsRecord> records;
  const std::vector<double> ratios = {0.1, 0.3, 0.5, 0.7, 0.9};
  const std::vector<double> accs = {0.80, 0.90, 0.85, 0.84, 0.70};
  const std::vector<double> gaps = {9.0, 6.0, 4.0, 1.0, 3.0};
  for (std::size_t i = 0; i < ratios.size(); ++i)
    records.push_back(ratio_rec(ratios[i], 0, accs[i], gaps[i]));

  const OptimalRatio best = optimal_ratio(records);
  CHECK(best.ratio_max_overall == 0.3);
  CHECK(best.ratio_min_gap == 0.7);
  CHECK_FALSE(best.coincide);
}

TEST_CASE("optimal ratio averages folds before ranking") {
  // Ratio 0.4's fold mean (0.7) beats ratio 0.6's single fold (0.65), even
  // though one of its folds alone would lose.
  std::vector<MetricsRecord> records = {
      ratio_rec(0.4, 0, 0.80, 5.0),
      ratio_rec(0.4, 1, 0.60, 5.0),
      ratio_rec(0.6, 0, 0.65, 9.0),
      ratio_rec(0.6, 1, 0.65, 9.0),
  };
  const OptimalRatio best = optimal_ratio(records);
  CHECK(best.ratio_max_overall == 0.4);
  CHECK(best.ratio_min_gap == 0.4);
  CHECK(best.coincide);
}

TEST_CASE("optimal ratio declares adjacent optima coincident") {
  std::vector<MetricsRecord> records = {
      ratio_rec(0.4, 0, 0.90, 5.0),
      ratio_rec(0.5, 0, 0.85, 2.0),
      ratio_rec(0.6, 0, 0.80, 7.0),
  };
  const OptimalRatio best = optimal_ratio(records);
  CHECK(best.ratio_max_overall == 0.4);
  CHECK(best.ratio_min_gap == 0.5);
  CHECK(best.coincide);  // one grid step apart
}

TEST_CASE("optimal ratio breaks exact ties toward balance, then smaller") {
  SUBCASE("0.5 wins a tie against 0.2") {
    std::vector<MetricsRecord> records = {
        ratio_rec(0.2, 0, 0.9, 5.0),
        ratio_rec(0.5, 0, 0.9, 5.0),
        ratio_rec(0.8, 0, 0.8, 9.0),
    };
    const OptimalRatio best = optimal_ratio(records);
    CHECK(best.ratio_max_overall == 0.5);
    CHECK(best.ratio_min_gap == 0.5);
  }
  SUBCASE("equidistant tie keeps the smaller ratio") {
    std::vector<MetricsRecord> records = {
        ratio_rec(0.3, 0, 0.9, 5.0),
        ratio_rec(0.5, 0, 0.8, 9.0),
        ratio_rec(0.7, 0, 0.9, 5.0),
    };
    const OptimalRatio best = optimal_ratio(records);
    CHECK(best.ratio_max_overall == 0.3);
    CHECK(best.ratio_min_gap == 0.3);
  }
}

TEST_CASE("optimal ratio collapses exact duplicates but rejects conflicts") {
  std::vector<MetricsRecord> records = {
      ratio_rec(0.4, 0, 0.70, 5.0),
      ratio_rec(0.4, 0, 0.70, 5.0),  // harmless duplicate
      ratio_rec(0.6, 0, 0.70, 5.0),
      ratio_rec(0.6, 1, 0.90, 5.0),
  };
  // If the duplicate double-counted, ratio 0.4's mean would stay 0.70 while
  // 0.6's is 0.80 either way; dedupe keeps 0.4 at one fold.
  const OptimalRatio best = optimal_ratio(records);
  CHECK(best.ratio_max_overall == 0.6);

  records.push_back(ratio_rec(0.4, 0, 0.75, 5.0));  // conflicting value
  CHECK_THROWS_AS(optimal_ratio(records), std::invalid_argument);
}

TEST_CASE("optimal ratio input validation") {
  SUBCASE("empty") {
    CHECK_THROWS_AS(optimal_ratio(std::vector<MetricsRecord>{}), std::invalid_argument);
  }
  SUBCASE("fewer than two ratios") {
    std::vector<MetricsRecord> records = {
        ratio_rec(0.5, 0, 0.9, 1.0),
        ratio_rec(0.5, 1, 0.8, 2.0),
    };
    CHECK_THROWS_AS(optimal_ratio(records), std::invalid_argument);
  }
  SUBCASE("mixed ensemble sizes") {
    std::vector<MetricsRecord> records = {
        ratio_rec(0.4, 0, 0.9, 1.0),
        rec(0.6, 0, 10, 0.0, 0.0, 0.8, 2.0),
    };
    CHECK_THROWS_AS(optimal_ratio(records), std::invalid_argument);
  }
  SUBCASE("mixed difficulties") {
    std::vector<MetricsRecord> records = {ratio_rec(0.4, 0, 0.9, 1.0)};
    MetricsRecord other = ratio_rec(0.6, 0, 0.8, 2.0);
    other.difficulty = 0.25;
    records.push_back(other);
    CHECK_THROWS_AS(optimal_ratio(records), std::invalid_argument);
  }
}
