#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "flab/synthgen.hpp"

using namespace flab;

namespace {

ScenarioConfig base_config() {
  ScenarioConfig cfg;
  cfg.n_train = 1000;
  cfg.n_test_per_cell = 50;
  return cfg;
}

long long flipped_rows(const Dataset& ds) {
  long long n = 0;
  for (const DataRow& row : ds.rows) n += row.observed_label != row.clean_label;
  return n;
}

}  // namespace

TEST_CASE("default center layout is the mirrored square") {
  const CenterLayout c = default_centers();
  CHECK(c.m0.x == -0.5);
  CHECK(c.m0.y == -0.35);
  CHECK(c.m1.x == -0.5);
  CHECK(c.m1.y == 0.35);
  CHECK(c.f0.x == 0.5);
  CHECK(c.f0.y == 0.35);
  CHECK(c.f1.x == 0.5);
  CHECK(c.f1.y == -0.35);

  SUBCASE("negating a center gives the other group's center of the same class") {
    CHECK(c.center(Group::F, 0).x == -c.center(Group::M, 0).x);
    CHECK(c.center(Group::F, 0).y == -c.center(Group::M, 0).y);
    CHECK(c.center(Group::F, 1).x == -c.center(Group::M, 1).x);
    CHECK(c.center(Group::F, 1).y == -c.center(Group::M, 1).y);
  }
}

TEST_CASE("45 degree rotation moves only the F centers, counter-clockwise") {
  const CenterLayout c = build_centers(Variant::RotatedBoundary, 45.0);
  CHECK(c.m0.x == -0.5);
  CHECK(c.m1.y == 0.35);
  // Frozen from an independent trig computation about the pivot (0.5, 0).
  CHECK(c.f0.x == doctest::Approx(0.2525126265847084).epsilon(1e-14));
  CHECK(c.f0.y == doctest::Approx(0.2474873734152916).epsilon(1e-14));
  CHECK(c.f1.x == doctest::Approx(0.7474873734152916).epsilon(1e-14));
  CHECK(c.f1.y == doctest::Approx(-0.2474873734152916).epsilon(1e-14));

  SUBCASE("rotation preserves within-group class separation") {
    const double dx = c.f0.x - c.f1.x, dy = c.f0.y - c.f1.y;
    CHECK(std::sqrt(dx * dx + dy * dy) == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("build_centers rejects rotation outside the supported range") {
  CHECK_THROWS_AS(build_centers(Variant::RotatedBoundary, -1.0), std::out_of_range);
  CHECK_THROWS_AS(build_centers(Variant::RotatedBoundary, 45.5), std::out_of_range);
  CHECK_THROWS_AS(build_centers(Variant::LabelNoise, 5.0), std::invalid_argument);
  CHECK_NOTHROW(build_centers(Variant::LabelNoise, 0.0));
}

TEST_CASE("group and class counts follow the ratio") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.2;
  cfg.n_train = 4000;
  const Dataset ds = sample_dataset(cfg, 1);
  CHECK(ds.rows.size() == 4000);
  CHECK(ds.count(Group::M) == 800);
  CHECK(ds.count(Group::F) == 3200);
  CHECK(ds.count(Group::M, 0) == 400);
  CHECK(ds.count(Group::M, 1) == 400);
  CHECK(ds.count(Group::F, 0) == 1600);
  CHECK(ds.count(Group::F, 1) == 1600);
  CHECK(ds.split == Split::Train);
  for (const DataRow& row : ds.rows) CHECK(row.observed_label == row.clean_label);
}

TEST_CASE("odd group sizes give the extra row to class 1") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.25;
  cfg.n_train = 10;  // M gets round(2.5) = 3 rows, F gets 7
  const Dataset ds = sample_dataset(cfg, 1);
  CHECK(ds.count(Group::M) == 3);
  CHECK(ds.count(Group::M, 0) == 1);
  CHECK(ds.count(Group::M, 1) == 2);
  CHECK(ds.count(Group::F) == 7);
  CHECK(ds.count(Group::F, 0) == 3);
  CHECK(ds.count(Group::F, 1) == 4);
}

TEST_CASE("extreme ratios empty one group") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.0;
  const Dataset ds = sample_dataset(cfg, 1);
  CHECK(ds.count(Group::M) == 0);
  CHECK(ds.count(Group::F) == 1000);
}

TEST_CASE("rows come out cell by cell in M0 M1 F0 F1 order") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.5;
  cfg.n_train = 40;
  const Dataset ds = sample_dataset(cfg, 3);
  for (int i = 0; i < 10; ++i) {
    CHECK(ds.rows[i].group == Group::M);
    CHECK(ds.rows[i].clean_label == 0);
    CHECK(ds.rows[10 + i].group == Group::M);
    CHECK(ds.rows[10 + i].clean_label == 1);
    CHECK(ds.rows[20 + i].group == Group::F);
    CHECK(ds.rows[20 + i].clean_label == 0);
    CHECK(ds.rows[30 + i].group == Group::F);
    CHECK(ds.rows[30 + i].clean_label == 1);
  }
}

TEST_CASE("cell samples are prefix-stable as the cells grow") {
  // Same seed, bigger draw: every cell's rows must start with the smaller
  // draw's rows, so ratio sweeps see nested training sets.
  ScenarioConfig small = base_config();
  small.ratio_m = 0.3;
  small.n_train = 200;
  ScenarioConfig big = small;
  big.n_train = 1000;

  const Dataset ds_small = sample_dataset(small, 17);
  const Dataset ds_big = sample_dataset(big, 17);

  const auto cell_rows = [](const Dataset& ds, Group g, Label cls) {
    std::vector<DataRow> rows;
    for (const DataRow& row : ds.rows)
      if (row.group == g && row.clean_label == cls) rows.push_back(row);
    return rows;
  };
  for (Group g : {Group::M, Group::F})
    for (Label cls : {Label{0}, Label{1}}) {
      const auto small_rows = cell_rows(ds_small, g, cls);
      const auto big_rows = cell_rows(ds_big, g, cls);
      REQUIRE(small_rows.size() < big_rows.size());
      for (std::size_t i = 0; i < small_rows.size(); ++i) {
        CHECK(small_rows[i].features.x == big_rows[i].features.x);
        CHECK(small_rows[i].features.y == big_rows[i].features.y);
      }
    }
}

TEST_CASE("sigma zero collapses every sample onto its center") {
  ScenarioConfig cfg = base_config();
  cfg.sigma = 0.0;
  cfg.ratio_m = 0.5;
  cfg.n_train = 20;
  const Dataset ds = sample_dataset(cfg, 9);
  const CenterLayout centers = cfg.centers();
  for (const DataRow& row : ds.rows) {
    const Vec2& c = centers.center(row.group, row.clean_label);
    CHECK(row.features.x == c.x);
    CHECK(row.features.y == c.y);
  }
}

TEST_CASE("empirical cell means respect the negation symmetry") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.5;
  cfg.n_train = 20000;
  const Dataset ds = sample_dataset(cfg, 21);
  const auto mean_of = [&](Group g, Label cls) {
    Vec2 sum{0.0, 0.0};
    long long n = 0;
    for (const DataRow& row : ds.rows)
      if (row.group == g && row.clean_label == cls) {
        sum.x += row.features.x;
        sum.y += row.features.y;
        ++n;
      }
    return Vec2{sum.x / n, sum.y / n};
  };
  const double tol = 4.0 * cfg.sigma / std::sqrt(5000.0);
  for (Label cls : {Label{0}, Label{1}}) {
    const Vec2 m = mean_of(Group::M, cls);
    const Vec2 f = mean_of(Group::F, cls);
    CHECK(std::abs(m.x + f.x) < 2.0 * tol);
    CHECK(std::abs(m.y + f.y) < 2.0 * tol);
  }
}

TEST_CASE("test sets are balanced per cell and never flipped") {
  ScenarioConfig cfg = base_config();
  cfg.n_test_per_cell = 123;
  const Dataset ds = sample_testset(cfg, 5);
  CHECK(ds.split == Split::Test);
  CHECK(ds.rows.size() == 4 * 123);
  for (Group g : {Group::M, Group::F})
    for (Label cls : {Label{0}, Label{1}}) CHECK(ds.count(g, cls) == 123);
  CHECK(flipped_rows(ds) == 0);
}

TEST_CASE("flip counts follow floor(fraction * n + 0.5)") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.2;
  cfg.n_train = 4000;  // F has 3200 rows
  const Dataset ds = sample_dataset(cfg, 11);

  SUBCASE("40% of 3200 rows") {
    const Dataset flipped = flip_labels(ds, Group::F, 0.4, 77);
    CHECK(flipped_rows(flipped) == 1280);
  }
  SUBCASE("rounding is floor(x + 0.5)") {
    ScenarioConfig tiny = base_config();
    tiny.ratio_m = 0.0;
    tiny.n_train = 5;
    const Dataset d5 = sample_dataset(tiny, 1);
    CHECK(flipped_rows(flip_labels(d5, Group::F, 0.5, 1)) == 3);   // floor(3.0)
    CHECK(flipped_rows(flip_labels(d5, Group::F, 0.29, 1)) == 1);  // floor(1.95)
  }
  SUBCASE("zero fraction flips nothing") {
    CHECK(flipped_rows(flip_labels(ds, Group::F, 0.0, 77)) == 0);
  }
}

TEST_CASE("flips only touch the target group and invert clean labels") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.5;
  const Dataset ds = sample_dataset(cfg, 13);
  const Dataset flipped = flip_labels(ds, Group::F, 0.3, 99);
  REQUIRE(flipped.rows.size() == ds.rows.size());
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const DataRow& before = ds.rows[i];
    const DataRow& after = flipped.rows[i];
    CHECK(after.features.x == before.features.x);
    CHECK(after.clean_label == before.clean_label);
    if (after.group == Group::M) {
      CHECK(after.observed_label == before.observed_label);
    } else if (after.observed_label != after.clean_label) {
      CHECK(after.observed_label == 1 - after.clean_label);
    }
  }
}

TEST_CASE("flip sets nest as the fraction grows") {
  ScenarioConfig cfg = base_config();
  cfg.ratio_m = 0.2;
  const Dataset ds = sample_dataset(cfg, 29);
  const auto flipped_set = [&](double fraction) {
    const Dataset f = flip_labels(ds, Group::F, fraction, 55);
    std::set<std::size_t> idx;
    for (std::size_t i = 0; i < f.rows.size(); ++i)
      if (f.rows[i].observed_label != f.rows[i].clean_label) idx.insert(i);
    return idx;
  };
  const auto low = flipped_set(0.1);
  const auto high = flipped_set(0.4);
  CHECK(low.size() == 80);
  CHECK(high.size() == 320);
  CHECK(std::includes(high.begin(), high.end(), low.begin(), low.end()));
}

TEST_CASE("flipping a test split is rejected") {
  ScenarioConfig cfg = base_config();
  const Dataset test = sample_testset(cfg, 5);
  CHECK_THROWS_AS(flip_labels(test, Group::F, 0.1, 1), std::invalid_argument);
}

TEST_CASE("config validation rejects out-of-range knobs") {
  ScenarioConfig cfg = base_config();
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("ratio") {
    cfg.ratio_m = 1.2;
    CHECK_THROWS_AS(cfg.validate(), std::out_of_range);
  }
  SUBCASE("noise cap") {
    cfg.noise_fraction = 0.6;
    CHECK_THROWS_AS(cfg.validate(), std::out_of_range);
  }
  SUBCASE("rotation cap") {
    cfg.variant = Variant::RotatedBoundary;
    cfg.rotation_deg = 46.0;
    CHECK_THROWS_AS(cfg.validate(), std::out_of_range);
  }
  SUBCASE("negative sigma") {
    cfg.sigma = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::out_of_range);
  }
  SUBCASE("negative sample count") {
    cfg.n_train = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("rotation on the label-noise variant") {
    cfg.rotation_deg = 10.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("noise on the rotated variant") {
    cfg.variant = Variant::RotatedBoundary;
    cfg.noise_fraction = 0.2;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}

TEST_CASE("dataset CSV is deterministic with the documented header") {
  ScenarioConfig cfg = base_config();
  cfg.n_train = 8;
  cfg.ratio_m = 0.5;
  const Dataset ds = sample_dataset(cfg, 123);
  const std::string csv = dataset_to_csv(ds);
  CHECK(csv.substr(0, csv.find('\n')) == "x1,x2,group,clean_label,observed_label");
  CHECK(csv == dataset_to_csv(ds));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 9);  // header + 8 rows

  std::ostringstream out;
  write_dataset_csv(ds, out);
  CHECK(out.str() == csv);
}

TEST_CASE("same seed same data, different seed different data") {
  ScenarioConfig cfg = base_config();
  const Dataset a = sample_dataset(cfg, 42);
  const Dataset b = sample_dataset(cfg, 42);
  const Dataset c = sample_dataset(cfg, 43);
  CHECK(dataset_to_csv(a) == dataset_to_csv(b));
  CHECK(dataset_to_csv(a) != dataset_to_csv(c));
}
