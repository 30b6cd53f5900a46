#include "flab/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace flab {

std::string to_string(Group g) { return g == Group::M ? "M" : "F"; }

std::string to_string(Variant v) {
  return v == Variant::LabelNoise ? "label_noise" : "rotated_boundary";
}

Variant variant_from_string(const std::string& s) {
  if (s == "label_noise") return Variant::LabelNoise;
  if (s == "rotated_boundary") return Variant::RotatedBoundary;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (expected label_noise or rotated_boundary)");
}

const Vec2& CenterLayout::center(Group g, Label cls) const {
  if (g == Group::M) return cls == 0 ? m0 : m1;
  return cls == 0 ? f0 : f1;
}

CenterLayout default_centers() {
  // Mirror-symmetric: same within-group class separation for M and F.
  return CenterLayout{
      /*m0=*/{-0.5, -0.35},
      /*m1=*/{-0.5, +0.35},
      /*f0=*/{+0.5, +0.35},
      /*f1=*/{+0.5, -0.35},
  };
}

CenterLayout build_centers(Variant variant, double rotation_deg) {
  if (rotation_deg < 0.0 || rotation_deg > 45.0)
    throw std::out_of_range("rotation_deg must be in [0, 45], got " +
                            std::to_string(rotation_deg));
  CenterLayout layout = default_centers();
  if (variant == Variant::LabelNoise) {
    if (rotation_deg != 0.0)
      throw std::invalid_argument("label_noise scenarios take no rotation");
    return layout;
  }
  // Rotate group F's class centers counter-clockwise about the F midpoint.
  const double theta = rotation_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const Vec2 pivot{0.5, 0.0};
  for (Vec2* p : {&layout.f0, &layout.f1}) {
    const double ox = p->x - pivot.x, oy = p->y - pivot.y;
    p->x = pivot.x + ox * c - oy * s;
    p->y = pivot.y + ox * s + oy * c;
  }
  return layout;
}

void ScenarioConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw std::out_of_range("sigma must be finite and >= 0");
  if (!(ratio_m >= 0.0 && ratio_m <= 1.0))
    throw std::out_of_range("ratio_m must be in [0, 1], got " + std::to_string(ratio_m));
  if (!(noise_fraction >= 0.0 && noise_fraction <= 0.5))
    throw std::out_of_range("noise_fraction must be in [0, 0.5], got " +
                            std::to_string(noise_fraction));
  if (rotation_deg < 0.0 || rotation_deg > 45.0)
    throw std::out_of_range("rotation_deg must be in [0, 45], got " +
                            std::to_string(rotation_deg));
  if (n_train < 0) throw std::invalid_argument("n_train must be >= 0");
  if (n_test_per_cell < 1) throw std::invalid_argument("n_test_per_cell must be >= 1");
  if (variant == Variant::LabelNoise && rotation_deg != 0.0)
    throw std::invalid_argument("label_noise scenarios take no rotation");
  if (variant == Variant::RotatedBoundary && noise_fraction != 0.0)
    throw std::invalid_argument("rotated_boundary scenarios take no label noise");
}

long long Dataset::count(Group g) const {
  long long n = 0;
  for (const auto& r : rows) n += (r.group == g);
  return n;
}

long long Dataset::count(Group g, Label cls) const {
  long long n = 0;
  for (const auto& r : rows) n += (r.group == g && r.clean_label == cls);
  return n;
}

namespace {

// Fill one (group, class) cell from its own sub-stream so cell contents do
// not depend on the other cells' sizes. Each row consumes one gaussian pair.
void fill_cell(std::vector<DataRow>& rows, Group g, Label cls, long long count,
               const Vec2& center, double sigma, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {"cell", static_cast<int>(g), static_cast<int>(cls)}));
  for (long long i = 0; i < count; ++i) {
    DataRow row;
    row.features.x = center.x + sigma * rng.next_gaussian();
    row.features.y = center.y + sigma * rng.next_gaussian();
    row.group = g;
    row.clean_label = cls;
    row.observed_label = cls;
    rows.push_back(row);
  }
}

Dataset sample_cells(const ScenarioConfig& config, std::uint64_t seed, long long m0,
                     long long m1, long long f0, long long f1, Split split) {
  const CenterLayout centers = config.centers();
  Dataset out;
  out.split = split;
  out.rows.reserve(static_cast<std::size_t>(m0 + m1 + f0 + f1));
  fill_cell(out.rows, Group::M, 0, m0, centers.m0, config.sigma, seed);
  fill_cell(out.rows, Group::M, 1, m1, centers.m1, config.sigma, seed);
  fill_cell(out.rows, Group::F, 0, f0, centers.f0, config.sigma, seed);
  fill_cell(out.rows, Group::F, 1, f1, centers.f1, config.sigma, seed);
  return out;
}

}  // namespace

Dataset sample_dataset(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const long long n_m = std::llround(config.ratio_m * config.n_train);
  const long long n_f = config.n_train - n_m;
  // Classes as balanced as possible; odd remainder goes to class 1.
  return sample_cells(config, seed, n_m / 2, (n_m + 1) / 2, n_f / 2, (n_f + 1) / 2,
                      Split::Train);
}

Dataset sample_testset(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  const long long n = config.n_test_per_cell;
  return sample_cells(config, seed, n, n, n, n, Split::Test);
}

Dataset flip_labels(const Dataset& dataset, Group target_group, double fraction,
                    std::uint64_t seed) {
  if (dataset.split != Split::Train)
    throw std::invalid_argument("label flips only apply to training splits");
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw std::out_of_range("flip fraction must be in [0, 1], got " +
                            std::to_string(fraction));

  Dataset out = dataset;
  std::vector<std::size_t> group_rows;
  for (std::size_t i = 0; i < out.rows.size(); ++i)
    if (out.rows[i].group == target_group) group_rows.push_back(i);

  const std::size_t n = group_rows.size();
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
  // Partial Fisher-Yates: the first k entries are a uniform k-subset, and for
  // a fixed seed the selection at a smaller k is a prefix of the one at a
  // larger k, so noise levels nest.
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
    std::swap(group_rows[i], group_rows[j]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    DataRow& row = out.rows[group_rows[i]];
    row.observed_label = static_cast<Label>(1 - row.clean_label);
  }
  return out;
}

void write_dataset_csv(const Dataset& dataset, std::ostream& out) {
  out << "x1,x2,group,clean_label,observed_label\n";
  char buf[96];
  for (const auto& row : dataset.rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%s,%d,%d\n", row.features.x, row.features.y,
                  row.group == Group::M ? "M" : "F", static_cast<int>(row.clean_label),
                  static_cast<int>(row.observed_label));
    out << buf;
  }
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  write_dataset_csv(dataset, out);
  return out.str();
}

}  // namespace flab
