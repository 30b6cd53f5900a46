#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flab/rng.hpp"

// Synthetic two-group, two-class gaussian scenarios. Each (group, class) cell
// is an isotropic gaussian blob; the scenario knobs control how many training
// samples each group gets (under-representation) and how hard each group's
// task is (label noise on one group, or a rotated class boundary for one
// group plus L1-regularized training downstream).

namespace flab {

enum class Group : std::uint8_t { M = 0, F = 1 };
using Label = std::uint8_t;  // class label, 0 or 1

enum class Variant : std::uint8_t {
  LabelNoise,       // difficulty = fraction of group-F training labels flipped
  RotatedBoundary,  // difficulty = rotation (degrees) of group-F class centers
};

enum class Split : std::uint8_t { Train, Test };

std::string to_string(Group g);
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Blob centers, one per (group, class) cell.
struct CenterLayout {
  Vec2 m0, m1, f0, f1;
  const Vec2& center(Group g, Label cls) const;
};

// Symmetric baseline layout: groups split left/right, classes top/bottom,
// mirrored so that neither group is intrinsically harder.
CenterLayout default_centers();

// Layout for a variant at a given rotation. LabelNoise keeps the default
// layout (rotation must be 0). RotatedBoundary rotates group F's class
// centers counter-clockwise about the group-F midpoint, tilting that group's
// optimal decision boundary while keeping class separation fixed.
CenterLayout build_centers(Variant variant, double rotation_deg);

struct ScenarioConfig {
  Variant variant = Variant::LabelNoise;
  double sigma = 0.2;          // blob standard deviation (both coordinates)
  double ratio_m = 0.5;        // fraction of training samples in group M
  double noise_fraction = 0.0; // LabelNoise only: flipped fraction of group-F train labels
  double rotation_deg = 0.0;   // RotatedBoundary only: boundary tilt in degrees
  int n_train = 1000;          // total training samples across both groups
  int n_test_per_cell = 1000;  // test samples per (group, class) cell
  std::uint64_t seed = 0;      // default sampling seed, used when no explicit seed is given

  CenterLayout centers() const { return build_centers(variant, rotation_deg); }
  void validate() const;  // throws std::invalid_argument / std::out_of_range
};

struct DataRow {
  Vec2 features;
  Group group = Group::M;
  Label clean_label = 0;     // ground truth used for evaluation
  Label observed_label = 0;  // what training sees; differs from clean only via flips
};

struct Dataset {
  std::vector<DataRow> rows;
  Split split = Split::Train;

  long long count(Group g) const;
  long long count(Group g, Label cls) const;  // counts by clean label
};

// Draw a training set of config.n_train samples. Group sizes follow ratio_m
// (group M gets round(ratio_m * n_train)); within a group, classes are as
// balanced as possible with any odd remainder going to class 1. Each
// (group, class) cell draws from its own sub-stream of `seed`, so with a
// fixed seed the cell samples are a prefix-stable sequence: growing a cell
// keeps its earlier rows. Rows are emitted cell by cell (M0, M1, F0, F1).
// Labels start out clean (observed == clean).
Dataset sample_dataset(const ScenarioConfig& config, std::uint64_t seed);

// Draw a balanced evaluation set: exactly config.n_test_per_cell samples per
// (group, class) cell, same cell order and sub-stream scheme as
// sample_dataset. Test labels are never flipped.
Dataset sample_testset(const ScenarioConfig& config, std::uint64_t seed);

// Flip observed labels for floor(fraction * n + 0.5) rows of the target group
// (n = rows in that group), chosen uniformly without replacement. Flipped
// rows get observed = 1 - clean; everything else is untouched. Only training
// splits may be flipped.
Dataset flip_labels(const Dataset& dataset, Group target_group, double fraction,
                    std::uint64_t seed);

// CSV with header x1,x2,group,clean_label,observed_label; floats use 9
// significant digits, rows in dataset order.
void write_dataset_csv(const Dataset& dataset, std::ostream& out);
std::string dataset_to_csv(const Dataset& dataset);

}  // namespace flab
