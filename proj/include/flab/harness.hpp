#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "flab/ensemble.hpp"
#include "flab/errors.hpp"
#include "flab/fairmetrics.hpp"
#include "flab/synthgen.hpp"
#include "flab/tinynet.hpp"

// Experiment orchestration: expands a (difficulty x ratio x fold) grid into
// independent work units, derives every stream seed from one master seed,
// trains the model pools in parallel, and persists/reloads results tables.

namespace flab {

struct GridConfig {
  Variant variant = Variant::LabelNoise;
  std::vector<double> difficulty_grid;  // noise fractions or angles; empty = variant default
  std::vector<double> ratio_grid;       // empty = {0.0, 0.1, ..., 1.0}
  int folds = 5;
  int pool_size = 20;
  int n_draws = 500;
  int n_train = 1000;
  int n_test_per_cell = 4000;
  double sigma = 0.2;
  Architecture architecture;
  Hyperparams hyperparams{.l1_lambda = -1.0};  // -1 = "unset": variant default applies
  std::uint64_t master_seed = 20260814;
  std::string out_dir = "out";
  int threads = 0;  // 0 = all hardware threads

  // Fills empty grids with the variant's default grid and replaces the
  // l1_lambda sentinel with the variant default (0 for LabelNoise, 1e-3 for
  // RotatedBoundary).
  void apply_defaults();
  void validate() const;
};

// Default grids: noise 0..0.5 step 0.05, angles 0..45 step 5, ratios 0..1
// step 0.1.
std::vector<double> default_difficulty_grid(Variant v);
std::vector<double> default_ratio_grid();
double default_l1_lambda(Variant v);

// Strict config parsing: JSON whose keys mirror the GridConfig field names
// exactly; unknown keys are an error, absent keys keep defaults.
GridConfig load_grid_config(const std::string& path);
GridConfig parse_grid_config(const std::string& json_text);
std::string grid_config_to_json(const GridConfig& config);  // canonical form
std::string config_digest(const GridConfig& config);        // 16-hex-digit hash

// Scenario config files for the dataset generator (same strictness).
ScenarioConfig load_scenario_config(const std::string& path);
ScenarioConfig parse_scenario_config(const std::string& json_text);

struct CellFailure {
  double difficulty = 0.0;
  double ratio_m = 0.0;
  int fold = 0;
  int epoch = -1;
  std::string message;
};

struct Manifest {
  std::string config_digest;
  std::string version;
  std::string platform;
  int n_difficulties = 0;
  int n_ratios = 0;
  int folds = 0;
  int pool_size = 0;
  std::string started;   // UTC, ISO-8601
  std::string finished;
};

struct ResultsTable {
  std::vector<MetricsRecord> records;
  std::vector<CellFailure> failures;
  Manifest manifest;
};

// Everything produced for one (difficulty, ratio, fold) unit; run_grid keeps
// only the records, tests can also inspect the pool and data.
struct CellResult {
  std::vector<MetricsRecord> records;
  EnsemblePool pool;
  Dataset train;
  Dataset test;
};

// Scenario id tag used in records and provenance, e.g. "label_noise".
std::string scenario_tag(Variant v);

// Run one grid unit. Seed scheme (common random numbers): train/test draws,
// label-flip choices, model seeds and subset draws depend on the master seed,
// variant and fold but NOT on the cell's ratio or difficulty. Combined with
// prefix-stable sampling and flipping, cells of one fold see nested train
// sets across ratios and nested flip sets across noise levels, so grid
// comparisons are paired instead of independently re-rolled.
CellResult run_cell_fold(const GridConfig& config, double difficulty, double ratio_m, int fold);

// Run the whole grid. Work units are independent (cell, fold) tasks pulled
// off a shared counter; records merge in deterministic grid order, so the
// output is identical for any thread count. A unit whose training diverges
// is recorded as a failure and the grid continues.
ResultsTable run_grid(const GridConfig& config);

// Results CSV (6 decimal places) plus a manifest sidecar at
// `<csv_path>.manifest.json`. read_results needs only the CSV.
void write_results(const ResultsTable& table, const std::string& csv_path);
void write_results_csv(const ResultsTable& table, std::ostream& out);
ResultsTable read_results(const std::string& csv_path);
ResultsTable read_results_csv(std::istream& in);

std::string manifest_to_json(const Manifest& manifest, const ResultsTable& table);

// External tabular data: map columns into the two-group model.
struct ColumnMapping {
  std::vector<std::string> feature_columns;  // exactly two (the model input is 2-D)
  std::string group_column;
  std::string label_column;
};

// Read a CSV, map the first-seen group value to M and the second to F, map
// labels to {0, 1} ({"0","1"} verbatim, anything else by first appearance),
// and split train/test stratified by (group, class): each cell contributes
// floor(split_fraction * cell_size + 0.5) training rows. Row order is
// preserved within each split.
std::pair<Dataset, Dataset> ingest_tabular(const std::string& path, const ColumnMapping& mapping,
                                           double split_fraction, std::uint64_t seed);

// Config and pipeline for the `adapt` subcommand: ingest a tabular file and
// push it through the same pool/ensemble/metrics protocol. One fold = one
// re-split of the file.
struct AdaptConfig {
  std::string path;
  ColumnMapping mapping;
  double split_fraction = 0.8;
  int folds = 1;
  int pool_size = 20;
  int n_draws = 500;
  Architecture architecture;
  Hyperparams hyperparams;
  std::uint64_t master_seed = 20260814;
  std::string out_dir = "out";
  int threads = 0;

  void validate() const;
};

AdaptConfig load_adapt_config(const std::string& path);
AdaptConfig parse_adapt_config(const std::string& json_text);
ResultsTable run_tabular(const AdaptConfig& config);

std::string platform_tag();
std::string utc_timestamp();

}  // namespace flab
