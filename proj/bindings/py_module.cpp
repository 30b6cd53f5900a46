#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "flab/ensemble.hpp"
#include "flab/errors.hpp"
#include "flab/fairmetrics.hpp"
#include "flab/harness.hpp"
#include "flab/report.hpp"
#include "flab/rng.hpp"
#include "flab/synthgen.hpp"
#include "flab/tinynet.hpp"

namespace py = pybind11;
using namespace flab;

namespace {

// Python-side label lists may mix ints and strings, mirroring the C++
// initializer-list API.
std::uint64_t derive_seed_py(std::uint64_t master, const py::iterable& labels) {
  std::uint64_t h = mix64(master);
  for (const py::handle& item : labels) {
    SeedLabel label = py::isinstance<py::str>(item)
                          ? SeedLabel(item.cast<std::string>())
                          : SeedLabel(item.cast<long long>());
    h = mix64(h ^ label.key);
  }
  return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "fairness experiments with small-model ensembles (native core)";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  py::enum_<Group>(m, "Group").value("M", Group::M).value("F", Group::F);
  py::enum_<Variant>(m, "Variant")
      .value("LabelNoise", Variant::LabelNoise)
      .value("RotatedBoundary", Variant::RotatedBoundary);
  py::enum_<Split>(m, "Split").value("Train", Split::Train).value("Test", Split::Test);
  py::enum_<Benefited>(m, "Benefited")
      .value("M", Benefited::M)
      .value("F", Benefited::F)
      .value("none", Benefited::None);

  m.def("mix64", &mix64, py::arg("x"));
  m.def("fnv1a64", [](const std::string& s) { return fnv1a64(s); }, py::arg("text"));
  m.def("derive_seed", &derive_seed_py, py::arg("master"), py::arg("labels"),
        "Child seed from a master seed and a list of int/str labels.");

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return Vec2{x, y}; }), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y)
      .def("__repr__", [](const Vec2& v) {
        return "Vec2(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
      });

  py::class_<CenterLayout>(m, "CenterLayout")
      .def_readwrite("m0", &CenterLayout::m0)
      .def_readwrite("m1", &CenterLayout::m1)
      .def_readwrite("f0", &CenterLayout::f0)
      .def_readwrite("f1", &CenterLayout::f1)
      .def("center", &CenterLayout::center, py::arg("group"), py::arg("cls"));
  m.def("default_centers", &default_centers);
  m.def("build_centers", &build_centers, py::arg("variant"), py::arg("rotation_deg"));

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def(py::init<>())
      .def_readwrite("variant", &ScenarioConfig::variant)
      .def_readwrite("sigma", &ScenarioConfig::sigma)
      .def_readwrite("ratio_m", &ScenarioConfig::ratio_m)
      .def_readwrite("noise_fraction", &ScenarioConfig::noise_fraction)
      .def_readwrite("rotation_deg", &ScenarioConfig::rotation_deg)
      .def_readwrite("n_train", &ScenarioConfig::n_train)
      .def_readwrite("n_test_per_cell", &ScenarioConfig::n_test_per_cell)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def("centers", &ScenarioConfig::centers)
      .def("validate", &ScenarioConfig::validate);

  py::class_<DataRow>(m, "DataRow")
      .def_readwrite("features", &DataRow::features)
      .def_readwrite("group", &DataRow::group)
      .def_readwrite("clean_label", &DataRow::clean_label)
      .def_readwrite("observed_label", &DataRow::observed_label);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("rows", &Dataset::rows)
      .def_readwrite("split", &Dataset::split)
      .def("count", py::overload_cast<Group>(&Dataset::count, py::const_), py::arg("group"))
      .def("count", py::overload_cast<Group, Label>(&Dataset::count, py::const_),
           py::arg("group"), py::arg("cls"))
      .def("__len__", [](const Dataset& d) { return d.rows.size(); });

  m.def("sample_dataset", &sample_dataset, py::arg("config"), py::arg("seed"));
  m.def("sample_testset", &sample_testset, py::arg("config"), py::arg("seed"));
  m.def("flip_labels", &flip_labels, py::arg("dataset"), py::arg("target_group"),
        py::arg("fraction"), py::arg("seed"));
  m.def("dataset_to_csv", &dataset_to_csv, py::arg("dataset"));

  py::class_<Architecture>(m, "Architecture")
      .def(py::init<>())
      .def(py::init([](std::vector<int> widths) {
             Architecture a;
             a.widths = std::move(widths);
             return a;
           }),
           py::arg("widths"))
      .def_readwrite("widths", &Architecture::widths)
      .def("layer_count", &Architecture::layer_count)
      .def("validate", &Architecture::validate);

  py::class_<Provenance>(m, "Provenance")
      .def(py::init<>())
      .def_readwrite("scenario_id", &Provenance::scenario_id)
      .def_readwrite("fold", &Provenance::fold)
      .def_readwrite("model_index", &Provenance::model_index)
      .def_readwrite("seed", &Provenance::seed);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("arch", &ModelParams::arch)
      .def_readwrite("weights", &ModelParams::weights)
      .def_readwrite("biases", &ModelParams::biases)
      .def_readwrite("provenance", &ModelParams::provenance);

  py::class_<Hyperparams>(m, "Hyperparams")
      .def(py::init<>())
      .def_readwrite("learning_rate", &Hyperparams::learning_rate)
      .def_readwrite("momentum", &Hyperparams::momentum)
      .def_readwrite("batch_size", &Hyperparams::batch_size)
      .def_readwrite("epochs", &Hyperparams::epochs)
      .def_readwrite("l1_lambda", &Hyperparams::l1_lambda)
      .def("validate", &Hyperparams::validate);

  m.def("init_params", &init_params, py::arg("arch"), py::arg("seed"));
  m.def("forward", &forward, py::arg("params"), py::arg("features"));
  m.def("forward_batch",
        [](const ModelParams& p, const Dataset& d) { return forward_batch(p, d.rows); },
        py::arg("params"), py::arg("dataset"));
  m.def("decide", &decide, py::arg("probability"));
  m.def("predict_labels", &predict_labels, py::arg("params"), py::arg("data"));
  m.def("loss",
        [](const ModelParams& p, const Dataset& d, double l1) { return loss(p, d.rows, l1); },
        py::arg("params"), py::arg("dataset"), py::arg("l1_lambda") = 0.0);
  m.def("train", &train, py::arg("train_set"), py::arg("arch"), py::arg("hyper"),
        py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  m.def("save_params_file", &save_params_file, py::arg("params"), py::arg("path"));
  m.def("load_params_file", &load_params_file, py::arg("path"));

  py::class_<GradCheckReport>(m, "GradCheckReport")
      .def_readonly("max_rel_err", &GradCheckReport::max_rel_err)
      .def_readonly("draws_accepted", &GradCheckReport::draws_accepted)
      .def_readonly("draws_rejected", &GradCheckReport::draws_rejected)
      .def_readonly("coords_checked", &GradCheckReport::coords_checked)
      .def_readonly("seconds", &GradCheckReport::seconds);
  m.def("check_gradients", &check_gradients, py::arg("n_draws") = 100,
        py::arg("seed") = 0x67AD, py::call_guard<py::gil_scoped_release>());

  py::class_<EnsemblePool>(m, "EnsemblePool")
      .def(py::init<>())
      .def_readwrite("models", &EnsemblePool::models)
      .def_readwrite("scenario_id", &EnsemblePool::scenario_id)
      .def_readwrite("fold", &EnsemblePool::fold);

  py::class_<DrawPlan>(m, "DrawPlan")
      .def_readonly("k", &DrawPlan::k)
      .def_readonly("exhaustive", &DrawPlan::exhaustive)
      .def_readonly("subsets", &DrawPlan::subsets);
  m.def("draw_subsets", &draw_subsets, py::arg("pool_size"), py::arg("k"), py::arg("n_draws"),
        py::arg("seed"));
  m.def("mean_probability",
        [](const std::vector<double>& probs) { return mean_probability(probs); },
        py::arg("member_probabilities"));
  m.def("aggregate",
        [](const std::vector<ModelParams>& members, const Vec2& x) {
          return aggregate(members, x);
        },
        py::arg("members"), py::arg("features"));

  py::class_<GroupMetrics>(m, "GroupMetrics")
      .def_readonly("acc_m", &GroupMetrics::acc_m)
      .def_readonly("acc_f", &GroupMetrics::acc_f)
      .def_readonly("acc_overall", &GroupMetrics::acc_overall)
      .def_readonly("n_m", &GroupMetrics::n_m)
      .def_readonly("n_f", &GroupMetrics::n_f);

  py::class_<SizeMetrics>(m, "SizeMetrics")
      .def_readonly("k", &SizeMetrics::k)
      .def_readonly("n_subsets", &SizeMetrics::n_subsets)
      .def_readonly("metrics", &SizeMetrics::metrics);
  m.def("evaluate_curve", &evaluate_curve, py::arg("pool"), py::arg("test_set"),
        py::arg("n_draws"), py::arg("seed"), py::call_guard<py::gil_scoped_release>());

  m.def("group_accuracy",
        [](const std::vector<Label>& preds, const Dataset& test) {
          return group_accuracy(preds, test);
        },
        py::arg("predictions"), py::arg("test_set"));

  py::class_<GapReport>(m, "GapReport")
      .def_readonly("abs_gap", &GapReport::abs_gap)
      .def_readonly("benefited", &GapReport::benefited);
  m.def("gap", &gap, py::arg("metrics"));
  m.def("relative_improvement", &relative_improvement, py::arg("acc_at_k"), py::arg("acc_at_1"));

  py::class_<MetricsRecord>(m, "MetricsRecord")
      .def(py::init<>())
      .def_readwrite("variant", &MetricsRecord::variant)
      .def_readwrite("difficulty", &MetricsRecord::difficulty)
      .def_readwrite("ratio_m", &MetricsRecord::ratio_m)
      .def_readwrite("fold", &MetricsRecord::fold)
      .def_readwrite("k", &MetricsRecord::k)
      .def_readwrite("acc_m", &MetricsRecord::acc_m)
      .def_readwrite("acc_f", &MetricsRecord::acc_f)
      .def_readwrite("acc_overall", &MetricsRecord::acc_overall)
      .def_readwrite("gap_abs", &MetricsRecord::gap_abs)
      .def_readwrite("benefited", &MetricsRecord::benefited)
      .def_readwrite("rel_imp_m", &MetricsRecord::rel_imp_m)
      .def_readwrite("rel_imp_f", &MetricsRecord::rel_imp_f)
      .def_readwrite("n_draws", &MetricsRecord::n_draws);

  m.def("positive_sum",
        [](const std::vector<MetricsRecord>& curve, int k_max) {
          return positive_sum(curve, k_max);
        },
        py::arg("curve"), py::arg("k_max"));

  py::class_<OptimalRatio>(m, "OptimalRatio")
      .def_readonly("ratio_max_overall", &OptimalRatio::ratio_max_overall)
      .def_readonly("ratio_min_gap", &OptimalRatio::ratio_min_gap)
      .def_readonly("coincide", &OptimalRatio::coincide);
  m.def("optimal_ratio",
        [](const std::vector<MetricsRecord>& records) { return optimal_ratio(records); },
        py::arg("records"));

  py::class_<GridConfig>(m, "GridConfig")
      .def(py::init<>())
      .def_readwrite("variant", &GridConfig::variant)
      .def_readwrite("difficulty_grid", &GridConfig::difficulty_grid)
      .def_readwrite("ratio_grid", &GridConfig::ratio_grid)
      .def_readwrite("folds", &GridConfig::folds)
      .def_readwrite("pool_size", &GridConfig::pool_size)
      .def_readwrite("n_draws", &GridConfig::n_draws)
      .def_readwrite("n_train", &GridConfig::n_train)
      .def_readwrite("n_test_per_cell", &GridConfig::n_test_per_cell)
      .def_readwrite("sigma", &GridConfig::sigma)
      .def_readwrite("architecture", &GridConfig::architecture)
      .def_readwrite("hyperparams", &GridConfig::hyperparams)
      .def_readwrite("master_seed", &GridConfig::master_seed)
      .def_readwrite("out_dir", &GridConfig::out_dir)
      .def_readwrite("threads", &GridConfig::threads)
      .def("apply_defaults", &GridConfig::apply_defaults)
      .def("validate", &GridConfig::validate);

  m.def("default_difficulty_grid", &default_difficulty_grid, py::arg("variant"));
  m.def("default_ratio_grid", &default_ratio_grid);
  m.def("load_grid_config", &load_grid_config, py::arg("path"));
  m.def("parse_grid_config", &parse_grid_config, py::arg("json_text"));
  m.def("grid_config_to_json", &grid_config_to_json, py::arg("config"));
  m.def("config_digest", &config_digest, py::arg("config"));
  m.def("load_scenario_config", &load_scenario_config, py::arg("path"));
  m.def("parse_scenario_config", &parse_scenario_config, py::arg("json_text"));
  m.def("scenario_tag", &scenario_tag, py::arg("variant"));

  py::class_<CellFailure>(m, "CellFailure")
      .def_readonly("difficulty", &CellFailure::difficulty)
      .def_readonly("ratio_m", &CellFailure::ratio_m)
      .def_readonly("fold", &CellFailure::fold)
      .def_readonly("epoch", &CellFailure::epoch)
      .def_readonly("message", &CellFailure::message);

  py::class_<Manifest>(m, "Manifest")
      .def_readonly("config_digest", &Manifest::config_digest)
      .def_readonly("version", &Manifest::version)
      .def_readonly("platform", &Manifest::platform)
      .def_readonly("n_difficulties", &Manifest::n_difficulties)
      .def_readonly("n_ratios", &Manifest::n_ratios)
      .def_readonly("folds", &Manifest::folds)
      .def_readonly("pool_size", &Manifest::pool_size)
      .def_readonly("started", &Manifest::started)
      .def_readonly("finished", &Manifest::finished);

  py::class_<ResultsTable>(m, "ResultsTable")
      .def(py::init<>())
      .def_readwrite("records", &ResultsTable::records)
      .def_readwrite("failures", &ResultsTable::failures)
      .def_readwrite("manifest", &ResultsTable::manifest);

  py::class_<CellResult>(m, "CellResult")
      .def_readonly("records", &CellResult::records)
      .def_readonly("pool", &CellResult::pool)
      .def_readonly("train", &CellResult::train)
      .def_readonly("test", &CellResult::test);

  m.def("run_cell_fold", &run_cell_fold, py::arg("config"), py::arg("difficulty"),
        py::arg("ratio_m"), py::arg("fold"), py::call_guard<py::gil_scoped_release>());
  m.def("run_grid", &run_grid, py::arg("config"), py::call_guard<py::gil_scoped_release>());
  m.def("write_results", &write_results, py::arg("table"), py::arg("csv_path"));
  m.def("read_results", &read_results, py::arg("csv_path"));

  py::class_<ColumnMapping>(m, "ColumnMapping")
      .def(py::init<>())
      .def_readwrite("feature_columns", &ColumnMapping::feature_columns)
      .def_readwrite("group_column", &ColumnMapping::group_column)
      .def_readwrite("label_column", &ColumnMapping::label_column);

  m.def("ingest_tabular", &ingest_tabular, py::arg("path"), py::arg("mapping"),
        py::arg("split_fraction"), py::arg("seed"));

  py::class_<AdaptConfig>(m, "AdaptConfig")
      .def(py::init<>())
      .def_readwrite("path", &AdaptConfig::path)
      .def_readwrite("mapping", &AdaptConfig::mapping)
      .def_readwrite("split_fraction", &AdaptConfig::split_fraction)
      .def_readwrite("folds", &AdaptConfig::folds)
      .def_readwrite("pool_size", &AdaptConfig::pool_size)
      .def_readwrite("n_draws", &AdaptConfig::n_draws)
      .def_readwrite("architecture", &AdaptConfig::architecture)
      .def_readwrite("hyperparams", &AdaptConfig::hyperparams)
      .def_readwrite("master_seed", &AdaptConfig::master_seed)
      .def_readwrite("out_dir", &AdaptConfig::out_dir)
      .def_readwrite("threads", &AdaptConfig::threads)
      .def("validate", &AdaptConfig::validate);
  m.def("load_adapt_config", &load_adapt_config, py::arg("path"));
  m.def("parse_adapt_config", &parse_adapt_config, py::arg("json_text"));
  m.def("run_tabular", &run_tabular, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<CellKey>(m, "CellKey")
      .def(py::init<>())
      .def(py::init([](std::string variant, double difficulty, double ratio_m) {
             return CellKey{std::move(variant), difficulty, ratio_m};
           }),
           py::arg("variant"), py::arg("difficulty"), py::arg("ratio_m"))
      .def_readwrite("variant", &CellKey::variant)
      .def_readwrite("difficulty", &CellKey::difficulty)
      .def_readwrite("ratio_m", &CellKey::ratio_m);

  py::class_<CurveFigures>(m, "CurveFigures")
      .def_readonly("acc_svg", &CurveFigures::acc_svg)
      .def_readonly("gap_svg", &CurveFigures::gap_svg)
      .def_readonly("relimp_svg", &CurveFigures::relimp_svg)
      .def_readonly("acc_csv", &CurveFigures::acc_csv)
      .def_readonly("gap_csv", &CurveFigures::gap_csv)
      .def_readonly("relimp_csv", &CurveFigures::relimp_csv);
  m.def("emit_curves", &emit_curves, py::arg("table"), py::arg("cell"));

  py::class_<RatioAnalysis>(m, "RatioAnalysis")
      .def_readonly("svg", &RatioAnalysis::svg)
      .def_readonly("csv", &RatioAnalysis::csv)
      .def_readonly("ideal_csv", &RatioAnalysis::ideal_csv);
  m.def("emit_ratio_analysis",
        [](const ResultsTable& table, const std::vector<double>& grid, int k) {
          return emit_ratio_analysis(table, grid, k);
        },
        py::arg("table"), py::arg("difficulty_grid"), py::arg("k"));

  py::class_<ReportFile>(m, "ReportFile")
      .def_readonly("name", &ReportFile::name)
      .def_readonly("content", &ReportFile::content);
  py::class_<ReportBundle>(m, "ReportBundle")
      .def_readonly("markdown", &ReportBundle::markdown)
      .def_readonly("svgs", &ReportBundle::svgs)
      .def_readonly("csvs", &ReportBundle::csvs);
  m.def("build_report", &build_report, py::arg("table"));
  m.def("write_report", &write_report, py::arg("bundle"), py::arg("out_dir"));

  m.def("platform_tag", &platform_tag);
}
