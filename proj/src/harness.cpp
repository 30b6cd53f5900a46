#include "flab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace flab {

using nlohmann::json;

std::vector<double> default_difficulty_grid(Variant v) {
  std::vector<double> grid;
  if (v == Variant::LabelNoise) {
    for (int i = 0; i <= 10; ++i) grid.push_back(i * 0.05);
  } else {
    for (int i = 0; i <= 9; ++i) grid.push_back(i * 5.0);
  }
  return grid;
}

std::vector<double> default_ratio_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i * 0.1);
  return grid;
}

double default_l1_lambda(Variant v) {
  return v == Variant::RotatedBoundary ? 1e-3 : 0.0;
}

void GridConfig::apply_defaults() {
  if (difficulty_grid.empty()) difficulty_grid = default_difficulty_grid(variant);
  if (ratio_grid.empty()) ratio_grid = default_ratio_grid();
  if (hyperparams.l1_lambda < 0.0) hyperparams.l1_lambda = default_l1_lambda(variant);
}

void GridConfig::validate() const {
  if (difficulty_grid.empty() || ratio_grid.empty())
    throw ConfigError("difficulty and ratio grids must be non-empty");
  for (double d : difficulty_grid) {
    if (variant == Variant::LabelNoise && !(d >= 0.0 && d <= 0.5))
      throw ConfigError("noise fractions must be in [0, 0.5]");
    if (variant == Variant::RotatedBoundary && !(d >= 0.0 && d <= 45.0))
      throw ConfigError("rotation angles must be in [0, 45]");
  }
  for (double r : ratio_grid)
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("ratios must be in [0, 1]");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  if (n_draws < 1) throw ConfigError("n_draws must be >= 1");
  if (n_train < 0) throw ConfigError("n_train must be >= 0");
  if (n_test_per_cell < 1) throw ConfigError("n_test_per_cell must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  try {
    architecture.validate();
    hyperparams.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void AdaptConfig::validate() const {
  if (path.empty()) throw ConfigError("path must be set");
  if (mapping.feature_columns.size() != 2)
    throw ConfigError("exactly two feature columns are required (the model input is 2-D)");
  if (mapping.group_column.empty() || mapping.label_column.empty())
    throw ConfigError("group_column and label_column must be set");
  if (!(split_fraction >= 0.0 && split_fraction <= 1.0))
    throw ConfigError("split_fraction must be in [0, 1]");
  if (folds < 1) throw ConfigError("folds must be >= 1");
  if (pool_size < 1) throw ConfigError("pool_size must be >= 1");
  if (n_draws < 1) throw ConfigError("n_draws must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  try {
    architecture.validate();
    hyperparams.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

json parse_json_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ConfigError("unknown " + where + " key '" + item.key() + "'");
  }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for config key '") + key + "'");
  }
}

// Seeds are unsigned; json's get<uint64_t> would silently wrap a negative
// literal, so require a non-negative integer token explicitly.
void read_seed(const json& j, const char* key, std::uint64_t& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number_unsigned())
    throw ConfigError(std::string("bad value for config key '") + key + "'");
  out = j.at(key).get<std::uint64_t>();
}

void read_variant(const json& j, Variant& out) {
  if (!j.contains("variant")) return;
  if (!j.at("variant").is_string()) throw ConfigError("variant must be a string");
  out = variant_from_string(j.at("variant").get<std::string>());
}

void read_hyperparams(const json& j, Hyperparams& hp) {
  if (!j.contains("hyperparams")) return;
  const json& h = j.at("hyperparams");
  if (!h.is_object()) throw ConfigError("hyperparams must be an object");
  reject_unknown_keys(h, {"learning_rate", "momentum", "batch_size", "epochs", "l1_lambda"},
                      "hyperparams");
  read_key(h, "learning_rate", hp.learning_rate);
  read_key(h, "momentum", hp.momentum);
  read_key(h, "batch_size", hp.batch_size);
  read_key(h, "epochs", hp.epochs);
  read_key(h, "l1_lambda", hp.l1_lambda);
}

void read_architecture(const json& j, Architecture& arch) {
  if (!j.contains("architecture")) return;
  try {
    arch.widths = j.at("architecture").get<std::vector<int>>();
  } catch (const json::exception&) {
    throw ConfigError("architecture must be an array of layer widths");
  }
}

}  // namespace

GridConfig parse_grid_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j,
                      {"variant", "difficulty_grid", "ratio_grid", "folds", "pool_size",
                       "n_draws", "n_train", "n_test_per_cell", "sigma", "architecture",
                       "hyperparams", "master_seed", "out_dir", "threads"},
                      "config");
  GridConfig cfg;
  read_variant(j, cfg.variant);
  read_key(j, "difficulty_grid", cfg.difficulty_grid);
  read_key(j, "ratio_grid", cfg.ratio_grid);
  read_key(j, "folds", cfg.folds);
  read_key(j, "pool_size", cfg.pool_size);
  read_key(j, "n_draws", cfg.n_draws);
  read_key(j, "n_train", cfg.n_train);
  read_key(j, "n_test_per_cell", cfg.n_test_per_cell);
  read_key(j, "sigma", cfg.sigma);
  read_architecture(j, cfg.architecture);
  read_hyperparams(j, cfg.hyperparams);
  read_seed(j, "master_seed", cfg.master_seed);
  read_key(j, "out_dir", cfg.out_dir);
  read_key(j, "threads", cfg.threads);
  cfg.apply_defaults();
  cfg.validate();
  return cfg;
}

GridConfig load_grid_config(const std::string& path) {
  return parse_grid_config(read_text_file(path));
}

ScenarioConfig parse_scenario_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j,
                      {"variant", "sigma", "ratio_m", "noise_fraction", "rotation_deg",
                       "n_train", "n_test_per_cell", "seed"},
                      "scenario");
  ScenarioConfig cfg;
  read_variant(j, cfg.variant);
  read_key(j, "sigma", cfg.sigma);
  read_key(j, "ratio_m", cfg.ratio_m);
  read_key(j, "noise_fraction", cfg.noise_fraction);
  read_key(j, "rotation_deg", cfg.rotation_deg);
  read_key(j, "n_train", cfg.n_train);
  read_key(j, "n_test_per_cell", cfg.n_test_per_cell);
  read_seed(j, "seed", cfg.seed);
  try {
    cfg.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::string& path) {
  return parse_scenario_config(read_text_file(path));
}

AdaptConfig parse_adapt_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown_keys(j,
                      {"path", "feature_columns", "group_column", "label_column",
                       "split_fraction", "folds", "pool_size", "n_draws", "architecture",
                       "hyperparams", "master_seed", "out_dir", "threads"},
                      "adapt config");
  AdaptConfig cfg;
  read_key(j, "path", cfg.path);
  read_key(j, "feature_columns", cfg.mapping.feature_columns);
  read_key(j, "group_column", cfg.mapping.group_column);
  read_key(j, "label_column", cfg.mapping.label_column);
  read_key(j, "split_fraction", cfg.split_fraction);
  read_key(j, "folds", cfg.folds);
  read_key(j, "pool_size", cfg.pool_size);
  read_key(j, "n_draws", cfg.n_draws);
  read_architecture(j, cfg.architecture);
  read_hyperparams(j, cfg.hyperparams);
  read_seed(j, "master_seed", cfg.master_seed);
  read_key(j, "out_dir", cfg.out_dir);
  read_key(j, "threads", cfg.threads);
  cfg.validate();
  return cfg;
}

AdaptConfig load_adapt_config(const std::string& path) {
  return parse_adapt_config(read_text_file(path));
}

std::string grid_config_to_json(const GridConfig& config) {
  json j;
  j["variant"] = to_string(config.variant);
  j["difficulty_grid"] = config.difficulty_grid;
  j["ratio_grid"] = config.ratio_grid;
  j["folds"] = config.folds;
  j["pool_size"] = config.pool_size;
  j["n_draws"] = config.n_draws;
  j["n_train"] = config.n_train;
  j["n_test_per_cell"] = config.n_test_per_cell;
  j["sigma"] = config.sigma;
  j["architecture"] = config.architecture.widths;
  j["hyperparams"] = {{"learning_rate", config.hyperparams.learning_rate},
                      {"momentum", config.hyperparams.momentum},
                      {"batch_size", config.hyperparams.batch_size},
                      {"epochs", config.hyperparams.epochs},
                      {"l1_lambda", config.hyperparams.l1_lambda}};
  j["master_seed"] = config.master_seed;
  j["out_dir"] = config.out_dir;
  j["threads"] = config.threads;
  return j.dump(2);
}

std::string config_digest(const GridConfig& config) {
  // Digest a canonical dump (sorted keys, fixed spacing) minus fields that do
  // not affect the results (output path, thread count).
  GridConfig canon = config;
  canon.apply_defaults();
  canon.out_dir.clear();
  canon.threads = 0;
  const std::uint64_t h = fnv1a64(grid_config_to_json(canon));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string scenario_tag(Variant v) { return to_string(v); }

namespace {

std::string scenario_id(const std::string& tag, double difficulty, double ratio_m) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s d=%.2f r=%.2f", tag.c_str(), difficulty, ratio_m);
  return buf;
}

EnsemblePool train_pool(const Dataset& train_set, const Architecture& arch,
                        const Hyperparams& hp, std::uint64_t master_seed, int fold,
                        int pool_size, const std::string& id) {
  EnsemblePool pool;
  pool.scenario_id = id;
  pool.fold = fold;
  pool.models.reserve(pool_size);
  for (int m = 0; m < pool_size; ++m) {
    const std::uint64_t seed = derive_seed(master_seed, {"model", fold, m});
    ModelParams params = train(train_set, arch, hp, seed);
    params.provenance.scenario_id = id;
    params.provenance.fold = fold;
    params.provenance.model_index = m;
    pool.models.push_back(std::move(params));
  }
  return pool;
}

std::vector<MetricsRecord> records_from_curve(const std::vector<SizeMetrics>& curve,
                                              const std::string& variant_tag, double difficulty,
                                              double ratio_m, int fold) {
  std::vector<MetricsRecord> records;
  records.reserve(curve.size());
  const GroupMetrics& base = curve.front().metrics;  // k=1: mean single model
  for (const SizeMetrics& sm : curve) {
    MetricsRecord rec;
    rec.variant = variant_tag;
    rec.difficulty = difficulty;
    rec.ratio_m = ratio_m;
    rec.fold = fold;
    rec.k = sm.k;
    rec.acc_m = sm.metrics.acc_m;
    rec.acc_f = sm.metrics.acc_f;
    rec.acc_overall = sm.metrics.acc_overall;
    const GapReport g = gap(sm.metrics);
    rec.gap_abs = g.abs_gap;
    rec.benefited = g.benefited;
    rec.rel_imp_m = relative_improvement(sm.metrics.acc_m, base.acc_m);
    rec.rel_imp_f = relative_improvement(sm.metrics.acc_f, base.acc_f);
    rec.n_draws = sm.n_subsets;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

CellResult run_cell_fold(const GridConfig& config, double difficulty, double ratio_m,
                         int fold) {
  GridConfig cfg = config;
  cfg.apply_defaults();
  cfg.validate();

  ScenarioConfig sc;
  sc.variant = cfg.variant;
  sc.sigma = cfg.sigma;
  sc.ratio_m = ratio_m;
  sc.n_train = cfg.n_train;
  sc.n_test_per_cell = cfg.n_test_per_cell;
  if (cfg.variant == Variant::LabelNoise)
    sc.noise_fraction = difficulty;
  else
    sc.rotation_deg = difficulty;
  sc.validate();

  const std::string tag = scenario_tag(cfg.variant);
  const std::uint64_t ms = cfg.master_seed;
  // Stream seeds depend on (variant, fold) only; see run_cell_fold docs.
  const std::uint64_t train_seed = derive_seed(ms, {"train", tag, fold});
  const std::uint64_t test_seed = derive_seed(ms, {"test", tag, fold});
  const std::uint64_t flip_seed = derive_seed(ms, {"flip", fold});
  const std::uint64_t draw_seed = derive_seed(ms, {"draws", fold});

  CellResult out;
  out.train = sample_dataset(sc, train_seed);
  if (cfg.variant == Variant::LabelNoise && sc.noise_fraction > 0.0)
    out.train = flip_labels(out.train, Group::F, sc.noise_fraction, flip_seed);
  out.test = sample_testset(sc, test_seed);

  const std::string id = scenario_id(tag, difficulty, ratio_m);
  out.pool = train_pool(out.train, cfg.architecture, cfg.hyperparams, ms, fold,
                        cfg.pool_size, id);
  const std::vector<SizeMetrics> curve =
      evaluate_curve(out.pool, out.test, cfg.n_draws, draw_seed);
  out.records = records_from_curve(curve, tag, difficulty, ratio_m, fold);
  return out;
}

ResultsTable run_grid(const GridConfig& config) {
  GridConfig cfg = config;
  cfg.apply_defaults();
  cfg.validate();

  struct Unit {
    double difficulty;
    double ratio_m;
    int fold;
  };
  std::vector<Unit> units;
  for (double d : cfg.difficulty_grid)
    for (double r : cfg.ratio_grid)
      for (int fold = 0; fold < cfg.folds; ++fold) units.push_back({d, r, fold});

  struct Outcome {
    std::vector<MetricsRecord> records;
    std::optional<CellFailure> failure;
  };
  std::vector<Outcome> outcomes(units.size());

  ResultsTable table;
  table.manifest.started = utc_timestamp();

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  const auto worker = [&]() {
    while (true) {
      {
        std::scoped_lock lock(error_mutex);
        if (first_error) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= units.size()) return;
      const Unit& u = units[i];
      try {
        outcomes[i].records = run_cell_fold(cfg, u.difficulty, u.ratio_m, u.fold).records;
      } catch (const TrainingError& e) {
        outcomes[i].failure =
            CellFailure{u.difficulty, u.ratio_m, u.fold, e.epoch(), e.what()};
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, units.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Merge in grid order: the table never depends on scheduling.
  for (Outcome& o : outcomes) {
    if (o.failure)
      table.failures.push_back(std::move(*o.failure));
    else
      table.records.insert(table.records.end(), std::make_move_iterator(o.records.begin()),
                           std::make_move_iterator(o.records.end()));
  }

  table.manifest.finished = utc_timestamp();
  table.manifest.config_digest = config_digest(cfg);
  table.manifest.version = "0.1.0";
  table.manifest.platform = platform_tag();
  table.manifest.n_difficulties = static_cast<int>(cfg.difficulty_grid.size());
  table.manifest.n_ratios = static_cast<int>(cfg.ratio_grid.size());
  table.manifest.folds = cfg.folds;
  table.manifest.pool_size = cfg.pool_size;
  return table;
}

namespace {

constexpr const char* kResultsHeader =
    "variant,difficulty,ratio_m,fold,k,acc_m,acc_f,acc_overall,gap_abs,benefited,"
    "rel_imp_m,rel_imp_f,n_draws";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

double parse_double_field(const std::string& s, const char* name, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || s.empty())
    throw ParseError(std::string("bad ") + name + " value '" + s + "'", line_no);
  return v;
}

long parse_int_field(const std::string& s, const char* name, std::size_t line_no) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || s.empty())
    throw ParseError(std::string("bad ") + name + " value '" + s + "'", line_no);
  return v;
}

}  // namespace

void write_results_csv(const ResultsTable& table, std::ostream& out) {
  out << kResultsHeader << '\n';
  char buf[320];
  for (const MetricsRecord& r : table.records) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%.6f,%.6f,%d,%d,%.6f,%.6f,%.6f,%.6f,%s,%.6f,%.6f,%d\n",
                  r.variant.c_str(), r.difficulty, r.ratio_m, r.fold, r.k, r.acc_m, r.acc_f,
                  r.acc_overall, r.gap_abs, to_string(r.benefited).c_str(), r.rel_imp_m,
                  r.rel_imp_f, r.n_draws);
    out << buf;
  }
}

void write_results(const ResultsTable& table, const std::string& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
  write_results_csv(table, out);
  if (!out) throw std::runtime_error("failed writing " + csv_path);

  std::ofstream mf(csv_path + ".manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open " + csv_path + ".manifest.json for writing");
  mf << manifest_to_json(table.manifest, table) << '\n';
}

ResultsTable read_results_csv(std::istream& in) {
  ResultsTable table;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty results file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader)
    throw ParseError("header mismatch: expected '" + std::string(kResultsHeader) + "'", 1);

  std::size_t last_complete = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != 13)
      throw ParseError("expected 13 fields, got " + std::to_string(f.size()) +
                           " (last complete record at line " + std::to_string(last_complete) +
                           ")",
                       line_no);
    MetricsRecord rec;
    rec.variant = f[0];
    rec.difficulty = parse_double_field(f[1], "difficulty", line_no);
    rec.ratio_m = parse_double_field(f[2], "ratio_m", line_no);
    rec.fold = static_cast<int>(parse_int_field(f[3], "fold", line_no));
    rec.k = static_cast<int>(parse_int_field(f[4], "k", line_no));
    rec.acc_m = parse_double_field(f[5], "acc_m", line_no);
    rec.acc_f = parse_double_field(f[6], "acc_f", line_no);
    rec.acc_overall = parse_double_field(f[7], "acc_overall", line_no);
    rec.gap_abs = parse_double_field(f[8], "gap_abs", line_no);
    try {
      rec.benefited = benefited_from_string(f[9]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    rec.rel_imp_m = parse_double_field(f[10], "rel_imp_m", line_no);
    rec.rel_imp_f = parse_double_field(f[11], "rel_imp_f", line_no);
    rec.n_draws = static_cast<int>(parse_int_field(f[12], "n_draws", line_no));
    table.records.push_back(std::move(rec));
    last_complete = line_no;
  }
  return table;
}

ResultsTable read_results(const std::string& csv_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + csv_path);
  return read_results_csv(in);
}

std::string manifest_to_json(const Manifest& manifest, const ResultsTable& table) {
  json j;
  j["config_digest"] = manifest.config_digest;
  j["version"] = manifest.version;
  j["platform"] = manifest.platform;
  j["grid"] = {{"difficulties", manifest.n_difficulties},
               {"ratios", manifest.n_ratios},
               {"folds", manifest.folds},
               {"pool_size", manifest.pool_size}};
  j["started"] = manifest.started;
  j["finished"] = manifest.finished;
  j["records"] = table.records.size();
  json failures = json::array();
  for (const CellFailure& f : table.failures) {
    failures.push_back({{"difficulty", f.difficulty},
                        {"ratio_m", f.ratio_m},
                        {"fold", f.fold},
                        {"epoch", f.epoch},
                        {"message", f.message}});
  }
  j["failures"] = failures;
  return j.dump(2);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::pair<Dataset, Dataset> ingest_tabular(const std::string& path, const ColumnMapping& mapping,
                                           double split_fraction, std::uint64_t seed) {
  if (mapping.feature_columns.size() != 2)
    throw ConfigError("exactly two feature columns are required (the model input is 2-D)");
  if (!(split_fraction >= 0.0 && split_fraction <= 1.0))
    throw std::out_of_range("split_fraction must be in [0, 1]");

  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header_raw = split_fields(line);
  std::vector<std::string> header;
  header.reserve(header_raw.size());
  for (const auto& h : header_raw) header.push_back(trim(h));

  const auto column_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("column '" + name + "' not found in " + path);
  };
  const std::size_t fx = column_index(mapping.feature_columns[0]);
  const std::size_t fy = column_index(mapping.feature_columns[1]);
  const std::size_t gc = column_index(mapping.group_column);
  const std::size_t lc = column_index(mapping.label_column);

  struct RawRow {
    Vec2 features;
    std::string group;
    std::string label;
  };
  std::vector<RawRow> raw;
  std::vector<std::string> group_values;  // first-seen order
  std::vector<std::string> label_values;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(f.size()),
                       line_no);
    RawRow row;
    row.features.x = parse_double_field(trim(f[fx]), "feature", line_no);
    row.features.y = parse_double_field(trim(f[fy]), "feature", line_no);
    row.group = trim(f[gc]);
    row.label = trim(f[lc]);
    const auto note = [](std::vector<std::string>& seen, const std::string& v) {
      if (std::find(seen.begin(), seen.end(), v) == seen.end()) seen.push_back(v);
    };
    note(group_values, row.group);
    note(label_values, row.label);
    raw.push_back(std::move(row));
  }

  if (group_values.size() != 2)
    throw ConfigError("unsupported data: need exactly two group values, found " +
                      std::to_string(group_values.size()));
  if (label_values.size() != 2)
    throw ConfigError("unsupported data: need a binary label column, found " +
                      std::to_string(label_values.size()) + " distinct values");

  // Literal {0,1} labels keep their meaning; anything else maps by first
  // appearance. Groups always map by first appearance (first seen = M).
  std::string label_zero = label_values[0], label_one = label_values[1];
  if ((label_zero == "1" && label_one == "0") || (label_zero == "0" && label_one == "1")) {
    label_zero = "0";
    label_one = "1";
  }

  std::vector<DataRow> rows;
  rows.reserve(raw.size());
  for (const RawRow& r : raw) {
    DataRow row;
    row.features = r.features;
    row.group = r.group == group_values[0] ? Group::M : Group::F;
    row.clean_label = r.label == label_one ? Label{1} : Label{0};
    row.observed_label = row.clean_label;
    rows.push_back(row);
  }

  // Stratified split: fix the training count per (group, class) cell, pick
  // the rows with a per-cell shuffle, keep file order within each side.
  std::vector<std::uint8_t> in_train(rows.size(), 0);
  for (int g = 0; g < 2; ++g)
    for (int c = 0; c < 2; ++c) {
      std::vector<std::size_t> cell;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (static_cast<int>(rows[i].group) == g && rows[i].clean_label == c)
          cell.push_back(i);
      const auto n_train_cell = static_cast<std::size_t>(
          std::floor(split_fraction * static_cast<double>(cell.size()) + 0.5));
      Rng rng(derive_seed(seed, {"split", g, c}));
      for (std::size_t i = 0; i < n_train_cell; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.next_below(cell.size() - i));
        std::swap(cell[i], cell[j]);
      }
      for (std::size_t i = 0; i < n_train_cell; ++i) in_train[cell[i]] = 1;
    }

  Dataset train, test;
  train.split = Split::Train;
  test.split = Split::Test;
  for (std::size_t i = 0; i < rows.size(); ++i)
    (in_train[i] ? train : test).rows.push_back(rows[i]);
  return {std::move(train), std::move(test)};
}

ResultsTable run_tabular(const AdaptConfig& config) {
  config.validate();

  ResultsTable table;
  table.manifest.started = utc_timestamp();

  for (int fold = 0; fold < config.folds; ++fold) {
    const auto [train_set, test_set] =
        ingest_tabular(config.path, config.mapping, config.split_fraction,
                       derive_seed(config.master_seed, {"ingest", fold}));
    if (train_set.rows.empty()) throw ConfigError("tabular split produced no training rows");
    const double ratio =
        static_cast<double>(train_set.count(Group::M)) /
        static_cast<double>(train_set.rows.size());
    const std::string id = scenario_id("tabular", 0.0, ratio);
    try {
      const EnsemblePool pool =
          train_pool(train_set, config.architecture, config.hyperparams, config.master_seed,
                     fold, config.pool_size, id);
      const std::vector<SizeMetrics> curve = evaluate_curve(
          pool, test_set, config.n_draws, derive_seed(config.master_seed, {"draws", fold}));
      auto records = records_from_curve(curve, "tabular", 0.0, ratio, fold);
      table.records.insert(table.records.end(), std::make_move_iterator(records.begin()),
                           std::make_move_iterator(records.end()));
    } catch (const TrainingError& e) {
      table.failures.push_back(CellFailure{0.0, ratio, fold, e.epoch(), e.what()});
    }
  }

  table.manifest.finished = utc_timestamp();
  table.manifest.config_digest = "";
  table.manifest.version = "0.1.0";
  table.manifest.platform = platform_tag();
  table.manifest.n_difficulties = 1;
  table.manifest.n_ratios = 1;
  table.manifest.folds = config.folds;
  table.manifest.pool_size = config.pool_size;
  return table;
}

std::string platform_tag() {
#if defined(__linux__)
  const char* os = "linux";
#elif defined(__APPLE__)
  const char* os = "macos";
#elif defined(_WIN32)
  const char* os = "windows";
#else
  const char* os = "unknown";
#endif
#if defined(__x86_64__) || defined(_M_X64)
  const char* arch = "x86_64";
#elif defined(__aarch64__)
  const char* arch = "arm64";
#else
  const char* arch = "unknown";
#endif
#if defined(__clang__)
  const std::string compiler =
      "clang" + std::to_string(__clang_major__) + "." + std::to_string(__clang_minor__);
#elif defined(__GNUC__)
  const std::string compiler =
      "gcc" + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#else
  const std::string compiler = "unknown";
#endif
  return std::string(os) + "-" + arch + "-" + compiler;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace flab
