#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

// End-to-end tests driving the installed binary (path injected by the build).

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path unique_dir(const std::string& stem) {
  static int counter = 0;
  const fs::path p = fs::temp_directory_path() / (stem + "_" + std::to_string(++counter));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const fs::path dir = unique_dir("flab_cli_io");
  const fs::path out_file = dir / "stdout.txt";
  const fs::path err_file = dir / "stderr.txt";
  const std::string cmd = env_prefix + FLAB_CLI_PATH + " " + args + " >" + out_file.string() +
                          " 2>" + err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = (status != -1 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  fs::remove_all(dir);
  return r;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

constexpr const char* kScenarioJson = R"({
  "variant": "label_noise",
  "ratio_m": 0.2,
  "noise_fraction": 0.4,
  "n_train": 100,
  "n_test_per_cell": 10,
  "seed": 3
})";

constexpr const char* kSweepJson = R"({
  "difficulty_grid": [0.0],
  "ratio_grid": [0.3, 0.7],
  "folds": 1,
  "pool_size": 2,
  "n_draws": 5,
  "n_train": 60,
  "n_test_per_cell": 20,
  "hyperparams": {"epochs": 4},
  "threads": 1
})";

long long count_flips(const std::string& csv) {
  // columns: x1,x2,group,clean_label,observed_label
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  long long flips = 0;
  while (std::getline(in, line)) {
    const std::size_t last = line.rfind(',');
    const std::size_t prev = line.rfind(',', last - 1);
    flips += line.substr(prev + 1, last - prev - 1) != line.substr(last + 1);
  }
  return flips;
}

}  // namespace

TEST_CASE("cli requires a subcommand and offers help") {
  CHECK(run_cli("").exit_code != 0);

  const RunResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.out.find("gen") != std::string::npos);
  CHECK(help.out.find("sweep") != std::string::npos);
  CHECK(help.out.find("report") != std::string::npos);
  CHECK(help.out.find("gradcheck") != std::string::npos);
  CHECK(help.out.find("adapt") != std::string::npos);
}

TEST_CASE("gradcheck passes and reports its numbers") {
  const RunResult r = run_cli("gradcheck");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("gradient check passed") != std::string::npos);
  CHECK(r.out.find("max relative error") != std::string::npos);
  CHECK(r.out.find("draws accepted: 100") != std::string::npos);
}

TEST_CASE("gen writes deterministic train and test CSVs") {
  const fs::path dir = unique_dir("flab_cli_gen");
  const fs::path cfg = dir / "scenario.json";
  write_file(cfg, kScenarioJson);

  const RunResult r =
      run_cli("gen --config " + cfg.string() + " --out " + (dir / "a").string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("train.csv (100 rows: 20 M, 80 F)") != std::string::npos);
  CHECK(r.out.find("test.csv (40 rows)") != std::string::npos);

  const std::string train = slurp(dir / "a" / "train.csv");
  const std::string test = slurp(dir / "a" / "test.csv");
  CHECK(train.rfind("x1,x2,group,clean_label,observed_label\n", 0) == 0);
  // 40% of the 80 group-F rows get flipped observed labels.
  CHECK(count_flips(train) == 32);
  CHECK(count_flips(test) == 0);

  SUBCASE("same config, same bytes") {
    REQUIRE(run_cli("gen --config " + cfg.string() + " --out " + (dir / "b").string())
                .exit_code == 0);
    CHECK(slurp(dir / "b" / "train.csv") == train);
    CHECK(slurp(dir / "b" / "test.csv") == test);
  }
  SUBCASE("seed override changes the data") {
    REQUIRE(run_cli("gen --config " + cfg.string() + " --seed 99 --out " +
                    (dir / "c").string())
                .exit_code == 0);
    CHECK(slurp(dir / "c" / "train.csv") != train);
  }
  fs::remove_all(dir);
}

TEST_CASE("sweep produces results.csv with a manifest sidecar") {
  const fs::path dir = unique_dir("flab_cli_sweep");
  const fs::path cfg = dir / "grid.json";
  write_file(cfg, kSweepJson);

  const RunResult r =
      run_cli("sweep --config " + cfg.string() + " --out " + (dir / "out").string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("results.csv (4 records)") != std::string::npos);

  const std::string csv = slurp(dir / "out" / "results.csv");
  CHECK(csv.rfind("variant,difficulty,ratio_m,fold,k,", 0) == 0);
  CHECK(fs::exists(dir / "out" / "results.csv.manifest.json"));

  SUBCASE("byte-identical across thread counts") {
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --threads 3 --out " +
                    (dir / "t3").string())
                .exit_code == 0);
    CHECK(slurp(dir / "t3" / "results.csv") == csv);
  }
  SUBCASE("thread count can come from the environment") {
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --out " + (dir / "env").string(),
                    "FLAB_THREADS=2 ")
                .exit_code == 0);
    CHECK(slurp(dir / "env" / "results.csv") == csv);
  }
  SUBCASE("seed override changes the results") {
    REQUIRE(run_cli("sweep --config " + cfg.string() + " --seed 1 --out " +
                    (dir / "s1").string())
                .exit_code == 0);
    CHECK(slurp(dir / "s1" / "results.csv") != csv);
  }
  fs::remove_all(dir);
}

TEST_CASE("report renders summary and figures from a results file") {
  const fs::path dir = unique_dir("flab_cli_report");
  const fs::path cfg = dir / "grid.json";
  write_file(cfg, kSweepJson);
  REQUIRE(run_cli("sweep --config " + cfg.string() + " --out " + (dir / "out").string())
              .exit_code == 0);

  const RunResult r = run_cli("report --results " + (dir / "out" / "results.csv").string() +
                              " --out " + (dir / "report").string());
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(dir / "report" / "summary.md"));
  CHECK(fs::exists(dir / "report" / "curves_label_noise_d0_r0.3_acc.svg"));
  CHECK(fs::exists(dir / "report" / "curves_label_noise_d0_r0.7_gap.csv"));
  CHECK(r.out.find("summary.md") != std::string::npos);

  const std::string md = slurp(dir / "report" / "summary.md");
  CHECK(md.find("# Results report") == 0);
  CHECK(md.find("label_noise") != std::string::npos);

  SUBCASE("missing --results flag fails fast") {
    CHECK(run_cli("report").exit_code != 0);
  }
  SUBCASE("an empty results table is a clean error") {
    const fs::path empty = dir / "empty.csv";
    write_file(empty,
               "variant,difficulty,ratio_m,fold,k,acc_m,acc_f,acc_overall,gap_abs,"
               "benefited,rel_imp_m,rel_imp_f,n_draws\n");
    const RunResult bad = run_cli("report --results " + empty.string());
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.find("flab report: error:") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("adapt runs the protocol on an external CSV") {
  const fs::path dir = unique_dir("flab_cli_adapt");
  const fs::path data = dir / "data.csv";
  {
    std::ostringstream csv;
    csv << "f1,f2,grp,lab\n";
    for (int i = 0; i < 32; ++i)
      csv << i * 0.1 << "," << (i % 3) * 0.5 << "," << (i % 4 <= 1 ? "alpha" : "beta") << ","
          << (i % 2 == 0 ? "yes" : "no") << "\n";
    write_file(data, csv.str());
  }
  const fs::path cfg = dir / "adapt.json";
  write_file(cfg, std::string(R"({
    "path": ")") + data.string() + R"(",
    "feature_columns": ["f1", "f2"],
    "group_column": "grp",
    "label_column": "lab",
    "split_fraction": 0.5,
    "pool_size": 2,
    "n_draws": 5,
    "hyperparams": {"epochs": 3}
  })");

  const RunResult r =
      run_cli("adapt --config " + cfg.string() + " --out " + (dir / "out").string());
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "out" / "results.csv");
  CHECK(csv.find("tabular,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("configuration mistakes surface as tagged errors") {
  const fs::path dir = unique_dir("flab_cli_errors");

  SUBCASE("unknown config key") {
    const fs::path cfg = dir / "bad.json";
    write_file(cfg, R"({"nope": 1})");
    const RunResult r = run_cli("gen --config " + cfg.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("flab gen: config error:") != std::string::npos);
    CHECK(r.err.find("nope") != std::string::npos);
  }
  SUBCASE("missing config file is caught by the parser") {
    const RunResult r = run_cli("sweep --config /nonexistent/grid.json");
    CHECK(r.exit_code != 0);
  }
  SUBCASE("malformed results file is a parse error") {
    const fs::path bad = dir / "bad_results.csv";
    write_file(bad, "variant,difficulty\n");
    const RunResult r = run_cli("report --results " + bad.string());
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("flab report: parse error:") != std::string::npos);
  }
  fs::remove_all(dir);
}
