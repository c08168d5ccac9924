#include <doctest.h>

#include "vpcl/pipeline.hpp"
#include "vpcl/trajectory_io.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vpcl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vpcl_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config(const std::string& text, const fs::path& out) {
  ExperimentConfig c = parse_config(text);
  c.output_dir = out.string();
  return c;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int cli(const std::string& args) {
  const int status = std::system((std::string(VPCL_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("micro-vs-meanfield run: N=256, 4 seeds") {
  const fs::path out = scratch("trend");
  const auto cfg = config("[experiment]\nkind = micro-vs-meanfield\nn = 256\nseeds = 0..3\n", out);
  const RunOutcome r = run_experiment(cfg);
  CHECK(r.wrote);
  const auto rows = csv_rows(slurp(out / "results.csv"));
  REQUIRE_FALSE(rows.empty());
  CHECK(rows[0] == std::vector<std::string>{"experiment", "N", "seed", "statistic", "value"});
  int sups = 0;
  for (const auto& row : rows)
    if (row.size() == 5 && row[3] == "sup_deviation") {
      ++sups;
      CHECK(row[0] == "micro-vs-meanfield");
      CHECK(row[1] == "256");
    }
  CHECK(sups == 4);
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  REQUIRE(summary["per_n"].size() == 1);
  CHECK(summary["per_n"][0]["seeds"] == 4);
  CHECK(summary["config_hash"] == config_hash(cfg));
  CHECK(fs::exists(out / "snapshots" / "micro_N256_s3.vpcl"));
  const auto rec = read_vpcl((out / "snapshots" / "tracers_N256_s0.vpcl").string());
  CHECK(rec.particles() == 256);
  CHECK(rec.frame_count() == 2);
  CHECK(slurp(out / "config.ini") == serialize_config(cfg));
  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["seeds"].size() == 4);
  fs::remove_all(out);
}

TEST_CASE("dry run writes nothing; existing outputs need force") {
  const fs::path out = scratch("guard");
  const auto cfg = config("[experiment]\nkind = micro-vs-meanfield\nn = 32\nsnapshots = none\n", out);
  std::ostringstream log;
  const RunOutcome dry = run_experiment(cfg, {true, false, &log});
  CHECK_FALSE(dry.wrote);
  CHECK_FALSE(fs::exists(out));
  CHECK(log.str().find("N=32") != std::string::npos);

  run_experiment(cfg);
  CHECK_THROWS_AS(run_experiment(cfg), OutputExistsError);
  CHECK_NOTHROW(run_experiment(cfg, {false, true, nullptr}));
  fs::remove_all(out);
}

TEST_CASE("identical config gives byte-identical CSV and summary across thread counts") {
  const std::string text = "[experiment]\nkind = micro-vs-meanfield\nn = 64, 96\nseeds = 0, 1\nsnapshots = none\n";
  std::string csv, summary;
  for (int threads : {1, 2, 3}) {
    const fs::path out = scratch("det" + std::to_string(threads));
    auto cfg = config(text, out);
    cfg.threads = threads;
    run_experiment(cfg);
    if (csv.empty()) {
      csv = slurp(out / "results.csv");
      summary = slurp(out / "summary.json");
    } else {
      CHECK(slurp(out / "results.csv") == csv);
      CHECK(slurp(out / "summary.json") == summary);
    }
    fs::remove_all(out);
  }
}

TEST_CASE("class-probability run on the force-free flow") {
  const fs::path out = scratch("classes");
  const auto cfg = config(
      "[experiment]\nkind = class-probability\nn = 256\nsnapshots = none\n"
      "[class-probability]\nclasses = explicit\nr_max = inf\nv_max = inf\nflow = free\npairs = 500\nc_frozen = 1\n",
      out);
  const RunOutcome r = run_experiment(cfg);
  REQUIRE(r.checks.size() == 1);
  CHECK(r.checks[0].passed);  // probability 1 against a bound of infinity
  CHECK(slurp(out / "results.csv").find("p[explicit],1\n") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("lln run with the zero functional") {
  const fs::path out = scratch("lln");
  const auto cfg = config(
      "[experiment]\nkind = lln\nn = 64\nseeds = 0..4\nsnapshots = none\n[integrator]\nmin_steps = 64\n"
      "[lln]\nfunctional = zero\nintegral_multiplier = 2\n",
      out);
  const RunOutcome r = run_experiment(cfg);
  REQUIRE(r.checks.size() == 1);
  CHECK(r.checks[0].name == "no_fluctuation_at_least_one");
  CHECK(r.checks[0].passed);
  int rows = 0;
  for (const auto& row : csv_rows(slurp(out / "results.csv")))
    if (row.size() == 5 && row[3] == "fluctuation") {
      ++rows;
      CHECK(row[4] == "0");
    }
  CHECK(rows == 5);
  fs::remove_all(out);
}

TEST_CASE("frozen cutoff-convergence run") {
  const fs::path out = scratch("cutoff");
  const auto cfg = config(
      "[experiment]\nkind = cutoff-convergence\nn = 256\nsnapshots = none\n[integrator]\nmin_steps = 64\n"
      "[density]\nkind = uniform-ball-gaussian\n"
      "[cutoff-convergence]\ncuts = 0.05, 0.1, 0.2, 0.4\nfrozen = true\ntracers = 16\nreference_count = 4096\n",
      out);
  const RunOutcome r = run_experiment(cfg);
  REQUIRE(r.checks.size() == 1);
  CHECK(r.checks[0].name == "deviation_monotone_in_cut");
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["cuts"].size() == 4);
  CHECK(summary["cuts"][0]["median_deviation"] == 0.0);
  fs::remove_all(out);
}

TEST_CASE("plotdata: empty summary is header only") {
  CHECK(emit_plotdata("") == "series,x,y\n");
  CHECK(emit_plotdata("{}") == "series,x,y\n");
}

TEST_CASE("plotdata: one N gives a data row and a reference row") {
  const double n = 256;
  const nlohmann::ordered_json s{
      {"sigma", 0.05},
      {"per_n", {{{"N", 256}, {"median_sup_deviation", 0.125}, {"threshold", power_of(n, -1.0 / 6.0)}}}}};
  const auto rows = csv_rows(emit_plotdata(s.dump()));
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"median_sup_deviation", "256", "0.125"});
  CHECK(rows[2][0] == "threshold");
}

TEST_CASE("plotdata reference lines equal the thresholds embedded in a real summary") {
  const fs::path out = scratch("plot");
  const auto cfg = config("[experiment]\nkind = micro-vs-meanfield\nn = 32, 48\nsnapshots = none\n", out);
  run_experiment(cfg);
  const std::string text = slurp(out / "summary.json");
  const auto summary = nlohmann::json::parse(text);
  const auto rows = csv_rows(emit_plotdata(text));
  int matched = 0;
  for (const auto& r : summary["per_n"]) {
    const std::string n = std::to_string(r["N"].get<int>());
    for (const auto& row : rows) {
      if (row.size() != 3 || row[1] != n) continue;
      if (row[0] == "threshold") {
        CHECK(std::stod(row[2]) == r["threshold"].get<double>());
        ++matched;
      }
      if (row[0] == "bad_threshold") {
        CHECK(std::stod(row[2]) == r["bad_threshold"].get<double>());
        ++matched;
      }
    }
  }
  CHECK(matched == 4);
  fs::remove_all(out);
}

TEST_CASE("cli exit codes") {
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  const fs::path good = dir / "good.ini", bad = dir / "bad.ini", failing = dir / "failing.ini";
  std::ofstream(good) << "[experiment]\nkind = micro-vs-meanfield\nn = 32\nsnapshots = none\noutput_dir = "
                      << (dir / "out").string() << "\n";
  std::ofstream(bad) << "[experiment]\nkind = micro-vs-meanfield\nn = 32\nbogus = 1\n";
  // A zero-functional LLN sweep has equal medians, so the strict-decrease check fails.
  std::ofstream(failing) << "[experiment]\nkind = lln\nn = 32, 64\nsnapshots = none\noutput_dir = "
                         << (dir / "lln").string() << "\n[integrator]\nmin_steps = 32\n"
                         << "[lln]\nfunctional = zero\nintegral_multiplier = 1\n";

  CHECK(cli("validate --config " + good.string()) == 0);
  CHECK(cli("validate --config " + bad.string()) == 2);
  CHECK(cli("run --config " + bad.string()) == 2);
  CHECK(cli("run --dry-run --config " + good.string()) == 0);
  CHECK_FALSE(fs::exists(dir / "out"));
  CHECK(cli("run --config " + good.string()) == 0);
  CHECK(cli("run --config " + good.string()) == 1);
  CHECK(cli("run --force --threads 1 --config " + good.string()) == 0);
  CHECK(cli("run --check --config " + failing.string()) == 4);
  CHECK(cli("plotdata --summary " + (dir / "out" / "summary.json").string()) == 0);
  CHECK(cli("sample --seed-offset 3 --config " + good.string()) == 0);
  CHECK(fs::exists(dir / "out" / "snapshots" / "sample_N32_s3.vpcl"));
  CHECK(cli("taxonomy --input " + (dir / "out" / "snapshots" / "sample_N32_s3.vpcl").string()) == 0);
  CHECK(cli("bogus-subcommand") == 2);
  fs::remove_all(dir);
}
