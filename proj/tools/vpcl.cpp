// vpcl: sample, run, taxonomy, stats, plotdata, validate.
// Exit codes: 0 ok, 1 I/O, 2 config, 3 numerical abort, 4 check failure.
#include "vpcl/pipeline.hpp"
#include "vpcl/trajectory_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

struct Common {
  std::string config;
  std::uint64_t seed_offset = 0;
  bool dry_run = false;
  bool force = false;
  int threads = -1;
};

vpcl::ExperimentConfig load(const Common& c) {
  vpcl::ExperimentConfig cfg = vpcl::load_config(c.config);
  for (auto& s : cfg.seeds) s += c.seed_offset;
  if (c.threads >= 0) cfg.threads = c.threads;
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + out);
  f << text;
}

nlohmann::ordered_json deviation_json(const vpcl::DeviationReport& d) {
  return {{"sup", d.sup},
          {"sup_good", d.sup_good},
          {"sup_bad", d.sup_bad},
          {"sup_superbad", d.sup_superbad},
          {"threshold", d.threshold},
          {"exceeds", d.exceeds},
          {"times", d.times},
          {"per_time", d.per_time}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cut-off Vlasov-Poisson particle laboratory"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub, bool run_flags) {
    sub->add_option("--config", common.config, "experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed-offset", common.seed_offset, "added to every seed index");
    sub->add_option("--threads", common.threads, "worker threads (0: all)");
    if (run_flags) {
      sub->add_flag("--dry-run", common.dry_run, "validate and print the plan, write nothing");
      sub->add_flag("--force", common.force, "overwrite a previous run");
    }
  };

  auto* validate = app.add_subcommand("validate", "parse a config and print its canonical form and hash");
  add_common(validate, false);

  auto* sample = app.add_subcommand("sample", "write the initial samples of every (N, seed) task");
  add_common(sample, true);

  bool check = false;
  auto* run = app.add_subcommand("run", "run an experiment");
  add_common(run, true);
  run->add_flag("--check", check, "exit 4 when a summary check fails");

  std::string input, micro_path, tracers_path, out_path, summary_path;
  double sigma = 0.05;
  int threads = 0;
  auto* taxonomy = app.add_subcommand("taxonomy", "classify a tracer snapshot");
  taxonomy->add_option("--input", input, "tracer trajectory (VPCL)")->required()->check(CLI::ExistingFile);
  taxonomy->add_option("--sigma", sigma, "schedule sigma");
  taxonomy->add_option("--threads", threads, "worker threads (0: all)");
  taxonomy->add_option("--out", out_path, "JSON output (default stdout)");

  bool classify_tracers = false;
  auto* stats = app.add_subcommand("stats", "deviation between a micro and a tracer snapshot");
  stats->add_option("--micro", micro_path, "micro trajectory (VPCL)")->required()->check(CLI::ExistingFile);
  stats->add_option("--tracers", tracers_path, "tracer trajectory (VPCL)")->required()->check(CLI::ExistingFile);
  stats->add_flag("--classify", classify_tracers, "split the deviation by taxonomy label");
  stats->add_option("--sigma", sigma, "schedule sigma for --classify");
  stats->add_option("--threads", threads, "worker threads (0: all)");
  stats->add_option("--out", out_path, "JSON output (default stdout)");

  auto* plotdata = app.add_subcommand("plotdata", "tidy CSV series from a run summary");
  plotdata->add_option("--summary", summary_path, "summary.json")->required()->check(CLI::ExistingFile);
  plotdata->add_option("--out", out_path, "CSV output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (validate->parsed()) {
      const auto cfg = load(common);
      std::cout << vpcl::serialize_config(cfg) << "\n# hash " << vpcl::config_hash(cfg) << "\n";
      return 0;
    }
    if (sample->parsed()) {
      const auto cfg = load(common);
      for (const auto& p : vpcl::write_samples(cfg, {common.dry_run, common.force, &std::cerr}))
        std::cout << (common.dry_run ? "would write " : "wrote ") << p << "\n";
      return 0;
    }
    if (run->parsed()) {
      const auto cfg = load(common);
      const auto outcome = vpcl::run_experiment(cfg, {common.dry_run, common.force, &std::cerr});
      if (common.dry_run) return 0;
      for (const auto& c : outcome.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " value=" << vpcl::csv_number(c.value)
                  << " limit=" << vpcl::csv_number(c.limit) << "\n";
      std::cout << "output " << outcome.output_dir << "\n";
      return check && !outcome.passed() ? kExitCheck : 0;
    }
    if (taxonomy->parsed()) {
      const auto rec = vpcl::read_vpcl(input);
      const auto report = vpcl::classify(rec, vpcl::schedule(rec.particles(), sigma), threads);
      emit(vpcl::to_json(report, 2) + "\n", out_path);
      return 0;
    }
    if (stats->parsed()) {
      const auto micro = vpcl::read_vpcl(micro_path);
      const auto tracers = vpcl::read_vpcl(tracers_path);
      vpcl::TaxonomyReport report;
      if (classify_tracers) report = vpcl::classify(tracers, vpcl::schedule(tracers.particles(), sigma), threads);
      const auto d = vpcl::deviation(micro, tracers, classify_tracers ? &report : nullptr);
      emit(deviation_json(d).dump(2) + "\n", out_path);
      return 0;
    }
    if (plotdata->parsed()) {
      emit(vpcl::emit_plotdata(read_file(summary_path)), out_path);
      return 0;
    }
  } catch (const vpcl::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return kExitConfig;
  } catch (const vpcl::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const vpcl::DomainError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
