#pragma once

#include "vpcl/config.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpcl {

class OutputExistsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOptions {
  bool dry_run = false;
  bool force = false;
  std::ostream* log = nullptr;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
};

struct RunOutcome {
  std::string output_dir;
  std::string hash;
  std::vector<CheckResult> checks;
  bool wrote = false;

  bool passed() const;
};

// One line per (N, seed) task with its step count and output paths.
std::string execution_plan(const ExperimentConfig& cfg);

// Writes results.csv, summary.json, config.ini, manifest.json and snapshots/ under the output directory.
// Refuses to touch a directory holding a previous run unless force is set.
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Initial samples of every (N, seed) task as VPCL snapshots.
std::vector<std::string> write_samples(const ExperimentConfig& cfg, const RunOptions& options = {});

// Tidy series,x,y CSV from summary.json text; reference lines are recomputed from their exponents.
std::string emit_plotdata(const std::string& summary_json);

// %.17g: doubles round-trip through the CSV.
std::string csv_number(double v);

}  // namespace vpcl
