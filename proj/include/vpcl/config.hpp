#pragma once

#include "vpcl/experiment.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace vpcl {

enum class ExperimentKind { MicroVsMeanfield, ClassProbability, Lln, Cardinality, CutoffConvergence };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

enum class SnapshotMode { None, Endpoints, Full };

struct ClassProbabilityOptions {
  std::string classes = "cover";   // cover | schedule | explicit
  double delta = 1.0 / 12.0;       // cover spacing
  std::int64_t pairs = 10000;
  std::int64_t batch = 2048;
  bool mean_field = true;          // false: force-free flow
  CollisionClass fixed{0.0, 0.1, 0.0, 0.2, 0.0, 1.0, "explicit"};
  double c_frozen = 0.0;           // estimate <= c_frozen * bound check; 0 disables it
  double min_fraction = 0.99;
};

struct LlnOptions {
  LlnFunctional functional = LlnFunctional::CutoffForce;
  std::int64_t integral_multiplier = 100;
};

struct CutoffOptions {
  std::vector<double> cuts;            // empty: N^-beta for every N in the sweep
  bool frozen = false;
  std::int64_t tracers = 64;
  std::int64_t reference_count = 0;    // 0: reference_multiplier * max N
  double min_slope = 1.5;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::MicroVsMeanfield;
  std::vector<std::int64_t> n;
  std::vector<std::uint64_t> seeds{0};  // seed indices under base_seed
  std::uint64_t base_seed = 0;
  std::string output_dir = "runs/default";
  int threads = 0;
  SnapshotMode snapshots = SnapshotMode::Endpoints;

  // [model]
  double beta = 1.0 / 3.0;
  double sigma = 0.05;
  int sign = 1;
  double horizon = 1.0;
  bool main_theorem_regime = true;

  DensityModel density;

  // [integrator]
  std::int64_t min_steps = 1024;

  // [meanfield]
  MeanFieldBackend backend = MeanFieldBackend::RadialShell;
  SumPrecision precision = SumPrecision::Double;
  std::int64_t reference_multiplier = 16;
  std::int64_t reference_stride = 16;

  ClassProbabilityOptions class_probability;
  LlnOptions lln;
  CutoffOptions cutoff;

  ModelParams model(std::int64_t particles) const;
  TrendSpec trend_spec() const;
  LlnSpec lln_spec() const;
};

struct ConfigIssue {
  int line = 0;  // 0: not tied to a line
  std::string message;
};

class ConfigParseError : public ConfigError {
 public:
  explicit ConfigParseError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

// INI-style text: [section] headers, key = value, '#' or ';' comments.
// Lists are comma separated; integer lists accept a..b ranges; reals accept a/b.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Every field in a fixed order with defaults filled; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// SHA-256 hex of the canonical text without output_dir and threads.
std::string config_hash(const ExperimentConfig& cfg);

// output_dir under $VPCL_OUTPUT_ROOT when that is set and output_dir is relative.
std::string resolve_output_dir(const ExperimentConfig& cfg);

}  // namespace vpcl
