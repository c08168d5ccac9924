#pragma once

#include "vpcl/stats.hpp"

#include <cstdint>

namespace vpcl {

// Micro flow with cut N^{-beta} against the lifted mean-field flow of the same points.
struct TrendSpec {
  DensityModel density;
  double beta = 1.0 / 3.0;
  double sigma = 0.05;
  int sign = 1;
  double horizon = 1.0;
  std::int64_t min_steps = 1024;
  std::int64_t reference_multiplier = 16;  // M = multiplier * N
  std::int64_t reference_stride = 16;
  std::uint64_t seed = 0;
  int threads = 0;
};

struct TrendRun {
  std::int64_t n = 0;
  std::uint64_t seed_index = 0;
  IntegratorSpec integ;
  DeviationReport deviation;
  TaxonomyReport taxonomy;
  StoppingTimes tau;
  TrajectoryRecord micro, tracers;  // emptied unless kept
};

// Step count rounded up to a multiple of stride so reference frames sit on the grid.
IntegratorSpec experiment_integrator(double horizon, double cut_radius, double vmax, std::int64_t min_steps,
                                     std::int64_t stride);

// Initial points and their mean-field tracer paths; shared seeds with run_micro_vs_meanfield.
struct MeanFieldRun {
  PhaseState initial;
  IntegratorSpec integ;
  TrajectoryRecord tracers;
};

MeanFieldRun run_meanfield_tracers(const TrendSpec& spec, std::int64_t n, std::uint64_t seed_index);

TrendRun run_micro_vs_meanfield(const TrendSpec& spec, std::int64_t n, std::uint64_t seed_index,
                                bool keep_records = false);

// Monte-Carlo class probabilities under the cut-off mean-field flow (c = N^-beta) or free streaming.
struct ClassSweepSpec {
  DensityModel density;
  double beta = 1.0 / 3.0;
  int sign = 1;
  double horizon = 1.0;
  std::int64_t min_steps = 1024;
  std::int64_t reference_multiplier = 16;
  std::int64_t reference_stride = 16;
  MeanFieldBackend backend = MeanFieldBackend::RadialShell;
  SumPrecision precision = SumPrecision::Double;
  bool mean_field = true;
  std::int64_t pairs = 10000;
  std::int64_t batch = 2048;
  std::uint64_t seed = 0;
  int threads = 0;
};

std::vector<ClassProbability> class_sweep(const ClassSweepSpec& spec, const std::vector<CollisionClass>& classes,
                                          std::int64_t n, std::uint64_t seed_index);

}  // namespace vpcl
