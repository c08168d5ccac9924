#pragma once

#include "vpcl/taxonomy.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vpcl {

struct DeviationReport {
  std::vector<double> times;
  std::vector<double> per_time;  // max over particles at each grid time
  // Running class maxima Delta_x(t) = max_{j in class} sup_{s <= t} (empty report: all zero).
  std::vector<double> good, bad, superbad;
  double sup = 0.0;
  double sup_good = 0.0, sup_bad = 0.0, sup_superbad = 0.0;
  double threshold = 0.0;  // N^{-1/6}
  bool exceeds = false;
};

// micro and tracers must be the two flows of the same initial points on the same grid.
DeviationReport deviation(const TrajectoryRecord& micro, const TrajectoryRecord& tracers,
                          const TaxonomyReport* report = nullptr);

// Sup over frames of the per-particle phase-space deviation.
double flow_distance(const TrajectoryRecord& a, const TrajectoryRecord& b);

struct Proportion {
  std::int64_t successes = 0;
  std::int64_t trials = 0;
  double estimate = 0.0;
  double lower = 0.0, upper = 1.0;  // Wilson score interval
};

Proportion wilson(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054);

struct ClassProbability {
  CollisionClass cls;
  Proportion p;
  double bound = 0.0;  // R^2 V^4 (t2 - t1) + R^3 max(R, V)^3
};

// Monte-Carlo P(Z in class(Y)) for i.i.d. Y, Z ~ density moved by flow; all classes share the pairs.
std::vector<ClassProbability> class_probabilities(const std::vector<CollisionClass>& classes,
                                                  const DensityModel& density, std::int64_t pairs,
                                                  std::uint64_t seed, const TracerFlow& flow,
                                                  std::int64_t batch = 2048, int threads = 0);
ClassProbability class_probability(const CollisionClass& cls, const DensityModel& density, std::int64_t pairs,
                                   std::uint64_t seed, const TracerFlow& flow);

struct ScalingFit {
  std::vector<double> x, y;  // points used in the fit
  double slope = 0.0;
  double intercept = 0.0;    // ln y = intercept + slope ln x
  std::vector<double> residuals;
  std::vector<std::string> warnings;
};

// Least squares on (ln x, ln y); nonpositive y excluded with a warning. Needs 3 distinct x.
ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& samples);

enum class LlnFunctional { Zero, HalfSpace, CutoffForce };

struct LlnSpec {
  LlnFunctional functional = LlnFunctional::CutoffForce;
  DensityModel density;
  double beta = 1.0 / 3.0;
  double sigma = 0.05;
  int sign = 1;
  double horizon = 1.0;
  std::int64_t steps = 1024;
  std::int64_t reference_multiplier = 16;  // M = multiplier * N for the mean-field reference
  std::int64_t reference_stride = 16;
  std::int64_t integral_multiplier = 100;  // samples of the integral reference per N
  std::uint64_t seed = 0;
  int threads = 0;

  double alpha() const { return beta + sigma; }
};

struct LlnResult {
  std::int64_t n = 0;
  std::vector<double> fluctuations;  // one per seed, infinity norm over components
  Vec3 integral = Vec3::Zero();      // reference value of the integral
  double median = 0.0;
  std::int64_t at_least_one = 0;     // fluctuations >= 1
  double h_sup = 0.0;                // max |h| over all evaluated samples
  double h_bound = 0.0;              // N^{1 - sigma}
};

std::vector<LlnResult> lln_experiment(const LlnSpec& spec, const std::vector<std::int64_t>& n_list, int seeds);
// Explicit seed indices; the int overload uses 0..seeds-1.
std::vector<LlnResult> lln_experiment(const LlnSpec& spec, const std::vector<std::int64_t>& n_list,
                                      const std::vector<std::uint64_t>& seed_indices);

struct CardinalityStats {
  std::int64_t n = 0;
  std::int64_t seeds = 0;
  double mean_bad = 0.0, mean_superbad = 0.0;
  double exceed_bad = 0.0, exceed_superbad = 0.0;  // fraction of seeds over the thresholds
  double threshold_bad = 0.0, threshold_superbad = 0.0;
  double predicted_bad = 0.0, predicted_superbad = 0.0;  // N^2 r^2 v^4
};

CardinalityStats cardinality_stats(const std::vector<TaxonomyReport>& reports, const ThresholdSchedule& sched);

struct CutoffSpec {
  DensityModel density;
  std::vector<double> cuts;     // any order; the smallest is the comparison base
  MeanFieldEngine engine;       // backend, reference_count, reference_seed, sign
  PhaseState tracers;
  IntegratorSpec integ;
  std::int64_t reference_stride = 16;
  bool frozen = false;          // static reference frame instead of evolving it
};

struct CutoffConvergence {
  std::vector<double> cuts;        // ascending
  std::vector<double> deviations;  // sup deviation from the smallest cut
  std::vector<TrajectoryRecord> tracers;
  ScalingFit fit;                  // over cuts above the smallest
};

CutoffConvergence cutoff_convergence(const CutoffSpec& spec);

double median(std::vector<double> v);

}  // namespace vpcl
