// Pilot calibration of the unnamed constants that the acceptance and unit tests freeze.
// Writes one JSON file; rerun only when the estimators change.
#include "vpcl/experiment.hpp"
#include "vpcl/random.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

using namespace vpcl;
using ojson = nlohmann::ordered_json;

namespace {

// Pilot streams never overlap the acceptance seeds (different base seed).
constexpr std::uint64_t kPilotSeed = 0x9f1a2b3c4d5e6f70ULL;
constexpr double kSafety = 2.0;

// Largest ratio of the Wilson upper limit to the bound over classes that were hit at least
// once; unhit classes say nothing about the constant.
ojson lemma_sweep(std::int64_t pairs, int threads) {
  ClassSweepSpec spec;
  spec.density = DensityModel::gaussian();
  spec.pairs = pairs;
  spec.seed = kPilotSeed;
  spec.threads = threads;
  double worst = 0.0;
  ojson per_n = ojson::array();
  for (std::int64_t n : {256, 1024, 4096}) {
    const auto probs = class_sweep(spec, dyadic_cover(n, spec.beta, 1.0 / 12.0, spec.horizon), n, 0);
    double n_worst = 0.0;
    std::int64_t hit = 0;
    for (const auto& p : probs) {
      std::fprintf(stderr, "N=%lld %-14s k=%lld p=%.3g upper=%.3g bound=%.3g ratio=%.3g\n", static_cast<long long>(n),
                   p.cls.label.c_str(), static_cast<long long>(p.p.successes), p.p.estimate, p.p.upper, p.bound,
                   p.p.estimate / p.bound);
      if (p.p.successes == 0) continue;
      ++hit;
      n_worst = std::max(n_worst, p.p.upper / p.bound);
    }
    worst = std::max(worst, n_worst);
    per_n.push_back({{"N", n}, {"classes", probs.size()}, {"hit", hit}, {"max_upper_ratio", n_worst}});
  }
  return {{"c_frozen", kSafety * worst},
          {"safety", kSafety},
          {"max_upper_ratio", worst},
          {"pairs", pairs},
          {"beta", spec.beta},
          {"delta", 1.0 / 12.0},
          {"flow", "mean-field, cut N^-beta, M = 16 N"},
          {"pilot", per_n}};
}

// Brute-force maximum of integral / min(1/dr^2, 1/(c dv), 1/(dr dv)) over sampled tracer pairs.
ojson integrated_force(std::int64_t pairs, int threads) {
  const std::int64_t n = 1024;
  const double beta = 1.0 / 3.0;
  const double cut = power_of(static_cast<double>(n), -beta);
  const DensityModel density = DensityModel::gaussian();
  const IntegratorSpec integ = experiment_integrator(1.0, cut, density.speed_scale(), 1024, 16);
  MeanFieldEngine engine;
  engine.cut_radius = cut;
  engine.reference_count = 16 * n;
  engine.reference_seed = derive_seed(kPilotSeed, "force-reference");
  engine.threads = threads;
  const TrajectoryRecord ref = evolve_reference(engine, density, integ, 16);
  const auto samples = integrated_force_samples(density, pairs, derive_seed(kPilotSeed, "force-pairs"),
                                                TracerFlow::mean_field(engine, ref, integ), cut);
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, s.integral / s.bound);
  std::fprintf(stderr, "integrated force: max ratio %.4g over %lld pairs\n", worst, static_cast<long long>(pairs));
  return {{"c", kSafety * worst}, {"safety", kSafety}, {"max_ratio", worst}, {"pairs", pairs}, {"N", n}, {"beta", beta}};
}

// Force-free fixture R = 0.1, V = 0.2, T = 1 on a large sample.
ojson force_free(std::int64_t pairs, int threads) {
  const CollisionClass cls{0.0, 0.1, 0.0, 0.2, 0.0, 1.0, "fixture"};
  const TracerFlow flow = TracerFlow::free_streaming(IntegratorSpec{1.0 / 1024, 1024});
  const auto p = class_probabilities({cls}, DensityModel::gaussian(), pairs, derive_seed(kPilotSeed, "force-free"), flow,
                                     8192, threads)
                     .front();
  std::fprintf(stderr, "force-free: k=%lld p=%.4g upper=%.4g bound=%.4g\n", static_cast<long long>(p.p.successes),
               p.p.estimate, p.p.upper, p.bound);
  return {{"c", kSafety * p.p.upper / p.bound},
          {"safety", kSafety},
          {"successes", p.p.successes},
          {"pairs", pairs},
          {"estimate", p.p.estimate},
          {"upper", p.p.upper},
          {"bound", p.bound},
          {"r", cls.r_max},
          {"v", cls.v_max},
          {"t", cls.t2}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pilot calibration of frozen constants"};
  std::string out = "tests/fixtures/calibration.json";
  std::int64_t sweep_pairs = 10000, force_pairs = 10000, fixture_pairs = 2000000;
  int threads = 0;
  app.add_option("--out", out, "calibration JSON");
  app.add_option("--sweep-pairs", sweep_pairs, "pairs per N for the class sweep");
  app.add_option("--force-pairs", force_pairs, "pairs for the integrated-force constant");
  app.add_option("--fixture-pairs", fixture_pairs, "pairs for the force-free fixture");
  app.add_option("--threads", threads, "worker threads (0: all)");
  CLI11_PARSE(app, argc, argv);

  const ojson j{{"class_sweep", lemma_sweep(sweep_pairs, threads)},
                {"integrated_force", integrated_force(force_pairs, threads)},
                {"force_free_fixture", force_free(fixture_pairs, threads)}};
  std::ofstream f(out);
  if (!f) {
    std::cerr << "cannot write " << out << "\n";
    return 1;
  }
  f << j.dump(2) << "\n";
  std::cout << "wrote " << out << "\n";
  return 0;
}
