#include "vpcl/experiment.hpp"

#include "vpcl/random.hpp"

#include <cmath>

namespace vpcl {

IntegratorSpec experiment_integrator(double horizon, double cut_radius, double vmax, std::int64_t min_steps,
                                     std::int64_t stride) {
  IntegratorSpec integ = IntegratorSpec::for_horizon(horizon, cut_radius, vmax, min_steps);
  integ.steps = (integ.steps + stride - 1) / stride * stride;
  integ.dt = horizon / static_cast<double>(integ.steps);
  return integ;
}

MeanFieldRun run_meanfield_tracers(const TrendSpec& spec, std::int64_t n, std::uint64_t seed_index) {
  const std::string tag = "N" + std::to_string(n);
  const ModelParams params = ModelParams::with_beta(n, spec.beta, spec.sign, spec.sigma, spec.horizon);
  params.validate();
  MeanFieldRun run;
  run.initial = sample(SampleSpec{spec.density, n, derive_seed(spec.seed, "initial-" + tag, seed_index)});
  run.integ = experiment_integrator(spec.horizon, params.cut_radius, max_speed(run.initial), spec.min_steps,
                                    spec.reference_stride);

  // Mean-field flow: exact Coulomb field of the evolving reference ensemble.
  MeanFieldEngine engine;
  engine.backend = MeanFieldBackend::RadialShell;
  engine.cut_radius = 0.0;
  engine.sign = spec.sign;
  engine.reference_count = spec.reference_multiplier * n;
  engine.reference_floor = 16 * n;
  engine.reference_seed = derive_seed(spec.seed, "reference-" + tag, seed_index);
  engine.threads = spec.threads;
  const TrajectoryRecord ref = evolve_reference(engine, spec.density, run.integ, spec.reference_stride);
  run.tracers = evolve_tracers(engine, ref, run.initial, run.integ);
  return run;
}

TrendRun run_micro_vs_meanfield(const TrendSpec& spec, std::int64_t n, std::uint64_t seed_index, bool keep_records) {
  MeanFieldRun mf = run_meanfield_tracers(spec, n, seed_index);
  const ModelParams params = ModelParams::with_beta(n, spec.beta, spec.sign, spec.sigma, spec.horizon);

  TrendRun run;
  run.n = n;
  run.seed_index = seed_index;
  run.integ = mf.integ;
  run.micro = evolve_micro(ParticleSystem(params, std::move(mf.initial)), run.integ, 1, spec.threads);
  run.tracers = std::move(mf.tracers);

  const ThresholdSchedule sched = schedule(n, spec.sigma);
  run.taxonomy = classify(run.tracers, sched, spec.threads);
  run.deviation = deviation(run.micro, run.tracers, &run.taxonomy);
  run.tau = stopping_times(run.micro, run.tracers, run.taxonomy, sched);
  if (!keep_records) {
    run.micro.frames = {run.micro.frames.front(), run.micro.frames.back()};
    run.tracers.frames = {run.tracers.frames.front(), run.tracers.frames.back()};
    run.micro.frame_dt = run.tracers.frame_dt = spec.horizon;
  }
  return run;
}

std::vector<ClassProbability> class_sweep(const ClassSweepSpec& spec, const std::vector<CollisionClass>& classes,
                                          std::int64_t n, std::uint64_t seed_index) {
  const std::string tag = "N" + std::to_string(n);
  const double cut = power_of(static_cast<double>(n), -spec.beta);
  const IntegratorSpec integ = experiment_integrator(spec.horizon, cut, spec.density.speed_scale(), spec.min_steps,
                                                     spec.reference_stride);
  MeanFieldEngine engine;
  engine.backend = spec.backend;
  engine.precision = spec.precision;
  engine.cut_radius = cut;
  engine.sign = spec.sign;
  engine.reference_count = spec.reference_multiplier * n;
  engine.reference_seed = derive_seed(spec.seed, "class-reference-" + tag, seed_index);
  engine.threads = spec.threads;
  TrajectoryRecord ref;
  TracerFlow flow = TracerFlow::free_streaming(integ);
  if (spec.mean_field) {
    ref = evolve_reference(engine, spec.density, integ, spec.reference_stride);
    flow = TracerFlow::mean_field(engine, ref, integ);
  }
  return class_probabilities(classes, spec.density, spec.pairs, derive_seed(spec.seed, "class-pairs-" + tag, seed_index),
                             flow, spec.batch, spec.threads);
}

}  // namespace vpcl
