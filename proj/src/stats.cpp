#include "vpcl/stats.hpp"

#include "vpcl/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

namespace vpcl {

namespace {

void require_same_grid(const TrajectoryRecord& a, const TrajectoryRecord& b, const char* who) {
  if (a.frame_count() != b.frame_count() || a.particles() != b.particles() ||
      std::abs(a.frame_dt - b.frame_dt) > 1e-12 * std::max(a.frame_dt, b.frame_dt))
    throw ConfigError(std::string(who) + ": records are on different grids");
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

DeviationReport deviation(const TrajectoryRecord& micro, const TrajectoryRecord& tracers,
                          const TaxonomyReport* report) {
  require_same_grid(micro, tracers, "deviation");
  if (micro.frame_count() == 0) throw ConfigError("deviation: empty records");
  const PhaseState& m0 = micro.frames.front();
  const PhaseState& t0 = tracers.frames.front();
  if (!(m0.q.array() == t0.q.array()).all() || !(m0.p.array() == t0.p.array()).all())
    throw ConfigError("deviation: micro and tracer records start from different initial points");
  if (report && static_cast<Eigen::Index>(report->labels.size()) != micro.particles())
    throw ConfigError("deviation: taxonomy report does not match the records");

  DeviationReport r;
  const std::size_t frames = micro.frame_count();
  r.times = micro.times();
  r.per_time.resize(frames);
  r.good.assign(frames, 0.0);
  r.bad.assign(frames, 0.0);
  r.superbad.assign(frames, 0.0);
  std::array<double, 3> run{0, 0, 0};
  for (std::size_t k = 0; k < frames; ++k) {
    const Eigen::VectorXd dev = phase_deviation(micro.frames[k], tracers.frames[k]);
    r.per_time[k] = dev.size() ? dev.maxCoeff() : 0.0;
    if (report) {
      for (std::size_t i = 0; i < report->labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(report->labels[i]);
        run[c] = std::max(run[c], dev[static_cast<Eigen::Index>(i)]);
      }
    }
    r.good[k] = run[0];
    r.bad[k] = run[1];
    r.superbad[k] = run[2];
  }
  r.sup = *std::max_element(r.per_time.begin(), r.per_time.end());
  r.sup_good = run[0];
  r.sup_bad = run[1];
  r.sup_superbad = run[2];
  r.threshold = power_of(static_cast<double>(std::max<Eigen::Index>(micro.particles(), 1)), -1.0 / 6.0);
  r.exceeds = r.sup > r.threshold;
  return r;
}

double flow_distance(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  require_same_grid(a, b, "flow_distance");
  double sup = 0.0;
  for (std::size_t k = 0; k < a.frame_count(); ++k) {
    const Eigen::VectorXd dev = phase_deviation(a.frames[k], b.frames[k]);
    if (dev.size()) sup = std::max(sup, dev.maxCoeff());
  }
  return sup;
}

Proportion wilson(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0) throw ConfigError("wilson: trials must be positive");
  Proportion p;
  p.successes = successes;
  p.trials = trials;
  const auto n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  p.estimate = phat;
  const double z2 = z * z;
  const double centre = (phat + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n));
  p.lower = std::max(0.0, centre - half);
  p.upper = std::min(1.0, centre + half);
  return p;
}

std::vector<ClassProbability> class_probabilities(const std::vector<CollisionClass>& classes,
                                                  const DensityModel& density, std::int64_t pairs,
                                                  std::uint64_t seed, const TracerFlow& flow, std::int64_t batch,
                                                  int threads) {
  if (pairs <= 0) throw ConfigError("class_probability: pairs must be positive");
  if (batch <= 0) throw ConfigError("class_probability: batch must be positive");
  const double horizon = flow.integrator().horizon();
  for (const auto& c : classes) c.validate(horizon);
  const std::size_t nc = classes.size();
  std::vector<std::int64_t> hits(nc, 0);

  for (std::int64_t start = 0, b = 0; start < pairs; start += batch, ++b) {
    const std::int64_t m = std::min(batch, pairs - start);
    const PhaseState pts = sample(SampleSpec{density, 2 * m, derive_seed(seed, "class-pairs", static_cast<std::uint64_t>(b))});
    std::vector<PairEncounter> enc;
    enc.reserve(static_cast<std::size_t>(m) * nc);
    for (std::int64_t p = 0; p < m; ++p)
      for (const auto& c : classes) enc.emplace_back(c);
    flow.stream(pts, [&](std::int64_t k, const PhaseState& s) {
      const double t = static_cast<double>(k) * flow.dt();
#pragma omp parallel for num_threads(detail::resolve_threads(threads)) schedule(static)
      for (std::int64_t p = 0; p < m; ++p) {
        const double d = (s.q.row(p) - s.q.row(p + m)).norm();
        const double v = (s.p.row(p) - s.p.row(p + m)).norm();
        for (std::size_t c = 0; c < nc; ++c) enc[static_cast<std::size_t>(p) * nc + c].observe(t, d, v);
      }
    });
    for (std::int64_t p = 0; p < m; ++p)
      for (std::size_t c = 0; c < nc; ++c) hits[c] += enc[static_cast<std::size_t>(p) * nc + c].result().member;
  }

  std::vector<ClassProbability> out;
  for (std::size_t c = 0; c < nc; ++c)
    out.push_back(ClassProbability{classes[c], wilson(hits[c], pairs), classes[c].probability_bound()});
  return out;
}

ClassProbability class_probability(const CollisionClass& cls, const DensityModel& density, std::int64_t pairs,
                                   std::uint64_t seed, const TracerFlow& flow) {
  return class_probabilities({cls}, density, pairs, seed, flow).front();
}

ScalingFit scaling_fit(const std::vector<std::pair<double, double>>& samples) {
  ScalingFit fit;
  for (const auto& [x, y] : samples) {
    if (!(x > 0.0) || !(y > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
      fit.warnings.push_back("excluded nonpositive sample (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      continue;
    }
    fit.x.push_back(x);
    fit.y.push_back(y);
  }
  if (std::set<double>(fit.x.begin(), fit.x.end()).size() < 3)
    throw DomainError("scaling_fit: need at least 3 distinct abscissae with positive statistic");
  const auto n = static_cast<double>(fit.x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    sx += std::log(fit.x[i]);
    sy += std::log(fit.y[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < fit.x.size(); ++i) {
    const double dx = std::log(fit.x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(fit.y[i]) - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < fit.x.size(); ++i)
    fit.residuals.push_back(std::log(fit.y[i]) - (fit.intercept + fit.slope * std::log(fit.x[i])));
  return fit;
}

namespace {

// Sample of the LLN functional h(Y, X_j) for a batch of X.
// Points per flow run in the LLN sweep; bounds the per-point encounter state.
constexpr std::int64_t kLlnBatchPoints = 1 << 18;

class LlnEvaluator {
 public:
  LlnEvaluator(const LlnSpec& spec, std::int64_t n, const PhasePoint& y) : spec_(spec), n_(n), y_(y) {
    if (spec.functional != LlnFunctional::CutoffForce) return;
    const auto x = static_cast<double>(n);
    cut_ = power_of(x, -spec.beta);
    scale_ = power_of(x, spec.alpha());
    sched_ = schedule(n, spec.sigma);
    engine_.backend = MeanFieldBackend::RadialShell;
    engine_.cut_radius = cut_;
    engine_.sign = spec.sign;
    engine_.reference_count = spec.reference_multiplier * n;
    engine_.reference_seed = derive_seed(spec.seed, "lln-reference", static_cast<std::uint64_t>(n));
    engine_.threads = spec.threads;
    integ_ = IntegratorSpec{spec.horizon / static_cast<double>(spec.steps), spec.steps};
    reference_ = evolve_reference(engine_, spec.density, integ_, spec.reference_stride);
  }

  std::vector<Vec3> operator()(const PhaseState& xs) const {
    const Eigen::Index m = xs.size();
    std::vector<Vec3> h(static_cast<std::size_t>(m), Vec3::Zero());
    if (spec_.functional == LlnFunctional::Zero) return h;
    if (spec_.functional == LlnFunctional::HalfSpace) {
      for (Eigen::Index j = 0; j < m; ++j) h[static_cast<std::size_t>(j)][0] = xs.q(j, 0) > 0.0 ? 1.0 : 0.0;
      return h;
    }
    PhaseState all(m + 1);
    all.set_point(0, y_);
    all.q.bottomRows(m) = xs.q;
    all.p.bottomRows(m) = xs.p;
    const CutoffKernel<double> kernel(cut_, spec_.sign);
    const CollisionClass bad = sched_.good_class(integ_.horizon());
    std::vector<PairEncounter> enc(static_cast<std::size_t>(m), PairEncounter(bad));
    const TracerFlow flow = TracerFlow::mean_field(engine_, reference_, integ_);
    flow.stream(all, [&](std::int64_t k, const PhaseState& s) {
      const double w = (k == 0 || k == integ_.steps ? 0.5 : 1.0) * integ_.dt;
      const double t = static_cast<double>(k) * integ_.dt;
      const Vec3 qy = s.q.row(0).transpose();
      const Vec3 py = s.p.row(0).transpose();
      for (Eigen::Index j = 0; j < m; ++j) {
        const Vec3 dq = qy - s.q.row(j + 1).transpose();
        const Vec3 dp = py - s.p.row(j + 1).transpose();
        h[static_cast<std::size_t>(j)] += w * kernel.force(dq);
        enc[static_cast<std::size_t>(j)].observe(t, dq.norm(), dp.norm());
      }
    });
    for (Eigen::Index j = 0; j < m; ++j) {
      auto& v = h[static_cast<std::size_t>(j)];
      v = enc[static_cast<std::size_t>(j)].result().member ? Vec3::Zero() : Vec3(scale_ * v);
    }
    return h;
  }

 private:
  const LlnSpec& spec_;
  std::int64_t n_;
  PhasePoint y_;
  double cut_ = 0.0, scale_ = 1.0;
  ThresholdSchedule sched_;
  MeanFieldEngine engine_;
  IntegratorSpec integ_;
  TrajectoryRecord reference_;
};

}  // namespace

std::vector<LlnResult> lln_experiment(const LlnSpec& spec, const std::vector<std::int64_t>& n_list, int seeds) {
  if (seeds < 1) throw ConfigError("lln_experiment: need at least one seed");
  std::vector<std::uint64_t> idx(static_cast<std::size_t>(seeds));
  for (int s = 0; s < seeds; ++s) idx[static_cast<std::size_t>(s)] = static_cast<std::uint64_t>(s);
  return lln_experiment(spec, n_list, idx);
}

std::vector<LlnResult> lln_experiment(const LlnSpec& spec, const std::vector<std::int64_t>& n_list,
                                      const std::vector<std::uint64_t>& seed_indices) {
  if (seed_indices.empty()) throw ConfigError("lln_experiment: need at least one seed");
  if (spec.steps < 1 || spec.steps % spec.reference_stride != 0)
    throw ConfigError("lln_experiment: reference_stride must divide steps");
  const PhasePoint y = sample(SampleSpec{spec.density, 1, derive_seed(spec.seed, "lln-y")}).point(0);
  std::vector<LlnResult> out;
  for (std::int64_t n : n_list) {
    if (n < 2) throw ConfigError("lln_experiment: N must be >= 2");
    const LlnEvaluator eval(spec, n, y);
    LlnResult r;
    r.n = n;
    r.h_bound = power_of(static_cast<double>(n), 1.0 - spec.sigma);
    auto track_sup = [&r](const std::vector<Vec3>& h) {
      for (const auto& v : h) r.h_sup = std::max(r.h_sup, v.cwiseAbs().maxCoeff());
    };

    // Integral reference from integral_multiplier independent samples of N points, then
    // one sample per seed. Points flow independently, so groups are batched into large
    // flow runs (one field setup per run) without changing any per-point value.
    const std::string tag = "lln-integral-" + std::to_string(n);
    const std::string stag = "lln-sample-" + std::to_string(n);
    std::vector<std::uint64_t> group_seed;
    for (std::int64_t b = 0; b < spec.integral_multiplier; ++b)
      group_seed.push_back(derive_seed(spec.seed, tag, static_cast<std::uint64_t>(b)));
    for (std::uint64_t s : seed_indices) group_seed.push_back(derive_seed(spec.seed, stag, s));
    std::vector<Vec3> group_sum(group_seed.size(), Vec3::Zero());
    const std::size_t per_run = std::max<std::size_t>(1, static_cast<std::size_t>(kLlnBatchPoints / n));
    for (std::size_t g0 = 0; g0 < group_seed.size(); g0 += per_run) {
      const std::size_t g1 = std::min(group_seed.size(), g0 + per_run);
      PhaseState batch(static_cast<Eigen::Index>((g1 - g0) * static_cast<std::size_t>(n)));
      for (std::size_t g = g0; g < g1; ++g) {
        const PhaseState x = sample(SampleSpec{spec.density, n, group_seed[g]});
        const auto row = static_cast<Eigen::Index>((g - g0) * static_cast<std::size_t>(n));
        batch.q.middleRows(row, n) = x.q;
        batch.p.middleRows(row, n) = x.p;
      }
      const auto h = eval(batch);
      track_sup(h);
      for (std::size_t i = 0; i < h.size(); ++i) group_sum[g0 + i / static_cast<std::size_t>(n)] += h[i];
    }

    Vec3 acc = Vec3::Zero();
    const auto n_integral = static_cast<std::size_t>(spec.integral_multiplier);
    for (std::size_t g = 0; g < n_integral; ++g) acc += group_sum[g];
    r.integral = acc / static_cast<double>(spec.integral_multiplier * n);

    for (std::size_t g = n_integral; g < group_seed.size(); ++g) {
      const Vec3 mean = group_sum[g] / static_cast<double>(n);
      const double f = (mean - r.integral).cwiseAbs().maxCoeff();
      r.fluctuations.push_back(f);
      r.at_least_one += f >= 1.0;
    }
    r.median = median(r.fluctuations);
    out.push_back(std::move(r));
  }
  return out;
}

CardinalityStats cardinality_stats(const std::vector<TaxonomyReport>& reports, const ThresholdSchedule& sched) {
  if (reports.size() < 20) throw ConfigError("cardinality_stats: need at least 20 seeds");
  CardinalityStats c;
  c.n = sched.n;
  c.seeds = static_cast<std::int64_t>(reports.size());
  c.threshold_bad = sched.bad_cardinality_threshold();
  c.threshold_superbad = sched.superbad_cardinality_threshold();
  const auto x = static_cast<double>(sched.n);
  c.predicted_bad = x * x * sched.r_b * sched.r_b * std::pow(sched.v_b, 4);
  c.predicted_superbad = x * x * sched.r_s * sched.r_s * std::pow(sched.v_s, 4);
  for (const auto& r : reports) {
    c.mean_bad += static_cast<double>(r.bad);
    c.mean_superbad += static_cast<double>(r.superbad);
    c.exceed_bad += static_cast<double>(r.bad) >= c.threshold_bad;
    c.exceed_superbad += static_cast<double>(r.superbad) >= c.threshold_superbad;
  }
  const auto s = static_cast<double>(reports.size());
  c.mean_bad /= s;
  c.mean_superbad /= s;
  c.exceed_bad /= s;
  c.exceed_superbad /= s;
  return c;
}

CutoffConvergence cutoff_convergence(const CutoffSpec& spec) {
  if (spec.cuts.empty()) throw ConfigError("cutoff_convergence: no cut radii");
  CutoffConvergence out;
  out.cuts = spec.cuts;
  std::sort(out.cuts.begin(), out.cuts.end());
  PhaseState frame;
  if (spec.frozen) frame = sample(SampleSpec{spec.density, spec.engine.reference_count, spec.engine.reference_seed});
  for (double c : out.cuts) {
    MeanFieldEngine e = spec.engine;
    e.cut_radius = c;
    const TrajectoryRecord ref = spec.frozen ? frozen_reference(frame, spec.integ.horizon())
                                             : evolve_reference(e, spec.density, spec.integ, spec.reference_stride);
    out.tracers.push_back(evolve_tracers(e, ref, spec.tracers, spec.integ));
  }
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < out.cuts.size(); ++i) {
    out.deviations.push_back(flow_distance(out.tracers[i], out.tracers.front()));
    if (i > 0) pts.emplace_back(out.cuts[i], out.deviations[i]);
  }
  try {
    out.fit = scaling_fit(pts);
  } catch (const DomainError& e) {
    out.fit.warnings.push_back(e.what());
  }
  return out;
}

}  // namespace vpcl
