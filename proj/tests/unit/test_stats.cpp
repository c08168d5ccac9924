#include <doctest.h>

#include "vpcl/random.hpp"
#include "vpcl/stats.hpp"

#include <cmath>
#include <numeric>

using namespace vpcl;

namespace {

TrajectoryRecord micro_record(int n, std::uint64_t seed) {
  const ParticleSystem sys(ModelParams::with_beta(n, 0.3), sample(SampleSpec{DensityModel::gaussian(), n, seed}));
  return evolve_micro(sys, IntegratorSpec{1.0 / 64, 64}, 4);
}

TracerFlow free_flow(double horizon, double dt) {
  return TracerFlow::free_streaming(IntegratorSpec{dt, static_cast<std::int64_t>(std::llround(horizon / dt))});
}

}  // namespace

TEST_CASE("deviation of identical records") {
  const auto rec = micro_record(64, 1);
  const auto d = deviation(rec, rec);
  CHECK(d.sup == 0.0);
  CHECK_FALSE(d.exceeds);
  CHECK(d.per_time.size() == rec.frame_count());
}

TEST_CASE("deviation of a synthetic offset") {
  const int n = 64;
  const auto rec = micro_record(n, 2);
  TrajectoryRecord shifted = rec;
  const double thr = std::pow(64.0, -1.0 / 6.0);
  shifted.frames[3].q(7, 1) += 2 * thr;
  TaxonomyReport report;
  report.labels.assign(n, ParticleLabel::Good);
  report.labels[7] = ParticleLabel::Bad;
  const auto d = deviation(rec, shifted, &report);
  CHECK(d.threshold == 0.5);
  CHECK(d.sup == doctest::Approx(2 * thr).epsilon(1e-12));
  CHECK(d.exceeds);
  CHECK(d.sup == *std::max_element(d.per_time.begin(), d.per_time.end()));
  CHECK(d.sup_bad == d.sup);
  CHECK(d.sup_good == 0.0);
  CHECK(d.bad[2] == 0.0);
  CHECK(d.bad.back() == d.sup);
  for (double x : {d.sup_good, d.sup_bad, d.sup_superbad}) CHECK(x <= d.sup);

  TrajectoryRecord other = rec;
  other.frames[0].p(0, 0) += 1e-9;
  CHECK_THROWS_AS(deviation(rec, other), ConfigError);
}

TEST_CASE("a lone particle tracks its tracer up to the field noise") {
  // Micro force on a single particle vanishes; the tracer sits at the centre of a
  // mirror-symmetric frozen ensemble where the field is zero up to rounding.
  const std::int64_t m = 5000;
  const PhaseState half = sample(SampleSpec{DensityModel::gaussian(), m, 3});
  PhaseState frame(2 * m);
  frame.q << half.q, -half.q;
  frame.p << half.p, -half.p;
  PhaseState one(1);
  one.p.row(0) << 1e-3, 0, 0;
  const IntegratorSpec integ{1.0 / 128, 128};
  const auto micro = evolve_micro(ParticleSystem(ModelParams::with_cut(1, 0.1), one), integ);
  MeanFieldEngine e;
  e.backend = MeanFieldBackend::ReferenceEnsemble;
  e.cut_radius = 0.25;
  e.reference_count = 2 * m;
  const auto tr = evolve_tracers(e, frozen_reference(frame, 1.0), one, integ);
  const double envelope = 0.5 * 5.0 / std::sqrt(2.0 * m);
  CHECK(deviation(micro, tr).sup <= envelope);
}

TEST_CASE("Wilson interval") {
  const auto z = wilson(0, 10);
  const double z2 = 1.959963984540054 * 1.959963984540054;
  CHECK(z.lower == 0.0);
  CHECK(z.upper == doctest::Approx(z2 / (10 + z2)));
  const auto h = wilson(5, 10);
  CHECK(h.lower == doctest::Approx(0.2366).epsilon(1e-3));
  CHECK(h.upper == doctest::Approx(0.7634).epsilon(1e-3));
  const double w1 = wilson(300, 1000).upper - wilson(300, 1000).lower;
  const double w4 = wilson(1200, 4000).upper - wilson(1200, 4000).lower;
  CHECK(w4 / w1 == doctest::Approx(0.5).epsilon(0.01));
  CHECK_THROWS_AS(wilson(0, 0), ConfigError);
}

TEST_CASE("class probability edge cases") {
  const auto density = DensityModel::gaussian();
  const TracerFlow flow = free_flow(1.0, 1.0 / 32);
  const auto all = class_probability(CollisionClass{0, kInf, 0, kInf, 0, 1, ""}, density, 500, 4, flow);
  CHECK(all.p.estimate == 1.0);
  CHECK(std::isinf(all.bound));

  // Window of length zero at t = 0 below the closest sampled pair.
  const PhaseState pts = sample(SampleSpec{density, 1000, derive_seed(5, "class-pairs", 0)});
  double closest = kInf;
  for (int p = 0; p < 500; ++p) closest = std::min(closest, (pts.q.row(p) - pts.q.row(p + 500)).norm());
  const auto none = class_probability(CollisionClass{0, 0.5 * closest, 0, kInf, 0, 0, ""}, density, 500, 5, flow);
  CHECK(none.p.successes == 0);
  CHECK(none.p.estimate == 0.0);

  CHECK_THROWS_AS(class_probability(CollisionClass{}, density, 0, 1, flow), ConfigError);
}

TEST_CASE("class probabilities lie in [0, 1] and batching does not change them") {
  const auto cover = dyadic_cover(256, 1.0 / 3, 1.0 / 12, 1.0);
  const TracerFlow flow = free_flow(1.0, 1.0 / 32);
  const auto a = class_probabilities(cover, DensityModel::gaussian(), 3000, 6, flow, 3000);
  const auto b = class_probabilities(cover, DensityModel::gaussian(), 3000, 6, flow, 3000, 1);
  double total = 0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    CHECK(a[c].p.estimate >= 0.0);
    CHECK(a[c].p.estimate <= 1.0);
    CHECK(a[c].p.lower <= a[c].p.estimate);
    CHECK(a[c].p.estimate <= a[c].p.upper);
    CHECK(a[c].p.successes == b[c].p.successes);
    total += a[c].p.estimate;
  }
  // The cover tiles phase space, so the class probabilities add up to at least one.
  CHECK(total >= 1.0);
}

TEST_CASE("scaling fit") {
  std::vector<std::pair<double, double>> s;
  for (double n : {256.0, 1024.0, 4096.0}) s.emplace_back(n, std::pow(n, -1.0 / 6.0));
  const auto f = scaling_fit(s);
  CHECK(std::abs(f.slope + 1.0 / 6.0) <= 1e-12);
  for (double r : f.residuals) CHECK(std::abs(r) <= 1e-12);

  const auto flat = scaling_fit({{2, 3}, {4, 3}, {8, 3}});
  CHECK(flat.slope == doctest::Approx(0.0));

  const auto g = scaling_fit({{16, 1.0}, {64, 0.5}, {256, 0.25}});
  CHECK(g.slope == doctest::Approx(-0.5));
  CHECK(g.intercept == doctest::Approx(std::log(4.0)));

  const auto w = scaling_fit({{2, 1}, {4, 0.5}, {8, 0.25}, {16, 0}});
  CHECK(w.warnings.size() == 1);
  CHECK(w.x.size() == 3);
  CHECK_THROWS_AS(scaling_fit({{2, 1}, {2, 2}, {4, 1}}), DomainError);
}

TEST_CASE("LLN fixtures bypassing the force") {
  LlnSpec spec;
  spec.density = DensityModel::gaussian();
  spec.seed = 7;
  SUBCASE("zero functional") {
    spec.functional = LlnFunctional::Zero;
    spec.integral_multiplier = 2;
    const auto r = lln_experiment(spec, {256}, 5);
    for (double f : r[0].fluctuations) CHECK(f == 0.0);
  }
  SUBCASE("half-space indicator has binomial fluctuations") {
    spec.functional = LlnFunctional::HalfSpace;
    const auto r = lln_experiment(spec, {4096}, 200);
    const auto& f = r[0].fluctuations;
    const double rms = std::sqrt(std::inner_product(f.begin(), f.end(), f.begin(), 0.0) / static_cast<double>(f.size()));
    CHECK(rms == doctest::Approx(1.0 / (2 * std::sqrt(4096.0))).epsilon(0.2));
    CHECK(r[0].integral[0] == doctest::Approx(0.5).epsilon(0.01));
    CHECK(r[0].at_least_one == 0);
  }
}

TEST_CASE("LLN with the cut-off force functional") {
  LlnSpec spec;
  spec.density = DensityModel::gaussian();
  spec.steps = 64;
  spec.reference_stride = 16;
  spec.integral_multiplier = 10;
  spec.seed = 8;
  const auto r = lln_experiment(spec, {128}, 4);
  REQUIRE(r.size() == 1);
  CHECK(r[0].fluctuations.size() == 4);
  CHECK(r[0].h_sup > 0.0);
  for (double f : r[0].fluctuations) CHECK(std::isfinite(f));
  const auto again = lln_experiment(spec, {128}, 4);
  CHECK(again[0].fluctuations == r[0].fluctuations);
}

TEST_CASE("cardinality statistics on degenerate schedules") {
  const TracerFlow flow = free_flow(1.0, 1.0 / 16);
  ThresholdSchedule huge = schedule(64, 0.01);
  huge.r_b = huge.v_b = kInf;
  huge.r_s = huge.v_s = 0.0;
  ThresholdSchedule empty = schedule(64, 0.01);
  empty.r_b = empty.v_b = empty.r_s = empty.v_s = 0.0;
  std::vector<TaxonomyReport> all_bad, none;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto rec = flow.run(sample(SampleSpec{DensityModel::gaussian(), 64, 100 + s}));
    all_bad.push_back(classify(rec, huge));
    none.push_back(classify(rec, empty));
  }
  const auto a = cardinality_stats(all_bad, huge);
  CHECK(a.mean_bad == 64.0);
  CHECK(a.exceed_bad == 1.0);
  CHECK(a.exceed_superbad == 0.0);
  const auto b = cardinality_stats(none, empty);
  CHECK(b.mean_bad == 0.0);
  CHECK(b.exceed_bad == 0.0);
  CHECK(b.threshold_bad == doctest::Approx(std::pow(64.0, 0.75 * 1.01)));
  CHECK_THROWS_AS(cardinality_stats(std::vector<TaxonomyReport>(19), huge), ConfigError);
}

TEST_CASE("cut-off convergence on the frozen uniform ball") {
  CutoffSpec spec;
  spec.density = DensityModel::uniform_ball(1.0, 1.0);
  spec.engine.backend = MeanFieldBackend::RadialShell;
  spec.engine.reference_count = 20000;
  spec.engine.reference_seed = 9;
  spec.integ = IntegratorSpec{1.0 / 128, 128};
  spec.frozen = true;

  SUBCASE("identical cuts") {
    spec.cuts = {0.1, 0.1};
    spec.tracers = sample(SampleSpec{DensityModel::gaussian(), 8, 10});
    const auto r = cutoff_convergence(spec);
    CHECK(r.deviations[1] == 0.0);
  }
  SUBCASE("tracers outside the smeared ball see the exact shell force") {
    spec.cuts = {0.0, 0.1, 0.2};
    PhaseState t(6);
    for (int i = 0; i < 6; ++i) {
      Vec3 dir = Vec3::Zero();
      dir[i % 3] = i < 3 ? 1 : -1;
      t.q.row(i) = 2.0 * dir.transpose();
      t.p.row(i) = 0.5 * dir.transpose();
    }
    spec.tracers = t;
    const auto r = cutoff_convergence(spec);
    for (double d : r.deviations) CHECK(d == 0.0);
  }
  SUBCASE("deviation shrinks with the larger cut") {
    spec.cuts = {0.01, 0.02, 0.04, 0.08, 0.16};
    spec.tracers = sample(SampleSpec{DensityModel::gaussian(0.7, 1.0), 64, 11});
    const auto r = cutoff_convergence(spec);
    for (std::size_t i = 2; i < r.deviations.size(); ++i) CHECK(r.deviations[i] >= r.deviations[i - 1]);
    CHECK(r.deviations.back() > 0.0);
  }
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK(median({}) == 0);
}
