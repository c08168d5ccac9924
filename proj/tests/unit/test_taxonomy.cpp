#include <doctest.h>

#include "vpcl/taxonomy.hpp"

#include <json.hpp>

#include <cmath>
#include <random>

using namespace vpcl;

namespace {

PhasePoint point(Vec3 q, Vec3 p) { return PhasePoint{q, p}; }

// Brute-force scan of straight-line motion on a grid ten times finer than dt.
struct LineScan {
  double min_distance = kInf;
  double time = 0;
  double speed = 0;
};

LineScan scan_lines(const PhasePoint& z, const PhasePoint& y, double t1, double t2, double dt) {
  LineScan s;
  const double h = dt / 10;
  const auto steps = static_cast<long>(std::llround((t2 - t1) / h));
  for (long k = 0; k <= steps; ++k) {
    const double t = t1 + static_cast<double>(k) * h;
    const double d = ((z.q + t * z.p) - (y.q + t * y.p)).norm();
    if (d < s.min_distance) s = {d, t, (z.p - y.p).norm()};
  }
  return s;
}

TracerFlow free_flow(double horizon, double dt) {
  return TracerFlow::free_streaming(IntegratorSpec{dt, static_cast<std::int64_t>(std::llround(horizon / dt))});
}

}  // namespace

TEST_CASE("threshold schedule") {
  const auto s = schedule(4096, 0.01);
  CHECK(s.v_b == 0.25);
  CHECK(s.r_b == doctest::Approx(std::pow(4096.0, -7.0 / 24.0 - 0.01)).epsilon(1e-14));
  CHECK(s.r_b == doctest::Approx(0.0813).epsilon(1e-3));
  CHECK(s.delta_g < s.delta_b);
  CHECK(s.delta_b < s.delta_s);
  const auto t = schedule(8192, 0.01);
  for (auto [a, b] : {std::pair{s.r_b, t.r_b}, {s.v_b, t.v_b}, {s.r_s, t.r_s}, {s.v_s, t.v_s}, {s.delta_g, t.delta_g},
                      {s.delta_b, t.delta_b}, {s.delta_s, t.delta_s}})
    CHECK(b < a);
  CHECK_NOTHROW(schedule(4096, 0.05));
  CHECK_THROWS_AS(schedule(4096, 0.07), ConfigError);
  CHECK_THROWS_AS(schedule(4096, 0.0), ConfigError);
  CHECK_THROWS_AS(schedule(1, 0.01), ConfigError);
}

TEST_CASE("class membership on the force-free fixture") {
  const PhasePoint y = point(Vec3::Zero(), Vec3::Zero());
  const PhasePoint z = point(Vec3(2, 0, 0), Vec3(-1, 0, 0));
  const TracerFlow flow = free_flow(4.0, 1.0 / 64);

  const LineScan oracle = scan_lines(z, y, 0, 4, 1.0 / 64);
  CHECK(oracle.min_distance == doctest::Approx(0.0));
  CHECK(oracle.time == doctest::Approx(2.0));

  const auto hit = class_membership(z, y, CollisionClass{0, 0.1, 0.5, 2, 0, 4, ""}, flow);
  CHECK(hit.member);
  CHECK(hit.witness_time == 2.0);
  CHECK(hit.min_distance == 0.0);
  CHECK(hit.speed_at_min == 1.0);

  CHECK_FALSE(class_membership(z, y, CollisionClass{0, 0.1, 0, 0.5, 0, 4, ""}, flow).member);

  const auto end = class_membership(z, y, CollisionClass{0.9, 1.1, 0.5, 2, 0, 1, ""}, flow);
  CHECK(scan_lines(z, y, 0, 1, 1.0 / 64).min_distance == doctest::Approx(1.0));
  CHECK(end.member);
  CHECK(end.witness_time == 1.0);

  CHECK_THROWS_AS(class_membership(y, y, CollisionClass{}, flow), DomainError);
  CHECK_THROWS_AS(class_membership(z, y, CollisionClass{0, 1, 0, 1, 0, 5, ""}, flow), ConfigError);
}

TEST_CASE("tied minima use the any-witness rule") {
  const CollisionClass cls{0, 1, 0, 0.5, 0, 10, ""};
  PairEncounter a(cls);
  a.observe(0, 0.5, 1.0);
  a.observe(1, 0.5, 0.2);
  a.observe(2, 0.7, 0.1);
  const auto r = a.result();
  CHECK(r.member);
  CHECK(r.witness_time == 1.0);
  CHECK(r.tie_sensitive);

  PairEncounter b(cls);
  b.observe(0, 0.5, 1.0);
  b.observe(1, 0.5 * (1 - 1e-9), 1.0);
  b.observe(2, 0.5, 0.2);
  CHECK_FALSE(b.result().member);

  PairEncounter outside(CollisionClass{0, 1, 0, 1, 2, 3, ""});
  outside.observe(0, 0.1, 0.1);
  outside.observe(4, 0.1, 0.1);
  CHECK_FALSE(outside.result().observed);
  CHECK_FALSE(outside.result().member);
}

TEST_CASE("good set test") {
  const auto sched = schedule(4096, 0.01);
  const TracerFlow flow = free_flow(12.0, 1.0 / 16);
  const PhasePoint y = point(Vec3::Zero(), Vec3::Zero());
  const PhasePoint far = point(Vec3(50, 0, 0), Vec3(1, 0, 0));
  CHECK(good_set_test(y, far, sched, flow));
  // Slow head-on pass: closest approach 0.1 < 6 r_b at t = 10 with relative speed 0.1 < v_b.
  const PhasePoint slow = point(Vec3(1, 0.1, 0), Vec3(-0.1, 0, 0));
  const LineScan oracle = scan_lines(slow, y, 0, 12, 1.0 / 16);
  REQUIRE(oracle.min_distance < 6 * sched.r_b);
  REQUIRE(oracle.speed < sched.v_b);
  CHECK_FALSE(good_set_test(y, slow, sched, flow));
  CHECK(good_set_test(y, slow, sched, flow) == good_set_test(slow, y, sched, flow));
  CHECK(good_set_test(y, far, sched, flow) == good_set_test(far, y, sched, flow));
}

TEST_CASE("classify fixtures") {
  const auto sched = schedule(4096, 0.01);
  const TracerFlow flow = free_flow(16.0, 1.0 / 16);
  SUBCASE("far apart") {
    const PhaseState s = make_state({point(Vec3::Zero(), Vec3(1, 0, 0)), point(Vec3(0, 10, 0), Vec3(-1, 0, 0))});
    const auto r = classify(ParticleSystem(ModelParams::with_beta(2, 0.3), s), sched, flow);
    CHECK(r.good == 2);
    CHECK(r.witnesses.empty());
  }
  SUBCASE("grazing superbad pair") {
    const PhaseState s = make_state({point(Vec3::Zero(), Vec3::Zero()), point(Vec3(0.5, 0.02, 0), Vec3(-0.05, 0, 0))});
    REQUIRE(0.02 < sched.r_s);
    REQUIRE(0.05 < sched.v_s);
    const auto r = classify(ParticleSystem(ModelParams::with_beta(2, 0.3), s), sched, flow);
    CHECK(r.superbad == 2);
    REQUIRE(r.witnesses.size() == 2);
    CHECK(r.witnesses[0].partner == 1);
    CHECK(r.witnesses[0].time == 10.0);
  }
  SUBCASE("bad pair and an isolated particle") {
    const PhaseState s = make_state({point(Vec3::Zero(), Vec3::Zero()), point(Vec3(2, 0.2, 0), Vec3(-0.2, 0, 0)),
                                     point(Vec3(100, 0, 0), Vec3::Zero())});
    REQUIRE(0.2 > sched.r_s);
    REQUIRE(0.2 < 6 * sched.r_b);
    REQUIRE(0.2 < sched.v_b);
    const auto r = classify(ParticleSystem(ModelParams::with_beta(3, 0.3), s), sched, flow);
    CHECK(r.labels == std::vector<ParticleLabel>{ParticleLabel::Bad, ParticleLabel::Bad, ParticleLabel::Good});
    const auto j = nlohmann::json::parse(to_json(r));
    CHECK(j["counts"]["bad"] == 2);
    CHECK(j["labels"][2] == "good");
    CHECK(j["witnesses"].size() == 2);
  }
}

TEST_CASE("pruned classification equals the all-pairs scan") {
  const int n = 300;
  const PhaseState s = sample(SampleSpec{DensityModel::gaussian(1.0, 0.6), n, 21});
  const TracerFlow flow = free_flow(2.0, 1.0 / 128);
  const TrajectoryRecord rec = flow.run(s);
  ThresholdSchedule sched = schedule(n, 0.02);
  sched.r_b *= 1.5;
  sched.v_b *= 1.5;
  sched.r_s *= 4;
  sched.v_s *= 4;
  const auto r = classify(rec, sched);
  CHECK(r.good + r.bad + r.superbad == n);

  std::vector<int> flag(n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (class_membership(rec, j, i, sched.superbad_class(rec.horizon())).member) flag[i] = 2;
      if (flag[i] == 0 && class_membership(rec, j, i, sched.good_class(rec.horizon())).member) flag[i] = 1;
    }
  int mismatches = 0;
  for (int i = 0; i < n; ++i) mismatches += static_cast<int>(r.labels[i]) != flag[i];
  CHECK(mismatches == 0);
  CHECK(r.bad + r.superbad > 0);
}

TEST_CASE("candidate pairs contain every close pair") {
  const int n = 400;
  const PhaseState s = sample(SampleSpec{DensityModel::gaussian(1.0, 2.0), n, 22});
  const TrajectoryRecord rec = free_flow(1.0, 1.0 / 256).run(s);
  const double radius = 0.15;
  const auto pairs = candidate_pairs(rec, radius);
  int missing = 0, close = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double m = kInf;
      for (const auto& f : rec.frames) m = std::min(m, (f.q.row(i) - f.q.row(j)).norm());
      if (m <= radius) {
        ++close;
        if (!std::binary_search(pairs.begin(), pairs.end(), std::pair<Eigen::Index, Eigen::Index>{i, j})) ++missing;
      }
    }
  CHECK(close > 0);
  CHECK(missing == 0);
}

TEST_CASE("class nesting and partition") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const TracerFlow flow = free_flow(1.0, 1.0 / 64);
  const PhaseState s = sample(SampleSpec{DensityModel::gaussian(0.5, 1.0), 2000, 24});
  const TrajectoryRecord rec = flow.run(s);
  int added = 0;
  for (int k = 0; k < 1000; ++k) {
    CollisionClass big{0, 0.5 * u(rng), 0, 2 * u(rng), 0, 1, ""};
    CollisionClass small = big;
    small.r_max *= u(rng);
    small.v_max *= u(rng);
    const auto a = class_membership(rec, 2 * k, 2 * k + 1, big);
    const auto b = class_membership(rec, 2 * k, 2 * k + 1, small);
    if (b.member && !a.member) ++added;
  }
  CHECK(added == 0);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const PhaseState x = sample(SampleSpec{DensityModel::gaussian(0.3, 0.3), 150, 30 + seed});
    const auto r = classify(flow.run(x), schedule(150, 0.03));
    CHECK(r.good + r.bad + r.superbad == 150);
    CHECK(r.members(ParticleLabel::Bad).size() == static_cast<std::size_t>(r.bad));
  }
}

TEST_CASE("dyadic cover") {
  for (int e = 8; e <= 12; ++e) CHECK(dyadic_cover(std::int64_t{1} << e, 1.0 / 3, 1.0 / 12, 1.0).size() == 43);
  CHECK(dyadic_cover(4096, 0.3, 0.1, 1.0).size() == 31);
  const std::int64_t n = 1024;
  const auto cover = dyadic_cover(n, 1.0 / 3, 1.0 / 12, 1.0);
  const TracerFlow flow = free_flow(1.0, 1.0 / 64);
  const PhaseState s = sample(SampleSpec{DensityModel::gaussian(0.2, 0.5), 4000, 25});
  const TrajectoryRecord rec = flow.run(s);
  int uncovered = 0;
  for (int k = 0; k < 2000; ++k) {
    bool any = false;
    for (const auto& c : cover) any = any || class_membership(rec, 2 * k, 2 * k + 1, c).member;
    uncovered += !any;
  }
  CHECK(uncovered == 0);
  for (const auto& c : cover) CHECK_NOTHROW(c.validate(1.0));
}

TEST_CASE("probability bound") {
  const CollisionClass c{0, 0.1, 0, 0.2, 0, 1, ""};
  CHECK(c.probability_bound() == doctest::Approx(0.01 * 0.0016 + 0.001 * 0.008));
  CHECK(std::isinf(CollisionClass{0, 0.1, 1, kInf, 0, 1, ""}.probability_bound()));
}

TEST_CASE("stopping times") {
  const auto sched = schedule(4096, 0.01);
  const int n = 3;
  TrajectoryRecord micro;
  micro.frame_dt = 0.25;
  for (int k = 0; k < 5; ++k) micro.frames.push_back(PhaseState(n));
  TaxonomyReport report;
  report.labels = {ParticleLabel::Good, ParticleLabel::Bad, ParticleLabel::Good};

  SUBCASE("identical") {
    const auto st = stopping_times(micro, micro, report, sched);
    CHECK(st.tau == 1.0);
  }
  SUBCASE("good particle crosses between grid times") {
    TrajectoryRecord tr = micro;
    tr.frames[1].q(2, 0) = 0.5 * sched.delta_g;
    tr.frames[2].q(2, 0) = 0.9 * sched.delta_g;
    tr.frames[3].q(2, 0) = 1.1 * sched.delta_g;
    tr.frames[4].q(2, 0) = 0.5 * sched.delta_g;
    const auto st = stopping_times(micro, tr, report, sched);
    CHECK(st.tau_g == 0.5);
    CHECK(st.tau_b == 1.0);
    CHECK(st.tau == std::min({st.tau_g, st.tau_b, st.tau_s}));
  }
  SUBCASE("all bad below threshold") {
    TaxonomyReport bad;
    bad.labels.assign(n, ParticleLabel::Bad);
    TrajectoryRecord tr = micro;
    for (auto& f : tr.frames) f.p.col(1).setConstant(0.5 * sched.delta_b);
    CHECK(stopping_times(micro, tr, bad, sched).tau == 1.0);
  }
  SUBCASE("grid mismatch") {
    TrajectoryRecord tr = micro;
    tr.frame_dt = 0.5;
    CHECK_THROWS_AS(stopping_times(micro, tr, report, sched), ConfigError);
  }
}
