#include <doctest.h>

#include "vpcl/kernels.hpp"

#include <cmath>
#include <random>

using namespace vpcl;

namespace {

ModelParams example_params() { return ModelParams::with_beta(16, 0.25, +1); }

// Independent scalar evaluation of the cut-off kernel from its definition.
Vec3 oracle_force(const Vec3& q, double n, double beta, int a) {
  const double c = std::pow(n, -beta);
  const double r = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
  if (r <= c) return a * std::pow(n, 3 * beta) * q;
  return a * q / (r * r * r);
}

Vec3 random_vector(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-3.0, 1.0);
  Vec3 v(g(rng), g(rng), g(rng));
  return v.normalized() * scale * std::pow(10.0, u(rng));
}

}  // namespace

TEST_CASE("pair_force reference values") {
  const auto p = example_params();
  CHECK(p.cut_radius == 0.5);
  CHECK(pair_force(Vec3(0.25, 0, 0), p) == Vec3(2, 0, 0));
  CHECK(pair_force(Vec3(1, 0, 0), p) == Vec3(1, 0, 0));
  CHECK(pair_force(Vec3(0, 0, 0), p) == Vec3(0, 0, 0));
  // Both branches give 4 at |q| = c.
  CHECK(pair_force(Vec3(0.5, 0, 0), p)[0] == 4.0);
  CHECK(pair_force(Vec3(std::nextafter(0.5, 1.0), 0, 0), p)[0] == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("pair_force agrees with the scalar oracle") {
  std::mt19937_64 rng(11);
  for (double beta : {0.1, 0.25, 0.4}) {
    for (int a : {+1, -1}) {
      const auto p = ModelParams::with_beta(1000, beta, a);
      for (int k = 0; k < 2000; ++k) {
        const Vec3 q = random_vector(rng, p.cut_radius);
        const Vec3 f = pair_force(q, p);
        const Vec3 o = oracle_force(q, 1000.0, beta, a);
        CHECK((f - o).norm() <= 1e-12 * o.norm());
      }
    }
  }
}

TEST_CASE("fluctuation_bound reference values") {
  const auto p = example_params();
  CHECK(fluctuation_bound(Vec3(1, 0, 0), p) == 16.0);
  CHECK(fluctuation_bound(Vec3(2, 0, 0), p) == 6.75);
  CHECK(fluctuation_bound(Vec3(1.5, 0, 0), p) == 16.0);
  CHECK(54.0 / (1.5 * 1.5 * 1.5) == 16.0);
  CHECK_THROWS_AS(fluctuation_bound(Vec3(1, 0, 0), ModelParams::with_cut(4, 0.0)), DomainError);
}

TEST_CASE("pair_potential reference values") {
  const auto p = example_params();
  CHECK(pair_potential(Vec3(1, 0, 0), p) == 1.0);
  CHECK(pair_potential(Vec3(0.5, 0, 0), p) == 2.0);
  CHECK(pair_potential(Vec3(0, 0, 0), p) == 3.0);
}

TEST_CASE("exact Coulomb kernel rejects the origin") {
  const auto p = ModelParams::with_cut(8, 0.0);
  CHECK_THROWS_AS(pair_force(Vec3(0, 0, 0), p), SingularInputError);
  CHECK_THROWS_AS(pair_potential(Vec3(0, 0, 0), p), SingularInputError);
  CHECK(pair_force(Vec3(2, 0, 0), p) == Vec3(0.25, 0, 0));
  PhaseState s(2);
  ParticleSystem sys(ModelParams::with_cut(2, 0.0), s);
  CHECK_THROWS_AS(total_force(sys), SingularInputError);
}

TEST_CASE("total_force and total_fluctuation on two particles") {
  PhaseState s(2);
  s.q.row(1) << 1, 0, 0;
  ParticleSystem sys(ModelParams::with_beta(2, 0.5), s);  // c = 2^-0.5 < 1
  const Block3 f = total_force(sys);
  CHECK(f.row(0).transpose() == Vec3(-0.5, 0, 0));
  CHECK(f.row(1).transpose() == Vec3(0.5, 0, 0));

  PhaseState far(2);
  far.q.row(1) << 2, 0, 0;
  ParticleSystem fs(ModelParams::with_cut(2, 0.5), far);
  const Eigen::VectorXd g = total_fluctuation(fs);
  CHECK(g[0] == 3.375);
  CHECK(g[1] == 3.375);

  ParticleSystem coincident(ModelParams::with_cut(2, 0.5), PhaseState(2));
  CHECK(total_force(coincident).isZero(0.0));
  const Eigen::VectorXd gc = total_fluctuation(coincident);
  CHECK(gc[0] == 0.5 * 2.0 * 8.0);
}

TEST_CASE("total_fluctuation decreases when a particle moves outward beyond 3c") {
  const auto p = ModelParams::with_cut(2, 0.5);
  double prev = INFINITY;
  for (double x = 1.6; x < 6.0; x += 0.3) {
    PhaseState s(2);
    s.q.row(1) << x, 0, 0;
    const double g = total_fluctuation(ParticleSystem(p, s))[0];
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("oddness is exact") {
  std::mt19937_64 rng(1);
  const auto p = ModelParams::with_beta(4096, 1.0 / 3.0, -1);
  int violations = 0;
  for (int k = 0; k < 1000000; ++k) {
    const Vec3 q = random_vector(rng, p.cut_radius);
    if (pair_force(Vec3(-q), p) != Vec3(-pair_force(q, p))) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("continuity at the cut radius") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto p = ModelParams::with_beta(1024, 0.3);
  for (int k = 0; k < 10000; ++k) {
    const Vec3 u = Vec3(g(rng), g(rng), g(rng)).normalized();
    const Vec3 lo = pair_force(Vec3(p.cut_radius * (1 - 1e-12) * u), p);
    const Vec3 hi = pair_force(Vec3(p.cut_radius * (1 + 1e-12) * u), p);
    CHECK((lo - hi).norm() <= 1e-9 * hi.norm());
  }
}

TEST_CASE("force is minus the potential gradient") {
  std::mt19937_64 rng(3);
  const auto p = ModelParams::with_beta(512, 0.25);
  int checked = 0;
  while (checked < 10000) {
    const Vec3 q = random_vector(rng, p.cut_radius);
    const double r = q.norm();
    // The inner potential is quadratic, so central differences are exact there up to rounding.
    const double h = r < p.cut_radius ? 1e-4 * p.cut_radius : 1e-5 * r;
    if (std::abs(r - p.cut_radius) < 4 * h) continue;
    Vec3 grad;
    for (int d = 0; d < 3; ++d) {
      Vec3 e = Vec3::Zero();
      e[d] = h;
      grad[d] = (pair_potential(Vec3(q + e), p) - pair_potential(Vec3(q - e), p)) / (2 * h);
    }
    const Vec3 f = pair_force(q, p);
    CHECK((f + grad).norm() <= 1e-6 * f.norm());
    ++checked;
  }
}

TEST_CASE("Lipschitz bound for single pairs") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto p = ModelParams::with_beta(1024, 1.0 / 3.0);
  int violations = 0;
  for (int k = 0; k < 100000; ++k) {
    const Vec3 b = random_vector(rng, 5 * p.cut_radius);
    const Vec3 c = random_vector(rng, 5 * p.cut_radius);
    const Vec3 a = random_vector(rng, 1.0).normalized() * u(rng) * std::min(b.norm(), c.norm());
    const double lhs = (pair_force(b, p) - pair_force(c, p)).norm();
    const double rhs = fluctuation_bound(a, p) * (b - c).norm();
    if (lhs > rhs * (1 + 1e-12)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("Lipschitz bound for configurations with C = 54") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 64;
    const auto p = ModelParams::with_beta(n, 0.4);
    PhaseState x(n), y(n);
    const double spread = 0.2 + 2 * u(rng);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) y.q(i, d) = spread * g(rng);
    const double radius = 2 * p.cut_radius * u(rng);
    for (int i = 0; i < n; ++i) {
      const Vec3 dir = Vec3(g(rng), g(rng), g(rng)).normalized();
      x.q.row(i) = y.q.row(i) + radius * u(rng) * dir.transpose();
    }
    const double dx = (x.q - y.q).rowwise().norm().maxCoeff();
    const Block3 fx = total_force(ParticleSystem(p, x));
    const Block3 fy = total_force(ParticleSystem(p, y));
    const double lhs = (fx - fy).rowwise().norm().maxCoeff();
    const double rhs = 54.0 * total_fluctuation(ParticleSystem(p, y)).maxCoeff() * dx;
    CHECK(lhs <= rhs);
  }
}

TEST_CASE("Newton's third law") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int n : {3, 17, 256}) {
    const auto p = ModelParams::with_beta(n, 1.0 / 3.0, -1);
    PhaseState s(n);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < 3; ++d) s.q(i, d) = g(rng);
    const Block3 f = total_force(ParticleSystem(p, s));
    const double max_f = f.rowwise().norm().maxCoeff();
    CHECK(f.colwise().sum().norm() <= n * 1e-13 * max_f);
  }
}

TEST_CASE("total_force is bit-identical across thread counts") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 777;
  PhaseState s(n);
  for (int i = 0; i < n; ++i)
    for (int d = 0; d < 3; ++d) s.q(i, d) = g(rng);
  const ParticleSystem sys(ModelParams::with_beta(n, 0.3), s);
  const Block3 f1 = total_force(sys, 1);
  for (int t : {2, 3, 4, 8}) CHECK((total_force(sys, t).array() == f1.array()).all());
  const Eigen::VectorXd g1 = total_fluctuation(sys, 1);
  CHECK((total_fluctuation(sys, 5).array() == g1.array()).all());
}

TEST_CASE("ModelParams validation") {
  auto p = ModelParams::with_beta(256, 0.5);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = ModelParams::with_beta(256, 0.4, 1, 0.05);
  p.main_theorem_regime = true;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = ModelParams::with_beta(256, 1.0 / 3.0, 1, 0.05);
  p.main_theorem_regime = true;
  CHECK_NOTHROW(p.validate());
  p.sign = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(ParticleSystem(ModelParams::with_beta(3, 0.2), PhaseState(2)), ConfigError);
}
