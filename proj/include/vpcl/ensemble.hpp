#pragma once

#include "vpcl/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vpcl {

enum class DensityKind {
  GaussianIsotropic,    // N(0, s_q^2 I) x N(0, s_p^2 I)
  UniformBallGaussian,  // uniform in ball of radius s_q x N(0, s_p^2 I)
  CompactSmooth,        // (1-|q|^2/s_q^2)^m x (1-|p|^2/s_p^2)^m
  PowerTail,            // N(0, s_q^2 I) x (1+|p|/s_p)^(-e); validation fixture
};

std::string to_string(DensityKind kind);
DensityKind density_kind_from_string(const std::string& name);

struct DensityModel {
  DensityKind kind = DensityKind::GaussianIsotropic;
  double position_scale = 1.0;
  double velocity_scale = 1.0;
  int bump_order = 3;
  double tail_exponent = 6.0;
  // Claimed Horst envelope k0 <= C / (1+|p|)^(3+delta), also used for |grad k0|.
  // envelope_c = 0 leaves C free: only boundedness of the weighted profile is checked.
  double envelope_c = 0.0;
  double envelope_delta = 1.0;

  static DensityModel gaussian(double sq = 1.0, double sp = 1.0);
  static DensityModel uniform_ball(double radius = 1.0, double sp = 1.0);
  static DensityModel compact(double sq = 1.0, double sp = 1.0, int order = 3);
  static DensityModel power_tail(double exponent, double sq = 1.0, double sp = 1.0);

  bool normalizable() const;
  // Throws ConfigError when parameters cannot define a probability density.
  void validate() const;

  double position_density(double r) const;
  double velocity_density(double v) const;
  // |d/dr| of the radial profiles (classical derivative, a.e.).
  double position_density_slope(double r) const;
  double velocity_density_slope(double v) const;
  double density(const Vec3& q, const Vec3& p) const { return position_density(q.norm()) * velocity_density(p.norm()); }

  // E|p|^2 when finite.
  std::optional<double> velocity_second_moment() const;
  // Radius of the position support (infinity when unbounded).
  double position_support() const;
  // Upper bound used for integrator step selection: a speed exceeded with negligible probability.
  double speed_scale() const;
};

struct SampleSpec {
  DensityModel density;
  std::int64_t count = 0;
  std::uint64_t seed = 0;
};

PhaseState sample(const SampleSpec& spec);

struct HorstCondition {
  bool passed = false;
  double sup_weighted = 0.0;  // max over grid of value * (1+|p|)^(3+delta): smallest admissible C
  double worst_speed = 0.0;
  bool tail_bounded = false;  // weighted profile does not grow over the last grid decade
};

struct HorstReport {
  DensityKind kind = DensityKind::GaussianIsotropic;
  double claimed_c = 0.0;
  double claimed_delta = 0.0;
  bool normalizable = true;
  HorstCondition envelope;  // (i)
  HorstCondition gradient;  // (ii)
  bool second_moment_passed = false;  // (iii)
  std::optional<double> second_moment_exact;
  double second_moment_mc = 0.0;
  double second_moment_mc_stderr = 0.0;
  std::int64_t mc_samples = 0;
  std::vector<std::string> notes;

  bool passed() const { return envelope.passed && gradient.passed && second_moment_passed; }
};

HorstReport validate_horst(const DensityModel& density, std::int64_t mc_samples = 100000, std::uint64_t mc_seed = 7);

}  // namespace vpcl
