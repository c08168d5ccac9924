#include "vpcl/ensemble.hpp"

#include "vpcl/random.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace vpcl {

namespace {

constexpr double kPi = std::numbers::pi;

double gaussian_radial(double r, double s) {
  return std::pow(2.0 * kPi * s * s, -1.5) * std::exp(-0.5 * r * r / (s * s));
}

double bump_norm(double scale, int m) {
  // int_{|x|<R} (1-|x|^2/R^2)^m d^3x = 2 pi R^3 Gamma(3/2) Gamma(m+1) / Gamma(m+5/2)
  const double integral =
      2.0 * kPi * scale * scale * scale * std::exp(std::lgamma(1.5) + std::lgamma(m + 1.0) - std::lgamma(m + 2.5));
  return 1.0 / integral;
}

double bump_radial(double r, double scale, int m) {
  if (r >= scale) return 0.0;
  return bump_norm(scale, m) * std::pow(1.0 - r * r / (scale * scale), m);
}

double bump_slope(double r, double scale, int m) {
  if (r >= scale || m < 1) return 0.0;
  return bump_norm(scale, m) * m * std::pow(1.0 - r * r / (scale * scale), m - 1) * 2.0 * r / (scale * scale);
}

double tail_norm(double scale, double e) {
  if (e <= 3.0) return 1.0;  // not normalizable; unit prefactor for envelope checks only
  return (e - 1.0) * (e - 2.0) * (e - 3.0) / (8.0 * kPi * scale * scale * scale);
}

}  // namespace

std::string to_string(DensityKind kind) {
  switch (kind) {
    case DensityKind::GaussianIsotropic: return "gaussian-isotropic";
    case DensityKind::UniformBallGaussian: return "uniform-ball-gaussian";
    case DensityKind::CompactSmooth: return "compact-smooth";
    case DensityKind::PowerTail: return "power-tail";
  }
  return "unknown";
}

DensityKind density_kind_from_string(const std::string& name) {
  if (name == "gaussian-isotropic") return DensityKind::GaussianIsotropic;
  if (name == "uniform-ball-gaussian") return DensityKind::UniformBallGaussian;
  if (name == "compact-smooth") return DensityKind::CompactSmooth;
  if (name == "power-tail") return DensityKind::PowerTail;
  throw ConfigError("unknown density kind '" + name + "'");
}

DensityModel DensityModel::gaussian(double sq, double sp) {
  DensityModel d;
  d.kind = DensityKind::GaussianIsotropic;
  d.position_scale = sq;
  d.velocity_scale = sp;
  return d;
}

DensityModel DensityModel::uniform_ball(double radius, double sp) {
  DensityModel d;
  d.kind = DensityKind::UniformBallGaussian;
  d.position_scale = radius;
  d.velocity_scale = sp;
  return d;
}

DensityModel DensityModel::compact(double sq, double sp, int order) {
  DensityModel d;
  d.kind = DensityKind::CompactSmooth;
  d.position_scale = sq;
  d.velocity_scale = sp;
  d.bump_order = order;
  return d;
}

DensityModel DensityModel::power_tail(double exponent, double sq, double sp) {
  DensityModel d;
  d.kind = DensityKind::PowerTail;
  d.position_scale = sq;
  d.velocity_scale = sp;
  d.tail_exponent = exponent;
  return d;
}

bool DensityModel::normalizable() const {
  if (!(position_scale > 0.0) || !(velocity_scale > 0.0)) return false;
  if (!std::isfinite(position_scale) || !std::isfinite(velocity_scale)) return false;
  if (kind == DensityKind::CompactSmooth && bump_order < 1) return false;
  if (kind == DensityKind::PowerTail && !(tail_exponent > 3.0)) return false;
  return true;
}

void DensityModel::validate() const {
  if (!(position_scale > 0.0) || !std::isfinite(position_scale))
    throw ConfigError("density: position_scale must be positive and finite");
  if (!(velocity_scale > 0.0) || !std::isfinite(velocity_scale))
    throw ConfigError("density: velocity_scale must be positive and finite");
  if (kind == DensityKind::CompactSmooth && bump_order < 1)
    throw ConfigError("density: bump_order must be >= 1 for a continuously differentiable bump");
  if (kind == DensityKind::PowerTail && !(tail_exponent > 3.0))
    throw ConfigError("density: power-tail exponent must exceed 3 to be normalizable");
  if (!(envelope_c >= 0.0) || !(envelope_delta > 0.0))
    throw ConfigError("density: envelope constants must be positive");
}

double DensityModel::position_density(double r) const {
  switch (kind) {
    case DensityKind::GaussianIsotropic:
    case DensityKind::PowerTail: return gaussian_radial(r, position_scale);
    case DensityKind::UniformBallGaussian:
      return r <= position_scale ? 3.0 / (4.0 * kPi * std::pow(position_scale, 3)) : 0.0;
    case DensityKind::CompactSmooth: return bump_radial(r, position_scale, bump_order);
  }
  return 0.0;
}

double DensityModel::velocity_density(double v) const {
  switch (kind) {
    case DensityKind::GaussianIsotropic:
    case DensityKind::UniformBallGaussian: return gaussian_radial(v, velocity_scale);
    case DensityKind::CompactSmooth: return bump_radial(v, velocity_scale, bump_order);
    case DensityKind::PowerTail:
      return tail_norm(velocity_scale, tail_exponent) * std::pow(1.0 + v / velocity_scale, -tail_exponent);
  }
  return 0.0;
}

double DensityModel::position_density_slope(double r) const {
  switch (kind) {
    case DensityKind::GaussianIsotropic:
    case DensityKind::PowerTail: return r / (position_scale * position_scale) * gaussian_radial(r, position_scale);
    case DensityKind::UniformBallGaussian: return 0.0;
    case DensityKind::CompactSmooth: return bump_slope(r, position_scale, bump_order);
  }
  return 0.0;
}

double DensityModel::velocity_density_slope(double v) const {
  switch (kind) {
    case DensityKind::GaussianIsotropic:
    case DensityKind::UniformBallGaussian: return v / (velocity_scale * velocity_scale) * gaussian_radial(v, velocity_scale);
    case DensityKind::CompactSmooth: return bump_slope(v, velocity_scale, bump_order);
    case DensityKind::PowerTail:
      return tail_norm(velocity_scale, tail_exponent) * tail_exponent / velocity_scale *
             std::pow(1.0 + v / velocity_scale, -tail_exponent - 1.0);
  }
  return 0.0;
}

std::optional<double> DensityModel::velocity_second_moment() const {
  const double s2 = velocity_scale * velocity_scale;
  switch (kind) {
    case DensityKind::GaussianIsotropic:
    case DensityKind::UniformBallGaussian: return 3.0 * s2;
    case DensityKind::CompactSmooth: return 3.0 * s2 / (2.0 * bump_order + 5.0);
    case DensityKind::PowerTail:
      if (tail_exponent > 5.0) return 12.0 * s2 / ((tail_exponent - 4.0) * (tail_exponent - 5.0));
      return std::nullopt;
  }
  return std::nullopt;
}

double DensityModel::position_support() const {
  if (kind == DensityKind::UniformBallGaussian || kind == DensityKind::CompactSmooth) return position_scale;
  return std::numeric_limits<double>::infinity();
}

double DensityModel::speed_scale() const {
  switch (kind) {
    case DensityKind::CompactSmooth: return velocity_scale;
    case DensityKind::PowerTail: return 20.0 * velocity_scale;
    default: return 6.0 * velocity_scale;
  }
}

PhaseState sample(const SampleSpec& spec) {
  if (spec.count < 0) throw ConfigError("sample: negative count");
  spec.density.validate();
  const DensityModel& d = spec.density;
  PhaseState out(spec.count);
  Sampler s(spec.seed);
  for (Eigen::Index i = 0; i < spec.count; ++i) {
    Vec3 q, p;
    switch (d.kind) {
      case DensityKind::GaussianIsotropic:
      case DensityKind::PowerTail: q = d.position_scale * s.normal3(); break;
      case DensityKind::UniformBallGaussian: q = d.position_scale * s.in_unit_ball(); break;
      case DensityKind::CompactSmooth: {
        const double u = s.beta(1.5, d.bump_order + 1.0);
        q = d.position_scale * std::sqrt(u) * s.unit_vector();
        break;
      }
    }
    switch (d.kind) {
      case DensityKind::GaussianIsotropic:
      case DensityKind::UniformBallGaussian: p = d.velocity_scale * s.normal3(); break;
      case DensityKind::CompactSmooth: {
        const double u = s.beta(1.5, d.bump_order + 1.0);
        p = d.velocity_scale * std::sqrt(u) * s.unit_vector();
        break;
      }
      case DensityKind::PowerTail: {
        // u = |p|/(s+|p|) is Beta(3, e-3) distributed.
        const double u = s.beta(3.0, d.tail_exponent - 3.0);
        p = d.velocity_scale * (u / (1.0 - u)) * s.unit_vector();
        break;
      }
    }
    out.q.row(i) = q.transpose();
    out.p.row(i) = p.transpose();
  }
  return out;
}

HorstReport validate_horst(const DensityModel& density, std::int64_t mc_samples, std::uint64_t mc_seed) {
  HorstReport rep;
  rep.kind = density.kind;
  rep.claimed_c = density.envelope_c;
  rep.claimed_delta = density.envelope_delta;
  rep.normalizable = density.normalizable();
  if (!rep.normalizable) rep.notes.push_back("density is not normalizable; envelope checked with unit prefactor");

  // sup over q of the position factor and of its gradient, on a radial grid.
  const double rho_q_max = density.position_density(0.0);
  double slope_q_max = 0.0;
  const double rq_end = std::isfinite(density.position_support()) ? density.position_support() : 12.0 * density.position_scale;
  for (int k = 0; k <= 4000; ++k) {
    const double r = rq_end * k / 4000.0;
    slope_q_max = std::max(slope_q_max, density.position_density_slope(r));
  }
  if (density.kind == DensityKind::UniformBallGaussian)
    rep.notes.push_back("position factor is discontinuous at the ball surface; gradient condition evaluated a.e.");

  const double expo = 3.0 + density.envelope_delta;
  std::vector<double> speeds{0.0};
  for (int k = 0; k <= 270; ++k) speeds.push_back(std::pow(10.0, -3.0 + 9.0 * k / 270.0));
  auto check = [&](HorstCondition& cond, auto&& value_at) {
    double body = 0.0, tail = 0.0;
    for (double v : speeds) {
      const double w = value_at(v) * std::pow(1.0 + v, expo);
      if (w > cond.sup_weighted) {
        cond.sup_weighted = w;
        cond.worst_speed = v;
      }
      (v >= 1e5 ? tail : body) = std::max(v >= 1e5 ? tail : body, w);
    }
    cond.tail_bounded = tail <= body;
    cond.passed = cond.tail_bounded && (density.envelope_c == 0.0 || cond.sup_weighted <= density.envelope_c);
  };
  check(rep.envelope, [&](double v) { return rho_q_max * density.velocity_density(v); });
  check(rep.gradient, [&](double v) {
    return std::hypot(slope_q_max * density.velocity_density(v), rho_q_max * density.velocity_density_slope(v));
  });

  rep.second_moment_exact = density.velocity_second_moment();
  if (rep.normalizable && mc_samples > 0) {
    const PhaseState x = sample(SampleSpec{density, mc_samples, mc_seed});
    const Eigen::VectorXd p2 = x.p.rowwise().squaredNorm();
    const double mean = p2.mean();
    const double var = (p2.array() - mean).square().sum() / std::max<double>(1.0, static_cast<double>(mc_samples - 1));
    rep.second_moment_mc = mean;
    rep.second_moment_mc_stderr = std::sqrt(var / static_cast<double>(mc_samples));
    rep.mc_samples = mc_samples;
  }
  rep.second_moment_passed = rep.normalizable && rep.second_moment_exact.has_value() && std::isfinite(rep.second_moment_mc);
  if (!rep.second_moment_exact) rep.notes.push_back("velocity second moment diverges");
  return rep;
}

}  // namespace vpcl
