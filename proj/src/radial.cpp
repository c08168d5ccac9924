#include "vpcl/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace vpcl {

namespace {

// Sum over a window of d_j of the fraction of the ball B(d_j, c) inside the sphere of
// radius r, for |r - c| < d_j < r + c, from the moments sum d^3, d, 1, 1/d:
// w(d) = [d^3 - 3(s^2+m^2) d + 2 s^3 + 6 s m^2 - 3 s^2 m^2 / d] / (16 c^3), s = r+c, m = r-c.
long double lens_poly(long double s3, long double s1, long double s0, long double sm1, double r, double c) {
  const long double s = static_cast<long double>(r) + c;
  const long double m = static_cast<long double>(r) - c;
  const long double c3 = static_cast<long double>(c) * c * c;
  return (s3 - 3.0L * (s * s + m * m) * s1 + (2.0L * s * s * s + 6.0L * s * m * m) * s0 - 3.0L * s * s * m * m * sm1) /
         (16.0L * c3);
}

long double cube(long double x) { return x * x * x; }

}  // namespace

RadialProfile::RadialProfile(const Block3& q, double cut_radius, int sign) : cut_(cut_radius), sign_(sign) {
  const Eigen::Index m = q.rows();
  if (m == 0) throw DomainError("RadialProfile: empty reference frame");
  centroid_ = q.colwise().mean().transpose();
  offsets_ = q.rowwise() - centroid_.transpose();
  member_radius_.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) member_radius_[static_cast<std::size_t>(i)] = offsets_.row(i).norm();
  radii_ = member_radius_;
  std::sort(radii_.begin(), radii_.end());
  // Uniform buckets over [0, max radius], about one member each on average.
  const std::size_t g = radii_.size();
  if (radii_.back() > 0.0) {
    bucket_scale_ = static_cast<double>(g) / radii_.back();
    bucket_.resize(g + 1);
    for (std::size_t k = 0; k <= g; ++k)
      bucket_[k] = static_cast<std::uint32_t>(
          std::lower_bound(radii_.begin(), radii_.end(), static_cast<double>(k) / bucket_scale_) - radii_.begin());
  }
  if (cut_ > 0.0) {
    const std::size_t n = radii_.size();
    s3_.assign(n + 1, 0.0L);
    s1_.assign(n + 1, 0.0L);
    s0_.assign(n + 1, 0.0L);
    sm1_.assign(n + 1, 0.0L);
    for (std::size_t k = n; k-- > 0;) {
      const long double d = radii_[k];
      s3_[k] = s3_[k + 1] + d * d * d;
      s1_[k] = s1_[k + 1] + d;
      s0_[k] = s0_[k + 1] + 1.0L;
      sm1_[k] = sm1_[k + 1] + (d > 0 ? 1.0L / d : 0.0L);
    }
  }
}

std::pair<std::size_t, std::size_t> RadialProfile::bucket_range(double r) const {
  if (bucket_.empty() || !(r >= 0.0)) return {0, radii_.size()};
  // One bucket of slack on each side absorbs rounding in k / bucket_scale_.
  const double x = r * bucket_scale_;
  const std::size_t last = bucket_.size() - 1;
  if (x >= static_cast<double>(last)) return {bucket_[last - 1], radii_.size()};
  const auto k = static_cast<std::size_t>(x);
  return {bucket_[k == 0 ? 0 : k - 1], k + 2 <= last ? bucket_[k + 2] : radii_.size()};
}

std::size_t RadialProfile::count_at_most(double r) const {
  const auto [lo, hi] = bucket_range(r);
  return static_cast<std::size_t>(std::upper_bound(radii_.begin() + static_cast<std::ptrdiff_t>(lo),
                                                   radii_.begin() + static_cast<std::ptrdiff_t>(hi), r) -
                                  radii_.begin());
}

std::size_t RadialProfile::count_below(double r) const {
  const auto [lo, hi] = bucket_range(r);
  return static_cast<std::size_t>(std::lower_bound(radii_.begin() + static_cast<std::ptrdiff_t>(lo),
                                                   radii_.begin() + static_cast<std::ptrdiff_t>(hi), r) -
                                  radii_.begin());
}

long double RadialProfile::lens_sum(std::size_t lo, std::size_t hi, double r) const {
  if (hi <= lo) return 0.0L;
  return lens_poly(s3_[lo] - s3_[hi], s1_[lo] - s1_[hi], s0_[lo] - s0_[hi], sm1_[lo] - sm1_[hi], r, cut_);
}

long double RadialProfile::self_weight(double d) const {
  // Same branch structure and arithmetic as enclosed_fraction restricted to one member at r = d.
  if (d <= std::abs(d - cut_)) return d >= cut_ ? 1.0L : cube(static_cast<long double>(d) / cut_);
  const long double ld = d;
  return lens_poly(ld * ld * ld, ld, 1.0L, d > 0 ? 1.0L / ld : 0.0L, d, cut_);
}

long double RadialProfile::enclosed_sum(double r) const {
  if (cut_ <= 0.0) return static_cast<long double>(count_at_most(r));
  const std::size_t i_lo = count_at_most(std::abs(r - cut_));
  const std::size_t i_hi = count_below(r + cut_);
  const long double inner_w = r >= cut_ ? 1.0L : cube(static_cast<long double>(r) / cut_);
  return static_cast<long double>(i_lo) * inner_w + lens_sum(i_lo, std::max(i_lo, i_hi), r);
}

double RadialProfile::enclosed_fraction(double r) const {
  return static_cast<double>(enclosed_sum(r) / static_cast<long double>(radii_.size()));
}

Vec3 RadialProfile::force(const Vec3& x) const {
  const Vec3 y = x - centroid_;
  const double r = y.norm();
  if (r < kResolution) return Vec3::Zero();
  return (sign_ * enclosed_fraction(r) / (r * r * r)) * y;
}

Block3 RadialProfile::member_forces(int threads) const {
  const Eigen::Index m = offsets_.rows();
  const long double inv_m = 1.0L / static_cast<long double>(m);
  Block3 out(m, 3);
#pragma omp parallel for num_threads(detail::resolve_threads(threads)) schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    const double d = member_radius_[static_cast<std::size_t>(i)];
    if (d < kResolution) {
      out.row(i).setZero();
      continue;
    }
    const long double self = cut_ > 0.0 ? self_weight(d) : 1.0L;
    const double q = static_cast<double>((enclosed_sum(d) - self) * inv_m);
    out.row(i) = (sign_ * q / (d * d * d)) * offsets_.row(i);
  }
  return out;
}

Vec3 radial_force(const MeanFieldEngine& engine, const PhaseState& reference_frame, const Vec3& x) {
  if (engine.backend != MeanFieldBackend::RadialShell) throw DomainError("radial_force requires the radial-shell backend");
  const RadialProfile profile(reference_frame.q, engine.cut_radius, engine.sign);
  return profile.force(x);
}

Vec3 radial_force(const MeanFieldEngine& engine, const std::vector<PhasePoint>& reference_frame, const Vec3& x) {
  return radial_force(engine, make_state(reference_frame), x);
}

}  // namespace vpcl
