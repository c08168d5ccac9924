#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vpcl {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

// N x 3, column major: each coordinate is a contiguous column.
template <typename Scalar>
using Positions = Eigen::Matrix<Scalar, Eigen::Dynamic, 3>;

using Vec3 = Vector3<double>;
using Block3 = Positions<double>;

struct PhasePoint {
  Vec3 q = Vec3::Zero();
  Vec3 p = Vec3::Zero();
};

// Structure-of-arrays phase state of N particles.
template <typename Scalar>
struct BasicPhaseState {
  Positions<Scalar> q;
  Positions<Scalar> p;

  BasicPhaseState() = default;
  explicit BasicPhaseState(Eigen::Index n) : q(Positions<Scalar>::Zero(n, 3)), p(Positions<Scalar>::Zero(n, 3)) {}

  Eigen::Index size() const { return q.rows(); }

  PhasePoint point(Eigen::Index i) const {
    return {q.row(i).transpose().template cast<double>(), p.row(i).transpose().template cast<double>()};
  }
  void set_point(Eigen::Index i, const PhasePoint& x) {
    q.row(i) = x.q.transpose().template cast<Scalar>();
    p.row(i) = x.p.transpose().template cast<Scalar>();
  }
  bool all_finite() const { return q.allFinite() && p.allFinite(); }
};

using PhaseState = BasicPhaseState<double>;

PhaseState make_state(const std::vector<PhasePoint>& points);
std::vector<PhasePoint> to_points(const PhaseState& state);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class SingularInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::int64_t frame)
      : std::runtime_error(what + " (frame " + std::to_string(frame) + ")"), frame_(frame) {}
  std::int64_t frame() const { return frame_; }

 private:
  std::int64_t frame_;
};

// N^e evaluated as 2^(e*log2 N); exact for powers of two with dyadic exponent products.
double power_of(double n, double exponent);

}  // namespace vpcl
