#pragma once

#include "vpcl/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>

namespace vpcl {

enum class CutMode { Beta, Explicit };

struct ModelParams {
  std::int64_t n_particles = 1;
  CutMode cut_mode = CutMode::Beta;
  double beta = 0.0;
  double cut_radius = 1.0;  // resolved c; 0 selects the exact Coulomb kernel
  int sign = 1;             // +1 repulsive, -1 attractive
  double sigma = 0.01;
  double horizon = 1.0;
  bool main_theorem_regime = false;
  static constexpr double mass = 1.0;

  static ModelParams with_beta(std::int64_t n, double beta, int sign = 1, double sigma = 0.01, double horizon = 1.0);
  static ModelParams with_cut(std::int64_t n, double cut_radius, int sign = 1, double sigma = 0.01,
                              double horizon = 1.0);

  // Throws ConfigError on violated invariants.
  void validate() const;
};

// Precomputed constants of the cut-off kernel, usable in any scalar type.
template <typename Scalar>
struct CutoffKernel {
  Scalar sign = 1;
  Scalar cut = 1;
  Scalar cut2 = 1;
  Scalar inner_slope = 1;  // a / c^3 = a N^{3 beta}
  Scalar bound_inner = 2;  // 2 / c^3
  Scalar bound_cut2 = 9;   // (3c)^2

  CutoffKernel() = default;
  CutoffKernel(double cut_radius, int a) {
    const double c = cut_radius;
    sign = static_cast<Scalar>(a);
    cut = static_cast<Scalar>(c);
    cut2 = static_cast<Scalar>(c * c);
    const double c3 = c * c * c;
    // NaN for the exact kernel so coincident pairs poison direct sums detectably.
    inner_slope = c > 0 ? static_cast<Scalar>(a / c3) : std::numeric_limits<Scalar>::quiet_NaN();
    bound_inner = c > 0 ? static_cast<Scalar>(2.0 / c3) : Scalar(0);
    bound_cut2 = static_cast<Scalar>(9.0 * c * c);
  }
  explicit CutoffKernel(const ModelParams& params) : CutoffKernel(params.cut_radius, params.sign) {}

  bool exact_coulomb() const { return cut == Scalar(0); }

  template <typename Derived>
  Vector3<Scalar> force(const Eigen::MatrixBase<Derived>& q) const {
    const Scalar r2 = q.squaredNorm();
    if (r2 <= cut2) {
      if (exact_coulomb()) throw SingularInputError("pair_force: q = 0 with exact Coulomb kernel");
      return inner_slope * q;
    }
    return (sign / (r2 * std::sqrt(r2))) * q;
  }

  template <typename Derived>
  Scalar fluctuation(const Eigen::MatrixBase<Derived>& q) const {
    if (exact_coulomb()) throw DomainError("fluctuation_bound requires cut_radius > 0");
    const Scalar r2 = q.squaredNorm();
    if (r2 <= bound_cut2) return bound_inner;
    return Scalar(54) / (r2 * std::sqrt(r2));
  }

  template <typename Derived>
  Scalar potential(const Eigen::MatrixBase<Derived>& q) const {
    const Scalar r2 = q.squaredNorm();
    if (r2 <= cut2) {
      if (exact_coulomb()) throw SingularInputError("pair_potential: q = 0 with exact Coulomb kernel");
      return sign * (Scalar(1.5) / cut - r2 / (Scalar(2) * cut * cut2));
    }
    return sign / std::sqrt(r2);
  }
};

template <typename Derived>
Vector3<typename Derived::Scalar> pair_force(const Eigen::MatrixBase<Derived>& q, const ModelParams& params) {
  return CutoffKernel<typename Derived::Scalar>(params).force(q);
}

template <typename Derived>
typename Derived::Scalar fluctuation_bound(const Eigen::MatrixBase<Derived>& q, const ModelParams& params) {
  return CutoffKernel<typename Derived::Scalar>(params).fluctuation(q);
}

template <typename Derived>
typename Derived::Scalar pair_potential(const Eigen::MatrixBase<Derived>& q, const ModelParams& params) {
  return CutoffKernel<typename Derived::Scalar>(params).potential(q);
}

struct ParticleSystem {
  ModelParams params;
  PhaseState state;

  ParticleSystem() = default;
  ParticleSystem(ModelParams p, PhaseState s);
  Eigen::Index size() const { return state.size(); }
};

// threads <= 0 uses the OpenMP default.
Block3 total_force(const ParticleSystem& system, int threads = 0);
Block3 total_force(const ModelParams& params, const Block3& q, int threads = 0);
Eigen::VectorXd total_fluctuation(const ParticleSystem& system, int threads = 0);

double kinetic_energy(const PhaseState& state);
// (1/N) sum_{i<j} U(q_i - q_j)
double potential_energy(const ParticleSystem& system, int threads = 0);
double total_energy(const ParticleSystem& system, int threads = 0);
Vec3 total_momentum(const PhaseState& state);

namespace detail {

// Accumulates weight * sum_i f(t_j - s_i) into out for every target j. When
// exclude_diagonal is set, sources and targets are the same set and i == j is skipped.
// Each target is reduced independently in a fixed order.
template <typename Scalar>
void accumulate_pair_field(const Positions<Scalar>& sources, const Positions<Scalar>& targets,
                           const CutoffKernel<Scalar>& kernel, Scalar weight, bool exclude_diagonal,
                           Positions<Scalar>& out, int threads);

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> accumulate_fluctuation(const Positions<Scalar>& q,
                                                                const CutoffKernel<Scalar>& kernel, Scalar weight,
                                                                int threads);

double pair_potential_sum(const Block3& q, const CutoffKernel<double>& kernel, int threads);

int resolve_threads(int threads);

}  // namespace detail

}  // namespace vpcl
