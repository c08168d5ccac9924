#include "vpcl/kernels.hpp"

#include <omp.h>

#include <sstream>

namespace vpcl {

double power_of(double n, double exponent) { return std::exp2(exponent * std::log2(n)); }

PhaseState make_state(const std::vector<PhasePoint>& points) {
  PhaseState s(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) s.set_point(static_cast<Eigen::Index>(i), points[i]);
  return s;
}

std::vector<PhasePoint> to_points(const PhaseState& state) {
  std::vector<PhasePoint> out(static_cast<std::size_t>(state.size()));
  for (Eigen::Index i = 0; i < state.size(); ++i) out[static_cast<std::size_t>(i)] = state.point(i);
  return out;
}

ModelParams ModelParams::with_beta(std::int64_t n, double beta, int sign, double sigma, double horizon) {
  ModelParams p;
  p.n_particles = n;
  p.cut_mode = CutMode::Beta;
  p.beta = beta;
  p.cut_radius = power_of(static_cast<double>(n), -beta);
  p.sign = sign;
  p.sigma = sigma;
  p.horizon = horizon;
  return p;
}

ModelParams ModelParams::with_cut(std::int64_t n, double cut_radius, int sign, double sigma, double horizon) {
  ModelParams p;
  p.n_particles = n;
  p.cut_mode = CutMode::Explicit;
  p.beta = 0.0;
  p.cut_radius = cut_radius;
  p.sign = sign;
  p.sigma = sigma;
  p.horizon = horizon;
  return p;
}

void ModelParams::validate() const {
  std::ostringstream err;
  if (n_particles < 1) err << "n_particles must be positive; ";
  if (sign != 1 && sign != -1) err << "sign must be +1 or -1; ";
  if (!(cut_radius >= 0.0) || !std::isfinite(cut_radius)) err << "cut_radius must be finite and >= 0; ";
  if (!(sigma > 0.0)) err << "sigma must be positive; ";
  if (!(horizon > 0.0) || !std::isfinite(horizon)) err << "horizon must be positive; ";
  if (cut_mode == CutMode::Beta) {
    if (!(beta >= 0.0 && beta < 5.0 / 12.0)) err << "beta must lie in [0, 5/12); ";
    else if (cut_radius != power_of(static_cast<double>(n_particles), -beta))
      err << "cut_radius inconsistent with N^-beta; ";
  }
  if (main_theorem_regime) {
    if (cut_mode != CutMode::Beta) err << "main-theorem regime requires beta mode; ";
    else if (!(beta > 0.0 && beta <= 5.0 / 12.0 - sigma)) err << "main-theorem regime requires 0 < beta <= 5/12 - sigma; ";
  }
  const std::string msg = err.str();
  if (!msg.empty()) throw ConfigError("ModelParams: " + msg.substr(0, msg.size() - 2));
}

ParticleSystem::ParticleSystem(ModelParams p, PhaseState s) : params(p), state(std::move(s)) {
  if (state.size() != params.n_particles)
    throw ConfigError("ParticleSystem: point count does not match n_particles");
}

Block3 total_force(const ModelParams& params, const Block3& q, int threads) {
  const CutoffKernel<double> kernel(params);
  Block3 out;
  const double weight = 1.0 / static_cast<double>(params.n_particles);
  detail::accumulate_pair_field(q, q, kernel, weight, true, out, threads);
  if (kernel.exact_coulomb() && !out.allFinite())
    throw SingularInputError("total_force: coincident points with exact Coulomb kernel");
  return out;
}

Block3 total_force(const ParticleSystem& system, int threads) {
  return total_force(system.params, system.state.q, threads);
}

Eigen::VectorXd total_fluctuation(const ParticleSystem& system, int threads) {
  if (!(system.params.cut_radius > 0.0)) throw DomainError("total_fluctuation requires cut_radius > 0");
  const CutoffKernel<double> kernel(system.params);
  return detail::accumulate_fluctuation(system.state.q, kernel, 1.0 / static_cast<double>(system.params.n_particles),
                                        threads);
}

double kinetic_energy(const PhaseState& state) { return 0.5 * state.p.squaredNorm(); }

double potential_energy(const ParticleSystem& system, int threads) {
  const CutoffKernel<double> kernel(system.params);
  return detail::pair_potential_sum(system.state.q, kernel, threads) / static_cast<double>(system.params.n_particles);
}

double total_energy(const ParticleSystem& system, int threads) {
  return kinetic_energy(system.state) + potential_energy(system, threads);
}

Vec3 total_momentum(const PhaseState& state) { return state.p.colwise().sum().transpose(); }

namespace detail {

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

}  // namespace detail

}  // namespace vpcl
