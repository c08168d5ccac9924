// Direct-sum pair loops. This translation unit is built with reciprocal math.
#include "vpcl/kernels.hpp"

namespace vpcl::detail {

namespace {

template <typename Scalar>
inline void target_field(const Scalar* __restrict sx, const Scalar* __restrict sy, const Scalar* __restrict sz,
                         Eigen::Index n, Scalar tx, Scalar ty, Scalar tz, Eigen::Index skip,
                         const CutoffKernel<Scalar>& k, Scalar out[3]) {
  const Scalar cut2 = k.cut2;
  const Scalar inner = k.inner_slope;
  const Scalar sign = k.sign;
  Scalar ax = 0, ay = 0, az = 0;
#pragma omp simd reduction(+ : ax, ay, az)
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar dx = tx - sx[i];
    const Scalar dy = ty - sy[i];
    const Scalar dz = tz - sz[i];
    const Scalar r2 = dx * dx + dy * dy + dz * dz;
    Scalar s = r2 <= cut2 ? inner : sign / (r2 * std::sqrt(r2));
    s = i == skip ? Scalar(0) : s;
    ax += s * dx;
    ay += s * dy;
    az += s * dz;
  }
  out[0] = ax;
  out[1] = ay;
  out[2] = az;
}

}  // namespace

template <typename Scalar>
void accumulate_pair_field(const Positions<Scalar>& sources, const Positions<Scalar>& targets,
                           const CutoffKernel<Scalar>& kernel, Scalar weight, bool exclude_diagonal,
                           Positions<Scalar>& out, int threads) {
  const Eigen::Index n = sources.rows();
  const Eigen::Index m = targets.rows();
  out.setZero(m, 3);
  const Scalar* sx = sources.col(0).data();
  const Scalar* sy = sources.col(1).data();
  const Scalar* sz = sources.col(2).data();
  const Scalar* tx = targets.col(0).data();
  const Scalar* ty = targets.col(1).data();
  const Scalar* tz = targets.col(2).data();
  Scalar* ox = out.col(0).data();
  Scalar* oy = out.col(1).data();
  Scalar* oz = out.col(2).data();
#pragma omp parallel for num_threads(resolve_threads(threads)) schedule(static)
  for (Eigen::Index j = 0; j < m; ++j) {
    Scalar acc[3];
    target_field(sx, sy, sz, n, tx[j], ty[j], tz[j], exclude_diagonal ? j : Eigen::Index(-1), kernel, acc);
    ox[j] = weight * acc[0];
    oy[j] = weight * acc[1];
    oz[j] = weight * acc[2];
  }
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> accumulate_fluctuation(const Positions<Scalar>& q,
                                                                const CutoffKernel<Scalar>& kernel, Scalar weight,
                                                                int threads) {
  const Eigen::Index n = q.rows();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  const Scalar* x = q.col(0).data();
  const Scalar* y = q.col(1).data();
  const Scalar* z = q.col(2).data();
  const Scalar cut2 = kernel.bound_cut2;
  const Scalar inner = kernel.bound_inner;
#pragma omp parallel for num_threads(resolve_threads(threads)) schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar acc = 0;
    const Scalar tx = x[j], ty = y[j], tz = z[j];
#pragma omp simd reduction(+ : acc)
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar dx = tx - x[i];
      const Scalar dy = ty - y[i];
      const Scalar dz = tz - z[i];
      const Scalar r2 = dx * dx + dy * dy + dz * dz;
      Scalar g = r2 <= cut2 ? inner : Scalar(54) / (r2 * std::sqrt(r2));
      acc += i == j ? Scalar(0) : g;
    }
    out[j] = weight * acc;
  }
  return out;
}

double pair_potential_sum(const Block3& q, const CutoffKernel<double>& kernel, int threads) {
  const Eigen::Index n = q.rows();
  const double* x = q.col(0).data();
  const double* y = q.col(1).data();
  const double* z = q.col(2).data();
  Eigen::VectorXd partial(n);
  const double cut2 = kernel.cut2;
  const double c = kernel.cut;
  const double sign = kernel.sign;
  const double c3 = c * cut2;
#pragma omp parallel for num_threads(resolve_threads(threads)) schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = 0;
    const double tx = x[j], ty = y[j], tz = z[j];
#pragma omp simd reduction(+ : acc)
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double dx = tx - x[i];
      const double dy = ty - y[i];
      const double dz = tz - z[i];
      const double r2 = dx * dx + dy * dy + dz * dz;
      acc += r2 <= cut2 ? (1.5 / c - r2 / (2.0 * c3)) : 1.0 / std::sqrt(r2);
    }
    partial[j] = acc;
  }
  return sign * partial.sum();
}

template void accumulate_pair_field<double>(const Positions<double>&, const Positions<double>&,
                                            const CutoffKernel<double>&, double, bool, Positions<double>&, int);
template void accumulate_pair_field<float>(const Positions<float>&, const Positions<float>&,
                                           const CutoffKernel<float>&, float, bool, Positions<float>&, int);
template Eigen::Matrix<double, Eigen::Dynamic, 1> accumulate_fluctuation<double>(const Positions<double>&,
                                                                                 const CutoffKernel<double>&, double,
                                                                                 int);

}  // namespace vpcl::detail
