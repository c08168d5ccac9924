#pragma once

#include "vpcl/ensemble.hpp"
#include "vpcl/kernels.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace vpcl {

struct IntegratorSpec {
  double dt = 1.0 / 4096.0;
  std::int64_t steps = 4096;

  double horizon() const { return dt * static_cast<double>(steps); }

  // dt = min(T/min_steps, c/(10 vmax)), then shrunk so that steps*dt == T.
  static IntegratorSpec for_horizon(double horizon, double cut_radius, double vmax, std::int64_t min_steps = 4096);
};

// Non-empty when dt * vmax exceeds cut_radius / 10.
std::optional<std::string> integrator_warning(const IntegratorSpec& integ, double cut_radius, double vmax);

enum class FlowKind : std::uint8_t { Sample = 0, Micro = 1, Tracer = 2, Reference = 3 };
std::string to_string(FlowKind kind);

// Frames on the uniform grid t_k = k * frame_dt.
struct TrajectoryRecord {
  FlowKind kind = FlowKind::Micro;
  double frame_dt = 0.0;
  std::vector<PhaseState> frames;
  std::string provenance;

  std::size_t frame_count() const { return frames.size(); }
  Eigen::Index particles() const { return frames.empty() ? 0 : frames.front().size(); }
  double time(std::size_t k) const { return static_cast<double>(k) * frame_dt; }
  double horizon() const { return frames.empty() ? 0.0 : time(frames.size() - 1); }
  std::vector<double> times() const;
  // Single-particle path over all frames.
  std::vector<PhasePoint> path(Eigen::Index particle) const;
};

double max_speed(const PhaseState& state);

TrajectoryRecord evolve_micro(const ParticleSystem& system, const IntegratorSpec& integ, std::int64_t record_stride = 1,
                              int threads = 0);

enum class MeanFieldBackend { ReferenceEnsemble, RadialShell };
enum class SumPrecision { Double, Single };
std::string to_string(MeanFieldBackend backend);
MeanFieldBackend backend_from_string(const std::string& name);

struct MeanFieldEngine {
  MeanFieldBackend backend = MeanFieldBackend::RadialShell;
  std::int64_t reference_count = 0;
  std::int64_t reference_floor = 0;  // minimum admissible M, 16 N in experiments
  std::uint64_t reference_seed = 0;
  double cut_radius = 0.0;  // smoothing cut of the convolution kernel; 0 is exact Coulomb
  int sign = 1;
  SumPrecision precision = SumPrecision::Double;  // reference-ensemble sums only
  int threads = 0;

  void validate() const;
};

// Enclosed-mass description of one reference frame. With cut c > 0 the
// enclosed fraction is that of the frame smeared by the uniform ball of radius c,
// which reproduces f^c convolved with the radially averaged frame.
class RadialProfile {
 public:
  RadialProfile(const Block3& q, double cut_radius, int sign);

  const Vec3& centroid() const { return centroid_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(radii_.size()); }
  double enclosed_fraction(double r) const;
  Vec3 force(const Vec3& x) const;
  // Force on every frame member with its own contribution removed (input order).
  Block3 member_forces(int threads) const;

  static constexpr double kResolution = 1e-12;

 private:
  long double lens_sum(std::size_t lo, std::size_t hi, double r) const;
  long double enclosed_sum(double r) const;
  long double self_weight(double d) const;
  // Same results as std::upper_bound / std::lower_bound over radii_, narrowed by bucket_.
  std::size_t count_at_most(double r) const;
  std::size_t count_below(double r) const;
  std::pair<std::size_t, std::size_t> bucket_range(double r) const;

  Vec3 centroid_;
  Block3 offsets_;
  std::vector<double> radii_;       // sorted
  std::vector<double> member_radius_;  // input order
  std::vector<std::uint32_t> bucket_;  // bucket_[g] = #radii below g / bucket_scale_
  double bucket_scale_ = 0.0;
  std::vector<long double> s3_, s1_, s0_, sm1_;  // suffix sums of d^3, d, 1, 1/d
  double cut_;
  int sign_;
};

Vec3 radial_force(const MeanFieldEngine& engine, const PhaseState& reference_frame, const Vec3& x);
Vec3 radial_force(const MeanFieldEngine& engine, const std::vector<PhasePoint>& reference_frame, const Vec3& x);

// Mean-field force generated by one stored reference frame.
class FieldSnapshot {
 public:
  FieldSnapshot(const MeanFieldEngine& engine, const Block3& reference_q);
  Block3 forces(const Block3& targets) const;
  Block3 member_forces() const;

 private:
  MeanFieldEngine engine_;
  std::unique_ptr<RadialProfile> radial_;
  Positions<double> src_d_;
  Positions<float> src_f_;
};

TrajectoryRecord evolve_reference(const MeanFieldEngine& engine, const DensityModel& density,
                                  const IntegratorSpec& integ, std::int64_t record_stride = 1);
// Evolves a given initial reference state (used for frozen or hand-built fixtures).
TrajectoryRecord evolve_reference_state(const MeanFieldEngine& engine, PhaseState initial, const IntegratorSpec& integ,
                                        std::int64_t record_stride = 1);
// Reference record whose frames never move.
TrajectoryRecord frozen_reference(const PhaseState& frame, double horizon);

// Step-by-step tracer flow in the field of a stored reference record. Fields between
// stored frames are interpolated linearly in time.
class TracerIntegrator {
 public:
  TracerIntegrator(const MeanFieldEngine& engine, const TrajectoryRecord& reference, PhaseState tracers,
                   const IntegratorSpec& integ);
  void step();
  std::int64_t step_index() const { return k_; }
  double time() const { return static_cast<double>(k_) * integ_.dt; }
  const PhaseState& state() const { return state_; }
  bool done() const { return k_ >= integ_.steps; }

 private:
  Block3 field(std::int64_t k, const Block3& q);
  const FieldSnapshot& snapshot(std::size_t frame);

  MeanFieldEngine engine_;
  const TrajectoryRecord& reference_;
  IntegratorSpec integ_;
  std::int64_t ratio_;  // integrator steps per reference frame
  PhaseState state_;
  Block3 force_;
  std::int64_t k_ = 0;
  std::map<std::size_t, std::unique_ptr<FieldSnapshot>> cache_;
};

TrajectoryRecord evolve_tracers(const MeanFieldEngine& engine, const TrajectoryRecord& reference,
                                const PhaseState& tracers, const IntegratorSpec& integ, std::int64_t record_stride = 1);

// Characteristics of a batch of initial points: either straight lines (force-free
// fixtures, evaluated in closed form q0 + t p0) or tracers in a stored mean field.
class TracerFlow {
 public:
  enum class Kind { FreeStreaming, MeanField };

  static TracerFlow free_streaming(const IntegratorSpec& integ);
  static TracerFlow mean_field(const MeanFieldEngine& engine, const TrajectoryRecord& reference,
                               const IntegratorSpec& integ);

  Kind kind() const { return kind_; }
  const IntegratorSpec& integrator() const { return integ_; }
  double dt() const { return integ_.dt; }
  std::int64_t steps() const { return integ_.steps; }

  TrajectoryRecord run(const PhaseState& initial, std::int64_t record_stride = 1) const;
  // Calls visit(k, state) for k = 0..steps without storing frames.
  template <typename Visitor>
  void stream(const PhaseState& initial, Visitor&& visit) const;

 private:
  Kind kind_ = Kind::FreeStreaming;
  MeanFieldEngine engine_;
  const TrajectoryRecord* reference_ = nullptr;
  IntegratorSpec integ_;
};

template <typename Visitor>
void TracerFlow::stream(const PhaseState& initial, Visitor&& visit) const {
  if (kind_ == Kind::MeanField) {
    TracerIntegrator it(engine_, *reference_, initial, integ_);
    visit(std::int64_t{0}, it.state());
    while (!it.done()) {
      it.step();
      visit(it.step_index(), it.state());
    }
    return;
  }
  PhaseState s = initial;
  for (std::int64_t k = 0; k <= integ_.steps; ++k) {
    s.q = initial.q + (static_cast<double>(k) * integ_.dt) * initial.p;
    visit(k, static_cast<const PhaseState&>(s));
  }
}

// Time-integrated cut-off force along tracer pairs, with the closest approach on the grid.
struct IntegratedForceSample {
  double integral = 0.0;  // trapezoid integral of |f(q_Z - q_Y)| over [0, T]
  double dr = 0.0;        // min distance over the grid
  double dv = 0.0;        // relative speed at that time
  double bound = 0.0;     // min(1/dr^2, 1/(c dv), 1/(dr dv))
};

std::vector<IntegratedForceSample> integrated_force_samples(const DensityModel& density, std::int64_t pairs,
                                                            std::uint64_t seed, const TracerFlow& flow,
                                                            double cut_radius, std::int64_t batch = 2048);

}  // namespace vpcl
