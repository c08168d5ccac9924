#include "vpcl/dynamics.hpp"

#include "vpcl/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vpcl {

IntegratorSpec IntegratorSpec::for_horizon(double horizon, double cut_radius, double vmax, std::int64_t min_steps) {
  double dt = horizon / static_cast<double>(min_steps);
  if (cut_radius > 0.0 && vmax > 0.0) dt = std::min(dt, cut_radius / (10.0 * vmax));
  IntegratorSpec spec;
  spec.steps = static_cast<std::int64_t>(std::ceil(horizon / dt - 1e-9));
  spec.dt = horizon / static_cast<double>(spec.steps);
  return spec;
}

std::optional<std::string> integrator_warning(const IntegratorSpec& integ, double cut_radius, double vmax) {
  if (cut_radius > 0.0 && integ.dt * vmax > cut_radius / 10.0) {
    std::ostringstream os;
    os << "dt*vmax = " << integ.dt * vmax << " exceeds cut_radius/10 = " << cut_radius / 10.0;
    return os.str();
  }
  return std::nullopt;
}

std::string to_string(FlowKind kind) {
  switch (kind) {
    case FlowKind::Sample: return "sample";
    case FlowKind::Micro: return "micro";
    case FlowKind::Tracer: return "tracer";
    case FlowKind::Reference: return "reference";
  }
  return "unknown";
}

std::string to_string(MeanFieldBackend backend) {
  return backend == MeanFieldBackend::RadialShell ? "radial-shell" : "reference-ensemble";
}

MeanFieldBackend backend_from_string(const std::string& name) {
  if (name == "radial-shell") return MeanFieldBackend::RadialShell;
  if (name == "reference-ensemble") return MeanFieldBackend::ReferenceEnsemble;
  throw ConfigError("unknown mean-field backend '" + name + "'");
}

std::vector<double> TrajectoryRecord::times() const {
  std::vector<double> t(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) t[k] = time(k);
  return t;
}

std::vector<PhasePoint> TrajectoryRecord::path(Eigen::Index particle) const {
  std::vector<PhasePoint> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(f.point(particle));
  return out;
}

double max_speed(const PhaseState& state) {
  return state.size() == 0 ? 0.0 : std::sqrt(state.p.rowwise().squaredNorm().maxCoeff());
}

namespace {

void check_stride(const IntegratorSpec& integ, std::int64_t stride) {
  if (!(integ.dt > 0.0) || integ.steps < 0) throw ConfigError("integrator: dt must be positive and steps >= 0");
  if (stride < 1) throw ConfigError("record_stride must be >= 1");
  if (integ.steps % stride != 0) throw ConfigError("record_stride must divide the number of steps");
}

void check_finite(const PhaseState& s, std::int64_t step, const char* what) {
  if (!s.all_finite()) throw NumericalError(std::string(what) + ": non-finite phase state", step);
}

}  // namespace

TrajectoryRecord evolve_micro(const ParticleSystem& system, const IntegratorSpec& integ, std::int64_t record_stride,
                              int threads) {
  check_stride(integ, record_stride);
  if (!(system.params.cut_radius > 0.0)) throw ConfigError("evolve_micro requires cut_radius > 0");
  TrajectoryRecord rec;
  rec.kind = FlowKind::Micro;
  rec.frame_dt = integ.dt * static_cast<double>(record_stride);
  std::ostringstream prov;
  prov << "micro N=" << system.params.n_particles << " c=" << system.params.cut_radius << " a=" << system.params.sign
       << " dt=" << integ.dt << " steps=" << integ.steps;
  rec.provenance = prov.str();

  PhaseState s = system.state;
  check_finite(s, 0, "evolve_micro");
  rec.frames.push_back(s);
  if (integ.steps == 0) return rec;
  const double h = 0.5 * integ.dt;
  Block3 force = total_force(system.params, s.q, threads);
  for (std::int64_t k = 1; k <= integ.steps; ++k) {
    s.p += h * force;
    s.q += integ.dt * s.p;
    force = total_force(system.params, s.q, threads);
    s.p += h * force;
    check_finite(s, k, "evolve_micro");
    if (k % record_stride == 0) rec.frames.push_back(s);
  }
  return rec;
}

void MeanFieldEngine::validate() const {
  if (sign != 1 && sign != -1) throw ConfigError("engine: sign must be +1 or -1");
  if (!(cut_radius >= 0.0) || !std::isfinite(cut_radius)) throw ConfigError("engine: cut_radius must be >= 0");
  if (reference_count < 1) throw ConfigError("engine: reference_count must be positive");
  if (reference_count < reference_floor)
    throw ConfigError("engine: reference_count " + std::to_string(reference_count) + " below floor " +
                      std::to_string(reference_floor));
}

FieldSnapshot::FieldSnapshot(const MeanFieldEngine& engine, const Block3& reference_q) : engine_(engine) {
  if (reference_q.rows() == 0) throw DomainError("FieldSnapshot: empty reference frame");
  if (engine.backend == MeanFieldBackend::RadialShell) {
    radial_ = std::make_unique<RadialProfile>(reference_q, engine.cut_radius, engine.sign);
  } else if (engine.precision == SumPrecision::Single) {
    src_f_ = reference_q.cast<float>();
  } else {
    src_d_ = reference_q;
  }
}

Block3 FieldSnapshot::forces(const Block3& targets) const {
  if (radial_) {
    Block3 out(targets.rows(), 3);
#pragma omp parallel for num_threads(detail::resolve_threads(engine_.threads)) schedule(static)
    for (Eigen::Index j = 0; j < targets.rows(); ++j) out.row(j) = radial_->force(targets.row(j).transpose()).transpose();
    return out;
  }
  if (engine_.precision == SumPrecision::Single) {
    const CutoffKernel<float> kernel(engine_.cut_radius, engine_.sign);
    Positions<float> out;
    const Positions<float> t = targets.cast<float>();
    detail::accumulate_pair_field(src_f_, t, kernel, 1.0f / static_cast<float>(src_f_.rows()), false, out,
                                  engine_.threads);
    return out.cast<double>();
  }
  const CutoffKernel<double> kernel(engine_.cut_radius, engine_.sign);
  Block3 out;
  detail::accumulate_pair_field(src_d_, targets, kernel, 1.0 / static_cast<double>(src_d_.rows()), false, out,
                                engine_.threads);
  return out;
}

Block3 FieldSnapshot::member_forces() const {
  if (radial_) return radial_->member_forces(engine_.threads);
  if (engine_.precision == SumPrecision::Single) {
    const CutoffKernel<float> kernel(engine_.cut_radius, engine_.sign);
    Positions<float> out;
    detail::accumulate_pair_field(src_f_, src_f_, kernel, 1.0f / static_cast<float>(src_f_.rows()), true, out,
                                  engine_.threads);
    return out.cast<double>();
  }
  const CutoffKernel<double> kernel(engine_.cut_radius, engine_.sign);
  Block3 out;
  detail::accumulate_pair_field(src_d_, src_d_, kernel, 1.0 / static_cast<double>(src_d_.rows()), true, out,
                                engine_.threads);
  return out;
}

TrajectoryRecord evolve_reference_state(const MeanFieldEngine& engine, PhaseState initial, const IntegratorSpec& integ,
                                        std::int64_t record_stride) {
  MeanFieldEngine e = engine;
  e.reference_count = initial.size();
  e.validate();
  check_stride(integ, record_stride);
  TrajectoryRecord rec;
  rec.kind = FlowKind::Reference;
  rec.frame_dt = integ.dt * static_cast<double>(record_stride);
  std::ostringstream prov;
  prov << "reference backend=" << to_string(e.backend) << " M=" << e.reference_count << " seed=" << e.reference_seed
       << " c=" << e.cut_radius << " a=" << e.sign << " dt=" << integ.dt << " steps=" << integ.steps;
  rec.provenance = prov.str();

  PhaseState s = std::move(initial);
  check_finite(s, 0, "evolve_reference");
  rec.frames.push_back(s);
  if (integ.steps == 0) return rec;
  const double h = 0.5 * integ.dt;
  Block3 force = FieldSnapshot(e, s.q).member_forces();
  for (std::int64_t k = 1; k <= integ.steps; ++k) {
    s.p += h * force;
    s.q += integ.dt * s.p;
    force = FieldSnapshot(e, s.q).member_forces();
    s.p += h * force;
    check_finite(s, k, "evolve_reference");
    if (k % record_stride == 0) rec.frames.push_back(s);
  }
  return rec;
}

TrajectoryRecord evolve_reference(const MeanFieldEngine& engine, const DensityModel& density,
                                  const IntegratorSpec& integ, std::int64_t record_stride) {
  engine.validate();
  PhaseState initial = sample(SampleSpec{density, engine.reference_count, engine.reference_seed});
  return evolve_reference_state(engine, std::move(initial), integ, record_stride);
}

TrajectoryRecord frozen_reference(const PhaseState& frame, double horizon) {
  TrajectoryRecord rec;
  rec.kind = FlowKind::Reference;
  rec.frame_dt = horizon;
  rec.frames = {frame, frame};
  rec.provenance = "frozen reference M=" + std::to_string(frame.size());
  return rec;
}

TracerIntegrator::TracerIntegrator(const MeanFieldEngine& engine, const TrajectoryRecord& reference, PhaseState tracers,
                                   const IntegratorSpec& integ)
    : engine_(engine), reference_(reference), integ_(integ), state_(std::move(tracers)) {
  if (reference.frames.empty()) throw ConfigError("evolve_tracers: empty reference record");
  if (!(integ.dt > 0.0) || integ.steps < 0) throw ConfigError("evolve_tracers: invalid integrator");
  if (reference.frames.size() == 1) {
    ratio_ = 0;  // static field
  } else {
    const double r = reference.frame_dt / integ.dt;
    ratio_ = static_cast<std::int64_t>(std::llround(r));
    if (ratio_ < 1 || std::abs(static_cast<double>(ratio_) * integ.dt - reference.frame_dt) > 1e-9 * reference.frame_dt)
      throw ConfigError("evolve_tracers: reference frame spacing is not a multiple of the tracer step");
    if (integ.steps > ratio_ * static_cast<std::int64_t>(reference.frames.size() - 1))
      throw ConfigError("evolve_tracers: tracer horizon exceeds the reference record");
  }
  check_finite(state_, 0, "evolve_tracers");
  force_ = field(0, state_.q);
}

const FieldSnapshot& TracerIntegrator::snapshot(std::size_t frame) {
  auto it = cache_.find(frame);
  if (it == cache_.end())
    it = cache_.emplace(frame, std::make_unique<FieldSnapshot>(engine_, reference_.frames[frame].q)).first;
  return *it->second;
}

Block3 TracerIntegrator::field(std::int64_t k, const Block3& q) {
  if (ratio_ == 0) return snapshot(0).forces(q);
  const auto fi = static_cast<std::size_t>(k / ratio_);
  const std::int64_t rem = k % ratio_;
  while (!cache_.empty() && cache_.begin()->first < fi) cache_.erase(cache_.begin());
  if (rem == 0) return snapshot(fi).forces(q);
  const double w = static_cast<double>(rem) / static_cast<double>(ratio_);
  const Block3 a = snapshot(fi).forces(q);
  const Block3 b = snapshot(fi + 1).forces(q);
  return (1.0 - w) * a + w * b;
}

void TracerIntegrator::step() {
  if (done()) return;
  const double h = 0.5 * integ_.dt;
  state_.p += h * force_;
  state_.q += integ_.dt * state_.p;
  ++k_;
  force_ = field(k_, state_.q);
  state_.p += h * force_;
  check_finite(state_, k_, "evolve_tracers");
}

TrajectoryRecord evolve_tracers(const MeanFieldEngine& engine, const TrajectoryRecord& reference,
                                const PhaseState& tracers, const IntegratorSpec& integ, std::int64_t record_stride) {
  check_stride(integ, record_stride);
  TrajectoryRecord rec;
  rec.kind = FlowKind::Tracer;
  rec.frame_dt = integ.dt * static_cast<double>(record_stride);
  std::ostringstream prov;
  prov << "tracer backend=" << to_string(engine.backend) << " c=" << engine.cut_radius << " a=" << engine.sign
       << " dt=" << integ.dt << " steps=" << integ.steps << " | " << reference.provenance;
  rec.provenance = prov.str();
  TracerIntegrator it(engine, reference, tracers, integ);
  rec.frames.push_back(it.state());
  while (!it.done()) {
    it.step();
    if (it.step_index() % record_stride == 0) rec.frames.push_back(it.state());
  }
  return rec;
}

TracerFlow TracerFlow::free_streaming(const IntegratorSpec& integ) {
  if (!(integ.dt > 0.0) || integ.steps < 0) throw ConfigError("free streaming: invalid integrator");
  TracerFlow f;
  f.kind_ = Kind::FreeStreaming;
  f.integ_ = integ;
  return f;
}

TracerFlow TracerFlow::mean_field(const MeanFieldEngine& engine, const TrajectoryRecord& reference,
                                  const IntegratorSpec& integ) {
  TracerFlow f;
  f.kind_ = Kind::MeanField;
  f.engine_ = engine;
  f.reference_ = &reference;
  f.integ_ = integ;
  return f;
}

TrajectoryRecord TracerFlow::run(const PhaseState& initial, std::int64_t record_stride) const {
  if (kind_ == Kind::MeanField) return evolve_tracers(engine_, *reference_, initial, integ_, record_stride);
  check_stride(integ_, record_stride);
  TrajectoryRecord rec;
  rec.kind = FlowKind::Tracer;
  rec.frame_dt = integ_.dt * static_cast<double>(record_stride);
  rec.provenance = "free streaming dt=" + std::to_string(integ_.dt) + " steps=" + std::to_string(integ_.steps);
  stream(initial, [&](std::int64_t k, const PhaseState& s) {
    if (k % record_stride == 0) rec.frames.push_back(s);
  });
  return rec;
}

std::vector<IntegratedForceSample> integrated_force_samples(const DensityModel& density, std::int64_t pairs,
                                                            std::uint64_t seed, const TracerFlow& flow,
                                                            double cut_radius, std::int64_t batch) {
  if (pairs <= 0 || batch <= 0) throw ConfigError("integrated_force_samples: pairs and batch must be positive");
  if (!(cut_radius > 0.0)) throw ConfigError("integrated_force_samples: cut radius must be positive");
  const CutoffKernel<double> kernel(cut_radius, 1);
  const double dt = flow.dt();
  const std::int64_t steps = flow.steps();
  std::vector<IntegratedForceSample> out;
  out.reserve(static_cast<std::size_t>(pairs));
  for (std::int64_t start = 0, b = 0; start < pairs; start += batch, ++b) {
    const std::int64_t m = std::min(batch, pairs - start);
    const PhaseState pts = sample(SampleSpec{density, 2 * m, derive_seed(seed, "force-pairs", static_cast<std::uint64_t>(b))});
    std::vector<IntegratedForceSample> acc(static_cast<std::size_t>(m));
    for (auto& a : acc) a.dr = std::numeric_limits<double>::infinity();
    flow.stream(pts, [&](std::int64_t k, const PhaseState& s) {
      const double w = (k == 0 || k == steps) ? 0.5 * dt : dt;
      for (std::int64_t p = 0; p < m; ++p) {
        const Vec3 dq = s.q.row(p) - s.q.row(p + m);
        auto& a = acc[static_cast<std::size_t>(p)];
        a.integral += w * kernel.force(dq).norm();
        const double d = dq.norm();
        if (d < a.dr) {
          a.dr = d;
          a.dv = (s.p.row(p) - s.p.row(p + m)).norm();
        }
      }
    });
    for (auto& a : acc) {
      a.bound = std::min({1.0 / (a.dr * a.dr), 1.0 / (cut_radius * a.dv), 1.0 / (a.dr * a.dv)});
      out.push_back(a);
    }
  }
  return out;
}

}  // namespace vpcl
