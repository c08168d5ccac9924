#include "vpcl/taxonomy.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <tuple>

namespace vpcl {

void CollisionClass::validate(double horizon) const {
  if (!(0.0 <= r_min && r_min <= r_max)) throw ConfigError("collision class '" + label + "': need 0 <= r_min <= r_max");
  if (!(0.0 <= v_min && v_min <= v_max)) throw ConfigError("collision class '" + label + "': need 0 <= v_min <= v_max");
  if (!(0.0 <= t1 && t1 <= t2 && t2 <= horizon * (1 + 1e-12)))
    throw ConfigError("collision class '" + label + "': window must lie in [0, T]");
}

double CollisionClass::probability_bound() const {
  const double r = r_max, v = v_max;
  const double m = std::max(r, v);
  return r * r * v * v * v * v * (t2 - t1) + r * r * r * m * m * m;
}

ThresholdSchedule schedule(std::int64_t n, double sigma) {
  if (n < 2) throw ConfigError("schedule: N must be >= 2");
  if (!(sigma > 0.0 && sigma < 1.0 / 16.0)) throw ConfigError("schedule: sigma must lie in (0, 1/16)");
  const auto x = static_cast<double>(n);
  ThresholdSchedule s;
  s.n = n;
  s.sigma = sigma;
  s.r_b = power_of(x, -7.0 / 24.0 - sigma);
  s.v_b = power_of(x, -1.0 / 6.0);
  s.r_s = power_of(x, -1.0 / 3.0 - sigma);
  s.v_s = power_of(x, -5.0 / 18.0);
  s.delta_g = power_of(x, -5.0 / 12.0 + sigma);
  s.delta_b = power_of(x, -7.0 / 24.0 - sigma);
  s.delta_s = power_of(x, -1.0 / 6.0 - sigma);
  return s;
}

CollisionClass ThresholdSchedule::good_class(double horizon) const {
  return CollisionClass{0.0, good_radius_factor * r_b, 0.0, v_b, 0.0, horizon, "not-good"};
}

CollisionClass ThresholdSchedule::superbad_class(double horizon) const {
  return CollisionClass{0.0, r_s, 0.0, v_s, 0.0, horizon, "superbad"};
}

double ThresholdSchedule::bad_cardinality_threshold() const {
  return power_of(static_cast<double>(n), 0.75 * (1 + sigma));
}

double ThresholdSchedule::superbad_cardinality_threshold() const {
  return power_of(static_cast<double>(n), 2.0 / 9.0 * (1 + sigma));
}

double ThresholdSchedule::scan_radius() const { return std::max(good_radius_factor * r_b, r_s); }

PairEncounter::PairEncounter(const CollisionClass& cls) : cls_(cls) {
  const double tol = 1e-12 * std::max(1.0, std::abs(cls.t2));
  lo_ = cls.t1 - tol;
  hi_ = cls.t2 + tol;
}

void PairEncounter::observe(double t, double distance, double speed) {
  if (t < lo_ || t > hi_) return;
  if (distance < min_) {
    min_ = distance;
    const double cut = min_ * (1 + kTieWindow);
    std::erase_if(ties_, [cut](const Candidate& c) { return c.distance > cut; });
  }
  if (distance <= min_ * (1 + kTieWindow)) ties_.push_back({distance, t, speed});
}

EncounterResult PairEncounter::result() const {
  EncounterResult r;
  if (ties_.empty()) return r;
  r.observed = true;
  r.min_distance = min_;
  r.witness_time = ties_.front().time;
  r.speed_at_min = ties_.front().speed;
  bool any_in = false, any_out = false;
  for (const auto& c : ties_) {
    if (cls_.speed_in_band(c.speed)) {
      if (!any_in) {
        r.witness_time = c.time;
        r.speed_at_min = c.speed;
      }
      any_in = true;
    } else {
      any_out = true;
    }
  }
  r.member = any_in && cls_.distance_in_band(min_);
  auto near = [](double a, double b) {
    return std::isfinite(b) && std::abs(a - b) <= PairEncounter::kTieWindow * std::max(std::abs(a), std::abs(b));
  };
  r.tie_sensitive = (any_in && any_out) || near(min_, cls_.r_min) || near(min_, cls_.r_max);
  return r;
}

EncounterResult class_membership(const std::vector<PhasePoint>& z_path, const std::vector<PhasePoint>& y_path,
                                 double frame_dt, const CollisionClass& cls) {
  if (z_path.size() != y_path.size()) throw ConfigError("class_membership: paths on different grids");
  if (!z_path.empty() && z_path.front().q == y_path.front().q && z_path.front().p == y_path.front().p)
    throw DomainError("class_membership: Z = Y");
  PairEncounter enc(cls);
  for (std::size_t k = 0; k < z_path.size(); ++k)
    enc.observe(static_cast<double>(k) * frame_dt, (z_path[k].q - y_path[k].q).norm(),
                (z_path[k].p - y_path[k].p).norm());
  return enc.result();
}

EncounterResult class_membership(const TrajectoryRecord& paths, Eigen::Index z, Eigen::Index y,
                                 const CollisionClass& cls) {
  if (z == y) throw DomainError("class_membership: Z = Y");
  return class_membership(paths.path(z), paths.path(y), paths.frame_dt, cls);
}

EncounterResult class_membership(const PhasePoint& z, const PhasePoint& y, const CollisionClass& cls,
                                 const TracerFlow& flow) {
  if (z.q == y.q && z.p == y.p) throw DomainError("class_membership: Z = Y");
  cls.validate(flow.integrator().horizon());
  const TrajectoryRecord rec = flow.run(make_state({z, y}));
  return class_membership(rec, 0, 1, cls);
}

bool good_set_test(const PhasePoint& y, const PhasePoint& z, const ThresholdSchedule& sched, const TracerFlow& flow) {
  return !class_membership(z, y, sched.good_class(flow.integrator().horizon()), flow).member;
}

std::string to_string(ParticleLabel label) {
  switch (label) {
    case ParticleLabel::Good: return "good";
    case ParticleLabel::Bad: return "bad";
    case ParticleLabel::Superbad: return "superbad";
  }
  return "unknown";
}

std::vector<Eigen::Index> TaxonomyReport::members(ParticleLabel label) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::string to_json(const TaxonomyReport& report, int indent) {
  nlohmann::ordered_json j;
  j["horizon"] = report.horizon;
  j["counts"] = {{"good", report.good}, {"bad", report.bad}, {"superbad", report.superbad}};
  auto& labels = j["labels"] = nlohmann::ordered_json::array();
  for (auto l : report.labels) labels.push_back(to_string(l));
  auto& w = j["witnesses"] = nlohmann::ordered_json::array();
  for (const auto& x : report.witnesses) w.push_back({x.particle, x.partner, x.time});
  return j.dump(indent);
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> candidate_pairs(const TrajectoryRecord& paths, double radius) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  const Eigen::Index n = paths.particles();
  const std::size_t frames = paths.frame_count();
  if (n < 2 || frames == 0 || radius < 0.0) return out;
  if (!std::isfinite(radius)) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) out.emplace_back(i, j);
    return out;
  }

  double disp = 0.0;
  for (std::size_t k = 0; k + 1 < frames; ++k)
    disp = std::max(disp, (paths.frames[k + 1].q - paths.frames[k].q).rowwise().norm().maxCoeff());
  std::size_t stride = frames;
  if (disp > 0.0) stride = static_cast<std::size_t>(std::max(1.0, std::floor(0.5 * radius / disp)));
  const double margin = 2.0 * std::ceil(0.5 * static_cast<double>(stride)) * disp;
  const double cutoff = (radius + margin) * (1 + 1e-9) + 1e-300;
  const double cut2 = cutoff * cutoff;

  std::vector<std::size_t> checkpoints;
  for (std::size_t k = 0; k < frames; k += stride) checkpoints.push_back(k);
  if (checkpoints.back() != frames - 1) checkpoints.push_back(frames - 1);

  using Cell = std::array<std::int64_t, 3>;
  std::vector<std::uint64_t> keys;
  std::vector<std::pair<Cell, Eigen::Index>> cells(static_cast<std::size_t>(n));
  for (std::size_t c : checkpoints) {
    const Block3& q = paths.frames[c].q;
    for (Eigen::Index i = 0; i < n; ++i) {
      Cell cell;
      for (int d = 0; d < 3; ++d) cell[d] = static_cast<std::int64_t>(std::floor(q(i, d) / cutoff));
      cells[static_cast<std::size_t>(i)] = {cell, i};
    }
    std::sort(cells.begin(), cells.end());
    for (const auto& [cell, i] : cells) {
      for (std::int64_t dx = -1; dx <= 1; ++dx)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
          for (std::int64_t dz = -1; dz <= 1; ++dz) {
            const Cell nb{cell[0] + dx, cell[1] + dy, cell[2] + dz};
            auto lo = std::lower_bound(cells.begin(), cells.end(), std::pair<Cell, Eigen::Index>{nb, -1});
            for (auto it = lo; it != cells.end() && it->first == nb; ++it) {
              const Eigen::Index j = it->second;
              if (j <= i) continue;
              if ((q.row(i) - q.row(j)).squaredNorm() <= cut2)
                keys.push_back(static_cast<std::uint64_t>(i) << 32 | static_cast<std::uint64_t>(j));
            }
          }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  }
  out.reserve(keys.size());
  for (auto key : keys) out.emplace_back(static_cast<Eigen::Index>(key >> 32), static_cast<Eigen::Index>(key & 0xffffffffu));
  return out;
}

TaxonomyReport classify(const TrajectoryRecord& tracer_paths, const ThresholdSchedule& sched, int threads) {
  const Eigen::Index n = tracer_paths.particles();
  const double horizon = tracer_paths.horizon();
  const CollisionClass gcls = sched.good_class(horizon);
  const CollisionClass scls = sched.superbad_class(horizon);
  const auto pairs = candidate_pairs(tracer_paths, sched.scan_radius());

  // Frames outer, pairs inner: one frame stays in cache while a block of pairs reads it.
  std::vector<EncounterResult> g(pairs.size()), s(pairs.size());
  constexpr std::int64_t kBlock = 4096;
  const auto np = static_cast<std::int64_t>(pairs.size());
  const std::int64_t blocks = (np + kBlock - 1) / kBlock;
#pragma omp parallel for num_threads(detail::resolve_threads(threads)) schedule(dynamic, 1)
  for (std::int64_t b = 0; b < blocks; ++b) {
    const std::int64_t lo = b * kBlock, hi = std::min(np, lo + kBlock);
    std::vector<PairEncounter> eg(static_cast<std::size_t>(hi - lo), PairEncounter(gcls));
    std::vector<PairEncounter> es(static_cast<std::size_t>(hi - lo), PairEncounter(scls));
    for (std::size_t k = 0; k < tracer_paths.frame_count(); ++k) {
      const PhaseState& f = tracer_paths.frames[k];
      const double t = tracer_paths.time(k);
      for (std::int64_t p = lo; p < hi; ++p) {
        const auto [i, j] = pairs[static_cast<std::size_t>(p)];
        const double d = (f.q.row(i) - f.q.row(j)).norm();
        const double v = (f.p.row(i) - f.p.row(j)).norm();
        eg[static_cast<std::size_t>(p - lo)].observe(t, d, v);
        es[static_cast<std::size_t>(p - lo)].observe(t, d, v);
      }
    }
    for (std::int64_t p = lo; p < hi; ++p) {
      g[static_cast<std::size_t>(p)] = eg[static_cast<std::size_t>(p - lo)].result();
      s[static_cast<std::size_t>(p)] = es[static_cast<std::size_t>(p - lo)].result();
    }
  }

  TaxonomyReport report;
  report.horizon = horizon;
  report.labels.assign(static_cast<std::size_t>(n), ParticleLabel::Good);
  std::vector<Witness> sw(static_cast<std::size_t>(n), Witness{-1, -1, 0.0});
  std::vector<Witness> bw = sw;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    auto mark = [&](std::vector<Witness>& w, const EncounterResult& e) {
      for (auto [a, b] : {std::pair{i, j}, std::pair{j, i}})
        if (w[static_cast<std::size_t>(a)].particle < 0) w[static_cast<std::size_t>(a)] = Witness{a, b, e.witness_time};
    };
    if (s[p].member) mark(sw, s[p]);
    if (g[p].member) mark(bw, g[p]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (sw[u].particle >= 0) {
      report.labels[u] = ParticleLabel::Superbad;
      report.witnesses.push_back(sw[u]);
      ++report.superbad;
    } else if (bw[u].particle >= 0) {
      report.labels[u] = ParticleLabel::Bad;
      report.witnesses.push_back(bw[u]);
      ++report.bad;
    } else {
      ++report.good;
    }
  }
  return report;
}

TaxonomyReport classify(const ParticleSystem& system, const ThresholdSchedule& sched, const TracerFlow& flow,
                        int threads) {
  return classify(flow.run(system.state), sched, threads);
}

Eigen::VectorXd phase_deviation(const PhaseState& a, const PhaseState& b) {
  if (a.size() != b.size()) throw ConfigError("phase_deviation: particle counts differ");
  return (a.q - b.q).rowwise().norm().cwiseMax((a.p - b.p).rowwise().norm());
}

StoppingTimes stopping_times(const TrajectoryRecord& micro, const TrajectoryRecord& tracers,
                             const TaxonomyReport& report, const ThresholdSchedule& sched) {
  if (micro.frame_count() != tracers.frame_count() || micro.particles() != tracers.particles() ||
      std::abs(micro.frame_dt - tracers.frame_dt) > 1e-12 * std::max(micro.frame_dt, tracers.frame_dt))
    throw ConfigError("stopping_times: micro and tracer records are on different grids");
  if (static_cast<Eigen::Index>(report.labels.size()) != micro.particles())
    throw ConfigError("stopping_times: report does not match the records");

  const double horizon = micro.horizon();
  std::array<double, 3> tau{horizon, horizon, horizon};
  const std::array<double, 3> delta{sched.delta_g, sched.delta_b, sched.delta_s};
  std::array<bool, 3> stopped{false, false, false};
  for (std::size_t k = 0; k < micro.frame_count(); ++k) {
    const Eigen::VectorXd dev = phase_deviation(micro.frames[k], tracers.frames[k]);
    std::array<double, 3> worst{0, 0, 0};
    for (std::size_t i = 0; i < report.labels.size(); ++i) {
      const auto c = static_cast<std::size_t>(report.labels[i]);
      worst[c] = std::max(worst[c], dev[static_cast<Eigen::Index>(i)]);
    }
    for (std::size_t c = 0; c < 3; ++c) {
      if (!stopped[c] && worst[c] > delta[c]) {
        stopped[c] = true;
        tau[c] = k == 0 ? 0.0 : micro.time(k - 1);
      }
    }
  }
  StoppingTimes st;
  st.tau_g = tau[0];
  st.tau_b = tau[1];
  st.tau_s = tau[2];
  st.tau = std::min({st.tau_g, st.tau_b, st.tau_s});
  return st;
}

std::vector<CollisionClass> dyadic_cover(std::int64_t n, double beta, double delta, double horizon) {
  if (n < 2 || !(beta > 0.0) || !(delta > 0.0)) throw ConfigError("dyadic_cover: need N >= 2, beta > 0, delta > 0");
  const auto x = static_cast<double>(n);
  const int top = static_cast<int>(std::floor(beta / delta + 1e-9));
  auto level = [&](int k) { return power_of(x, k * delta - beta); };
  const double r = level(0), v = level(0);
  std::vector<CollisionClass> out;
  auto add = [&](double r0, double r1, double v0, double v1, std::string label) {
    out.push_back(CollisionClass{r0, r1, v0, v1, 0.0, horizon, std::move(label)});
  };
  add(0, r, 0, v, "i");
  for (int l = 0; l <= top; ++l) add(0, r, level(l), level(l + 1), "ii:l=" + std::to_string(l));
  add(0, r, 1, kInf, "iii");
  for (int k = 0; k <= top; ++k) add(level(k), level(k + 1), 0, v, "iv:k=" + std::to_string(k));
  for (int k = 0; k <= top; ++k)
    for (int l = 0; l <= top; ++l)
      add(level(k), level(k + 1), level(l), level(l + 1), "v:k=" + std::to_string(k) + ",l=" + std::to_string(l));
  for (int k = 0; k <= top; ++k) add(level(k), level(k + 1), 1, kInf, "vi:k=" + std::to_string(k));
  add(power_of(x, -delta), kInf, 0, kInf, "vii");
  return out;
}

}  // namespace vpcl
