#pragma once

#include "vpcl/dynamics.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace vpcl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Z is in the class of Y when the minimal distance of the two characteristics over
// [t1, t2] lies in [r_min, r_max] and the relative speed where it is attained lies in
// [v_min, v_max]. All bounds are closed.
struct CollisionClass {
  double r_min = 0.0;
  double r_max = kInf;
  double v_min = 0.0;
  double v_max = kInf;
  double t1 = 0.0;
  double t2 = 1.0;
  std::string label;

  void validate(double horizon) const;
  bool distance_in_band(double d) const { return r_min <= d && d <= r_max; }
  bool speed_in_band(double v) const { return v_min <= v && v <= v_max; }
  // R^2 V^4 (t2 - t1) + R^3 max(R, V)^3 with R = r_max, V = v_max.
  double probability_bound() const;
};

struct ThresholdSchedule {
  std::int64_t n = 2;
  double sigma = 0.0;
  double r_b = 0, v_b = 0, r_s = 0, v_s = 0;
  double delta_g = 0, delta_b = 0, delta_s = 0;
  double good_radius_factor = 6.0;

  // Complement of the good set of Y: M_{(0, 6 r_b), (0, v_b)} over [0, T].
  CollisionClass good_class(double horizon) const;
  CollisionClass superbad_class(double horizon) const;
  double bad_cardinality_threshold() const;       // N^{3/4 (1+sigma)}
  double superbad_cardinality_threshold() const;  // N^{2/9 (1+sigma)}
  // Largest distance any class above can accept.
  double scan_radius() const;
};

ThresholdSchedule schedule(std::int64_t n, double sigma);

struct EncounterResult {
  bool member = false;
  double witness_time = 0.0;  // first tied minimum with speed in band (member) or first minimum
  double min_distance = kInf;
  double speed_at_min = 0.0;
  bool observed = false;  // at least one grid time fell into the window
  // The decision would flip under a 1e-12 relative perturbation of the distances.
  bool tie_sensitive = false;
};

// Streaming evaluation of one class on one pair; observations must come in time order.
class PairEncounter {
 public:
  static constexpr double kTieWindow = 1e-12;

  explicit PairEncounter(const CollisionClass& cls);
  void observe(double t, double distance, double speed);
  EncounterResult result() const;

 private:
  struct Candidate {
    double distance, time, speed;
  };
  CollisionClass cls_;
  double lo_, hi_;
  double min_ = kInf;
  std::vector<Candidate> ties_;
};

EncounterResult class_membership(const std::vector<PhasePoint>& z_path, const std::vector<PhasePoint>& y_path,
                                 double frame_dt, const CollisionClass& cls);
EncounterResult class_membership(const TrajectoryRecord& paths, Eigen::Index z, Eigen::Index y,
                                 const CollisionClass& cls);
EncounterResult class_membership(const PhasePoint& z, const PhasePoint& y, const CollisionClass& cls,
                                 const TracerFlow& flow);

bool good_set_test(const PhasePoint& y, const PhasePoint& z, const ThresholdSchedule& sched, const TracerFlow& flow);

enum class ParticleLabel : std::uint8_t { Good = 0, Bad = 1, Superbad = 2 };
std::string to_string(ParticleLabel label);

struct Witness {
  Eigen::Index particle = 0;
  Eigen::Index partner = 0;
  double time = 0.0;
};

struct TaxonomyReport {
  std::vector<ParticleLabel> labels;
  std::int64_t good = 0, bad = 0, superbad = 0;
  std::vector<Witness> witnesses;  // one per non-good particle, ascending particle index
  double horizon = 0.0;

  std::vector<Eigen::Index> members(ParticleLabel label) const;
};

std::string to_json(const TaxonomyReport& report, int indent = 2);

// Pairs (i < j) whose distance may drop to radius at some stored frame; cell lists on
// checkpoint frames with a margin covering the motion in between.
std::vector<std::pair<Eigen::Index, Eigen::Index>> candidate_pairs(const TrajectoryRecord& paths, double radius);

TaxonomyReport classify(const TrajectoryRecord& tracer_paths, const ThresholdSchedule& sched, int threads = 0);
TaxonomyReport classify(const ParticleSystem& system, const ThresholdSchedule& sched, const TracerFlow& flow,
                        int threads = 0);

// Per-particle phase-space deviation max(|dq|, |dp|).
Eigen::VectorXd phase_deviation(const PhaseState& a, const PhaseState& b);

struct StoppingTimes {
  double tau_g = 0, tau_b = 0, tau_s = 0, tau = 0;
};

StoppingTimes stopping_times(const TrajectoryRecord& micro, const TrajectoryRecord& tracers,
                             const TaxonomyReport& report, const ThresholdSchedule& sched);

// Collision classes covering R^6 at scale r = v = N^{-beta}, splitting dyadically in N^delta.
std::vector<CollisionClass> dyadic_cover(std::int64_t n, double beta, double delta, double horizon);

}  // namespace vpcl
