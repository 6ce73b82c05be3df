#pragma once

#include <vector>

#include "imocap/skeleton.hpp"

namespace imocap {

// Mean and population standard deviation over frames.
struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct PoseMetricsReport {
  // Global geodesic angle over the upper legs + upper arms, degrees.
  MetricStat sip_deg;
  // Global geodesic angle over the predicted joints, degrees.
  MetricStat angular_deg;
  // Root-relative joint position error over all non-root joints, cm.
  MetricStat positional_cm;
  // Skinned surface error with the root translation removed, cm.
  MetricStat marker_cm;
  // Third-derivative magnitude of the estimated world joint positions
  // (all joints, interior frames), in 1e2 m/s^3. Absolute, so it is zero
  // only for motions with no jerk, not merely when est == gt.
  MetricStat jitter_e2;
};

// Frame-aligned comparison of two motions on the same skeleton. Throws
// LengthMismatch / EmptyInput / DimensionMismatch. Sequences shorter than
// five frames report zero jitter (no interior frames).
PoseMetricsReport pose_metrics(const MotionSequence& est, const MotionSequence& gt,
                               const SkeletonModel& model);

// Translation drift over look-ahead horizons tau = 0, step, 2*step, ...,
// horizon seconds: mean over start frames f of
//   || (est(f+k) - est(f)) - (gt(f+k) - gt(f)) ||,  k = round(tau * fps).
// Throws LengthMismatch, and SequenceTooShort when no start frame exists
// for the longest horizon.
std::vector<double> drift_curve(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                                double fps, double horizon_s = 10.0, double step_s = 0.1);

// Fraction of frames whose acceleration error is <= threshold, one value
// per threshold (inclusive, so exact ties count as correct).
std::vector<double> accel_pck(const std::vector<Vec3>& test, const std::vector<Vec3>& ref,
                              const std::vector<double>& thresholds);

}  // namespace imocap
