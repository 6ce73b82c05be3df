#include "imocap/eval.hpp"

#include <cmath>

#include "imocap/errors.hpp"
#include "imocap/rotmath.hpp"

namespace imocap {

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
  MetricStat s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return s;
}

}  // namespace

PoseMetricsReport pose_metrics(const MotionSequence& est, const MotionSequence& gt,
                               const SkeletonModel& model) {
  model.validate();
  if (est.size() != gt.size())
    throw LengthMismatch("pose_metrics: " + std::to_string(est.size()) + " vs " +
                         std::to_string(gt.size()) + " frames");
  if (est.size() == 0) throw EmptyInput("pose_metrics: no frames");
  const int joints = model.joint_count();
  for (const Pose& p : est.frames)
    if (static_cast<int>(p.rot.size()) != joints)
      throw DimensionMismatch("pose_metrics: estimated pose has wrong joint count");
  for (const Pose& p : gt.frames)
    if (static_cast<int>(p.rot.size()) != joints)
      throw DimensionMismatch("pose_metrics: reference pose has wrong joint count");

  const std::size_t n = est.size();
  const std::array<int, 4> sip = model.sip_joints();
  std::vector<double> sip_f(n), ang_f(n), pos_f(n), marker_f(n);

  for (std::size_t t = 0; t < n; ++t) {
    const Pose& pe = est.frames[t];
    const Pose& pg = gt.frames[t];

    double sip_sum = 0.0;
    for (int j : sip) sip_sum += geodesic_angle_deg(pe.rot[j], pg.rot[j]);
    sip_f[t] = sip_sum / static_cast<double>(sip.size());

    double ang_sum = 0.0;
    for (int j : model.predicted_joints) ang_sum += geodesic_angle_deg(pe.rot[j], pg.rot[j]);
    ang_f[t] = ang_sum / static_cast<double>(model.predicted_joints.size());

    FkResult fe = forward_kinematics(model, pe);
    FkResult fg = forward_kinematics(model, pg);
    double pos_sum = 0.0;
    for (int j = 1; j < joints; ++j) pos_sum += (fe.position[j] - fg.position[j]).norm();
    pos_f[t] = 100.0 * pos_sum / static_cast<double>(joints - 1);

    std::vector<Vec3> me = skin_markers(model, pe, Vec3::Zero());
    std::vector<Vec3> mg = skin_markers(model, pg, Vec3::Zero());
    double marker_sum = 0.0;
    for (std::size_t k = 0; k < me.size(); ++k) marker_sum += (me[k] - mg[k]).norm();
    marker_f[t] = 100.0 * marker_sum / static_cast<double>(me.size());
  }

  PoseMetricsReport report;
  report.sip_deg = stat_of(sip_f);
  report.angular_deg = stat_of(ang_f);
  report.positional_cm = stat_of(pos_f);
  report.marker_cm = stat_of(marker_f);

  // Jerk of the estimate's world joint positions, third central difference
  // over the interior frames.
  if (n >= 5) {
    std::vector<std::vector<Vec3>> world(n);
    for (std::size_t t = 0; t < n; ++t) {
      FkResult fk = forward_kinematics(model, est.frames[t]);
      world[t].resize(static_cast<std::size_t>(joints));
      for (int j = 0; j < joints; ++j) world[t][j] = est.frames[t].trans + fk.position[j];
    }
    const double h = 1.0 / est.fps;
    const double denom = 2.0 * h * h * h;
    std::vector<double> jerk_f;
    jerk_f.reserve(n - 4);
    for (std::size_t t = 2; t + 2 < n; ++t) {
      double sum = 0.0;
      for (int j = 0; j < joints; ++j) {
        Vec3 d = (-world[t - 2][j] + 2.0 * world[t - 1][j] - 2.0 * world[t + 1][j] +
                  world[t + 2][j]) /
                 denom;
        sum += d.norm();
      }
      jerk_f.push_back(sum / static_cast<double>(joints) / 100.0);
    }
    report.jitter_e2 = stat_of(jerk_f);
  }
  return report;
}

std::vector<double> drift_curve(const std::vector<Vec3>& est, const std::vector<Vec3>& gt,
                                double fps, double horizon_s, double step_s) {
  if (est.size() != gt.size())
    throw LengthMismatch("drift_curve: " + std::to_string(est.size()) + " vs " +
                         std::to_string(gt.size()) + " frames");
  if (est.empty()) throw EmptyInput("drift_curve: no frames");
  if (fps <= 0.0 || horizon_s < 0.0 || step_s <= 0.0)
    throw SequenceTooShort("drift_curve: nonpositive fps or step");

  const long n = static_cast<long>(est.size());
  const int taus = static_cast<int>(std::llround(horizon_s / step_s));
  const long k_max = std::llround(horizon_s * fps);
  if (k_max >= n)
    throw SequenceTooShort("drift_curve: need more than " + std::to_string(k_max) +
                           " frames for a " + std::to_string(horizon_s) + "s horizon, got " +
                           std::to_string(n));

  std::vector<double> curve(static_cast<std::size_t>(taus) + 1, 0.0);
  for (int i = 0; i <= taus; ++i) {
    const long k = std::llround(static_cast<double>(i) * step_s * fps);
    double sum = 0.0;
    long count = 0;
    for (long f = 0; f + k < n; ++f) {
      sum += ((est[f + k] - est[f]) - (gt[f + k] - gt[f])).norm();
      ++count;
    }
    curve[static_cast<std::size_t>(i)] = sum / static_cast<double>(count);
  }
  return curve;
}

std::vector<double> accel_pck(const std::vector<Vec3>& test, const std::vector<Vec3>& ref,
                              const std::vector<double>& thresholds) {
  if (test.size() != ref.size())
    throw LengthMismatch("accel_pck: " + std::to_string(test.size()) + " vs " +
                         std::to_string(ref.size()) + " frames");
  if (test.empty()) throw EmptyInput("accel_pck: no frames");

  std::vector<double> out(thresholds.size(), 0.0);
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    long hit = 0;
    for (std::size_t t = 0; t < test.size(); ++t)
      if ((test[t] - ref[t]).norm() <= thresholds[i]) ++hit;
    out[i] = static_cast<double>(hit) / static_cast<double>(test.size());
  }
  return out;
}

}  // namespace imocap
