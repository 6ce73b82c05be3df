#include "imocap/synth.hpp"

#include <cmath>
#include <random>

#include "imocap/errors.hpp"
#include "imocap/nets.hpp"

namespace imocap {

MountConfig default_mount(const SkeletonModel& model) {
  MountConfig mount;
  const std::array<int, 6> bones = model.sensor_joints();
  for (int s = 0; s < kNumSensors; ++s) {
    mount.sensors[s].bone = bones[s];
    mount.sensors[s].rot_offset = Mat3::Identity();
    int marker = -1;
    for (std::size_t m = 0; m < model.markers.size(); ++m) {
      const MarkerBinding& b = model.markers[m];
      if (b.weights.size() == 1 && b.weights[0].first == bones[s] &&
          b.weights[0].second == 1.0) {
        marker = static_cast<int>(m);
        break;
      }
    }
    if (marker < 0)
      throw ParseError("default_mount: no full-weight marker on sensor bone " +
                       std::to_string(bones[s]));
    mount.sensors[s].marker = marker;
  }
  return mount;
}

std::vector<std::array<Vec3, kNumSensors>> sensor_positions(const MotionSequence& seq,
                                                            const SkeletonModel& model,
                                                            const MountConfig& mount) {
  std::vector<std::array<Vec3, kNumSensors>> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    std::vector<Vec3> markers = skin_markers(model, seq.frames[t], seq.frames[t].trans);
    for (int s = 0; s < kNumSensors; ++s) out[t][s] = markers[mount.sensors[s].marker];
  }
  return out;
}

std::vector<Vec3> second_difference(const std::vector<Vec3>& positions, int n, double dt) {
  const int t_len = static_cast<int>(positions.size());
  if (n < 1) throw BadThresholds("second_difference: n must be >= 1");
  if (t_len <= 2 * n)
    throw SequenceTooShort("second_difference: need more than " + std::to_string(2 * n) +
                           " frames, got " + std::to_string(t_len));
  const double inv = 1.0 / (n * dt * n * dt);
  std::vector<Vec3> accel(t_len);
  for (int t = n; t < t_len - n; ++t)
    accel[t] = (positions[t - n] + positions[t + n] - 2.0 * positions[t]) * inv;
  for (int t = 0; t < n; ++t) accel[t] = accel[n];
  for (int t = t_len - n; t < t_len; ++t) accel[t] = accel[t_len - n - 1];
  return accel;
}

ImuSequence synthesize_imu(const MotionSequence& seq, const SkeletonModel& model,
                           const MountConfig& mount, int n) {
  const std::vector<std::array<Vec3, kNumSensors>> pos = sensor_positions(seq, model, mount);
  const double dt = 1.0 / seq.fps;

  ImuSequence out;
  out.fps = seq.fps;
  out.frames.resize(seq.size());
  for (int s = 0; s < kNumSensors; ++s) {
    std::vector<Vec3> track(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) track[t] = pos[t][s];
    std::vector<Vec3> accel = second_difference(track, n, dt);
    const int bone = mount.sensors[s].bone;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      out.frames[t].rot[s] = seq.frames[t].rot[bone] * mount.sensors[s].rot_offset;
      out.frames[t].accel[s] = accel[t];
    }
  }
  return out;
}

std::vector<ImuRawFrame> synthesize_raw(const ImuSequence& seq, const Mat3& pim,
                                        const std::array<Mat3, kNumSensors>& rot_offsets,
                                        const Vec3& gravity_model) {
  std::vector<ImuRawFrame> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const CalibratedFrame& f = seq.frames[t];
    for (int s = 0; s < kNumSensors; ++s) {
      out[t].orient[s] = pim * f.rot[s] * rot_offsets[s].transpose();
      out[t].accel[s] = out[t].orient[s].transpose() * pim * (f.accel[s] + gravity_model);
    }
  }
  return out;
}

ContactLabels label_contacts(const MotionSequence& seq, const SkeletonModel& model,
                             double u) {
  if (seq.size() < 2) throw SequenceTooShort("label_contacts: need at least 2 frames");
  const int feet[2] = {model.left_foot, model.right_foot};
  std::vector<std::array<Vec3, 2>> foot_pos(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    FkResult fk = forward_kinematics(model, seq.frames[t]);
    for (int f = 0; f < 2; ++f) foot_pos[t][f] = fk.position[feet[f]] + seq.frames[t].trans;
  }
  ContactLabels labels;
  labels.frames.resize(seq.size());
  for (std::size_t t = 1; t < seq.size(); ++t)
    for (int f = 0; f < 2; ++f)
      labels.frames[t][f] = (foot_pos[t][f] - foot_pos[t - 1][f]).norm() < u ? 1 : 0;
  labels.frames[0] = labels.frames[1];
  return labels;
}

std::vector<Vec3> gt_root_velocity(const MotionSequence& seq) {
  if (seq.size() < 2) throw SequenceTooShort("gt_root_velocity: need at least 2 frames");
  std::vector<Vec3> v(seq.size());
  v[0] = Vec3::Zero();
  for (std::size_t t = 1; t < seq.size(); ++t)
    v[t] = seq.frames[t].rot[0].transpose() *
           (seq.frames[t].trans - seq.frames[t - 1].trans);
  return v;
}

void augment_noise(std::vector<Eigen::VectorXd>& vectors, double sigma, std::uint64_t seed,
                   int begin, int count) {
  if (sigma < 0) throw BadThresholds("augment_noise: sigma must be >= 0");
  if (sigma == 0) return;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (Eigen::VectorXd& v : vectors) {
    const int end = count < 0 ? static_cast<int>(v.size())
                              : std::min<int>(begin + count, static_cast<int>(v.size()));
    for (int i = begin; i < end; ++i) v[i] += noise(rng);
  }
}

std::vector<Eigen::VectorXd> gt_leaf_positions(const MotionSequence& seq,
                                               const SkeletonModel& model) {
  const std::array<int, 5> leaves = model.leaf_joints();
  std::vector<Eigen::VectorXd> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    FkResult fk = forward_kinematics(model, seq.frames[t]);
    Mat3 root_inv = seq.frames[t].rot[0].transpose();
    Eigen::VectorXd p(15);
    for (int i = 0; i < 5; ++i) p.segment<3>(3 * i) = root_inv * fk.position[leaves[i]];
    out[t] = std::move(p);
  }
  return out;
}

std::vector<Eigen::VectorXd> gt_all_positions(const MotionSequence& seq,
                                              const SkeletonModel& model) {
  const int j = model.joint_count();
  std::vector<Eigen::VectorXd> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    FkResult fk = forward_kinematics(model, seq.frames[t]);
    Mat3 root_inv = seq.frames[t].rot[0].transpose();
    Eigen::VectorXd p(3 * (j - 1));
    for (int i = 1; i < j; ++i) p.segment<3>(3 * (i - 1)) = root_inv * fk.position[i];
    out[t] = std::move(p);
  }
  return out;
}

std::vector<Eigen::VectorXd> gt_rotation_targets(const MotionSequence& seq,
                                                 const SkeletonModel& model) {
  const std::vector<int>& joints = model.predicted_joints;
  std::vector<Eigen::VectorXd> out(seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Pose& pose = seq.frames[t];
    Mat3 root_inv = pose.rot[0].transpose();
    Eigen::VectorXd r(6 * joints.size());
    for (std::size_t i = 0; i < joints.size(); ++i)
      r.segment<6>(6 * static_cast<int>(i)) = matrix_to_rot6d(root_inv * pose.rot[joints[i]]);
    out[t] = std::move(r);
  }
  return out;
}

std::vector<Eigen::VectorXd> synth_inputs(const MotionSequence& seq,
                                          const SkeletonModel& model,
                                          const MountConfig& mount, int n,
                                          double accel_scale) {
  ImuSequence imu = synthesize_imu(seq, model, mount, n);
  std::vector<Eigen::VectorXd> out(imu.size());
  for (std::size_t t = 0; t < imu.size(); ++t)
    out[t] = normalize_frame(imu.frames[t], accel_scale);
  return out;
}

std::vector<ClipRef> select_airborne_clips(
    const std::vector<std::vector<Eigen::VectorXd>>& x1_sequences,
    const NetworkParams& contact_params, const NetworkSpec& contact_spec, double sbar,
    int max_len) {
  if (max_len < 1) throw BadThresholds("select_airborne_clips: max_len must be >= 1");
  std::vector<ClipRef> clips;
  for (std::size_t si = 0; si < x1_sequences.size(); ++si) {
    const std::vector<Eigen::VectorXd>& x1 = x1_sequences[si];
    if (x1.empty()) continue;
    std::vector<Eigen::VectorXd> probs =
        forward_window(contact_params, contact_spec, x1);
    int run_start = -1;
    auto flush = [&](int end) {
      if (run_start < 0) return;
      for (int at = run_start; at < end; at += max_len)
        clips.push_back({static_cast<int>(si), at, std::min(end, at + max_len)});
      run_start = -1;
    };
    for (std::size_t t = 0; t < probs.size(); ++t) {
      const double s = std::max(probs[t][0], probs[t][1]);
      if (s < sbar) {
        if (run_start < 0) run_start = static_cast<int>(t);
      } else {
        flush(static_cast<int>(t));
      }
    }
    flush(static_cast<int>(probs.size()));
  }
  return clips;
}

}  // namespace imocap
