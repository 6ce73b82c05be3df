#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

#include "imocap/calibration.hpp"
#include "imocap/skeleton.hpp"

namespace imocap {

struct NetworkParams;
struct NetworkSpec;

// Virtual sensor placement: the bone whose rotation the sensor follows, a
// fixed rotation offset on that bone, and the marker whose trajectory is
// differentiated for acceleration.
struct MountSensor {
  int bone = -1;
  Mat3 rot_offset = Mat3::Identity();
  int marker = -1;
};

struct MountConfig {
  std::array<MountSensor, kNumSensors> sensors;  // sensor order
};

// Identity rotation offsets, markers 0..5 (the skeleton's built-in mount
// points). For custom skeletons picks the first weight-1 marker on each
// sensor bone. Throws ParseError when a bone has none.
MountConfig default_mount(const SkeletonModel& model);

// Calibrated-space IMU stream (model-frame bone rotations + gravity-free
// accelerations), the synth modules' output and the pipeline's input.
struct ImuSequence {
  double fps = 60.0;
  std::vector<CalibratedFrame> frames;
  std::size_t size() const { return frames.size(); }
};

// World-space trajectory of each sensor's marker.
std::vector<std::array<Vec3, kNumSensors>> sensor_positions(
    const MotionSequence& seq, const SkeletonModel& model, const MountConfig& mount);

// Smoothed second difference a(t) = (x(t-n) + x(t+n) - 2x(t)) / (n*dt)^2,
// exact on quadratics for any n. First/last n frames clamp to the nearest
// computable value. Throws SequenceTooShort unless length > 2n.
std::vector<Vec3> second_difference(const std::vector<Vec3>& positions, int n, double dt);

// Virtual IMU readings for a motion: rotation = bone global rotation
// composed with the mount offset; acceleration by the smoothed second
// difference of the mount marker's world trajectory.
ImuSequence synthesize_imu(const MotionSequence& seq, const SkeletonModel& model,
                           const MountConfig& mount, int n = 4);

// Inverse of apply_calibration for round-trip testing and raw-file
// fixtures: re-express calibrated readings through a chosen inertial
// alignment, sensor offsets, and model-frame gravity.
std::vector<ImuRawFrame> synthesize_raw(const ImuSequence& seq, const Mat3& pim,
                                        const std::array<Mat3, kNumSensors>& rot_offsets,
                                        const Vec3& gravity_model);

struct ContactLabels {
  std::vector<std::array<std::uint8_t, 2>> frames;  // (left, right), 0/1
};

// label(t) = 1 iff the foot moved strictly less than u meters since the
// previous frame; frame 0 copies frame 1.
ContactLabels label_contacts(const MotionSequence& seq, const SkeletonModel& model,
                             double u = 0.008);

// Per-frame root-space velocity v(t) = R_root(t)^-1 (x_root(t) - x_root(t-1))
// in meters/frame; frame 0 is zero.
std::vector<Vec3> gt_root_velocity(const MotionSequence& seq);

// Adds i.i.d. zero-mean Gaussian noise to entries [begin, begin+count) of
// every vector (count < 0 = through the end). Deterministic per seed;
// sigma = 0 leaves the input untouched.
void augment_noise(std::vector<Eigen::VectorXd>& vectors, double sigma,
                   std::uint64_t seed, int begin = 0, int count = -1);

// Training-target extraction. Positions are root-relative coordinates
// expressed in the root frame; rotations are root-relative in the 6D
// parametrization, predicted joints only.
std::vector<Eigen::VectorXd> gt_leaf_positions(const MotionSequence& seq,
                                               const SkeletonModel& model);
std::vector<Eigen::VectorXd> gt_all_positions(const MotionSequence& seq,
                                              const SkeletonModel& model);
std::vector<Eigen::VectorXd> gt_rotation_targets(const MotionSequence& seq,
                                                 const SkeletonModel& model);

// Normalized 72-wide network inputs for a motion, composing synthesize_imu
// with the root-relative normalization.
std::vector<Eigen::VectorXd> synth_inputs(const MotionSequence& seq,
                                          const SkeletonModel& model,
                                          const MountConfig& mount, int n = 4,
                                          double accel_scale = 30.0);

// Half-open frame range of one sequence in a dataset.
struct ClipRef {
  int sequence = 0;
  int begin = 0;
  int end = 0;
};

// Maximal runs where the contact net's max(s_l, s_r) stays below sbar,
// split into chunks of at most max_len frames.
std::vector<ClipRef> select_airborne_clips(
    const std::vector<std::vector<Eigen::VectorXd>>& x1_sequences,
    const NetworkParams& contact_params, const NetworkSpec& contact_spec, double sbar,
    int max_len = 300);

}  // namespace imocap
