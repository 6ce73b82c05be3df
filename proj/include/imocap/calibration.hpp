#pragma once

#include <Eigen/Core>

#include <array>
#include <vector>

#include "imocap/rotmath.hpp"

namespace imocap {

// Sensor ordering everywhere: root, lleg, rleg, head, larm, rarm.
inline constexpr int kNumSensors = 6;
inline constexpr int kInputWidth = 72;  // 6*3 accelerations + 6*9 rotations

// One frame straight off the sensors: acceleration in each sensor's own
// frame (gravity included), orientation in the shared inertial frame.
struct ImuRawFrame {
  std::array<Vec3, kNumSensors> accel;
  std::array<Mat3, kNumSensors> orient;
};

struct SensorCalibration {
  Mat3 rot_offset = Mat3::Identity();    // sensor-to-bone, inertial side
  Vec3 accel_offset = Vec3::Zero();      // model frame, captures gravity+bias
};

struct CalibrationState {
  Mat3 pim = Mat3::Identity();           // inertial -> model transition
  std::array<SensorCalibration, kNumSensors> sensors;
  double accel_scale = 30.0;             // recorded so train/infer agree
};

// Model-frame bone rotation and gravity-free bone acceleration per sensor.
struct CalibratedFrame {
  std::array<Mat3, kNumSensors> rot;
  std::array<Vec3, kNumSensors> accel;
};

// The inertial->model transition from a still capture of one sensor held
// axis-aligned with the model frame: chordal mean of its orientation
// readings. Throws EmptyInput.
Mat3 estimate_global_alignment(const std::vector<ImuRawFrame>& still_frames,
                               int sensor_index = 0);

// T-pose (or any known-pose) calibration. Readings are averaged over the
// still frames, then per sensor:
//   rot_offset   = orient^-1 * pim * known_bone_rot
//   accel_offset = pim^-1 * orient * accel      (model-frame gravity + bias)
CalibrationState calibrate_t_pose(const Mat3& pim,
                                  const std::vector<ImuRawFrame>& still_frames,
                                  const std::array<Mat3, kNumSensors>& known_bone_rot,
                                  double accel_scale = 30.0);

// Per-frame map into model space:
//   rot   = pim^-1 * orient * rot_offset
//   accel = pim^-1 * orient * raw_accel - accel_offset
CalibratedFrame apply_calibration(const CalibrationState& state, const ImuRawFrame& raw);

// Root-relative normalization into the 72-wide network input:
// leaf accelerations root-relative ((rot_root)^-1 (a_leaf - a_root)), leaf
// rotations root-relative, the root acceleration expressed in the root
// frame, and only the root rotation kept in the model frame; all
// accelerations divided by accel_scale. Layout: 6 accelerations (3 each),
// then 6 rotations (9 each, row-major), sensor order throughout.
Eigen::VectorXd normalize_frame(const CalibratedFrame& frame, double accel_scale);

// Layout helpers for the 72-wide vector.
Vec3 input_accel(const Eigen::VectorXd& x0, int sensor);
Mat3 input_rotation(const Eigen::VectorXd& x0, int sensor);
void set_input_accel(Eigen::VectorXd& x0, int sensor, const Vec3& a);
void set_input_rotation(Eigen::VectorXd& x0, int sensor, const Mat3& r);

CalibrationState load_calibration_json(const std::string& path);
void save_calibration_json(const CalibrationState& state, const std::string& path);

}  // namespace imocap
