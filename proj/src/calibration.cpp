#include "imocap/calibration.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "imocap/errors.hpp"

namespace imocap {

using nlohmann::json;

Mat3 estimate_global_alignment(const std::vector<ImuRawFrame>& still_frames,
                               int sensor_index) {
  if (still_frames.empty()) throw EmptyInput("estimate_global_alignment: no frames");
  std::vector<Mat3> readings;
  readings.reserve(still_frames.size());
  for (const ImuRawFrame& f : still_frames) readings.push_back(f.orient[sensor_index]);
  return chordal_mean(readings);
}

CalibrationState calibrate_t_pose(const Mat3& pim,
                                  const std::vector<ImuRawFrame>& still_frames,
                                  const std::array<Mat3, kNumSensors>& known_bone_rot,
                                  double accel_scale) {
  if (still_frames.empty()) throw EmptyInput("calibrate_t_pose: no frames");
  CalibrationState state;
  state.pim = pim;
  state.accel_scale = accel_scale;
  for (int s = 0; s < kNumSensors; ++s) {
    std::vector<Mat3> orients;
    orients.reserve(still_frames.size());
    Vec3 accel_sum = Vec3::Zero();
    for (const ImuRawFrame& f : still_frames) {
      orients.push_back(f.orient[s]);
      accel_sum += f.accel[s];
    }
    Mat3 orient = chordal_mean(orients);
    Vec3 accel = accel_sum / static_cast<double>(still_frames.size());
    state.sensors[s].rot_offset = orient.transpose() * pim * known_bone_rot[s];
    state.sensors[s].accel_offset = pim.transpose() * orient * accel;
  }
  return state;
}

CalibratedFrame apply_calibration(const CalibrationState& state, const ImuRawFrame& raw) {
  CalibratedFrame out;
  Mat3 pim_inv = state.pim.transpose();
  for (int s = 0; s < kNumSensors; ++s) {
    out.rot[s] = pim_inv * raw.orient[s] * state.sensors[s].rot_offset;
    out.accel[s] = pim_inv * raw.orient[s] * raw.accel[s] - state.sensors[s].accel_offset;
  }
  return out;
}

Eigen::VectorXd normalize_frame(const CalibratedFrame& frame, double accel_scale) {
  if (accel_scale <= 0) throw BadThresholds("normalize_frame: accelScale must be > 0");
  Eigen::VectorXd x0(kInputWidth);
  const Mat3& root = frame.rot[0];
  Mat3 root_inv = root.transpose();
  set_input_accel(x0, 0, root_inv * frame.accel[0] / accel_scale);
  set_input_rotation(x0, 0, root);
  for (int s = 1; s < kNumSensors; ++s) {
    set_input_accel(x0, s, root_inv * (frame.accel[s] - frame.accel[0]) / accel_scale);
    set_input_rotation(x0, s, root_inv * frame.rot[s]);
  }
  return x0;
}

Vec3 input_accel(const Eigen::VectorXd& x0, int sensor) {
  return x0.segment<3>(3 * sensor);
}

Mat3 input_rotation(const Eigen::VectorXd& x0, int sensor) {
  Mat3 r;
  int base = 18 + 9 * sensor;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = x0[base + 3 * i + j];
  return r;
}

void set_input_accel(Eigen::VectorXd& x0, int sensor, const Vec3& a) {
  x0.segment<3>(3 * sensor) = a;
}

void set_input_rotation(Eigen::VectorXd& x0, int sensor, const Mat3& r) {
  int base = 18 + 9 * sensor;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) x0[base + 3 * i + j] = r(i, j);
}

namespace {

json mat_to_json(const Mat3& m) {
  json a = json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a.push_back(m(i, j));
  return a;
}

Mat3 mat_from_json(const json& a) {
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = a.at(3 * i + j).get<double>();
  return m;
}

}  // namespace

CalibrationState load_calibration_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calibration file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json doc;
  try {
    doc = json::parse(ss.str());
    CalibrationState state;
    state.pim = mat_from_json(doc.at("pim"));
    const json& sensors = doc.at("sensors");
    if (sensors.size() != kNumSensors)
      throw ParseError("calibration json: expected 6 sensors");
    for (int s = 0; s < kNumSensors; ++s) {
      state.sensors[s].rot_offset = mat_from_json(sensors.at(s).at("rotOffset"));
      const json& ao = sensors.at(s).at("accelOffset");
      state.sensors[s].accel_offset =
          Vec3(ao.at(0).get<double>(), ao.at(1).get<double>(), ao.at(2).get<double>());
    }
    state.accel_scale = doc.at("accelScale").get<double>();
    return state;
  } catch (const json::exception& e) {
    throw ParseError(std::string("calibration json: ") + e.what());
  }
}

void save_calibration_json(const CalibrationState& state, const std::string& path) {
  json sensors = json::array();
  for (int s = 0; s < kNumSensors; ++s) {
    const SensorCalibration& sc = state.sensors[s];
    sensors.push_back({{"rotOffset", mat_to_json(sc.rot_offset)},
                       {"accelOffset",
                        {sc.accel_offset.x(), sc.accel_offset.y(), sc.accel_offset.z()}}});
  }
  json doc = {{"pim", mat_to_json(state.pim)},
              {"sensors", sensors},
              {"accelScale", state.accel_scale}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration file: " + path);
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("short write: " + path);
}

}  // namespace imocap
