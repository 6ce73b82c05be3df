#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "imocap/calibration.hpp"
#include "imocap/eval.hpp"
#include "imocap/skeleton.hpp"
#include "imocap/synth.hpp"

namespace imocap {

// Text format shared by every sequence file: '#' header lines, then one
// comma-separated row of %.17g doubles per frame (17 significant digits,
// so doubles round-trip exactly). The first header line carries the kind
// and the required keys, e.g.
//   # imocap-motion version=1 fps=60 joints=24
// and any further '# key=value' lines are free-form metadata that loaders
// hand back untouched.

using CsvMeta = std::map<std::string, std::string>;

// Motion rows: root translation xyz, then 9 row-major values per joint of
// the global joint rotations.
struct MotionFile {
  MotionSequence seq;
  CsvMeta meta;
};
MotionFile load_motion_csv(const std::string& path);
void save_motion_csv(const std::string& path, const MotionSequence& seq,
                     const CsvMeta& meta = {});

// Calibrated IMU rows (space=calibrated): 6 sensor accelerations xyz, then
// 6 row-major sensor rotations, sensor order root,lleg,rleg,head,larm,rarm.
struct ImuFile {
  ImuSequence seq;
  CsvMeta meta;
};
ImuFile load_imu_csv(const std::string& path);
void save_imu_csv(const std::string& path, const ImuSequence& seq,
                  const CsvMeta& meta = {});

// Raw IMU rows (space=raw): sensor-frame accelerations with gravity, then
// inertial-frame orientations; same column layout as the calibrated file.
struct RawImuFile {
  double fps = 60.0;
  std::vector<ImuRawFrame> frames;
  CsvMeta meta;
};
RawImuFile load_raw_imu_csv(const std::string& path);
void save_raw_imu_csv(const std::string& path, const RawImuFile& file);

// Per-frame contact/velocity rows: left,right,vx,vy,vz (contact values are
// probabilities or hard 0/1 labels; velocity is root-frame meters/frame).
struct LabelsFile {
  double fps = 60.0;
  std::vector<Eigen::Vector2d> contacts;
  std::vector<Vec3> velocity;
  CsvMeta meta;
};
LabelsFile load_labels_csv(const std::string& path);
void save_labels_csv(const std::string& path, const LabelsFile& file);

// A bare 3D trajectory: x,y,z per frame.
struct TrackFile {
  double fps = 60.0;
  std::vector<Vec3> points;
  CsvMeta meta;
};
TrackFile load_track_csv(const std::string& path);
void save_track_csv(const std::string& path, const TrackFile& file);

// Metric report rows: name,mean,stddev.
struct ReportRow {
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;
};
void save_report_csv(const std::string& path, const PoseMetricsReport& report,
                     const CsvMeta& meta = {});
std::vector<ReportRow> load_report_csv(const std::string& path);

// Drift rows: tau_seconds,error_meters.
void save_drift_csv(const std::string& path, const std::vector<double>& curve,
                    double step_s, const CsvMeta& meta = {});
std::vector<std::pair<double, double>> load_drift_csv(const std::string& path);

// One data row without any header, for line-by-line streaming.
std::string format_row(const Eigen::VectorXd& values);
Eigen::VectorXd parse_row(const std::string& line);  // throws ParseError

}  // namespace imocap
