#include "imocap/seqio.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "imocap/errors.hpp"

namespace imocap {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_values(const std::string& line, const std::string& where) {
  std::vector<double> out;
  const char* p = line.c_str();
  while (true) {
    char* end = nullptr;
    double v = std::strtod(p, &end);
    if (end == p) throw ParseError(where + ": expected a number at '" + p + "'");
    out.push_back(v);
    p = end;
    while (*p == ' ' || *p == '\t') ++p;
    if (*p == '\0') break;
    if (*p != ',') throw ParseError(where + ": expected ',' at '" + p + "'");
    ++p;
  }
  return out;
}

struct Table {
  std::map<std::string, std::string> head;
  CsvMeta meta;
  std::vector<std::string> raw;  // data lines in order
  std::string path;
};

Table read_table(const std::string& path, const std::string& kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  Table t;
  t.path = path;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string body = line.substr(1);
      std::size_t start = body.find_first_not_of(' ');
      body = start == std::string::npos ? std::string() : body.substr(start);
      if (!have_header) {
        std::istringstream ss(body);
        std::string tag;
        ss >> tag;
        if (tag != "imocap-" + kind)
          throw ParseError(path + ": expected an imocap-" + kind + " header, got '" +
                           tag + "'");
        std::string kv;
        while (ss >> kv) {
          std::size_t eq = kv.find('=');
          if (eq == std::string::npos)
            throw ParseError(path + ": malformed header token '" + kv + "'");
          t.head[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        auto ver = t.head.find("version");
        if (ver == t.head.end() || ver->second != "1")
          throw ParseError(path + ": unsupported or missing version");
        have_header = true;
      } else {
        std::size_t eq = body.find('=');
        if (eq != std::string::npos)
          t.meta[body.substr(0, eq)] = body.substr(eq + 1);
        // '#' lines without '=' are plain comments
      }
      continue;
    }
    if (!have_header) throw ParseError(path + ": data before the header line");
    t.raw.push_back(line);
  }
  if (!have_header) throw ParseError(path + ": missing header line");
  return t;
}

std::vector<std::vector<double>> numeric_rows(const Table& t, std::size_t cols) {
  std::vector<std::vector<double>> rows;
  rows.reserve(t.raw.size());
  for (std::size_t i = 0; i < t.raw.size(); ++i) {
    std::vector<double> v =
        parse_values(t.raw[i], t.path + " row " + std::to_string(i + 1));
    if (v.size() != cols)
      throw ParseError(t.path + " row " + std::to_string(i + 1) + ": expected " +
                       std::to_string(cols) + " columns, got " + std::to_string(v.size()));
    rows.push_back(std::move(v));
  }
  return rows;
}

double head_num(const Table& t, const std::string& key) {
  auto it = t.head.find(key);
  if (it == t.head.end()) throw ParseError(t.path + ": header misses '" + key + "'");
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0')
    throw ParseError(t.path + ": header '" + key + "' is not a number");
  return v;
}

std::string head_str(const Table& t, const std::string& key) {
  auto it = t.head.find(key);
  if (it == t.head.end()) throw ParseError(t.path + ": header misses '" + key + "'");
  return it->second;
}

class Writer {
 public:
  Writer(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw IoError("cannot write " + path);
  }
  void header(const std::string& kind,
              const std::vector<std::pair<std::string, std::string>>& keys,
              const CsvMeta& meta) {
    out_ << "# imocap-" << kind << " version=1";
    for (const auto& [k, v] : keys) out_ << ' ' << k << '=' << v;
    out_ << '\n';
    for (const auto& [k, v] : meta) out_ << "# " << k << '=' << v << '\n';
  }
  void row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << fmt(values[i]);
    }
    out_ << '\n';
  }
  void line(const std::string& s) { out_ << s << '\n'; }
  void close() {
    out_.flush();
    if (!out_) throw IoError("failed while writing " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void append_mat3(std::vector<double>& row, const Mat3& m) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) row.push_back(m(r, c));
}

Mat3 take_mat3(const std::vector<double>& row, std::size_t at) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = row[at + 3 * r + c];
  return m;
}

double positive_fps(const Table& t) {
  double fps = head_num(t, "fps");
  if (!(fps > 0.0)) throw ParseError(t.path + ": fps must be positive");
  return fps;
}

}  // namespace

void save_motion_csv(const std::string& path, const MotionSequence& seq,
                     const CsvMeta& meta) {
  const int joints = seq.frames.empty() ? 0 : static_cast<int>(seq.frames[0].rot.size());
  for (const Pose& p : seq.frames)
    if (static_cast<int>(p.rot.size()) != joints)
      throw DimensionMismatch("save_motion_csv: ragged joint counts");
  Writer w(path);
  w.header("motion", {{"fps", fmt(seq.fps)}, {"joints", std::to_string(joints)}}, meta);
  std::vector<double> row;
  for (const Pose& p : seq.frames) {
    row.clear();
    row.push_back(p.trans.x());
    row.push_back(p.trans.y());
    row.push_back(p.trans.z());
    for (const Mat3& r : p.rot) append_mat3(row, r);
    w.row(row);
  }
  w.close();
}

MotionFile load_motion_csv(const std::string& path) {
  Table t = read_table(path, "motion");
  const int joints = static_cast<int>(head_num(t, "joints"));
  if (joints < 0) throw ParseError(path + ": negative joint count");
  MotionFile f;
  f.seq.fps = positive_fps(t);
  f.meta = t.meta;
  auto rows = numeric_rows(t, 3 + 9 * static_cast<std::size_t>(joints));
  f.seq.frames.reserve(rows.size());
  for (const auto& row : rows) {
    Pose p;
    p.trans = Vec3(row[0], row[1], row[2]);
    p.rot.reserve(joints);
    for (int j = 0; j < joints; ++j) p.rot.push_back(take_mat3(row, 3 + 9 * j));
    f.seq.frames.push_back(std::move(p));
  }
  return f;
}

namespace {

void save_imu_like(const std::string& path, const char* space, double fps,
                   std::size_t n, const CsvMeta& meta,
                   const std::function<void(std::size_t, std::vector<double>&)>& fill) {
  Writer w(path);
  w.header("imu", {{"fps", fmt(fps)}, {"space", space}}, meta);
  std::vector<double> row;
  for (std::size_t t = 0; t < n; ++t) {
    row.clear();
    fill(t, row);
    w.row(row);
  }
  w.close();
}

}  // namespace

void save_imu_csv(const std::string& path, const ImuSequence& seq, const CsvMeta& meta) {
  save_imu_like(path, "calibrated", seq.fps, seq.size(), meta,
                [&](std::size_t t, std::vector<double>& row) {
                  const CalibratedFrame& f = seq.frames[t];
                  for (int s = 0; s < kNumSensors; ++s)
                    for (int i = 0; i < 3; ++i) row.push_back(f.accel[s][i]);
                  for (int s = 0; s < kNumSensors; ++s) append_mat3(row, f.rot[s]);
                });
}

ImuFile load_imu_csv(const std::string& path) {
  Table t = read_table(path, "imu");
  if (head_str(t, "space") != "calibrated")
    throw ParseError(path + ": expected space=calibrated, got space=" +
                     head_str(t, "space"));
  ImuFile f;
  f.seq.fps = positive_fps(t);
  f.meta = t.meta;
  auto rows = numeric_rows(t, kInputWidth);
  f.seq.frames.reserve(rows.size());
  for (const auto& row : rows) {
    CalibratedFrame frame;
    for (int s = 0; s < kNumSensors; ++s)
      frame.accel[s] = Vec3(row[3 * s], row[3 * s + 1], row[3 * s + 2]);
    for (int s = 0; s < kNumSensors; ++s) frame.rot[s] = take_mat3(row, 18 + 9 * s);
    f.seq.frames.push_back(frame);
  }
  return f;
}

void save_raw_imu_csv(const std::string& path, const RawImuFile& file) {
  save_imu_like(path, "raw", file.fps, file.frames.size(), file.meta,
                [&](std::size_t t, std::vector<double>& row) {
                  const ImuRawFrame& f = file.frames[t];
                  for (int s = 0; s < kNumSensors; ++s)
                    for (int i = 0; i < 3; ++i) row.push_back(f.accel[s][i]);
                  for (int s = 0; s < kNumSensors; ++s) append_mat3(row, f.orient[s]);
                });
}

RawImuFile load_raw_imu_csv(const std::string& path) {
  Table t = read_table(path, "imu");
  if (head_str(t, "space") != "raw")
    throw ParseError(path + ": expected space=raw, got space=" + head_str(t, "space"));
  RawImuFile f;
  f.fps = positive_fps(t);
  f.meta = t.meta;
  auto rows = numeric_rows(t, kInputWidth);
  f.frames.reserve(rows.size());
  for (const auto& row : rows) {
    ImuRawFrame frame;
    for (int s = 0; s < kNumSensors; ++s)
      frame.accel[s] = Vec3(row[3 * s], row[3 * s + 1], row[3 * s + 2]);
    for (int s = 0; s < kNumSensors; ++s) frame.orient[s] = take_mat3(row, 18 + 9 * s);
    f.frames.push_back(frame);
  }
  return f;
}

void save_labels_csv(const std::string& path, const LabelsFile& file) {
  if (file.contacts.size() != file.velocity.size())
    throw LengthMismatch("save_labels_csv: contacts and velocity disagree");
  Writer w(path);
  w.header("labels", {{"fps", fmt(file.fps)}}, file.meta);
  for (std::size_t t = 0; t < file.contacts.size(); ++t)
    w.row({file.contacts[t][0], file.contacts[t][1], file.velocity[t].x(),
           file.velocity[t].y(), file.velocity[t].z()});
  w.close();
}

LabelsFile load_labels_csv(const std::string& path) {
  Table t = read_table(path, "labels");
  LabelsFile f;
  f.fps = positive_fps(t);
  f.meta = t.meta;
  for (const auto& row : numeric_rows(t, 5)) {
    f.contacts.emplace_back(row[0], row[1]);
    f.velocity.emplace_back(row[2], row[3], row[4]);
  }
  return f;
}

void save_track_csv(const std::string& path, const TrackFile& file) {
  Writer w(path);
  w.header("track", {{"fps", fmt(file.fps)}}, file.meta);
  for (const Vec3& p : file.points) w.row({p.x(), p.y(), p.z()});
  w.close();
}

TrackFile load_track_csv(const std::string& path) {
  Table t = read_table(path, "track");
  TrackFile f;
  f.fps = positive_fps(t);
  f.meta = t.meta;
  for (const auto& row : numeric_rows(t, 3)) f.points.emplace_back(row[0], row[1], row[2]);
  return f;
}

void save_report_csv(const std::string& path, const PoseMetricsReport& report,
                     const CsvMeta& meta) {
  Writer w(path);
  w.header("report", {}, meta);
  auto row = [&](const char* name, const MetricStat& s) {
    w.line(std::string(name) + "," + fmt(s.mean) + "," + fmt(s.stddev));
  };
  row("sip_deg", report.sip_deg);
  row("angular_deg", report.angular_deg);
  row("positional_cm", report.positional_cm);
  row("marker_cm", report.marker_cm);
  row("jitter_e2", report.jitter_e2);
  w.close();
}

std::vector<ReportRow> load_report_csv(const std::string& path) {
  Table t = read_table(path, "report");
  std::vector<ReportRow> out;
  for (std::size_t i = 0; i < t.raw.size(); ++i) {
    const std::string& line = t.raw[i];
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(path + " row " + std::to_string(i + 1) + ": expected name,mean,stddev");
    ReportRow r;
    r.metric = line.substr(0, comma);
    std::vector<double> nums = parse_values(line.substr(comma + 1),
                                            path + " row " + std::to_string(i + 1));
    if (nums.size() != 2)
      throw ParseError(path + " row " + std::to_string(i + 1) + ": expected two numbers");
    r.mean = nums[0];
    r.stddev = nums[1];
    out.push_back(std::move(r));
  }
  return out;
}

void save_drift_csv(const std::string& path, const std::vector<double>& curve,
                    double step_s, const CsvMeta& meta) {
  Writer w(path);
  w.header("drift", {{"step", fmt(step_s)}}, meta);
  for (std::size_t i = 0; i < curve.size(); ++i)
    w.row({static_cast<double>(i) * step_s, curve[i]});
  w.close();
}

std::vector<std::pair<double, double>> load_drift_csv(const std::string& path) {
  Table t = read_table(path, "drift");
  std::vector<std::pair<double, double>> out;
  for (const auto& row : numeric_rows(t, 2)) out.emplace_back(row[0], row[1]);
  return out;
}

std::string format_row(const Eigen::VectorXd& values) {
  std::string out;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += fmt(values[i]);
  }
  return out;
}

Eigen::VectorXd parse_row(const std::string& line) {
  std::vector<double> v = parse_values(line, "row");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

}  // namespace imocap
