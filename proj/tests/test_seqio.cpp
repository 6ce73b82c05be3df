#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "imocap/errors.hpp"
#include "imocap/eval.hpp"
#include "imocap/motiongen.hpp"
#include "imocap/seqio.hpp"
#include "imocap/skeleton.hpp"
#include "imocap/synth.hpp"

using namespace imocap;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

struct TmpDir {
  std::filesystem::path dir;
  TmpDir() : dir(std::filesystem::temp_directory_path() / "imocap_seqio_test") {
    std::filesystem::create_directories(dir);
  }
  ~TmpDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const char* name) const { return (dir / name).string(); }
};

}  // namespace

TEST_CASE("motion files round-trip bit for bit") {
  TmpDir tmp;
  SkeletonModel m = default_skeleton();
  MotionSequence seq = gen_walk(m, 0.7).motion;
  CsvMeta meta{{"source", "unit-test"}, {"subject", "walk 42"}};

  std::string path = tmp / "walk.csv";
  save_motion_csv(path, seq, meta);
  MotionFile back = load_motion_csv(path);

  CHECK(back.seq.fps == seq.fps);
  CHECK(back.meta == meta);
  REQUIRE(back.seq.size() == seq.size());
  for (std::size_t t = 0; t < seq.size(); ++t) {
    CHECK(back.seq.frames[t].trans == seq.frames[t].trans);
    for (std::size_t j = 0; j < seq.frames[t].rot.size(); ++j)
      CHECK(back.seq.frames[t].rot[j] == seq.frames[t].rot[j]);
  }

  // Saving the loaded copy reproduces the file byte for byte.
  std::string again = tmp / "walk2.csv";
  save_motion_csv(again, back.seq, back.meta);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("empty motion files are legal") {
  TmpDir tmp;
  MotionSequence empty;
  empty.fps = 31.25;
  std::string path = tmp / "empty.csv";
  save_motion_csv(path, empty);
  MotionFile back = load_motion_csv(path);
  CHECK(back.seq.size() == 0);
  CHECK(back.seq.fps == 31.25);
}

TEST_CASE("calibrated and raw imu files round-trip") {
  TmpDir tmp;
  SkeletonModel m = default_skeleton();
  ImuSequence imu = synthesize_imu(gen_walk(m, 0.5).motion, m, default_mount(m));

  std::string path = tmp / "imu.csv";
  save_imu_csv(path, imu, {{"units", "m/s^2"}});
  ImuFile back = load_imu_csv(path);
  CHECK(back.seq.fps == imu.fps);
  CHECK(back.meta.at("units") == "m/s^2");
  REQUIRE(back.seq.size() == imu.size());
  for (std::size_t t = 0; t < imu.size(); ++t)
    for (int s = 0; s < kNumSensors; ++s) {
      CHECK(back.seq.frames[t].accel[s] == imu.frames[t].accel[s]);
      CHECK(back.seq.frames[t].rot[s] == imu.frames[t].rot[s]);
    }

  RawImuFile raw;
  raw.fps = imu.fps;
  raw.frames = synthesize_raw(imu, rot_y(0.3), {Mat3::Identity(), rot_x(0.1), rot_y(0.2),
                                                rot_z(0.3), rot_x(-0.2), rot_y(-0.1)},
                              Vec3(0, -9.81, 0));
  std::string rpath = tmp / "raw.csv";
  save_raw_imu_csv(rpath, raw);
  RawImuFile rback = load_raw_imu_csv(rpath);
  REQUIRE(rback.frames.size() == raw.frames.size());
  for (std::size_t t = 0; t < raw.frames.size(); ++t)
    for (int s = 0; s < kNumSensors; ++s) {
      CHECK(rback.frames[t].accel[s] == raw.frames[t].accel[s]);
      CHECK(rback.frames[t].orient[s] == raw.frames[t].orient[s]);
    }

  // The two spaces must not be confused for one another.
  CHECK_THROWS_AS(load_imu_csv(rpath), ParseError);
  CHECK_THROWS_AS(load_raw_imu_csv(path), ParseError);
}

TEST_CASE("labels and track files round-trip") {
  TmpDir tmp;
  LabelsFile labels;
  labels.fps = 60.0;
  for (int t = 0; t < 9; ++t) {
    labels.contacts.emplace_back(t % 2, 1.0 - 0.01 * t);
    labels.velocity.emplace_back(0.1 * t, -0.3, 1.0 / (t + 1));
  }
  std::string lp = tmp / "labels.csv";
  save_labels_csv(lp, labels);
  LabelsFile lback = load_labels_csv(lp);
  REQUIRE(lback.contacts.size() == labels.contacts.size());
  for (std::size_t t = 0; t < labels.contacts.size(); ++t) {
    CHECK(lback.contacts[t] == labels.contacts[t]);
    CHECK(lback.velocity[t] == labels.velocity[t]);
  }

  LabelsFile ragged = labels;
  ragged.velocity.pop_back();
  CHECK_THROWS_AS(save_labels_csv(tmp / "bad.csv", ragged), LengthMismatch);

  TrackFile track;
  track.fps = 30.0;
  for (int t = 0; t < 5; ++t) track.points.emplace_back(t * 0.1, 0.9, -t * 0.05);
  std::string tp = tmp / "track.csv";
  save_track_csv(tp, track);
  TrackFile tback = load_track_csv(tp);
  CHECK(tback.fps == 30.0);
  REQUIRE(tback.points.size() == track.points.size());
  for (std::size_t t = 0; t < track.points.size(); ++t)
    CHECK(tback.points[t] == track.points[t]);
}

TEST_CASE("report and drift files round-trip") {
  TmpDir tmp;
  PoseMetricsReport rep;
  rep.sip_deg = {12.5, 3.25};
  rep.angular_deg = {8.125, 2.0};
  rep.positional_cm = {5.0625, 1.5};
  rep.marker_cm = {6.5, 0.75};
  rep.jitter_e2 = {0.1234567890123456, 0.01};

  std::string rp = tmp / "report.csv";
  save_report_csv(rp, rep, {{"sequence", "walk-1"}});
  std::vector<ReportRow> rows = load_report_csv(rp);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].metric == "sip_deg");
  CHECK(rows[0].mean == 12.5);
  CHECK(rows[0].stddev == 3.25);
  CHECK(rows[4].metric == "jitter_e2");
  CHECK(rows[4].mean == 0.1234567890123456);

  std::vector<double> curve{0.0, 0.01, 0.04, 0.09};
  std::string dp = tmp / "drift.csv";
  save_drift_csv(dp, curve, 0.1);
  auto dback = load_drift_csv(dp);
  REQUIRE(dback.size() == 4);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(dback[i].first == 0.1 * double(i));
    CHECK(dback[i].second == curve[i]);
  }
}

TEST_CASE("format_row and parse_row invert each other") {
  Eigen::VectorXd v(5);
  v << 1.0 / 3.0, -2.5e-17, 0.0, 3.0, -1e300;
  Eigen::VectorXd back = parse_row(format_row(v));
  REQUIRE(back.size() == v.size());
  for (int i = 0; i < v.size(); ++i) CHECK(back[i] == v[i]);

  CHECK_THROWS_AS(parse_row("1.0,,2.0"), ParseError);
  CHECK_THROWS_AS(parse_row("1.0,abc"), ParseError);
  CHECK_THROWS_AS(parse_row(""), ParseError);
}

TEST_CASE("malformed files raise ParseError with context") {
  TmpDir tmp;
  std::string p = tmp / "bad.csv";

  spit(p, "1,2,3\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // data before header

  spit(p, "# imocap-track version=2 fps=60\n1,2,3\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // wrong version

  spit(p, "# imocap-motion version=1 fps=60 joints=24\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // wrong kind

  spit(p, "# imocap-track version=1 fps=60\n1,2\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // wrong column count

  spit(p, "# imocap-track version=1 fps=60\n1,2,fish\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // garbage token

  spit(p, "# imocap-track version=1 fps=-5\n1,2,3\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // bad fps

  spit(p, "# imocap-track version=1\n1,2,3\n");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // missing fps

  spit(p, "");
  CHECK_THROWS_AS(load_track_csv(p), ParseError);  // empty file

  CHECK_THROWS_AS(load_track_csv(tmp / "missing.csv"), IoError);
  TrackFile track;
  track.points.emplace_back(1, 2, 3);
  CHECK_THROWS_AS(save_track_csv("/nonexistent_dir_zz/x.csv", track), IoError);
}

TEST_CASE("comment lines and crlf endings are tolerated") {
  TmpDir tmp;
  std::string p = tmp / "crlf.csv";
  spit(p,
       "# imocap-track version=1 fps=60\r\n"
       "# recorded by unit test\r\n"
       "# operator=someone with spaces\r\n"
       "\r\n"
       "0.5,1.5,-2.5\r\n");
  TrackFile t = load_track_csv(p);
  REQUIRE(t.points.size() == 1);
  CHECK(t.points[0] == Vec3(0.5, 1.5, -2.5));
  CHECK(t.meta.at("operator") == "someone with spaces");
}

TEST_CASE("golden walk fixtures stay reproducible") {
  // Committed outputs of the walk generator + virtual IMU; regenerate with
  // IMOCAP_REGEN_GOLDEN=1 when the generator is intentionally changed.
  const std::string dir = IMOCAP_TEST_DATA_DIR;
  const std::string mpath = dir + "/golden_walk_motion.csv";
  const std::string ipath = dir + "/golden_walk_imu.csv";

  SkeletonModel m = default_skeleton();
  GeneratedMotion g = gen_walk(m, 0.5);
  ImuSequence imu = synthesize_imu(g.motion, m, default_mount(m));

  if (std::getenv("IMOCAP_REGEN_GOLDEN")) {
    save_motion_csv(mpath, g.motion, {{"fixture", "golden"}});
    save_imu_csv(ipath, imu, {{"fixture", "golden"}});
  }

  MotionFile gm = load_motion_csv(mpath);
  REQUIRE(gm.seq.size() == g.motion.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < g.motion.size(); ++t) {
    worst = std::max(worst, (gm.seq.frames[t].trans - g.motion.frames[t].trans).norm());
    for (std::size_t j = 0; j < gm.seq.frames[t].rot.size(); ++j)
      worst = std::max(worst, (gm.seq.frames[t].rot[j] - g.motion.frames[t].rot[j]).norm());
  }
  CHECK(worst < 1e-12);

  ImuFile gi = load_imu_csv(ipath);
  REQUIRE(gi.seq.size() == imu.size());
  worst = 0.0;
  for (std::size_t t = 0; t < imu.size(); ++t)
    for (int s = 0; s < kNumSensors; ++s) {
      worst = std::max(worst, (gi.seq.frames[t].accel[s] - imu.frames[t].accel[s]).norm());
      worst = std::max(worst, (gi.seq.frames[t].rot[s] - imu.frames[t].rot[s]).norm());
    }
  CHECK(worst < 1e-12);
}
