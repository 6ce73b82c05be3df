// mocap: command-line front end for the inertial capture library.
//
//   skeleton-init  write the built-in body model to JSON
//   gen            procedural training motions (walk/run/arm-swing/jumps/mixed)
//   synth          motion CSV -> virtual IMU CSV + contact/velocity labels
//   train          fit one network stage on a directory of motions
//   infer          IMU CSV (or stdin stream) -> motion CSV via the full pipeline
//   eval           compare an estimate against ground truth
//   calibrate      estimate sensor calibration from a still raw capture
//   accel-check    acceleration-synthesis accuracy table under marker noise
//
// Exit codes: 0 success, 1 I/O or internal failure, 2 bad usage or malformed
// input, 3 training loss left the reals.

#include <imocap/calibration.hpp>
#include <imocap/errors.hpp>
#include <imocap/eval.hpp>
#include <imocap/motiongen.hpp>
#include <imocap/nets.hpp>
#include <imocap/pipeline.hpp>
#include <imocap/rotmath.hpp>
#include <imocap/seqio.hpp>
#include <imocap/skeleton.hpp>
#include <imocap/synth.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace imocap;

namespace {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

SkeletonModel load_model(const std::string& path) {
  return path.empty() ? default_skeleton() : load_skeleton_json(path);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Sorted *_motion.csv files under a directory.
std::vector<fs::path> motion_files(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() > 11 && name.ends_with("_motion.csv")) files.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list directory " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

std::string stem_of(const fs::path& motion_path) {
  std::string name = motion_path.filename().string();
  return name.substr(0, name.size() - std::string("_motion.csv").size());
}

int thread_budget(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (const char* env = std::getenv("MOCAP_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<unsigned>(v);
  }
  if (n == 0) n = 1;
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

// Row <-> struct bridges for streaming (same column layout as the CSV files).
CalibratedFrame frame_from_row(const Eigen::VectorXd& v) {
  if (v.size() != kInputWidth)
    throw DimensionMismatch("stream row needs 72 values, got " + std::to_string(v.size()));
  CalibratedFrame f;
  for (int s = 0; s < kNumSensors; ++s) {
    f.accel[s] = v.segment<3>(3 * s);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f.rot[s](r, c) = v[18 + 9 * s + 3 * r + c];
  }
  return f;
}

Eigen::VectorXd pose_row(const Pose& pose) {
  const int joints = static_cast<int>(pose.rot.size());
  Eigen::VectorXd v(3 + 9 * joints);
  v.segment<3>(0) = pose.trans;
  for (int j = 0; j < joints; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) v[3 + 9 * j + 3 * r + c] = pose.rot[j](r, c);
  return v;
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::string skeleton, out_dir, kind = "mixed", prefix = "seq";
  double seconds = 30.0, fps = 60.0;
  int count = 1;
  std::uint64_t seed = 0;
};

GaitStyle seeded_style(std::uint64_t seed, bool run) {
  std::mt19937_64 rng(mix_seed(seed, run ? 2 : 1));
  auto uni = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  GaitStyle s;
  if (run) {
    s.stride_hz = uni(1.5, 2.1);
    s.hip_amp = uni(0.55, 0.75);
    s.knee_amp = uni(0.9, 1.2);
    s.arm_amp = uni(0.5, 0.8);
    s.lean = uni(0.12, 0.2);
  } else {
    s.stride_hz = uni(0.7, 1.4);
    s.hip_amp *= uni(0.7, 1.3);
    s.knee_amp *= uni(0.7, 1.3);
    s.arm_amp *= uni(0.7, 1.3);
    s.sway_amp *= uni(0.5, 1.5);
    s.lean *= uni(0.5, 1.5);
  }
  s.turn_rate = uni(-0.3, 0.3);
  return s;
}

int cmd_gen(const GenArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  fs::create_directories(a.out_dir);
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t seed_i = a.seed + static_cast<std::uint64_t>(i);
    GeneratedMotion gm;
    if (a.kind == "walk")
      gm = gen_walk(model, a.seconds, seeded_style(seed_i, false), a.fps);
    else if (a.kind == "run")
      gm = gen_walk(model, a.seconds, seeded_style(seed_i, true), a.fps);
    else if (a.kind == "arm-swing")
      gm = gen_arm_swing(model, a.seconds, seed_i, a.fps);
    else if (a.kind == "jumps")
      gm = gen_jumps(model, a.seconds, seed_i, a.fps);
    else if (a.kind == "mixed")
      gm = gen_mixed(model, a.seconds, seed_i, a.fps);
    else
      throw ParseError("unknown --kind '" + a.kind +
                       "' (expected walk|run|arm-swing|jumps|mixed)");

    char name[64];
    std::snprintf(name, sizeof name, "%s_%04d_motion.csv", a.prefix.c_str(), i);
    CsvMeta meta{{"generator", a.kind}, {"seed", std::to_string(seed_i)},
                 {"seconds", fmt_g(a.seconds)}};
    save_motion_csv((fs::path(a.out_dir) / name).string(), gm.motion, meta);
  }
  std::printf("wrote %d %s sequence(s) to %s\n", a.count, a.kind.c_str(), a.out_dir.c_str());
  return 0;
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string skeleton, motion, out, labels, in_dir, out_dir;
  int n = 4;
  double u = 0.008;
  std::uint64_t seed = 0;
};

void synth_one(const SkeletonModel& model, const SynthArgs& a, const fs::path& motion_path,
               const std::string& imu_out, const std::string& labels_out) {
  const MotionFile mf = load_motion_csv(motion_path.string());
  const MountConfig mount = default_mount(model);
  const ImuSequence imu = synthesize_imu(mf.seq, model, mount, a.n);

  CsvMeta meta{{"source", motion_path.filename().string()},
               {"smoothing_n", std::to_string(a.n)},
               {"seed", std::to_string(a.seed)}};
  save_imu_csv(imu_out, imu, meta);

  if (!labels_out.empty()) {
    const ContactLabels contacts = label_contacts(mf.seq, model, a.u);
    LabelsFile lf;
    lf.fps = mf.seq.fps;
    lf.velocity = gt_root_velocity(mf.seq);
    lf.contacts.reserve(contacts.frames.size());
    for (const auto& c : contacts.frames)
      lf.contacts.emplace_back(static_cast<double>(c[0]), static_cast<double>(c[1]));
    lf.meta = {{"source", motion_path.filename().string()}, {"contact_u", fmt_g(a.u)}};
    save_labels_csv(labels_out, lf);
  }
}

int cmd_synth(const SynthArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  if (!a.motion.empty()) {
    if (a.out.empty()) throw ParseError("--motion requires --out");
    synth_one(model, a, a.motion, a.out, a.labels);
    return 0;
  }
  if (a.in_dir.empty() || a.out_dir.empty())
    throw ParseError("need either --motion/--out or --in-dir/--out-dir");

  const std::vector<fs::path> files = motion_files(a.in_dir);
  if (files.empty()) throw ParseError("no *_motion.csv files in " + a.in_dir);
  fs::create_directories(a.out_dir);

  const int workers = thread_budget(files.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= files.size()) return;
      try {
        const std::string stem = stem_of(files[i]);
        synth_one(model, a, files[i],
                  (fs::path(a.out_dir) / (stem + "_imu.csv")).string(),
                  (fs::path(a.out_dir) / (stem + "_labels.csv")).string());
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  std::printf("synthesized %zu file(s) into %s\n", files.size(), a.out_dir.c_str());
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainArgs {
  std::string skeleton, net, data, out, fine_tune, log, b1;
  int epochs = 60, batch = 256, window = 300, n = 4;
  double lr = 1e-3, sigma = -1.0, sbar = 0.5, accel_scale = 30.0, clip = 10.0;
  std::uint64_t seed = 0;
};

struct StageRecipe {
  NetworkSpec spec;
  LossKind loss = LossKind::Mse;
  double default_sigma = 0.0;
  int noise_begin = 0;
  int noise_count = -1;  // -1 = whole input
};

StageRecipe recipe_for(const std::string& net, const SkeletonModel& model) {
  const int inner = 3 * (model.joint_count() - 1);
  if (net == "pose-s1") return {pose_s1_spec(), LossKind::Mse, 0.0, 0, -1};
  if (net == "pose-s2") return {pose_s2_spec(), LossKind::Mse, 0.04, 0, 15};
  if (net == "pose-s3") return {pose_s3_spec(), LossKind::Mse, 0.025, 0, inner};
  if (net == "trans-b1") return {trans_b1_spec(), LossKind::Contact, 0.04, 0, -1};
  if (net == "trans-b2") return {trans_b2_spec(), LossKind::Velocity, 0.025, 0, -1};
  throw ParseError("unknown --net '" + net +
                   "' (expected pose-s1|pose-s2|pose-s3|trans-b1|trans-b2)");
}

// Cut one sequence into training windows of at most `window` frames. A final
// tail shorter than two frames is dropped unless it is the whole sequence.
void tile_windows(std::vector<Eigen::VectorXd> inputs, std::vector<Eigen::VectorXd> targets,
                  int window, std::vector<TrainingWindow>& out) {
  const std::size_t total = inputs.size();
  for (std::size_t b = 0; b < total; b += static_cast<std::size_t>(window)) {
    const std::size_t e = std::min(b + static_cast<std::size_t>(window), total);
    if (e - b < 2 && b != 0) break;
    TrainingWindow w;
    w.inputs.assign(inputs.begin() + b, inputs.begin() + e);
    w.targets.assign(targets.begin() + b, targets.begin() + e);
    out.push_back(std::move(w));
  }
}

std::vector<TrainingWindow> build_dataset(const TrainArgs& a, const SkeletonModel& model,
                                          const StageRecipe& recipe) {
  const std::vector<fs::path> files = motion_files(a.data);
  if (files.empty()) throw ParseError("no *_motion.csv files in " + a.data);
  const MountConfig mount = default_mount(model);
  const double sigma = a.sigma < 0 ? recipe.default_sigma : a.sigma;

  std::vector<TrainingWindow> windows;
  // Trans-B2 needs whole sequences first: its windows are the airborne clips
  // the trained contact network finds, not fixed tiles.
  std::vector<std::vector<Eigen::VectorXd>> x1_seqs, x2_seqs;
  std::vector<std::vector<Eigen::VectorXd>> vel_seqs;

  for (const fs::path& file : files) {
    const MotionFile mf = load_motion_csv(file.string());
    const std::vector<Eigen::VectorXd> x0 =
        synth_inputs(mf.seq, model, mount, a.n, a.accel_scale);
    const std::size_t frames = x0.size();

    auto leaf = [&] { return gt_leaf_positions(mf.seq, model); };
    auto all = [&] { return gt_all_positions(mf.seq, model); };

    if (a.net == "pose-s1") {
      tile_windows(x0, leaf(), a.window, windows);
    } else if (a.net == "pose-s2" || a.net == "trans-b1") {
      const std::vector<Eigen::VectorXd> p_leaf = leaf();
      std::vector<Eigen::VectorXd> in(frames);
      for (std::size_t t = 0; t < frames; ++t) in[t] = make_x1(p_leaf[t], x0[t]);
      if (a.net == "pose-s2") {
        tile_windows(std::move(in), all(), a.window, windows);
      } else {
        // Hard contact labels: the labels file when present, else derived
        // from the motion with the default threshold.
        std::vector<Eigen::VectorXd> tgt(frames);
        const fs::path labels_path =
            file.parent_path() / (stem_of(file) + "_labels.csv");
        if (fs::exists(labels_path)) {
          const LabelsFile lf = load_labels_csv(labels_path.string());
          if (lf.contacts.size() != frames)
            throw LengthMismatch("labels/motion frame mismatch for " + file.string());
          for (std::size_t t = 0; t < frames; ++t) tgt[t] = lf.contacts[t];
        } else {
          const ContactLabels labels = label_contacts(mf.seq, model);
          for (std::size_t t = 0; t < frames; ++t)
            tgt[t] = Eigen::Vector2d(labels.frames[t][0], labels.frames[t][1]);
        }
        tile_windows(std::move(in), std::move(tgt), a.window, windows);
      }
    } else if (a.net == "pose-s3") {
      const std::vector<Eigen::VectorXd> p_all = all();
      std::vector<Eigen::VectorXd> in(frames);
      for (std::size_t t = 0; t < frames; ++t) in[t] = make_x2(p_all[t], x0[t]);
      tile_windows(std::move(in), gt_rotation_targets(mf.seq, model), a.window, windows);
    } else {  // trans-b2
      const std::vector<Eigen::VectorXd> p_leaf = leaf();
      const std::vector<Eigen::VectorXd> p_all = all();
      std::vector<Eigen::VectorXd> x1(frames), x2(frames);
      for (std::size_t t = 0; t < frames; ++t) {
        x1[t] = make_x1(p_leaf[t], x0[t]);
        x2[t] = make_x2(p_all[t], x0[t]);
      }
      const std::vector<Vec3> vel = gt_root_velocity(mf.seq);
      std::vector<Eigen::VectorXd> vt(frames);
      for (std::size_t t = 0; t < frames; ++t) vt[t] = vel[t];
      x1_seqs.push_back(std::move(x1));
      x2_seqs.push_back(std::move(x2));
      vel_seqs.push_back(std::move(vt));
    }
  }

  if (a.net == "trans-b2") {
    if (a.b1.empty())
      throw ParseError("trans-b2 needs --b1 (trained contact network that mines "
                       "the airborne clips)");
    const LoadedNetwork b1 = load_weights_json(a.b1);
    const std::vector<ClipRef> clips =
        select_airborne_clips(x1_seqs, b1.params, b1.spec, a.sbar, a.window);
    if (clips.empty())
      throw EmptyInput("the contact network found no airborne clips below sbar=" +
                       fmt_g(a.sbar) + " in " + a.data);
    for (const ClipRef& clip : clips) {
      TrainingWindow w;
      const auto& x2 = x2_seqs[clip.sequence];
      const auto& vt = vel_seqs[clip.sequence];
      w.inputs.assign(x2.begin() + clip.begin, x2.begin() + clip.end);
      w.targets.assign(vt.begin() + clip.begin, vt.begin() + clip.end);
      windows.push_back(std::move(w));
    }
  }

  if (sigma > 0)
    for (std::size_t w = 0; w < windows.size(); ++w)
      augment_noise(windows[w].inputs, sigma, mix_seed(a.seed, w), recipe.noise_begin,
                    recipe.noise_count);
  return windows;
}

int cmd_train(const TrainArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  const StageRecipe recipe = recipe_for(a.net, model);
  const std::vector<TrainingWindow> dataset = build_dataset(a, model, recipe);

  NetworkParams params;
  if (!a.fine_tune.empty()) {
    const LoadedNetwork warm = load_weights_json(a.fine_tune);
    if (warm.spec.input_width != recipe.spec.input_width ||
        warm.spec.output_width != recipe.spec.output_width)
      throw SpecMismatch("--fine-tune weights do not fit net " + a.net);
    params = warm.params;
  } else {
    params = init_params(recipe.spec, a.seed);
  }

  TrainingConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.batch_size = a.batch;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.grad_clip_norm = a.clip;

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw IoError("cannot open loss log " + a.log);
    log << "# imocap-losslog version=1 net=" << a.net << "\n";
  }
  auto on_epoch = [&log](int epoch, double loss) {
    if (log.is_open()) {
      log << format_row(Eigen::Vector2d(epoch, loss)) << "\n";
      log.flush();
    }
    return false;
  };

  const TrainReport report = train(params, recipe.spec, dataset, recipe.loss, cfg, on_epoch);

  const double sigma = a.sigma < 0 ? recipe.default_sigma : a.sigma;
  std::map<std::string, std::string> meta{
      {"net", a.net},
      {"loss", loss_kind_name(recipe.loss)},
      {"epochs", std::to_string(a.epochs)},
      {"lr", fmt_g(a.lr)},
      {"batch", std::to_string(a.batch)},
      {"window", std::to_string(a.window)},
      {"seed", std::to_string(a.seed)},
      {"sigma", fmt_g(sigma)},
      {"windows", std::to_string(dataset.size())},
      {"final_loss", fmt_g(report.epoch_loss.back())},
  };
  if (!a.fine_tune.empty()) meta["fine_tuned_from"] = a.fine_tune;
  save_weights_json(a.out, params, recipe.spec, meta);
  std::printf("%s: %zu windows, %d epochs, final loss %.6g -> %s\n", a.net.c_str(),
              dataset.size(), a.epochs, report.epoch_loss.back(), a.out.c_str());
  return 0;
}

// ---- infer ------------------------------------------------------------------

struct InferArgs {
  std::string skeleton, weights_dir, imu, out_motion, out_labels, mode = "offline";
  bool stream = false;
  double accel_scale = 30.0, vg = 0.018, s_lower = 0.5, s_upper = 0.9;
};

int cmd_infer(const InferArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  const PipelineNets nets = load_pipeline_nets(a.weights_dir);
  nets.validate(model);
  PipelineOptions opt;
  opt.accel_scale = a.accel_scale;
  opt.gravity_velocity = a.vg;
  opt.s_lower = a.s_lower;
  opt.s_upper = a.s_upper;
  opt.validate();

  if (a.stream) {
    if (a.mode != "online") throw ParseError("--stream requires --mode online");
    OnlineSession session(nets, model, opt);
    std::string line;
    while (std::getline(std::cin, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto step = session.push(frame_from_row(parse_row(line)));
      if (step) {
        std::cout << format_row(pose_row(step->pose)) << "\n";
        std::cout.flush();
      }
    }
    return 0;
  }

  if (a.imu.empty() || a.out_motion.empty())
    throw ParseError("need --imu and --out-motion (or --stream)");
  if (a.mode != "offline" && a.mode != "online")
    throw ParseError("--mode must be offline or online");

  const ImuFile in = load_imu_csv(a.imu);
  const CaptureResult result = a.mode == "offline" ? run_offline(nets, model, in.seq, opt)
                                                   : run_online(nets, model, in.seq, opt);

  CsvMeta meta{{"mode", a.mode},
               {"weights", a.weights_dir},
               {"accel_scale", fmt_g(a.accel_scale)},
               {"vg", fmt_g(a.vg)},
               {"s_lower", fmt_g(a.s_lower)},
               {"s_upper", fmt_g(a.s_upper)}};
  save_motion_csv(a.out_motion, result.poses, meta);
  if (!a.out_labels.empty()) {
    LabelsFile lf;
    lf.fps = result.poses.fps;
    lf.contacts = result.contacts;
    lf.velocity = result.velocity;
    lf.meta = meta;
    save_labels_csv(a.out_labels, lf);
  }
  std::printf("%s: %zu frames in, %zu frames out -> %s\n", a.mode.c_str(), in.seq.size(),
              result.poses.size(), a.out_motion.c_str());
  return 0;
}

// ---- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string skeleton, est, gt, out, drift;
  double horizon = 10.0, step = 0.1;
};

int cmd_eval(const EvalArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  const MotionFile est = load_motion_csv(a.est);
  const MotionFile gt = load_motion_csv(a.gt);
  const PoseMetricsReport report = pose_metrics(est.seq, gt.seq, model);
  CsvMeta meta{{"est", a.est}, {"gt", a.gt}};
  save_report_csv(a.out, report, meta);
  if (!a.drift.empty()) {
    std::vector<Vec3> et, gtt;
    et.reserve(est.seq.size());
    gtt.reserve(gt.seq.size());
    for (const Pose& p : est.seq.frames) et.push_back(p.trans);
    for (const Pose& p : gt.seq.frames) gtt.push_back(p.trans);
    const std::vector<double> curve = drift_curve(et, gtt, gt.seq.fps, a.horizon, a.step);
    save_drift_csv(a.drift, curve, a.step, meta);
  }
  std::printf(
      "sip %.3f deg  angular %.3f deg  positional %.3f cm  marker %.3f cm  jitter %.4g\n",
      report.sip_deg.mean, report.angular_deg.mean, report.positional_cm.mean,
      report.marker_cm.mean, report.jitter_e2.mean);
  return 0;
}

// ---- calibrate --------------------------------------------------------------

struct CalibrateArgs {
  std::string raw, alignment, state_in, out, apply, out_imu;
  double accel_scale = 30.0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  CalibrationState state;
  if (!a.state_in.empty()) {
    state = load_calibration_json(a.state_in);
  } else {
    if (a.raw.empty()) throw ParseError("need --raw (still capture) or --state");
    const RawImuFile still = load_raw_imu_csv(a.raw);
    Mat3 pim = Mat3::Identity();
    if (!a.alignment.empty())
      pim = estimate_global_alignment(load_raw_imu_csv(a.alignment).frames);
    // The operator holds a T-pose, which for this model is the rest pose:
    // every bone rotation is the identity.
    std::array<Mat3, kNumSensors> known;
    known.fill(Mat3::Identity());
    state = calibrate_t_pose(pim, still.frames, known, a.accel_scale);
  }
  if (!a.out.empty()) save_calibration_json(state, a.out);

  if (!a.apply.empty()) {
    if (a.out_imu.empty()) throw ParseError("--apply requires --out-imu");
    const RawImuFile raw = load_raw_imu_csv(a.apply);
    ImuSequence seq;
    seq.fps = raw.fps;
    seq.frames.reserve(raw.frames.size());
    for (const ImuRawFrame& f : raw.frames) seq.frames.push_back(apply_calibration(state, f));
    save_imu_csv(a.out_imu, seq,
                 {{"calibration", a.state_in.empty() ? a.raw : a.state_in},
                  {"accel_scale", fmt_g(state.accel_scale)}});
  }
  if (a.out.empty() && a.apply.empty())
    throw ParseError("nothing to do: pass --out and/or --apply/--out-imu");
  return 0;
}

// ---- accel-check --------------------------------------------------------------

struct AccelCheckArgs {
  std::string skeleton, motion, out;
  std::vector<int> n_list{1, 4};
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0, 8.0};
  double sigma = 0.005;
  std::uint64_t seed = 0;
};

int cmd_accel_check(const AccelCheckArgs& a) {
  const SkeletonModel model = load_model(a.skeleton);
  const MotionFile mf = load_motion_csv(a.motion);
  const MountConfig mount = default_mount(model);
  const auto tracks = sensor_positions(mf.seq, model, mount);
  const double dt = 1.0 / mf.seq.fps;
  const std::size_t frames = tracks.size();

  std::vector<std::vector<Vec3>> clean(kNumSensors), noisy(kNumSensors);
  for (int s = 0; s < kNumSensors; ++s) {
    clean[s].resize(frames);
    for (std::size_t t = 0; t < frames; ++t) clean[s][t] = tracks[t][s];
    noisy[s] = clean[s];
    std::mt19937_64 rng(mix_seed(a.seed, static_cast<std::uint64_t>(s)));
    std::normal_distribution<double> gauss(0.0, a.sigma);
    for (auto& p : noisy[s])
      for (int k = 0; k < 3; ++k) p[k] += gauss(rng);
  }

  // Reference: exact accelerations of the clean marker paths (n = 1, the
  // unsmoothed second difference).
  std::vector<Vec3> ref;
  for (int s = 0; s < kNumSensors; ++s) {
    const std::vector<Vec3> r = second_difference(clean[s], 1, dt);
    ref.insert(ref.end(), r.begin(), r.end());
  }

  std::ofstream out(a.out);
  if (!out) throw IoError("cannot open " + a.out);
  out << "# imocap-accelcheck version=1 fps=" << fmt_g(mf.seq.fps)
      << " sigma=" << fmt_g(a.sigma) << " seed=" << a.seed << "\n";
  out << "# columns=n,threshold,fraction\n";
  for (int n : a.n_list) {
    std::vector<Vec3> test;
    for (int s = 0; s < kNumSensors; ++s) {
      const std::vector<Vec3> r = second_difference(noisy[s], n, dt);
      test.insert(test.end(), r.begin(), r.end());
    }
    const std::vector<double> frac = accel_pck(test, ref, a.thresholds);
    for (std::size_t k = 0; k < a.thresholds.size(); ++k)
      out << format_row(Vec3(n, a.thresholds[k], frac[k])) << "\n";
  }
  if (!out) throw IoError("failed writing " + a.out);
  return 0;
}

// ---- skeleton-init ------------------------------------------------------------

int cmd_skeleton_init(const std::string& out) {
  save_skeleton_json(default_skeleton(), out);
  std::printf("wrote built-in %d-joint skeleton to %s\n",
              default_skeleton().joint_count(), out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-IMU motion capture pipeline"};
  app.require_subcommand(1);

  std::string init_out;
  CLI::App* sc_init = app.add_subcommand("skeleton-init", "Write the built-in skeleton JSON");
  sc_init->add_option("--out", init_out, "output JSON path")->required();

  GenArgs gen;
  CLI::App* sc_gen = app.add_subcommand("gen", "Generate procedural motion sequences");
  sc_gen->add_option("--skeleton", gen.skeleton, "skeleton JSON (default: built-in)");
  sc_gen->add_option("--out-dir", gen.out_dir, "output directory")->required();
  sc_gen->add_option("--kind", gen.kind, "walk|run|arm-swing|jumps|mixed");
  sc_gen->add_option("--count", gen.count, "number of sequences");
  sc_gen->add_option("--seconds", gen.seconds, "length of each sequence");
  sc_gen->add_option("--fps", gen.fps, "frame rate");
  sc_gen->add_option("--seed", gen.seed, "base seed (sequence i uses seed+i)");
  sc_gen->add_option("--prefix", gen.prefix, "output file prefix");

  SynthArgs synth;
  CLI::App* sc_synth = app.add_subcommand("synth", "Motion -> virtual IMU + labels");
  sc_synth->add_option("--skeleton", synth.skeleton, "skeleton JSON (default: built-in)");
  sc_synth->add_option("--motion", synth.motion, "single input motion CSV");
  sc_synth->add_option("--out", synth.out, "IMU CSV for --motion");
  sc_synth->add_option("--labels", synth.labels, "labels CSV for --motion (optional)");
  sc_synth->add_option("--in-dir", synth.in_dir, "batch: directory of *_motion.csv");
  sc_synth->add_option("--out-dir", synth.out_dir, "batch: output directory");
  sc_synth->add_option("--n", synth.n, "acceleration smoothing radius (frames)");
  sc_synth->add_option("--u", synth.u, "contact threshold, meters/frame");
  sc_synth->add_option("--seed", synth.seed, "recorded in output headers");

  TrainArgs train_args;
  CLI::App* sc_train = app.add_subcommand("train", "Train one network stage");
  sc_train->add_option("--skeleton", train_args.skeleton, "skeleton JSON (default: built-in)");
  sc_train->add_option("--net", train_args.net, "pose-s1|pose-s2|pose-s3|trans-b1|trans-b2")
      ->required();
  sc_train->add_option("--data", train_args.data, "directory of *_motion.csv")->required();
  sc_train->add_option("--out", train_args.out, "output weights JSON")->required();
  sc_train->add_option("--epochs", train_args.epochs, "training epochs");
  sc_train->add_option("--lr", train_args.lr, "Adam learning rate");
  sc_train->add_option("--batch", train_args.batch, "windows per optimizer step");
  sc_train->add_option("--window", train_args.window, "training window length, frames");
  sc_train->add_option("--seed", train_args.seed, "init/shuffle/noise seed");
  sc_train->add_option("--sigma", train_args.sigma,
                       "input noise stddev (default: per-net value)");
  sc_train->add_option("--n", train_args.n, "acceleration smoothing radius");
  sc_train->add_option("--accel-scale", train_args.accel_scale, "acceleration divisor");
  sc_train->add_option("--clip", train_args.clip, "gradient clip norm");
  sc_train->add_option("--fine-tune", train_args.fine_tune, "warm start from weights JSON");
  sc_train->add_option("--log", train_args.log, "epoch,loss CSV log");
  sc_train->add_option("--b1", train_args.b1,
                       "trained trans-b1 weights (required for trans-b2)");
  sc_train->add_option("--sbar", train_args.sbar,
                       "airborne threshold on contact probability (trans-b2)");

  InferArgs infer;
  CLI::App* sc_infer = app.add_subcommand("infer", "Run the capture pipeline");
  sc_infer->add_option("--skeleton", infer.skeleton, "skeleton JSON (default: built-in)");
  sc_infer->add_option("--weights-dir", infer.weights_dir,
                       "directory with pose_s1.json .. trans_b2.json")->required();
  sc_infer->add_option("--imu", infer.imu, "calibrated IMU CSV");
  sc_infer->add_option("--out-motion", infer.out_motion, "output motion CSV");
  sc_infer->add_option("--out-labels", infer.out_labels,
                       "output contacts+velocity CSV (optional)");
  sc_infer->add_option("--mode", infer.mode, "offline|online");
  sc_infer->add_flag("--stream", infer.stream,
                     "read 72-value rows from stdin, write pose rows to stdout");
  sc_infer->add_option("--accel-scale", infer.accel_scale, "acceleration divisor");
  sc_infer->add_option("--vg", infer.vg, "gravity velocity, meters/frame");
  sc_infer->add_option("--s-lower", infer.s_lower, "fusion lower threshold");
  sc_infer->add_option("--s-upper", infer.s_upper, "fusion upper threshold");

  EvalArgs eval_args;
  CLI::App* sc_eval = app.add_subcommand("eval", "Compare estimate vs ground truth");
  sc_eval->add_option("--skeleton", eval_args.skeleton, "skeleton JSON (default: built-in)");
  sc_eval->add_option("--est", eval_args.est, "estimated motion CSV")->required();
  sc_eval->add_option("--gt", eval_args.gt, "ground-truth motion CSV")->required();
  sc_eval->add_option("--out", eval_args.out, "metrics report CSV")->required();
  sc_eval->add_option("--drift", eval_args.drift, "translation drift CSV (optional)");
  sc_eval->add_option("--horizon", eval_args.horizon, "drift horizon, seconds");
  sc_eval->add_option("--step", eval_args.step, "drift step, seconds");

  CalibrateArgs cal;
  CLI::App* sc_cal = app.add_subcommand("calibrate", "Estimate sensor calibration");
  sc_cal->add_option("--raw", cal.raw, "raw IMU CSV of a still T-pose capture");
  sc_cal->add_option("--alignment", cal.alignment,
                     "raw CSV of sensor 0 held axis-aligned (else identity)");
  sc_cal->add_option("--state", cal.state_in, "load an existing calibration JSON");
  sc_cal->add_option("--out", cal.out, "output calibration JSON");
  sc_cal->add_option("--apply", cal.apply, "raw IMU CSV to convert");
  sc_cal->add_option("--out-imu", cal.out_imu, "calibrated IMU CSV for --apply");
  sc_cal->add_option("--accel-scale", cal.accel_scale, "acceleration divisor to record");

  AccelCheckArgs ac;
  CLI::App* sc_ac = app.add_subcommand("accel-check",
                                       "Acceleration synthesis accuracy under marker noise");
  sc_ac->add_option("--skeleton", ac.skeleton, "skeleton JSON (default: built-in)");
  sc_ac->add_option("--motion", ac.motion, "input motion CSV")->required();
  sc_ac->add_option("--out", ac.out, "output table CSV")->required();
  sc_ac->add_option("--n", ac.n_list, "smoothing radii to test")->delimiter(',');
  sc_ac->add_option("--thresholds", ac.thresholds, "error thresholds, m/s^2")->delimiter(',');
  sc_ac->add_option("--sigma", ac.sigma, "marker noise stddev, meters");
  sc_ac->add_option("--seed", ac.seed, "noise seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (sc_init->parsed()) return cmd_skeleton_init(init_out);
    if (sc_gen->parsed()) return cmd_gen(gen);
    if (sc_synth->parsed()) return cmd_synth(synth);
    if (sc_train->parsed()) return cmd_train(train_args);
    if (sc_infer->parsed()) return cmd_infer(infer);
    if (sc_eval->parsed()) return cmd_eval(eval_args);
    if (sc_cal->parsed()) return cmd_calibrate(cal);
    if (sc_ac->parsed()) return cmd_accel_check(ac);
  } catch (const NonFiniteLoss& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
