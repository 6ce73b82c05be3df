#include "imocap/pipeline.hpp"

#include <filesystem>
#include <utility>

#include "imocap/errors.hpp"
#include "imocap/rotmath.hpp"

namespace imocap {

namespace {

void check_net(const LoadedNetwork& net, const char* name, int want_in, int want_out) {
  if (net.params.empty())
    throw UntrainedNetwork(std::string(name) + ": no weights loaded");
  validate_shapes(net.params, net.spec);
  if (net.spec.input_width != want_in || net.spec.output_width != want_out)
    throw SpecMismatch(std::string(name) + ": expects " + std::to_string(want_in) +
                       " -> " + std::to_string(want_out) + ", got " +
                       std::to_string(net.spec.input_width) + " -> " +
                       std::to_string(net.spec.output_width));
}

std::filesystem::path net_path(const std::string& dir, const char* name) {
  return std::filesystem::path(dir) / (std::string(name) + ".json");
}

}  // namespace

void PipelineNets::validate(const SkeletonModel& model) const {
  model.validate();
  const int pos_all = 3 * (model.joint_count() - 1);
  const int rot_out = 6 * static_cast<int>(model.predicted_joints.size());
  check_net(pose_s1, "pose_s1", kInputWidth, 15);
  check_net(pose_s2, "pose_s2", 15 + kInputWidth, pos_all);
  check_net(pose_s3, "pose_s3", pos_all + kInputWidth, rot_out);
  check_net(trans_b1, "trans_b1", 15 + kInputWidth, 2);
  check_net(trans_b2, "trans_b2", pos_all + kInputWidth, 3);
  if (trans_b1.spec.activation != OutputActivation::Sigmoid)
    throw SpecMismatch("trans_b1: contact head must end in a sigmoid");
  if (trans_b2.spec.bidirectional)
    throw SpecMismatch("trans_b2: velocity stream must be unidirectional");
}

PipelineNets load_pipeline_nets(const std::string& dir) {
  PipelineNets nets;
  nets.pose_s1 = load_weights_json(net_path(dir, "pose_s1").string());
  nets.pose_s2 = load_weights_json(net_path(dir, "pose_s2").string());
  nets.pose_s3 = load_weights_json(net_path(dir, "pose_s3").string());
  nets.trans_b1 = load_weights_json(net_path(dir, "trans_b1").string());
  nets.trans_b2 = load_weights_json(net_path(dir, "trans_b2").string());
  return nets;
}

void save_pipeline_nets(const PipelineNets& nets, const std::string& dir) {
  std::filesystem::create_directories(dir);
  save_weights_json(net_path(dir, "pose_s1").string(), nets.pose_s1.params,
                    nets.pose_s1.spec, nets.pose_s1.meta);
  save_weights_json(net_path(dir, "pose_s2").string(), nets.pose_s2.params,
                    nets.pose_s2.spec, nets.pose_s2.meta);
  save_weights_json(net_path(dir, "pose_s3").string(), nets.pose_s3.params,
                    nets.pose_s3.spec, nets.pose_s3.meta);
  save_weights_json(net_path(dir, "trans_b1").string(), nets.trans_b1.params,
                    nets.trans_b1.spec, nets.trans_b1.meta);
  save_weights_json(net_path(dir, "trans_b2").string(), nets.trans_b2.params,
                    nets.trans_b2.spec, nets.trans_b2.meta);
}

void PipelineOptions::validate() const {
  if (!(accel_scale > 0.0))
    throw BadThresholds("accel_scale must be positive");
  if (!(0.0 <= s_lower && s_lower < s_upper && s_upper <= 1.0))
    throw BadThresholds("need 0 <= s_lower < s_upper <= 1, got [" +
                        std::to_string(s_lower) + ", " + std::to_string(s_upper) + "]");
}

VectorXd make_x1(const VectorXd& p_leaf, const VectorXd& x0) {
  VectorXd x(p_leaf.size() + x0.size());
  x << p_leaf, x0;
  return x;
}

VectorXd make_x2(const VectorXd& p_all, const VectorXd& x0) {
  VectorXd x(p_all.size() + x0.size());
  x << p_all, x0;
  return x;
}

Pose assemble_pose(const SkeletonModel& model, const Mat3& root_rot,
                   const VectorXd& rot6d) {
  const auto& predicted = model.predicted_joints;
  if (rot6d.size() != 6 * static_cast<Eigen::Index>(predicted.size()))
    throw DimensionMismatch("assemble_pose: got " + std::to_string(rot6d.size()) +
                            " values for " + std::to_string(predicted.size()) +
                            " predicted joints");
  std::vector<int> slot(static_cast<std::size_t>(model.joint_count()), -1);
  for (std::size_t i = 0; i < predicted.size(); ++i) slot[predicted[i]] = static_cast<int>(i);

  Pose pose;
  pose.rot.assign(static_cast<std::size_t>(model.joint_count()), Mat3::Identity());
  pose.rot[0] = root_rot;
  for (int j = 1; j < model.joint_count(); ++j) {
    if (slot[j] < 0) {
      pose.rot[j] = pose.rot[model.parent[j]];
      continue;
    }
    Mat3 rel = Mat3::Identity();
    try {
      rel = rot6d_to_matrix(rot6d.segment<6>(6 * slot[j]));
    } catch (const DegenerateInput&) {
      // keep the identity relative rotation
    }
    pose.rot[j] = root_rot * rel;
  }
  return pose;
}

PoseEstimate estimate_pose_offline(const PipelineNets& nets, const SkeletonModel& model,
                                   const ImuSequence& imu, const PipelineOptions& opt) {
  opt.validate();
  nets.validate(model);
  if (imu.size() == 0) throw EmptyInput("estimate_pose_offline: no frames");

  const std::size_t n = imu.size();
  PoseEstimate est;
  est.x0.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    est.x0[t] = normalize_frame(imu.frames[t], opt.accel_scale);

  est.p_leaf = forward_window(nets.pose_s1.params, nets.pose_s1.spec, est.x0);

  std::vector<VectorXd> x1(n);
  for (std::size_t t = 0; t < n; ++t) x1[t] = make_x1(est.p_leaf[t], est.x0[t]);
  est.p_all = forward_window(nets.pose_s2.params, nets.pose_s2.spec, x1);

  std::vector<VectorXd> x2(n);
  for (std::size_t t = 0; t < n; ++t) x2[t] = make_x2(est.p_all[t], est.x0[t]);
  std::vector<VectorXd> rot = forward_window(nets.pose_s3.params, nets.pose_s3.spec, x2);

  est.poses.resize(n);
  for (std::size_t t = 0; t < n; ++t)
    est.poses[t] = assemble_pose(model, input_rotation(est.x0[t], 0), rot[t]);
  return est;
}

std::pair<Vec3, double> trans_b1_velocity(const SkeletonModel& model, const Pose& prev,
                                          const Pose& cur, const Eigen::Vector2d& probs,
                                          double gravity_velocity) {
  const int foot = probs[0] >= probs[1] ? model.left_foot : model.right_foot;
  FkResult before = forward_kinematics(model, prev);
  FkResult after = forward_kinematics(model, cur);
  // A planted foot keeps trans(t) + fk(t) constant, so the root moved by
  // the negative of the foot's root-relative drift.
  Vec3 v = before.position[foot] - after.position[foot];
  v.y() -= gravity_velocity;
  return {v, probs.maxCoeff()};
}

Vec3 trans_b2_velocity(const LoadedNetwork& net, StreamState& state, const VectorXd& x2,
                       const Mat3& root_rot) {
  return root_rot * stream_step(net.params, net.spec, state, x2);
}

Vec3 fuse_velocity(const Vec3& v_net, const Vec3& v_foot, double s, double s_lower,
                   double s_upper) {
  if (!(0.0 <= s_lower && s_lower < s_upper && s_upper <= 1.0))
    throw BadThresholds("fuse_velocity: need 0 <= s_lower < s_upper <= 1");
  if (s >= s_upper) return v_foot;
  if (s <= s_lower) return v_net;
  const double w = (s - s_lower) / (s_upper - s_lower);
  return (1.0 - w) * v_net + w * v_foot;
}

CaptureResult run_offline(const PipelineNets& nets, const SkeletonModel& model,
                          const ImuSequence& imu, const PipelineOptions& opt) {
  PoseEstimate est = estimate_pose_offline(nets, model, imu, opt);
  const std::size_t n = est.poses.size();

  std::vector<VectorXd> x1(n);
  for (std::size_t t = 0; t < n; ++t) x1[t] = make_x1(est.p_leaf[t], est.x0[t]);
  std::vector<VectorXd> probs =
      forward_window(nets.trans_b1.params, nets.trans_b1.spec, x1);

  CaptureResult out;
  out.poses.fps = imu.fps;
  out.poses.frames = est.poses;
  out.contacts.resize(n);
  out.v_foot.resize(n);
  out.v_net.resize(n);
  out.velocity.resize(n);
  out.trajectory.resize(n);

  StreamState stream = make_stream_state(nets.trans_b2.spec);
  for (std::size_t t = 0; t < n; ++t) {
    out.contacts[t] = probs[t];
    const Mat3 root = input_rotation(est.x0[t], 0);
    out.v_net[t] = trans_b2_velocity(nets.trans_b2, stream,
                                     make_x2(est.p_all[t], est.x0[t]), root);
    const Pose& prev = t == 0 ? est.poses[0] : est.poses[t - 1];
    auto [vf, s] =
        trans_b1_velocity(model, prev, est.poses[t], out.contacts[t], opt.gravity_velocity);
    out.v_foot[t] = vf;
    out.velocity[t] = fuse_velocity(out.v_net[t], vf, s, opt.s_lower, opt.s_upper);
    out.trajectory[t] = (t == 0 ? Vec3::Zero() : out.trajectory[t - 1]) + out.velocity[t];
    out.poses.frames[t].trans = out.trajectory[t];
  }
  return out;
}

OnlineSession::OnlineSession(const PipelineNets& nets, const SkeletonModel& model,
                             const PipelineOptions& opt)
    : nets_(nets), model_(model), opt_(opt) {
  opt_.validate();
  nets_.validate(model_);
  b2_state_ = make_stream_state(nets_.trans_b2.spec);
}

void OnlineSession::reset() {
  buf_.clear();
  b2_state_.reset();
  trajectory_ = Vec3::Zero();
  pushed_ = 0;
  emitted_ = 0;
}

std::optional<OnlineSession::Step> OnlineSession::push(const CalibratedFrame& frame) {
  buf_.push_back(normalize_frame(frame, opt_.accel_scale));
  if (buf_.size() > static_cast<std::size_t>(kWindow)) buf_.pop_front();
  ++pushed_;
  if (pushed_ <= static_cast<std::size_t>(kFuture)) return std::nullopt;

  std::vector<VectorXd> win;
  win.reserve(kWindow);
  for (std::size_t i = buf_.size(); i < static_cast<std::size_t>(kWindow); ++i)
    win.push_back(buf_.front());
  for (const VectorXd& v : buf_) win.push_back(v);

  std::vector<VectorXd> p_leaf =
      forward_window(nets_.pose_s1.params, nets_.pose_s1.spec, win);
  std::vector<VectorXd> x1(win.size());
  for (std::size_t t = 0; t < win.size(); ++t) x1[t] = make_x1(p_leaf[t], win[t]);
  std::vector<VectorXd> p_all =
      forward_window(nets_.pose_s2.params, nets_.pose_s2.spec, x1);
  std::vector<VectorXd> x2(win.size());
  for (std::size_t t = 0; t < win.size(); ++t) x2[t] = make_x2(p_all[t], win[t]);
  std::vector<VectorXd> rot = forward_window(nets_.pose_s3.params, nets_.pose_s3.spec, x2);
  std::vector<VectorXd> probs =
      forward_window(nets_.trans_b1.params, nets_.trans_b1.spec, x1);

  const Mat3 root = input_rotation(win[kPast], 0);
  Pose pose = assemble_pose(model_, root, rot[kPast]);
  const Eigen::Vector2d contact = probs[kPast];
  const Vec3 v_net = trans_b2_velocity(nets_.trans_b2, b2_state_, x2[kPast], root);
  const Pose& prev = emitted_ == 0 ? pose : prev_pose_;
  auto [v_foot, s] = trans_b1_velocity(model_, prev, pose, contact, opt_.gravity_velocity);
  const Vec3 v = fuse_velocity(v_net, v_foot, s, opt_.s_lower, opt_.s_upper);

  prev_pose_ = pose;
  trajectory_ += v;
  ++emitted_;

  Step step;
  step.pose = std::move(pose);
  step.pose.trans = trajectory_;
  step.contacts = contact;
  step.velocity = v;
  return step;
}

CaptureResult run_online(const PipelineNets& nets, const SkeletonModel& model,
                         const ImuSequence& imu, const PipelineOptions& opt) {
  OnlineSession session(nets, model, opt);
  CaptureResult out;
  out.poses.fps = imu.fps;
  for (const CalibratedFrame& f : imu.frames) {
    auto step = session.push(f);
    if (!step) continue;
    out.contacts.push_back(step->contacts);
    out.velocity.push_back(step->velocity);
    out.trajectory.push_back(step->pose.trans);
    out.poses.frames.push_back(std::move(step->pose));
  }
  return out;
}

}  // namespace imocap
