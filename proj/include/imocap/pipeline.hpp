#pragma once

#include <Eigen/Core>

#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "imocap/calibration.hpp"
#include "imocap/nets.hpp"
#include "imocap/skeleton.hpp"
#include "imocap/synth.hpp"

namespace imocap {

// The five trained stages wired end to end: leaf positions -> all joint
// positions -> joint rotations for the pose, plus foot contacts and a
// velocity stream for the root trajectory.
struct PipelineNets {
  LoadedNetwork pose_s1;   // 72 -> 15 leaf positions
  LoadedNetwork pose_s2;   // 87 -> 3*(J-1) joint positions
  LoadedNetwork pose_s3;   // 3*(J-1)+72 -> 6*predicted rotations
  LoadedNetwork trans_b1;  // 87 -> 2 contact probabilities (sigmoid)
  LoadedNetwork trans_b2;  // 3*(J-1)+72 -> 3 root velocity, unidirectional

  // Checks every net is loaded, internally consistent, and has the in/out
  // widths the model implies. Hidden widths are free. Throws
  // UntrainedNetwork / SpecMismatch.
  void validate(const SkeletonModel& model) const;
};

// Reads <dir>/pose_s1.json .. trans_b2.json; writes them back.
PipelineNets load_pipeline_nets(const std::string& dir);
void save_pipeline_nets(const PipelineNets& nets, const std::string& dir);

struct PipelineOptions {
  double accel_scale = 30.0;
  // Meters/frame pulled downward before fusion so the contact branch can
  // plant the feet; zero for physically pinned ground truth.
  double gravity_velocity = 0.018;
  double s_lower = 0.5;  // below: trust the velocity net alone
  double s_upper = 0.9;  // above: trust the planted foot alone
  void validate() const;  // throws BadThresholds
};

// Stage-input concatenation, positions first.
VectorXd make_x1(const VectorXd& p_leaf, const VectorXd& x0);
VectorXd make_x2(const VectorXd& p_all, const VectorXd& x0);

// Root-relative 6D joint rotations -> a full global pose. Joints outside
// model.predicted_joints inherit the parent's global rotation; a 6D block
// too degenerate to orthonormalize falls back to the root rotation (an
// identity relative rotation), which is also the untrained-net behavior.
Pose assemble_pose(const SkeletonModel& model, const Mat3& root_rot,
                   const VectorXd& rot6d);

struct PoseEstimate {
  std::vector<Pose> poses;       // trans stays zero here
  std::vector<VectorXd> x0;      // normalized 72-wide inputs
  std::vector<VectorXd> p_leaf;  // first-stage outputs
  std::vector<VectorXd> p_all;   // second-stage outputs
};

// Whole-sequence pose regression (each stage sees the full window).
PoseEstimate estimate_pose_offline(const PipelineNets& nets, const SkeletonModel& model,
                                   const ImuSequence& imu,
                                   const PipelineOptions& opt = {});

// Support-foot root velocity: with the higher-probability foot (ties go
// left) assumed planted, the root must move opposite that foot's
// root-relative drift; gravity_velocity is added downward. Returns the
// velocity and the winning probability.
std::pair<Vec3, double> trans_b1_velocity(const SkeletonModel& model, const Pose& prev,
                                          const Pose& cur, const Eigen::Vector2d& probs,
                                          double gravity_velocity);

// One streamed velocity-net step, rotated from the root frame into the
// model frame.
Vec3 trans_b2_velocity(const LoadedNetwork& net, StreamState& state, const VectorXd& x2,
                       const Mat3& root_rot);

// Confidence blend: v_net below s_lower, v_foot at/above s_upper, linear
// in between. Throws BadThresholds unless 0 <= s_lower < s_upper <= 1.
Vec3 fuse_velocity(const Vec3& v_net, const Vec3& v_foot, double s, double s_lower,
                   double s_upper);

struct CaptureResult {
  MotionSequence poses;  // rotations + accumulated trajectory in trans
  std::vector<Eigen::Vector2d> contacts;
  std::vector<Vec3> v_foot;    // contact-branch velocity
  std::vector<Vec3> v_net;     // velocity-net branch
  std::vector<Vec3> velocity;  // fused, meters/frame
  std::vector<Vec3> trajectory;
};

// Full offline capture: pose stages over the whole sequence, contact
// probabilities, both velocity branches, fusion, and the integrated
// trajectory (trajectory[0] == velocity[0]).
CaptureResult run_offline(const PipelineNets& nets, const SkeletonModel& model,
                          const ImuSequence& imu, const PipelineOptions& opt = {});

// Streaming estimator over a sliding 26-frame window: 20 past frames, the
// current one at index 20, and 5 future frames. The k-th push (1-based)
// emits frame k-6, so the first five pushes emit nothing and N pushes yield
// N-5 frames. Missing past frames are padded by replicating the first
// frame. The velocity net is stepped exactly once per emitted frame and
// keeps its recurrent state across the whole session.
class OnlineSession {
 public:
  static constexpr int kPast = 20;
  static constexpr int kFuture = 5;
  static constexpr int kWindow = kPast + 1 + kFuture;

  struct Step {
    Pose pose;  // trans = trajectory up to this frame
    Eigen::Vector2d contacts;
    Vec3 velocity;
  };

  // The nets and model must outlive the session.
  OnlineSession(const PipelineNets& nets, const SkeletonModel& model,
                const PipelineOptions& opt = {});

  std::optional<Step> push(const CalibratedFrame& frame);
  void reset();
  std::size_t pushed() const { return pushed_; }
  std::size_t emitted() const { return emitted_; }

 private:
  const PipelineNets& nets_;
  const SkeletonModel& model_;
  PipelineOptions opt_;
  std::deque<VectorXd> buf_;  // last kWindow normalized inputs
  StreamState b2_state_;
  Pose prev_pose_;
  Vec3 trajectory_ = Vec3::Zero();
  std::size_t pushed_ = 0;
  std::size_t emitted_ = 0;
};

// Convenience: push every frame through an OnlineSession and collect the
// emitted steps (size() - 5 frames for size() >= 6, none otherwise).
CaptureResult run_online(const PipelineNets& nets, const SkeletonModel& model,
                         const ImuSequence& imu, const PipelineOptions& opt = {});

}  // namespace imocap
