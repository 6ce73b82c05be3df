#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "imocap/rotmath.hpp"

namespace imocap {

// Linear-blend-skinned surface point: rest position in model frame plus up
// to 4 (joint, weight) influences, weights >= 0 summing to 1.
struct MarkerBinding {
  Vec3 rest = Vec3::Zero();
  std::vector<std::pair<int, double>> weights;
};

// Joint indices of the root sensor bone and the five leaf sensor bones,
// in the fixed ordering used everywhere: root, lleg, rleg, head, larm, rarm.
struct LeafBones {
  int root = 0;
  int lleg = -1;
  int rleg = -1;
  int head = -1;
  int larm = -1;
  int rarm = -1;
};

struct SkeletonModel {
  std::string name;
  std::vector<std::string> joint_names;
  std::vector<int> parent;    // parent[0] == -1; parent[j] < j
  std::vector<Vec3> offsets;  // rest offset from parent, meters
  LeafBones leaf_bones;
  int left_foot = -1;
  int right_foot = -1;
  // Dimensionless multiplier applied to the hip->knee and knee->ankle
  // offsets only (identified via the foot parent chains).
  double leg_length = 1.0;
  std::vector<MarkerBinding> markers;
  // Joints whose rotation the pose networks regress; the rest inherit an
  // identity local rotation.
  std::vector<int> predicted_joints;

  int joint_count() const { return static_cast<int>(parent.size()); }
  std::array<int, 6> sensor_joints() const;  // root,lleg,rleg,head,larm,rarm
  std::array<int, 5> leaf_joints() const;    // lleg,rleg,head,larm,rarm
  // Upper legs + upper arms (parents of the four limb sensor bones).
  std::array<int, 4> sip_joints() const;
  bool is_leg_scaled(int joint) const;
  Vec3 scaled_offset(int joint) const;
  // Throws ParseError on any structural violation.
  void validate() const;
};

// Global (model-frame) rotation per joint, plus the root's world position.
// trans stays zero for sequences without translation.
struct Pose {
  std::vector<Mat3> rot;
  Vec3 trans = Vec3::Zero();
};

struct MotionSequence {
  double fps = 60.0;
  std::vector<Pose> frames;
  std::size_t size() const { return frames.size(); }
};

struct FkResult {
  std::vector<Vec3> position;   // root-relative, meters; position[0] == 0
  std::vector<Mat3> rotation;   // global, as stored in the pose
};

// position(j) = position(parent(j)) + rotation(parent(j)) * scaled_offset(j).
FkResult forward_kinematics(const SkeletonModel& model, const Pose& pose);

// Rest-pose joint positions (identity rotations): cumulative scaled offsets.
std::vector<Vec3> rest_positions(const SkeletonModel& model);

// Linear blend skinning of the marker set:
//   marker = sum_k w_k (R_jk (rest - restPos(jk)) + pos(jk)) + rootTranslation
std::vector<Vec3> skin_markers(const SkeletonModel& model, const Pose& pose,
                               const Vec3& root_translation);

// Parent-relative rotations from global ones and back.
std::vector<Mat3> local_from_global(const SkeletonModel& model, const Pose& pose);
Pose global_from_local(const SkeletonModel& model, const std::vector<Mat3>& local);

// Built-in 24-joint body (SMPL-style topology), hand-authored offsets,
// 64 surface markers. Marker indices 0..5 are the sensor mount points in
// sensor order.
SkeletonModel default_skeleton();

SkeletonModel load_skeleton_json(const std::string& path);
void save_skeleton_json(const SkeletonModel& model, const std::string& path);

// String-level variants used by the file functions and the tests.
SkeletonModel skeleton_from_json_text(const std::string& text);
std::string skeleton_to_json_text(const SkeletonModel& model);

}  // namespace imocap
