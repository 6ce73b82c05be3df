#include "imocap/skeleton.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "imocap/errors.hpp"

namespace imocap {

using nlohmann::json;

std::array<int, 6> SkeletonModel::sensor_joints() const {
  return {leaf_bones.root, leaf_bones.lleg, leaf_bones.rleg,
          leaf_bones.head, leaf_bones.larm, leaf_bones.rarm};
}

std::array<int, 5> SkeletonModel::leaf_joints() const {
  return {leaf_bones.lleg, leaf_bones.rleg, leaf_bones.head,
          leaf_bones.larm, leaf_bones.rarm};
}

std::array<int, 4> SkeletonModel::sip_joints() const {
  return {parent[leaf_bones.lleg], parent[leaf_bones.rleg],
          parent[leaf_bones.larm], parent[leaf_bones.rarm]};
}

bool SkeletonModel::is_leg_scaled(int joint) const {
  // The scaled offsets are hip->knee and knee->ankle, i.e. the offsets
  // stored on the knee (= grandparent of a foot) and the ankle (= parent).
  for (int foot : {left_foot, right_foot}) {
    if (foot < 0) continue;
    int ankle = parent[foot];
    if (joint == ankle) return true;
    if (ankle >= 0 && joint == parent[ankle]) return true;
  }
  return false;
}

Vec3 SkeletonModel::scaled_offset(int joint) const {
  return is_leg_scaled(joint) ? Vec3(leg_length * offsets[joint]) : offsets[joint];
}

void SkeletonModel::validate() const {
  const int j = joint_count();
  if (j < 2) throw ParseError("skeleton: need at least 2 joints");
  if (offsets.size() != static_cast<std::size_t>(j) ||
      joint_names.size() != static_cast<std::size_t>(j))
    throw ParseError("skeleton: joint array sizes disagree");
  if (parent[0] != -1) throw ParseError("skeleton: joint 0 must be the root");
  for (int i = 1; i < j; ++i)
    if (parent[i] < 0 || parent[i] >= i)
      throw ParseError("skeleton: joints must be topologically sorted");
  auto in_range = [j](int idx) { return idx >= 0 && idx < j; };
  std::set<int> sensors;
  for (int s : sensor_joints()) {
    if (!in_range(s)) throw ParseError("skeleton: sensor bone out of range");
    sensors.insert(s);
  }
  if (sensors.size() != 6) throw ParseError("skeleton: sensor bones must be distinct");
  if (!in_range(left_foot) || !in_range(right_foot) || left_foot == right_foot)
    throw ParseError("skeleton: bad foot indices");
  if (leg_length <= 0) throw ParseError("skeleton: legLength must be positive");
  for (const MarkerBinding& m : markers) {
    if (m.weights.empty() || m.weights.size() > 4)
      throw ParseError("skeleton: marker needs 1..4 weights");
    double sum = 0;
    for (auto& [joint, w] : m.weights) {
      if (!in_range(joint)) throw ParseError("skeleton: marker joint out of range");
      if (w < 0) throw ParseError("skeleton: negative marker weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ParseError("skeleton: marker weights must sum to 1");
  }
  for (int p : predicted_joints)
    if (!in_range(p) || p == 0)
      throw ParseError("skeleton: predicted joint out of range");
}

FkResult forward_kinematics(const SkeletonModel& model, const Pose& pose) {
  const int j = model.joint_count();
  if (pose.rot.size() != static_cast<std::size_t>(j))
    throw DimensionMismatch("forward_kinematics: pose has " +
                            std::to_string(pose.rot.size()) + " joints, model has " +
                            std::to_string(j));
  FkResult out;
  out.position.resize(j);
  out.rotation = pose.rot;
  out.position[0] = Vec3::Zero();
  for (int i = 1; i < j; ++i)
    out.position[i] = out.position[model.parent[i]] +
                      pose.rot[model.parent[i]] * model.scaled_offset(i);
  return out;
}

std::vector<Vec3> rest_positions(const SkeletonModel& model) {
  std::vector<Vec3> pos(model.joint_count());
  pos[0] = Vec3::Zero();
  for (int i = 1; i < model.joint_count(); ++i)
    pos[i] = pos[model.parent[i]] + model.scaled_offset(i);
  return pos;
}

std::vector<Vec3> skin_markers(const SkeletonModel& model, const Pose& pose,
                               const Vec3& root_translation) {
  FkResult fk = forward_kinematics(model, pose);
  std::vector<Vec3> rest = rest_positions(model);
  std::vector<Vec3> out(model.markers.size());
  for (std::size_t m = 0; m < model.markers.size(); ++m) {
    const MarkerBinding& mk = model.markers[m];
    Vec3 p = Vec3::Zero();
    for (auto& [joint, w] : mk.weights)
      p += w * (pose.rot[joint] * (mk.rest - rest[joint]) + fk.position[joint]);
    out[m] = p + root_translation;
  }
  return out;
}

std::vector<Mat3> local_from_global(const SkeletonModel& model, const Pose& pose) {
  const int j = model.joint_count();
  if (pose.rot.size() != static_cast<std::size_t>(j))
    throw DimensionMismatch("local_from_global: joint count mismatch");
  std::vector<Mat3> local(j);
  local[0] = pose.rot[0];
  for (int i = 1; i < j; ++i)
    local[i] = pose.rot[model.parent[i]].transpose() * pose.rot[i];
  return local;
}

Pose global_from_local(const SkeletonModel& model, const std::vector<Mat3>& local) {
  const int j = model.joint_count();
  if (local.size() != static_cast<std::size_t>(j))
    throw DimensionMismatch("global_from_local: joint count mismatch");
  Pose pose;
  pose.rot.resize(j);
  pose.rot[0] = local[0];
  for (int i = 1; i < j; ++i) pose.rot[i] = pose.rot[model.parent[i]] * local[i];
  return pose;
}

namespace {

struct JointDef {
  const char* name;
  int parent;
  double x, y, z;       // rest offset, meters
  double sx, sy, sz;    // surface-marker offset from the joint center
};

// SMPL-style 24-joint tree. Axis convention: x left, y up, z forward.
constexpr JointDef kJoints[24] = {
    {"pelvis", -1, 0.00, 0.00, 0.00, 0.00, 0.00, 0.11},
    {"l_hip", 0, 0.09, -0.06, 0.00, 0.05, 0.00, 0.08},
    {"r_hip", 0, -0.09, -0.06, 0.00, -0.05, 0.00, 0.08},
    {"spine1", 0, 0.00, 0.11, 0.00, 0.00, 0.00, 0.10},
    {"l_knee", 1, 0.00, -0.40, 0.00, 0.03, 0.00, 0.06},
    {"r_knee", 2, 0.00, -0.40, 0.00, -0.03, 0.00, 0.06},
    {"spine2", 3, 0.00, 0.13, 0.00, 0.00, 0.00, 0.10},
    {"l_ankle", 4, 0.00, -0.41, 0.00, 0.04, 0.02, 0.00},
    {"r_ankle", 5, 0.00, -0.41, 0.00, -0.04, 0.02, 0.00},
    {"spine3", 6, 0.00, 0.06, 0.00, 0.00, 0.00, 0.09},
    {"l_foot", 7, 0.00, -0.06, 0.13, 0.02, 0.00, 0.04},
    {"r_foot", 8, 0.00, -0.06, 0.13, -0.02, 0.00, 0.04},
    {"neck", 9, 0.00, 0.22, 0.00, 0.00, 0.00, 0.05},
    {"l_collar", 9, 0.07, 0.12, 0.00, 0.03, 0.03, 0.05},
    {"r_collar", 9, -0.07, 0.12, 0.00, -0.03, 0.03, 0.05},
    {"head", 12, 0.00, 0.10, 0.00, 0.00, 0.06, 0.09},
    {"l_shoulder", 13, 0.10, 0.04, 0.00, 0.02, 0.06, 0.00},
    {"r_shoulder", 14, -0.10, 0.04, 0.00, -0.02, 0.06, 0.00},
    {"l_elbow", 16, 0.26, 0.00, 0.00, 0.00, 0.04, 0.02},
    {"r_elbow", 17, -0.26, 0.00, 0.00, 0.00, 0.04, 0.02},
    {"l_wrist", 18, 0.25, 0.00, 0.00, 0.00, 0.03, 0.02},
    {"r_wrist", 19, -0.25, 0.00, 0.00, 0.00, 0.03, 0.02},
    {"l_hand", 20, 0.08, 0.00, 0.00, 0.00, 0.02, 0.01},
    {"r_hand", 21, -0.08, 0.00, 0.00, 0.00, 0.02, 0.01},
};

}  // namespace

SkeletonModel default_skeleton() {
  SkeletonModel m;
  m.name = "smpl24-default";
  for (const JointDef& d : kJoints) {
    m.joint_names.emplace_back(d.name);
    m.parent.push_back(d.parent);
    m.offsets.emplace_back(d.x, d.y, d.z);
  }
  m.leaf_bones = {0, 4, 5, 15, 18, 19};
  m.left_foot = 10;
  m.right_foot = 11;
  m.predicted_joints = {1, 2, 3, 4, 5, 6, 9, 12, 13, 14, 15, 16, 17, 18, 19};

  std::vector<Vec3> rest = rest_positions(m);
  auto add = [&m](Vec3 rest_pos, std::vector<std::pair<int, double>> w) {
    m.markers.push_back({rest_pos, std::move(w)});
  };

  // Sensor mount points first (indices 0..5, sensor order): lower back,
  // shins, back of the head, forearms. Lever arms off the joint centers so
  // synthesized accelerations see rotational motion.
  add(rest[0] + Vec3(0.00, 0.02, -0.12), {{0, 1.0}});
  add(rest[4] + Vec3(0.03, -0.15, 0.05), {{4, 1.0}});
  add(rest[5] + Vec3(-0.03, -0.15, 0.05), {{5, 1.0}});
  add(rest[15] + Vec3(0.00, 0.06, -0.10), {{15, 1.0}});
  add(rest[18] + Vec3(0.13, 0.03, 0.00), {{18, 1.0}});
  add(rest[19] + Vec3(-0.13, 0.03, 0.00), {{19, 1.0}});

  // One surface marker per joint, offset outward from the joint center.
  for (int j = 0; j < 24; ++j) {
    const JointDef& d = kJoints[j];
    add(rest[j] + Vec3(d.sx, d.sy, d.sz), {{j, 1.0}});
  }

  // Mid-segment markers blended half/half between a joint and its parent.
  for (int j = 1; j < 24; ++j) {
    Vec3 mid = 0.5 * (rest[j] + rest[m.parent[j]]);
    add(mid + Vec3(0.0, 0.0, 0.03), {{m.parent[j], 0.5}, {j, 0.5}});
  }

  // A few multi-joint torso/limb markers (3-4 influences).
  add(Vec3(0.00, 0.28, 0.10), {{3, 0.25}, {6, 0.25}, {9, 0.25}, {12, 0.25}});
  add(Vec3(0.00, 0.18, -0.11), {{3, 0.3}, {6, 0.4}, {9, 0.3}});
  add(Vec3(0.11, -0.03, 0.06), {{0, 0.5}, {1, 0.5}});
  add(Vec3(-0.11, -0.03, 0.06), {{0, 0.5}, {2, 0.5}});
  add(Vec3(0.14, 0.40, 0.02), {{9, 0.25}, {13, 0.5}, {16, 0.25}});
  add(Vec3(-0.14, 0.40, 0.02), {{9, 0.25}, {14, 0.5}, {17, 0.25}});
  add(rest[16] + Vec3(0.13, -0.04, 0.00), {{16, 0.6}, {18, 0.4}});
  add(rest[17] + Vec3(-0.13, -0.04, 0.00), {{17, 0.6}, {19, 0.4}});
  add(rest[4] + Vec3(0.00, -0.20, -0.05), {{4, 0.7}, {7, 0.3}});
  add(rest[5] + Vec3(0.00, -0.20, -0.05), {{5, 0.7}, {8, 0.3}});
  add(rest[15] + Vec3(0.00, 0.12, 0.00), {{12, 0.3}, {15, 0.7}});

  m.validate();
  return m;
}

SkeletonModel skeleton_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("skeleton json: ") + e.what());
  }
  try {
    SkeletonModel m;
    m.name = doc.value("name", "");
    for (const json& j : doc.at("joints")) {
      m.joint_names.push_back(j.at("name").get<std::string>());
      m.parent.push_back(j.at("parent").get<int>());
      const json& o = j.at("offset");
      m.offsets.emplace_back(o.at(0).get<double>(), o.at(1).get<double>(),
                             o.at(2).get<double>());
    }
    const json& lb = doc.at("leafBones");
    m.leaf_bones.root = lb.at("root").get<int>();
    m.leaf_bones.lleg = lb.at("lleg").get<int>();
    m.leaf_bones.rleg = lb.at("rleg").get<int>();
    m.leaf_bones.head = lb.at("head").get<int>();
    m.leaf_bones.larm = lb.at("larm").get<int>();
    m.leaf_bones.rarm = lb.at("rarm").get<int>();
    m.left_foot = doc.at("feet").at("left").get<int>();
    m.right_foot = doc.at("feet").at("right").get<int>();
    for (const json& mk : doc.at("markers")) {
      MarkerBinding b;
      const json& r = mk.at("rest");
      b.rest = Vec3(r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>());
      for (const json& w : mk.at("weights"))
        b.weights.emplace_back(w.at(0).get<int>(), w.at(1).get<double>());
      m.markers.push_back(std::move(b));
    }
    if (doc.contains("predictedJoints")) {
      for (const json& p : doc.at("predictedJoints"))
        m.predicted_joints.push_back(p.get<int>());
    } else if (m.joint_count() == 24) {
      m.predicted_joints = {1, 2, 3, 4, 5, 6, 9, 12, 13, 14, 15, 16, 17, 18, 19};
    } else {
      throw ParseError("skeleton json: predictedJoints required for non-default trees");
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("skeleton json: ") + e.what());
  }
}

std::string skeleton_to_json_text(const SkeletonModel& m) {
  json joints = json::array();
  for (int j = 0; j < m.joint_count(); ++j)
    joints.push_back({{"name", m.joint_names[j]},
                      {"parent", m.parent[j]},
                      {"offset", {m.offsets[j].x(), m.offsets[j].y(), m.offsets[j].z()}}});
  json markers = json::array();
  for (const MarkerBinding& b : m.markers) {
    json w = json::array();
    for (auto& [joint, weight] : b.weights) w.push_back({joint, weight});
    markers.push_back(
        {{"rest", {b.rest.x(), b.rest.y(), b.rest.z()}}, {"weights", w}});
  }
  json doc = {{"name", m.name},
              {"joints", joints},
              {"leafBones",
               {{"root", m.leaf_bones.root},
                {"lleg", m.leaf_bones.lleg},
                {"rleg", m.leaf_bones.rleg},
                {"head", m.leaf_bones.head},
                {"larm", m.leaf_bones.larm},
                {"rarm", m.leaf_bones.rarm}}},
              {"feet", {{"left", m.left_foot}, {"right", m.right_foot}}},
              {"markers", markers},
              {"predictedJoints", m.predicted_joints}};
  return doc.dump(2) + "\n";
}

SkeletonModel load_skeleton_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open skeleton file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return skeleton_from_json_text(ss.str());
}

void save_skeleton_json(const SkeletonModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write skeleton file: " + path);
  out << skeleton_to_json_text(model);
  if (!out) throw IoError("short write: " + path);
}

}  // namespace imocap
