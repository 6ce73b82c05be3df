#include "imocap/motiongen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "imocap/errors.hpp"
#include "imocap/rotmath.hpp"

namespace imocap {

namespace {

constexpr double kHalfG = 4.905;  // m/s^2, half the gravity constant

// Joint handles the generators articulate, resolved once from the topology
// (foot parent chains, leaf bones, head chain) so any skeleton with the
// standard conventions works, not just the built-in one.
struct Rig {
  int l_hip, r_hip, l_knee, r_knee, l_ankle, r_ankle;
  int l_shoulder, r_shoulder, l_elbow, r_elbow;
  int head;
  std::vector<int> spine;  // between root and neck, root side first
};

Rig resolve_rig(const SkeletonModel& m) {
  m.validate();
  auto up = [&](int j, const char* what) {
    if (j <= 0 || j >= m.joint_count())
      throw ParseError(std::string("motion generator: ") + what +
                       " chain does not reach the root the expected way");
    return m.parent[j];
  };
  Rig r;
  r.l_ankle = up(m.left_foot, "left foot");
  r.l_knee = up(r.l_ankle, "left foot");
  r.l_hip = up(r.l_knee, "left foot");
  r.r_ankle = up(m.right_foot, "right foot");
  r.r_knee = up(r.r_ankle, "right foot");
  r.r_hip = up(r.r_knee, "right foot");
  r.l_elbow = m.leaf_bones.larm;
  r.r_elbow = m.leaf_bones.rarm;
  r.l_shoulder = up(r.l_elbow, "left arm");
  r.r_shoulder = up(r.r_elbow, "right arm");
  r.head = m.leaf_bones.head;
  int neck = up(r.head, "head");
  for (int j = up(neck, "head"); j > 0; j = m.parent[j]) r.spine.push_back(j);
  std::reverse(r.spine.begin(), r.spine.end());
  return r;
}

long frame_count(double seconds, double fps) {
  if (fps <= 0.0) throw EmptyInput("motion generator: fps must be positive");
  long n = std::llround(seconds * fps);
  if (n <= 0) throw EmptyInput("motion generator: duration shorter than one frame");
  return n;
}

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Root translation that keeps `foot` at the world point `pin`.
Vec3 solve_pin(const FkResult& fk, int foot, const Vec3& pin) {
  return pin - fk.position[foot];
}

}  // namespace

GeneratedMotion gen_walk(const SkeletonModel& model, double seconds,
                         const GaitStyle& style, double fps) {
  const long n = frame_count(seconds, fps);
  const Rig rig = resolve_rig(model);
  const int joints = model.joint_count();
  const double nsp = static_cast<double>(std::max<std::size_t>(rig.spine.size(), 1));
  const double drop = 1.15;  // rad, shoulders bring the arms down from T-pose

  GeneratedMotion out;
  out.motion.fps = fps;
  out.motion.frames.reserve(static_cast<std::size_t>(n));
  out.stance.reserve(static_cast<std::size_t>(n));

  double heading = 0.0;
  Vec3 pin = Vec3::Zero();
  int pin_foot = -1;
  FkResult prev_fk;
  Vec3 prev_trans = Vec3::Zero();

  for (long t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fps;
    const double phi = 2.0 * kPi * style.stride_hz * time;
    const double s = std::sin(phi), c = std::cos(phi);

    // Hip angle > 0 swings the thigh backward; the stance leg is the one
    // whose hip angle is increasing, which drives the body forward.
    const double hip_l = style.hip_amp * s;
    const double hip_r = -hip_l;
    const double knee_l = style.knee_amp * std::max(0.0, -c);
    const double knee_r = style.knee_amp * std::max(0.0, c);

    std::vector<Mat3> local(static_cast<std::size_t>(joints), Mat3::Identity());
    local[rig.l_hip] = rot_x(hip_l);
    local[rig.r_hip] = rot_x(hip_r);
    local[rig.l_knee] = rot_x(knee_l);
    local[rig.r_knee] = rot_x(knee_r);
    // Full hip compensation keeps the foot flat whenever the knee is
    // straight, so both feet sit at the same height at every stance switch
    // and the ground level stays put.
    local[rig.l_ankle] = rot_x(-hip_l - 0.4 * knee_l);
    local[rig.r_ankle] = rot_x(-hip_r - 0.4 * knee_r);

    // Arms counter-swing their own-side leg; negative bend is forward once
    // the arm hangs.
    local[rig.l_shoulder] = rot_x(-style.arm_amp * s) * rot_z(-drop);
    local[rig.r_shoulder] = rot_x(style.arm_amp * s) * rot_z(drop);
    local[rig.l_elbow] = rot_x(-(0.15 + 0.5 * style.elbow_amp * (1.0 - s)));
    local[rig.r_elbow] = rot_x(-(0.15 + 0.5 * style.elbow_amp * (1.0 + s)));

    for (int j : rig.spine)
      local[j] = rot_x(style.lean / nsp) * rot_z(style.sway_amp * s / nsp);
    local[rig.head] = rot_x(-0.6 * style.lean);
    local[0] = rot_y(heading);  // roll lives in the spine so pin heights stay level

    Pose pose = global_from_local(model, local);
    FkResult fk = forward_kinematics(model, pose);

    const bool left = c >= 0.0;
    const int foot = left ? model.left_foot : model.right_foot;
    if (t > 0 && foot != pin_foot) pin = prev_trans + prev_fk.position[foot];
    pose.trans = solve_pin(fk, foot, pin);
    pin_foot = foot;
    prev_fk = std::move(fk);
    prev_trans = pose.trans;

    out.stance.push_back({static_cast<std::uint8_t>(left ? 1 : 0),
                          static_cast<std::uint8_t>(left ? 0 : 1)});
    out.motion.frames.push_back(std::move(pose));
    heading += style.turn_rate / fps;
  }
  return out;
}

GeneratedMotion gen_arm_swing(const SkeletonModel& model, double seconds,
                              std::uint64_t seed, double fps) {
  const long n = frame_count(seconds, fps);
  const Rig rig = resolve_rig(model);
  const int joints = model.joint_count();
  const double nsp = static_cast<double>(std::max<std::size_t>(rig.spine.size(), 1));

  std::mt19937_64 rng(seed ^ 0x7f4a7c15f39cc060ull);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  const double f_swing = uni(0.15, 0.55), p_swing = uni(0.0, 2.0 * kPi);
  const double f_twist = uni(0.15, 0.55), p_twist = uni(0.0, 2.0 * kPi);
  const double f_lift = uni(0.1, 0.4), p_lift = uni(0.0, 2.0 * kPi);
  const double f_bend = uni(0.2, 0.6), p_bend = uni(0.0, 2.0 * kPi);
  const double f_nod = uni(0.1, 0.3), p_nod = uni(0.0, 2.0 * kPi);
  const double a_swing = uni(0.4, 1.0);
  const double a_spin = uni(0.1, 0.5);
  const double a_bend = uni(0.3, 0.9);
  const double a_twist = uni(0.1, 0.3);
  const double a_nod = uni(0.05, 0.15);
  const double drop = uni(0.85, 1.25);

  GeneratedMotion out;
  out.motion.fps = fps;
  out.motion.frames.reserve(static_cast<std::size_t>(n));
  out.stance.assign(static_cast<std::size_t>(n), {1, 1});

  for (long t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fps;
    auto osc = [&](double f, double p) { return std::sin(2.0 * kPi * f * time + p); };
    const double swing = a_swing * osc(f_swing, p_swing);
    const double spin = a_spin * osc(f_twist, p_twist + 1.3);
    const double lift = 0.25 * (1.0 + osc(f_lift, p_lift));
    const double bend = 0.15 + 0.5 * a_bend * (1.0 + osc(f_bend, p_bend));

    std::vector<Mat3> local(static_cast<std::size_t>(joints), Mat3::Identity());
    local[rig.l_shoulder] =
        rot_x(-swing) * rot_y(spin) * rot_z(-(drop - lift));
    local[rig.r_shoulder] =
        rot_x(swing) * rot_y(-spin) * rot_z(drop - lift);
    local[rig.l_elbow] = rot_x(-bend);
    local[rig.r_elbow] = rot_x(-(0.15 + 0.5 * a_bend * (1.0 - osc(f_bend, p_bend))));
    for (int j : rig.spine) local[j] = rot_y(a_twist * osc(f_twist, p_twist) / nsp);
    local[rig.head] = rot_x(a_nod * osc(f_nod, p_nod));

    Pose pose = global_from_local(model, local);
    out.motion.frames.push_back(std::move(pose));  // trans stays zero
  }
  return out;
}

GeneratedMotion gen_jumps(const SkeletonModel& model, double seconds,
                          std::uint64_t seed, double fps) {
  const long n = frame_count(seconds, fps);
  const Rig rig = resolve_rig(model);
  const int joints = model.joint_count();
  const double nsp = static_cast<double>(std::max<std::size_t>(rig.spine.size(), 1));
  const double drop = 1.1;

  std::mt19937_64 rng(seed ^ 0x2545f4914f6cdd1dull);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };

  // Symmetric leg pose: crouch keeps the foot flat (hip/knee/ankle cancel),
  // tuck folds the legs without the ankle compensation.
  auto build = [&](double crouch, double tuck, double arm, double breathe) {
    std::vector<Mat3> local(static_cast<std::size_t>(joints), Mat3::Identity());
    const Mat3 hip = rot_x(-(crouch + tuck));
    const Mat3 knee = rot_x(2.0 * crouch + 1.5 * tuck);
    const Mat3 ankle = rot_x(-crouch);
    local[rig.l_hip] = hip;
    local[rig.r_hip] = hip;
    local[rig.l_knee] = knee;
    local[rig.r_knee] = knee;
    local[rig.l_ankle] = ankle;
    local[rig.r_ankle] = ankle;
    local[rig.l_shoulder] = rot_x(arm) * rot_z(-drop);
    local[rig.r_shoulder] = rot_x(arm) * rot_z(drop);
    local[rig.l_elbow] = rot_x(-(0.2 + 0.3 * crouch));
    local[rig.r_elbow] = rot_x(-(0.2 + 0.3 * crouch));
    for (int j : rig.spine) local[j] = rot_x((0.35 * crouch + breathe) / nsp);
    local[0] = rot_x(0.1 * crouch);
    return global_from_local(model, local);
  };

  GeneratedMotion out;
  out.motion.fps = fps;
  out.motion.frames.reserve(static_cast<std::size_t>(n));
  out.stance.reserve(static_cast<std::size_t>(n));

  enum Phase { Stand, Crouch, Extend, Flight, Absorb };
  Phase phase = Stand;
  long left_in_phase = std::lround(uni(0.4, 0.7) * fps);
  long phase_len = left_in_phase;
  double c_max = 0.0, c_absorb = 0.0, flight_T = 0.0, tuck_amp = 0.0;
  Vec3 v0 = Vec3::Zero(), takeoff = Vec3::Zero();
  Vec3 pin = Vec3::Zero();
  bool pin_valid = false;

  auto advance = [&](Phase next) {
    phase = next;
    switch (next) {
      case Stand: phase_len = std::lround(uni(0.4, 0.7) * fps); break;
      case Crouch:
        c_max = uni(0.5, 0.8);
        phase_len = std::lround(uni(0.25, 0.35) * fps);
        break;
      case Extend: phase_len = std::lround(uni(0.08, 0.12) * fps); break;
      case Flight: {
        phase_len = std::lround(uni(0.35, 0.5) * fps);
        flight_T = static_cast<double>(phase_len + 1) / fps;
        tuck_amp = uni(0.3, 0.7);
        const double dir = uni(0.0, 2.0 * kPi), speed = uni(0.8, 1.3);
        v0 = Vec3(speed * std::sin(dir), kHalfG * flight_T, speed * std::cos(dir));
        break;
      }
      case Absorb:
        c_absorb = uni(0.3, 0.6);
        phase_len = std::lround(uni(0.25, 0.4) * fps);
        break;
    }
    phase_len = std::max<long>(phase_len, 1);
    left_in_phase = phase_len;
  };
  advance(Stand);

  for (long t = 0; t < n; ++t) {
    const double time = static_cast<double>(t) / fps;
    const double done = 1.0 - static_cast<double>(left_in_phase) /
                                  static_cast<double>(phase_len);
    Pose pose;
    bool grounded = true;
    switch (phase) {
      case Stand:
        pose = build(0.0, 0.0, 0.0, 0.02 * std::sin(2.0 * kPi * 0.25 * time));
        break;
      case Crouch: {
        const double c = c_max * smoothstep(done);
        pose = build(c, 0.0, 0.6 * c / c_max, 0.0);
        break;
      }
      case Extend: {
        const double c = c_max * (1.0 - smoothstep(done));
        pose = build(c, 0.0, 0.6 - 1.5 * smoothstep(done), 0.0);
        break;
      }
      case Flight: {
        const double tau = (static_cast<double>(phase_len - left_in_phase) + 1.0) / fps;
        pose = build(0.0, tuck_amp * std::sin(kPi * tau / flight_T), -0.9, 0.0);
        pose.trans = takeoff + v0 * tau - Vec3(0.0, kHalfG * tau * tau, 0.0);
        grounded = false;
        break;
      }
      case Absorb: {
        const double c = c_absorb * std::sin(kPi * done);
        pose = build(c, 0.0, -0.9 * (1.0 - smoothstep(done)), 0.0);
        break;
      }
    }

    if (grounded) {
      FkResult fk = forward_kinematics(model, pose);
      if (!pin_valid) {
        // First grounded frame overall keeps the foot at the origin; after a
        // flight the foot is re-pinned wherever the arc put it, so the
        // trajectory stays continuous.
        if (t == 0) {
          pin = Vec3::Zero();
        } else {
          pose.trans = takeoff + v0 * flight_T - Vec3(0.0, kHalfG * flight_T * flight_T, 0.0);
          pin = pose.trans + fk.position[model.left_foot];
        }
        pin_valid = true;
      }
      pose.trans = solve_pin(fk, model.left_foot, pin);
      out.stance.push_back({1, 1});
    } else {
      out.stance.push_back({0, 0});
    }

    if (phase == Extend && left_in_phase == 1) {
      takeoff = pose.trans;  // ballistic arc starts from the last grounded frame
      pin_valid = false;
    }
    out.motion.frames.push_back(std::move(pose));

    if (--left_in_phase == 0) {
      switch (phase) {
        case Stand: advance(Crouch); break;
        case Crouch: advance(Extend); break;
        case Extend: advance(Flight); break;
        case Flight: advance(Absorb); break;
        case Absorb: advance(Stand); break;
      }
    }
  }
  return out;
}

GeneratedMotion gen_mixed(const SkeletonModel& model, double seconds,
                          std::uint64_t seed, double fps) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double a, double b) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  };
  const double pick = uni(0.0, 1.0);
  if (pick < 0.5) {
    GaitStyle st;
    st.stride_hz = uni(0.7, 1.4);
    st.hip_amp *= uni(0.7, 1.3);
    st.knee_amp *= uni(0.7, 1.3);
    st.arm_amp *= uni(0.7, 1.3);
    st.elbow_amp *= uni(0.7, 1.3);
    st.sway_amp *= uni(0.5, 1.5);
    st.lean *= uni(0.5, 1.5);
    st.turn_rate = uni(-0.3, 0.3);
    return gen_walk(model, seconds, st, fps);
  }
  if (pick < 0.75) return gen_jumps(model, seconds, rng(), fps);
  return gen_arm_swing(model, seconds, rng(), fps);
}

}  // namespace imocap
