#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "imocap/skeleton.hpp"

namespace imocap {

// Style knobs for the procedural gait engine. Defaults give a relaxed walk;
// push stride_hz/hip_amp up for a run.
struct GaitStyle {
  double stride_hz = 0.9;   // full gait cycles per second
  double hip_amp = 0.45;    // rad, thigh swing
  double knee_amp = 0.7;    // rad, swing-leg knee flexion
  double arm_amp = 0.35;    // rad, counter-swinging arms
  double elbow_amp = 0.25;  // rad
  double sway_amp = 0.06;   // rad, lateral spine sway
  double lean = 0.08;       // rad, forward spine lean
  double turn_rate = 0.0;   // rad/s heading change
};

struct GeneratedMotion {
  MotionSequence motion;
  // The generator's own support truth: 1 = that foot is pinned this frame.
  // Airborne frames are (0, 0).
  std::vector<std::array<std::uint8_t, 2>> stance;
};

// Cyclic walking with the supporting foot pinned exactly: the root
// translation is solved from the pin constraint every frame, so the stance
// foot's world position is constant to machine precision.
GeneratedMotion gen_walk(const SkeletonModel& model, double seconds,
                         const GaitStyle& style = {}, double fps = 60.0);

// Standing still with seeded multi-frequency arm, spine, and head movement.
GeneratedMotion gen_arm_swing(const SkeletonModel& model, double seconds,
                              std::uint64_t seed, double fps = 60.0);

// Stand / crouch / launch / ballistic flight / land cycles. Flight frames
// follow a projectile arc and carry (0, 0) stance.
GeneratedMotion gen_jumps(const SkeletonModel& model, double seconds,
                          std::uint64_t seed, double fps = 60.0);

// Seeded pick of one of the generators above with randomized style; the
// workhorse for building training corpora one sequence per seed.
GeneratedMotion gen_mixed(const SkeletonModel& model, double seconds,
                          std::uint64_t seed, double fps = 60.0);

}  // namespace imocap
