#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "lorel/rng.hpp"

namespace lorel::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::sqrt(x * x + y * y); }
  bool operator==(const Vec2& o) const = default;
};

inline double dist(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Scene geometry. The table frame is +x right, +y away from the viewer.
inline constexpr double kTableMaxX = 1.0;
inline constexpr double kTableMaxY = 0.6;
inline constexpr double kActionBound = 0.05;       // m per step, per axis
inline constexpr double kDrawerExtMax = 0.16;      // m
inline constexpr double kFaucetAngleMax = M_PI / 2;
inline constexpr double kInteractionRadius = 0.22; // ee-to-handle engagement
// Fraction of resets that spawn the ee near a randomly chosen object, and
// how near. Random-action episodes are only as instructive as their contact
// rate, so the spawn leans toward the workspace objects.
inline constexpr double kNearSpawnProb = 0.80;
inline constexpr double kNearSpawnRadius = 0.06;
inline constexpr double kFaucetLever = 0.08;       // handle arm length
inline constexpr double kMugRadius = 0.04;
inline constexpr Vec2 kDrawerAnchor{0.2, 0.45};    // handle position at ext=0
inline constexpr double kDrawerAxisSign = -1.0;    // slides along signed y
inline constexpr Vec2 kFaucetBase{0.8, 0.45};

// End effector plus the four scene objects. All fields in table frame.
struct SceneState {
  Vec2 ee;
  double drawer_ext = 0.0;     // [0, kDrawerExtMax]
  double faucet_angle = 0.0;   // [-pi/2, pi/2], positive turns left (ccw)
  Vec2 black_mug;
  Vec2 white_mug;

  bool operator==(const SceneState& o) const = default;
};

struct Action {
  Vec2 delta;  // each component in [-kActionBound, kActionBound]
};

enum class TaskId {
  kCloseDrawer,
  kOpenDrawer,
  kFaucetLeft,
  kFaucetRight,
  kBlackMugRight,
  kWhiteMugDown,
};

inline constexpr std::array<TaskId, 6> kAllTasks = {
    TaskId::kCloseDrawer,  TaskId::kOpenDrawer,    TaskId::kFaucetLeft,
    TaskId::kFaucetRight,  TaskId::kBlackMugRight, TaskId::kWhiteMugDown,
};

struct TaskSpec {
  TaskId id;
  double threshold;  // meters for drawer/mug tasks, radians for faucet tasks
};

TaskSpec task_spec(TaskId id);
std::string task_name(TaskId id);
TaskId task_from_name(const std::string& name);

// The instruction string each task is evaluated with.
std::string canonical_instruction(TaskId id);

Vec2 drawer_handle(const SceneState& s);
Vec2 faucet_handle(const SceneState& s);

// Drawn uniformly within legal, non-overlapping placements; deterministic in
// seed. Falls back to a fixed layout after bounded rejection retries.
SceneState reset(std::uint64_t seed);

// Kinematic step: clip the action, move the end effector, couple at most one
// articulated object (nearest engaged handle, drawer before faucet on ties),
// then push mugs out of the end effector. Pure function.
SceneState step(const SceneState& s, const Action& a);

// True iff the task's object moved past the task threshold, in the task's
// signed direction, between s0 and s.
bool success(const TaskSpec& task, const SceneState& s0, const SceneState& s);

using StateVec = std::array<double, 9>;

// Canonical encoding:
// [ee.x, ee.y, drawer_ext, faucet_angle, bmug.x, bmug.y, wmug.x, wmug.y,
//  drawer_axis_sign]
StateVec state_vector(const SceneState& s);
SceneState state_from_vector(const StateVec& v);

// Clamp every component of an arbitrary 9-vector into legal state ranges.
StateVec clip_state_vector(const StateVec& v);

Action random_action(Rng& rng);

// Reset-time invariants: bounds, articulation ranges, mug separation from
// each other and the drawer handle, ee clear of mugs.
bool valid(const SceneState& s);

}  // namespace lorel::sim
