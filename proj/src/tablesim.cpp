#include "lorel/tablesim.hpp"

#include <algorithm>
#include <stdexcept>

namespace lorel::sim {

namespace {

double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Vec2 clip_table(const Vec2& p) {
  return {clamp(p.x, 0.0, kTableMaxX), clamp(p.y, 0.0, kTableMaxY)};
}

constexpr Vec2 kDrawerAxis{0.0, kDrawerAxisSign};

// Unit tangent of the faucet handle circle, oriented so positive tangential
// motion increases the angle (turns left).
Vec2 faucet_tangent(double angle) {
  return {-std::cos(angle), -std::sin(angle)};
}

bool in_table_pt(const Vec2& p) {
  return p.x >= 0 && p.x <= kTableMaxX && p.y >= 0 && p.y <= kTableMaxY;
}

// Push one mug out of the end effector along the penetration normal, then
// clip to the table.
void push_mug(const Vec2& ee, Vec2& mug) {
  Vec2 d = mug - ee;
  double r = d.norm();
  if (r >= kMugRadius) return;
  Vec2 n = r < 1e-12 ? Vec2{1.0, 0.0} : d * (1.0 / r);
  mug = clip_table(mug + n * (kMugRadius - r));
}

// Closest point to `want` that lies inside the table and outside both mug
// circles. Needed when a pushed mug gets pinned against a table edge and the
// end effector has to give way. The minimizer is `want` itself or sits on a
// circle; arc extrema are the radial feet plus intersections with table
// edges and with the other circle, so checking those candidates is exact.
Vec2 place_ee(const Vec2& want, const Vec2& a, const Vec2& b) {
  constexpr double kEps = 1e-12;
  auto legal = [&](const Vec2& p) {
    return in_table_pt(p) && dist(p, a) >= kMugRadius - kEps &&
           dist(p, b) >= kMugRadius - kEps;
  };
  Vec2 p = clip_table(want);
  if (legal(p)) return p;

  Vec2 cand[22];
  int n_cand = 0;
  auto add_circle_points = [&](const Vec2& m) {
    Vec2 d = p - m;
    double r = d.norm();
    Vec2 n = r < 1e-12 ? Vec2{1.0, 0.0} : d * (1.0 / r);
    cand[n_cand++] = m + n * kMugRadius;
    for (double x : {0.0, kTableMaxX}) {
      double t = kMugRadius * kMugRadius - (x - m.x) * (x - m.x);
      if (t < 0) continue;
      double dy = std::sqrt(t);
      cand[n_cand++] = {x, m.y + dy};
      cand[n_cand++] = {x, m.y - dy};
    }
    for (double y : {0.0, kTableMaxY}) {
      double t = kMugRadius * kMugRadius - (y - m.y) * (y - m.y);
      if (t < 0) continue;
      double dx = std::sqrt(t);
      cand[n_cand++] = {m.x + dx, y};
      cand[n_cand++] = {m.x - dx, y};
    }
  };
  add_circle_points(a);
  add_circle_points(b);

  Vec2 ab = b - a;
  double d2 = ab.dot(ab);
  if (d2 > 1e-18 && d2 < 4 * kMugRadius * kMugRadius) {
    double h = std::sqrt(kMugRadius * kMugRadius - 0.25 * d2);
    Vec2 mid = (a + b) * 0.5;
    Vec2 perp = Vec2{-ab.y, ab.x} * (1.0 / std::sqrt(d2));
    cand[n_cand++] = mid + perp * h;
    cand[n_cand++] = mid - perp * h;
  }

  Vec2 best = p;
  double best_d = 1e100;
  for (int i = 0; i < n_cand; ++i) {
    if (!legal(cand[i])) continue;
    double d = dist(cand[i], p);
    if (d < best_d) {
      best_d = d;
      best = cand[i];
    }
  }
  if (best_d < 1e99) return best;

  // Unreachable for this geometry (two radius-0.04 circles cannot seal off
  // the table), but keep a deterministic escape.
  for (int k = 0; k < 256; ++k) {
    double ang = 2.0 * M_PI * k / 256;
    Vec2 c = clip_table(p + Vec2{std::cos(ang), std::sin(ang)} * (2.5 * kMugRadius));
    if (legal(c)) return c;
  }
  return p;
}

}  // namespace

TaskSpec task_spec(TaskId id) {
  switch (id) {
    case TaskId::kFaucetLeft:
    case TaskId::kFaucetRight:
      return {id, M_PI / 10};
    default:
      return {id, 0.02};
  }
}

std::string task_name(TaskId id) {
  switch (id) {
    case TaskId::kCloseDrawer:   return "close-drawer";
    case TaskId::kOpenDrawer:    return "open-drawer";
    case TaskId::kFaucetLeft:    return "faucet-left";
    case TaskId::kFaucetRight:   return "faucet-right";
    case TaskId::kBlackMugRight: return "black-mug-right";
    case TaskId::kWhiteMugDown:  return "white-mug-down";
  }
  throw std::logic_error("task_name: bad id");
}

TaskId task_from_name(const std::string& name) {
  for (TaskId id : kAllTasks) {
    if (task_name(id) == name) return id;
  }
  throw std::invalid_argument("unknown task: " + name);
}

std::string canonical_instruction(TaskId id) {
  switch (id) {
    case TaskId::kCloseDrawer:   return "close drawer";
    case TaskId::kOpenDrawer:    return "open drawer";
    case TaskId::kFaucetLeft:    return "turn faucet left";
    case TaskId::kFaucetRight:   return "turn faucet right";
    case TaskId::kBlackMugRight: return "move black mug right";
    case TaskId::kWhiteMugDown:  return "move white mug down";
  }
  throw std::logic_error("canonical_instruction: bad id");
}

Vec2 drawer_handle(const SceneState& s) {
  return kDrawerAnchor + kDrawerAxis * s.drawer_ext;
}

Vec2 faucet_handle(const SceneState& s) {
  return kFaucetBase + Vec2{-std::sin(s.faucet_angle), std::cos(s.faucet_angle)} * kFaucetLever;
}

SceneState reset(std::uint64_t seed) {
  Rng rng(seed);
  SceneState s;
  s.drawer_ext = rng.uniform(0.02, 0.14);
  s.faucet_angle = rng.uniform(-M_PI / 3, M_PI / 3);

  Vec2 handle = drawer_handle(s);
  constexpr int kMaxTries = 100;

  auto place = [&](auto legal) -> Vec2 {
    for (int t = 0; t < kMaxTries; ++t) {
      Vec2 p{rng.uniform(0.0, kTableMaxX), rng.uniform(0.0, kTableMaxY)};
      if (legal(p)) return p;
    }
    return {-1.0, -1.0};  // caller substitutes the fallback layout
  };

  s.black_mug = place([&](const Vec2& p) {
    return dist(p, handle) >= 2 * kMugRadius;
  });
  s.white_mug = place([&](const Vec2& p) {
    return dist(p, handle) >= 2 * kMugRadius && dist(p, s.black_mug) >= 2 * kMugRadius;
  });
  auto ee_clear = [&](const Vec2& p) {
    return dist(p, s.black_mug) >= kMugRadius && dist(p, s.white_mug) >= kMugRadius;
  };
  s.ee = {-1.0, -1.0};
  if (rng.uniform() < kNearSpawnProb) {
    // Mugs get extra weight: handle engagement has a generous radius, mug
    // contact does not, so un-weighted spawns under-cover the mugs.
    Vec2 c;
    switch (rng.uniform_int(10)) {
      case 0: case 1: c = drawer_handle(s); break;
      case 2: case 3: c = faucet_handle(s); break;
      case 4: case 5: case 6: c = s.black_mug; break;
      default: c = s.white_mug; break;
    }
    for (int t = 0; t < kMaxTries; ++t) {
      Vec2 p{rng.uniform(c.x - kNearSpawnRadius, c.x + kNearSpawnRadius),
             rng.uniform(c.y - kNearSpawnRadius, c.y + kNearSpawnRadius)};
      if (p == clip_table(p) && dist(p, c) <= kNearSpawnRadius && ee_clear(p)) {
        s.ee = p;
        break;
      }
    }
  }
  if (s.ee.x < 0) s.ee = place(ee_clear);

  if (s.black_mug.x < 0 || s.white_mug.x < 0 || s.ee.x < 0) {
    s.black_mug = {0.35, 0.15};
    s.white_mug = {0.65, 0.15};
    s.ee = {0.5, 0.3};
  }
  return s;
}

SceneState step(const SceneState& s, const Action& a_in) {
  Vec2 a{clamp(a_in.delta.x, -kActionBound, kActionBound),
         clamp(a_in.delta.y, -kActionBound, kActionBound)};

  SceneState n = s;
  n.ee = clip_table(s.ee + a);

  // Engagement is decided on the pre-step geometry; only the nearest engaged
  // handle moves, drawer winning ties.
  double dd = dist(s.ee, drawer_handle(s));
  double df = dist(s.ee, faucet_handle(s));
  if (dd <= kInteractionRadius && (df > kInteractionRadius || dd <= df)) {
    n.drawer_ext = clamp(s.drawer_ext + a.dot(kDrawerAxis), 0.0, kDrawerExtMax);
  } else if (df <= kInteractionRadius) {
    n.faucet_angle = clamp(s.faucet_angle + a.dot(faucet_tangent(s.faucet_angle)) / kFaucetLever,
                           -kFaucetAngleMax, kFaucetAngleMax);
  }

  push_mug(n.ee, n.black_mug);
  push_mug(n.ee, n.white_mug);
  n.ee = place_ee(n.ee, n.black_mug, n.white_mug);
  return n;
}

bool success(const TaskSpec& task, const SceneState& s0, const SceneState& s) {
  switch (task.id) {
    case TaskId::kCloseDrawer:   return s0.drawer_ext - s.drawer_ext >= task.threshold;
    case TaskId::kOpenDrawer:    return s.drawer_ext - s0.drawer_ext >= task.threshold;
    case TaskId::kFaucetLeft:    return s.faucet_angle - s0.faucet_angle >= task.threshold;
    case TaskId::kFaucetRight:   return s0.faucet_angle - s.faucet_angle >= task.threshold;
    case TaskId::kBlackMugRight: return s.black_mug.x - s0.black_mug.x >= task.threshold;
    case TaskId::kWhiteMugDown:  return s0.white_mug.y - s.white_mug.y >= task.threshold;
  }
  throw std::logic_error("success: bad id");
}

StateVec state_vector(const SceneState& s) {
  return {s.ee.x,        s.ee.y,        s.drawer_ext,  s.faucet_angle, s.black_mug.x,
          s.black_mug.y, s.white_mug.x, s.white_mug.y, kDrawerAxisSign};
}

SceneState state_from_vector(const StateVec& v) {
  SceneState s;
  s.ee = {v[0], v[1]};
  s.drawer_ext = v[2];
  s.faucet_angle = v[3];
  s.black_mug = {v[4], v[5]};
  s.white_mug = {v[6], v[7]};
  return s;
}

StateVec clip_state_vector(const StateVec& v) {
  StateVec c = v;
  c[0] = clamp(v[0], 0.0, kTableMaxX);
  c[1] = clamp(v[1], 0.0, kTableMaxY);
  c[2] = clamp(v[2], 0.0, kDrawerExtMax);
  c[3] = clamp(v[3], -kFaucetAngleMax, kFaucetAngleMax);
  c[4] = clamp(v[4], 0.0, kTableMaxX);
  c[5] = clamp(v[5], 0.0, kTableMaxY);
  c[6] = clamp(v[6], 0.0, kTableMaxX);
  c[7] = clamp(v[7], 0.0, kTableMaxY);
  c[8] = kDrawerAxisSign;
  return c;
}

Action random_action(Rng& rng) {
  return {{rng.uniform(-kActionBound, kActionBound),
           rng.uniform(-kActionBound, kActionBound)}};
}

bool valid(const SceneState& s) {
  auto in_table = [](const Vec2& p) {
    return p.x >= 0 && p.x <= kTableMaxX && p.y >= 0 && p.y <= kTableMaxY;
  };
  if (!in_table(s.ee) || !in_table(s.black_mug) || !in_table(s.white_mug)) return false;
  if (s.drawer_ext < 0 || s.drawer_ext > kDrawerExtMax) return false;
  if (s.faucet_angle < -kFaucetAngleMax || s.faucet_angle > kFaucetAngleMax) return false;
  if (dist(s.black_mug, s.white_mug) < 2 * kMugRadius) return false;
  Vec2 handle = drawer_handle(s);
  if (dist(s.black_mug, handle) < 2 * kMugRadius) return false;
  if (dist(s.white_mug, handle) < 2 * kMugRadius) return false;
  if (dist(s.ee, s.black_mug) < kMugRadius - 1e-9) return false;
  if (dist(s.ee, s.white_mug) < kMugRadius - 1e-9) return false;
  return true;
}

}  // namespace lorel::sim
