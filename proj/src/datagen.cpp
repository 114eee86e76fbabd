#include "lorel/datagen.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <utility>

#include "json.hpp"
#include "lorel/errors.hpp"
#include "lorel/rng.hpp"

namespace lorel::data {

namespace {

using nlohmann::json;
using sim::SceneState;
using sim::StateVec;

constexpr std::uint64_t kActionSalt = 0xAC710;
constexpr std::uint64_t kShuffleSalt = 0x5AFF1E;

constexpr double kDrawerNoteThreshold = 0.01;
constexpr double kFaucetNoteThreshold = M_PI / 20;
constexpr double kMugNoteThreshold = 0.01;

std::string mug_phrase(const std::string& color, double dx, double dy) {
  // Dominant displacement axis names the direction; x wins exact ties.
  std::string dir;
  if (std::abs(dx) >= std::abs(dy)) {
    dir = dx >= 0 ? "right" : "left";
  } else {
    dir = dy >= 0 ? "up" : "down";
  }
  return "move " + color + " mug " + dir;
}

}  // namespace

std::string annotate_episode(const Episode& e) {
  if (e.states.size() < 2) throw DataError("annotate_episode: needs at least 2 states");
  SceneState s0 = sim::state_from_vector(e.states.front());
  SceneState sT = sim::state_from_vector(e.states.back());

  std::vector<std::string> phrases;
  double d_drawer = sT.drawer_ext - s0.drawer_ext;
  if (std::abs(d_drawer) > kDrawerNoteThreshold)
    phrases.push_back(d_drawer > 0 ? "open drawer" : "close drawer");

  double d_faucet = sT.faucet_angle - s0.faucet_angle;
  if (std::abs(d_faucet) > kFaucetNoteThreshold)
    phrases.push_back(d_faucet > 0 ? "turn faucet left" : "turn faucet right");

  sim::Vec2 d_black = sT.black_mug - s0.black_mug;
  if (d_black.norm() > kMugNoteThreshold)
    phrases.push_back(mug_phrase("black", d_black.x, d_black.y));

  sim::Vec2 d_white = sT.white_mug - s0.white_mug;
  if (d_white.norm() > kMugNoteThreshold)
    phrases.push_back(mug_phrase("white", d_white.x, d_white.y));

  if (phrases.empty()) return "do nothing";

  Rng rng(mix_seed(e.seed, kShuffleSalt));
  for (std::size_t i = phrases.size(); i > 1; --i)
    std::swap(phrases[i - 1], phrases[rng.uniform_int(i)]);

  std::string out = phrases[0];
  for (std::size_t i = 1; i < phrases.size(); ++i) out += " and " + phrases[i];
  return out;
}

Dataset collect(int n_episodes, int T, std::uint64_t seed) {
  if (n_episodes < 1 || T < 1) throw DataError("collect: n_episodes and T must be >= 1");
  Dataset d;
  d.horizon = T;
  d.episodes.reserve(n_episodes);
  for (int i = 0; i < n_episodes; ++i) {
    Episode e;
    e.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(mix_seed(e.seed, kActionSalt));
    SceneState s = sim::reset(e.seed);
    e.states.push_back(sim::state_vector(s));
    for (int t = 0; t < T; ++t) {
      sim::Action a = sim::random_action(rng);
      s = sim::step(s, a);
      e.actions.push_back({a.delta.x, a.delta.y});
      e.states.push_back(sim::state_vector(s));
    }
    e.instruction = annotate_episode(e);
    d.episodes.push_back(std::move(e));
  }
  return d;
}

Dataset filter_dataset(const Dataset& d) {
  Dataset out;
  out.horizon = d.horizon;
  out.format_version = d.format_version;
  for (const Episode& e : d.episodes)
    if (e.instruction != "do nothing") out.episodes.push_back(e);
  return out;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("save_dataset: cannot open " + path);
  for (const Episode& e : d.episodes) {
    json j;
    j["seed"] = e.seed;
    j["instruction"] = e.instruction;
    j["states"] = e.states;
    j["actions"] = e.actions;
    f << j.dump() << '\n';
  }
  if (!f) throw DataError("save_dataset: write failed on " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_dataset: cannot open " + path);
  Dataset d;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& ex) {
      throw DataError("load_dataset: line " + std::to_string(lineno) + ": " + ex.what());
    }
    if (!j.contains("seed") || !j.contains("instruction") || !j.contains("states") ||
        !j.contains("actions")) {
      throw DataError("load_dataset: line " + std::to_string(lineno) + ": missing field");
    }
    Episode e;
    try {
      e.seed = j["seed"].get<std::uint64_t>();
      e.instruction = j["instruction"].get<std::string>();
      e.states = j["states"].get<std::vector<StateVec>>();
      e.actions = j["actions"].get<std::vector<std::array<double, 2>>>();
    } catch (const json::exception& ex) {
      throw DataError("load_dataset: line " + std::to_string(lineno) + ": " + ex.what());
    }
    if (e.states.size() != e.actions.size() + 1)
      throw DataError("load_dataset: line " + std::to_string(lineno) +
                      ": states must be one longer than actions");
    if (e.instruction.empty())
      throw DataError("load_dataset: line " + std::to_string(lineno) + ": empty instruction");
    int T = static_cast<int>(e.actions.size());
    if (d.episodes.empty()) {
      d.horizon = T;
    } else if (T != d.horizon) {
      throw DataError("load_dataset: line " + std::to_string(lineno) + ": horizon mismatch");
    }
    d.episodes.push_back(std::move(e));
  }
  return d;
}

double survival_rate(const Dataset& d) {
  if (d.episodes.empty()) return 0.0;
  std::size_t kept = 0;
  for (const Episode& e : d.episodes) kept += e.instruction != "do nothing";
  return static_cast<double>(kept) / static_cast<double>(d.episodes.size());
}

std::size_t unique_instruction_count(const Dataset& d) {
  std::set<std::string> uniq;
  for (const Episode& e : d.episodes) uniq.insert(e.instruction);
  return uniq.size();
}

}  // namespace lorel::data
