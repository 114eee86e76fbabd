#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lorel/tablesim.hpp"

namespace lorel::data {

// Bumped when the on-disk episode schema changes. Carried in memory; episode
// lines themselves hold only {seed, instruction, states, actions}.
inline constexpr int kFormatVersion = 1;

struct Episode {
  std::uint64_t seed = 0;
  std::string instruction;
  std::vector<sim::StateVec> states;            // length T+1
  std::vector<std::array<double, 2>> actions;   // length T

  bool operator==(const Episode&) const = default;
};

struct Dataset {
  std::vector<Episode> episodes;
  int horizon = 0;
  int format_version = kFormatVersion;

  bool operator==(const Dataset&) const = default;
};

// Template labeler: one phrase per object whose start-to-end delta exceeds
// its threshold (drawer 0.01 m, faucet pi/20 rad, mug 0.01 m displacement),
// shuffled with an rng seeded from the episode seed and joined with " and ".
// Episodes that moved nothing label as "do nothing".
std::string annotate_episode(const Episode& e);

// Random-policy corpus: episode i derives its stream from (seed, i), rolls
// reset + T uniform actions, then labels itself via annotate_episode.
Dataset collect(int n_episodes, int T, std::uint64_t seed);

// Drops episodes labeled exactly "do nothing", preserving order.
Dataset filter_dataset(const Dataset& d);

// JSONL, one episode per line, full round-trip float precision.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Fraction of episodes that would survive filter_dataset.
double survival_rate(const Dataset& d);

std::size_t unique_instruction_count(const Dataset& d);

}  // namespace lorel::data
