#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lorel/rng.hpp"

namespace lorel::lang {

inline constexpr int kEmbedDim = 32;
inline constexpr std::uint64_t kDefaultLangSeed = 0x10E31;

enum class EncoderMode { kLexicon, kHashOnly };

std::string encoder_mode_name(EncoderMode m);
EncoderMode encoder_mode_from_name(const std::string& name);

// Synonym groups. Tokens sharing a synset id embed near each other in
// lexicon mode, which is what lets paraphrased instructions generalize.
struct Lexicon {
  std::map<std::string, std::string> synset_of;  // token -> synset id

  // One synset per line: "<synset-id> <token> <token> ...".
  static Lexicon load(const std::string& path);
  // The bundled default covering the tabletop vocabulary.
  static Lexicon builtin();
};

// Lowercase, split on whitespace/punctuation, drop empties.
std::vector<std::string> tokenize(const std::string& s);

// Deterministic sentence encoder. Token vectors come from a seeded
// cryptographic hash; lexicon mode anchors each token to its synset's base
// vector plus a small token-specific offset, hash-only mode gives every
// distinct token an independent direction.
class Encoder {
 public:
  Encoder(EncoderMode mode, Lexicon lexicon, std::uint64_t seed = kDefaultLangSeed);

  Eigen::VectorXd embed_token(const std::string& token) const;
  // Mean of token embeddings; empty sentence encodes to the zero vector.
  Eigen::VectorXd encode(const std::string& sentence) const;

  EncoderMode mode() const { return mode_; }
  const Lexicon& lexicon() const { return lexicon_; }

 private:
  Eigen::VectorXd hash_vector(const std::string& text) const;

  EncoderMode mode_;
  Lexicon lexicon_;
  std::uint64_t seed_;
};

// Adds iid uniform noise in [-scale, scale] per component (train-time only).
Eigen::VectorXd perturb(const Eigen::VectorXd& e, Rng& rng, double scale);

}  // namespace lorel::lang
