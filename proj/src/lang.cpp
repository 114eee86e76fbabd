#include "lorel/lang.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <fstream>
#include <sstream>

#include "lorel/errors.hpp"

namespace lorel::lang {

std::string encoder_mode_name(EncoderMode m) {
  return m == EncoderMode::kLexicon ? "lexicon" : "hash-only";
}

EncoderMode encoder_mode_from_name(const std::string& name) {
  if (name == "lexicon") return EncoderMode::kLexicon;
  if (name == "hash-only") return EncoderMode::kHashOnly;
  throw ConfigError("unknown encoder mode: " + name);
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("lexicon: cannot open " + path);
  Lexicon lex;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string synset, token;
    ss >> synset;
    while (ss >> token) {
      auto [it, inserted] = lex.synset_of.emplace(token, synset);
      if (!inserted && it->second != synset)
        throw ConfigError("lexicon: token '" + token + "' appears in two synsets");
    }
  }
  return lex;
}

Lexicon Lexicon::builtin() {
  static const char* kLines[] = {
      "open open pull",
      "close close shut push",
      "turn turn rotate spin",
      "move move shift slide",
      "drawer drawer cabinet dresser",
      "faucet faucet nozzle tap valve",
      "mug mug cup",
      "black black dark",
      "white white light",
      "left left",
      "right right",
      "up up",
      "down down",
  };
  Lexicon lex;
  for (const char* line : kLines) {
    std::istringstream ss(line);
    std::string synset, token;
    ss >> synset;
    while (ss >> token) lex.synset_of.emplace(token, synset);
  }
  return lex;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

Encoder::Encoder(EncoderMode mode, Lexicon lexicon, std::uint64_t seed)
    : mode_(mode), lexicon_(std::move(lexicon)), seed_(seed) {}

Eigen::VectorXd Encoder::hash_vector(const std::string& text) const {
  unsigned char key[8];
  for (int i = 0; i < 8; ++i) key[i] = static_cast<unsigned char>(seed_ >> (8 * i));

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, key, sizeof key);
  EVP_DigestUpdate(ctx, text.data(), text.size());
  EVP_DigestFinal_ex(ctx, digest, &digest_len);
  EVP_MD_CTX_free(ctx);

  std::uint64_t stream_seed = 0;
  for (int i = 0; i < 8; ++i) stream_seed |= static_cast<std::uint64_t>(digest[i]) << (8 * i);

  Rng rng(stream_seed);
  Eigen::VectorXd v(kEmbedDim);
  for (int i = 0; i < kEmbedDim; ++i) v[i] = rng.normal();
  return v / v.norm();
}

Eigen::VectorXd Encoder::embed_token(const std::string& token) const {
  if (mode_ == EncoderMode::kLexicon) {
    auto it = lexicon_.synset_of.find(token);
    if (it != lexicon_.synset_of.end()) {
      Eigen::VectorXd v = hash_vector("synset:" + it->second) + 0.1 * hash_vector(token);
      return v / v.norm();
    }
  }
  return hash_vector(token);
}

Eigen::VectorXd Encoder::encode(const std::string& sentence) const {
  std::vector<std::string> tokens = tokenize(sentence);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kEmbedDim);
  if (tokens.empty()) return sum;
  for (const std::string& t : tokens) sum += embed_token(t);
  return sum / static_cast<double>(tokens.size());
}

Eigen::VectorXd perturb(const Eigen::VectorXd& e, Rng& rng, double scale) {
  Eigen::VectorXd out(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) out[i] = e[i] + rng.uniform(-scale, scale);
  return out;
}

}  // namespace lorel::lang
