#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ats/dataset.hpp"
#include "ats/rng.hpp"
#include "ats/tensor.hpp"

namespace ats {

enum class CharOp { Delete, Insert, Substitute };

const char* to_string(CharOp op);
std::optional<CharOp> char_op_from_string(std::string_view s);

struct NoiseConfig {
  double lambda_tok = 0.1;  // probability a token is corrupted
  std::vector<CharOp> ops = {CharOp::Delete, CharOp::Insert, CharOp::Substitute};
  std::uint64_t seed = 0;
  bool token_noise_enabled = true;  // ablation: character noise on OCR text

  void validate() const;
};

struct NoiseOutcome {
  std::string original;
  std::string corrupted;
  std::optional<CharOp> op;   // none when the token was left alone
  std::string edited;         // result of the character edit, before any fallback
  bool in_dictionary = false; // the edited string was already a dictionary word
  bool fallback = false;      // replaced by the nearest dictionary word
  int bernoulli_k = 0;        // 1 when the token was selected for corruption

  nlohmann::json to_json() const;
};

// Levenshtein distance with unit costs.
std::size_t edit_distance(std::string_view a, std::string_view b);

// Dictionary word at minimum edit distance; ties go to the lexicographically
// smallest word. Throws ConfigError on an empty dictionary.
const std::string& nearest_word(std::string_view s, const Dictionary& dict);

// Alphabet used by insertions and substitutions.
inline constexpr std::string_view kNoiseAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";

NoiseOutcome corrupt_token(const std::string& token, const Dictionary& dict, const NoiseConfig& cfg,
                           Rng& rng);

std::vector<NoiseOutcome> corrupt_tokens(std::span<const OcrToken> tokens, const Dictionary& dict,
                                         const NoiseConfig& cfg, Rng& rng);

// out_i = x_i + (xc_i - x_i) * (1-lambda)^k_i * lambda^(1-k_i), per token row.
Tensor mix_noise(const Tensor& x_txt, const Tensor& x_txt_corrupted, double lambda,
                 std::span<const int> k);

// Per-row factor (1-lambda)^k * lambda^(1-k).
double noise_scale(double lambda, int k);

}  // namespace ats
