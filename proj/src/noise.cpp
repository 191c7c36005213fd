#include "ats/noise.hpp"

#include <algorithm>
#include <cmath>

#include "ats/errors.hpp"

namespace ats {

const char* to_string(CharOp op) {
  switch (op) {
    case CharOp::Delete: return "delete";
    case CharOp::Insert: return "insert";
    case CharOp::Substitute: return "substitute";
  }
  return "?";
}

std::optional<CharOp> char_op_from_string(std::string_view s) {
  if (s == "delete") return CharOp::Delete;
  if (s == "insert") return CharOp::Insert;
  if (s == "substitute") return CharOp::Substitute;
  return std::nullopt;
}

void NoiseConfig::validate() const {
  if (!(lambda_tok >= 0.0 && lambda_tok <= 1.0)) {
    throw ConfigError("noise lambda_tok must lie in [0, 1], got " + std::to_string(lambda_tok));
  }
  if (token_noise_enabled && lambda_tok > 0.0 && ops.empty()) {
    throw ConfigError("token noise enabled with no character ops");
  }
}

nlohmann::json NoiseOutcome::to_json() const {
  nlohmann::json j;
  j["original"] = original;
  j["corrupted"] = corrupted;
  j["op_applied"] = op ? nlohmann::json(to_string(*op)) : nlohmann::json(nullptr);
  j["edited"] = edited;
  j["in_dictionary"] = in_dictionary;
  j["fallback"] = fallback;
  j["bernoulli_k"] = bernoulli_k;
  return j;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const std::string& nearest_word(std::string_view s, const Dictionary& dict) {
  if (dict.empty()) throw ConfigError("dictionary fallback requested with an empty dictionary");
  // Words are sorted, so the first minimum is the lexicographically smallest.
  const std::string* best = nullptr;
  std::size_t best_d = 0;
  for (const auto& w : dict.words()) {
    const std::size_t d = edit_distance(s, w);
    if (best == nullptr || d < best_d) {
      best = &w;
      best_d = d;
    }
  }
  return *best;
}

namespace {

char draw_char(Rng& rng) { return kNoiseAlphabet[rng.below(kNoiseAlphabet.size())]; }

std::string apply_op(const std::string& s, CharOp op, Rng& rng) {
  std::string out = s;
  switch (op) {
    case CharOp::Delete: {
      out.erase(rng.below(s.size()), 1);
      break;
    }
    case CharOp::Insert: {
      const auto pos = rng.below(s.size() + 1);
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), draw_char(rng));
      break;
    }
    case CharOp::Substitute: {
      const auto pos = rng.below(s.size());
      // Draw from the alphabet minus the current character.
      const char cur = s[pos];
      const bool cur_in = kNoiseAlphabet.find(cur) != std::string_view::npos;
      const std::size_t n = kNoiseAlphabet.size() - (cur_in ? 1 : 0);
      std::size_t r = rng.below(n);
      for (char c : kNoiseAlphabet) {
        if (c == cur) continue;
        if (r-- == 0) {
          out[pos] = c;
          break;
        }
      }
      break;
    }
  }
  return out;
}

}  // namespace

NoiseOutcome corrupt_token(const std::string& token, const Dictionary& dict, const NoiseConfig& cfg,
                           Rng& rng) {
  if (token.empty()) throw ContractError("corrupt_token: empty token");
  NoiseOutcome o;
  o.original = token;
  o.corrupted = token;
  o.edited = token;
  if (!cfg.token_noise_enabled || cfg.lambda_tok <= 0.0) return o;
  if (!rng.bernoulli(cfg.lambda_tok)) return o;
  o.bernoulli_k = 1;
  o.op = cfg.ops[rng.below(cfg.ops.size())];
  o.edited = apply_op(token, *o.op, rng);
  o.in_dictionary = !o.edited.empty() && dict.contains(to_lower(o.edited));
  if (o.in_dictionary) {
    o.corrupted = o.edited;
  } else {
    o.corrupted = nearest_word(to_lower(o.edited), dict);
    o.fallback = true;
  }
  return o;
}

std::vector<NoiseOutcome> corrupt_tokens(std::span<const OcrToken> tokens, const Dictionary& dict,
                                         const NoiseConfig& cfg, Rng& rng) {
  std::vector<NoiseOutcome> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(corrupt_token(t.text, dict, cfg, rng));
  return out;
}

double noise_scale(double lambda, int k) {
  if (k != 0 && k != 1) throw ContractError("noise_scale: k must be 0 or 1");
  return k == 1 ? 1.0 - lambda : lambda;
}

Tensor mix_noise(const Tensor& x_txt, const Tensor& x_txt_corrupted, double lambda,
                 std::span<const int> k) {
  if (x_txt.shape() != x_txt_corrupted.shape() || x_txt.dim() != 2) {
    throw DimensionError("mix_noise: clean " + shape_str(x_txt.shape()) + " vs corrupted " +
                         shape_str(x_txt_corrupted.shape()));
  }
  if (k.size() != x_txt.rows()) {
    throw DimensionError("mix_noise: " + std::to_string(k.size()) + " draws for " +
                         std::to_string(x_txt.rows()) + " rows");
  }
  std::vector<double> s(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) s[i] = noise_scale(lambda, k[i]);
  Tensor scales = Tensor::from({k.size(), 1}, std::move(s));
  // Broadcast the per-row factor across columns via a ones row.
  Tensor per_elem = matmul(scales, Tensor::filled({1, x_txt.cols()}, 1.0));
  return add(x_txt, mul(sub(x_txt_corrupted, x_txt), per_elem));
}

}  // namespace ats
