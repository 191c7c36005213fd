#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ats {

inline constexpr std::size_t kNumAnswers = 10;

// Normalized token box: (x0/w, y0/h, x1/w, y1/h, h, w). The last two are the
// box height and width in pixels.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0, h = 0, w = 0;

  std::array<double, 6> as_array() const { return {x0, y0, x1, y1, h, w}; }
  bool operator==(const Box&) const = default;
};

// Throws ValidationError naming `where` on a violated box invariant.
void validate_box(const Box& b, const std::string& where);

struct OcrToken {
  std::string text;
  Box box;
  std::vector<double> visual;  // stand-in for region appearance features
  bool operator==(const OcrToken&) const = default;
};

struct VisualObject {
  std::vector<double> appearance;
  std::vector<double> box;
  std::string label;
  bool operator==(const VisualObject&) const = default;
};

struct Sample {
  std::string id;
  std::string question;
  std::vector<VisualObject> objects;
  std::vector<OcrToken> ocr;
  std::vector<std::string> answers;  // always kNumAnswers entries after loading

  bool operator==(const Sample&) const = default;
};

// Lowercase whitespace tokenization.
std::vector<std::string> tokenize(const std::string& text);
std::string to_lower(std::string s);

struct CorpusLimits {
  std::size_t max_question_tokens = 20;
  std::size_t object_feature_dim = 16;
  std::size_t object_box_dim = 4;
  std::size_t ocr_feature_dim = 16;
};

// Parses one JSON record; `where` prefixes error messages.
Sample sample_from_json(const nlohmann::json& j, const CorpusLimits& limits, const std::string& where);
nlohmann::json sample_to_json(const Sample& s);
void validate_sample(const Sample& s, const CorpusLimits& limits, const std::string& where);

std::vector<Sample> load_corpus(const std::filesystem::path& path, const CorpusLimits& limits = {});
void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::string corpus_to_string(const std::vector<Sample>& samples);

// ---- synthetic scenes ------------------------------------------------------

struct LayoutSpec {
  std::size_t rows = 3;
  std::size_t cols = 3;
  std::size_t min_words = 4;
  double image_size = 1000.0;  // pixels; box h/w are reported in this unit
};

// Deterministic per (seed, n, grid). Every answer is the text of one of the
// sample's OCR tokens.
std::vector<Sample> synth_generate(std::uint64_t seed, std::size_t n, const LayoutSpec& grid = {},
                                   const CorpusLimits& limits = {});

// Word list the synthetic scenes draw from (lowercase, sorted, unique).
const std::vector<std::string>& synth_wordlist();

// ---- vocabularies ----------------------------------------------------------

class Vocab {
 public:
  static constexpr std::size_t kPad = 0, kBegin = 1, kEnd = 2, kUnk = 3;
  static const std::array<std::string, 4>& specials();

  Vocab();  // specials only
  explicit Vocab(std::vector<std::string> tokens);  // tokens[0..3] must be the specials

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;  // kUnk when absent
  std::optional<std::size_t> find(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, std::size_t> index_;
};

// Specials first, then tokens by (-frequency, lexicographic). min_freq filters
// rare tokens.
Vocab vocab_from_counts(const std::map<std::string, std::size_t>& counts, std::size_t min_freq);

// Word vocabulary over questions, object labels, OCR texts and answer tokens.
// `extra` words (e.g. the noise dictionary) are counted once each.
Vocab vocab_build(const std::vector<Sample>& samples, std::size_t min_freq,
                  const std::vector<std::string>& extra = {});
// Answer vocabulary over gold-answer tokens only.
Vocab answer_vocab_build(const std::vector<Sample>& samples, std::size_t min_freq);

// Majority answer (first on ties), the teacher-forcing target.
const std::string& gold_answer(const Sample& s);

// ---- dictionary ------------------------------------------------------------

class Dictionary {
 public:
  Dictionary() = default;
  explicit Dictionary(std::vector<std::string> words);  // lowercased, sorted, deduplicated

  static Dictionary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool empty() const { return words_.empty(); }
  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& w) const;
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
};

}  // namespace ats
