#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ats/dataset.hpp"
#include "ats/decoder.hpp"

namespace ats {

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_answer(const std::string& s);

// min(#normalized exact matches / 3, 1). Requires exactly 10 answers.
double soft_vote_accuracy(const std::string& pred, std::span<const std::string> answers);

// 1 - d(a, b) / max(|a|, |b|) on normalized strings; two empty strings give 1.
double normalized_similarity(const std::string& a, const std::string& b);

// Max similarity over references, zeroed below `threshold`.
double anls(const std::string& pred, std::span<const std::string> answers, double threshold = 0.5);

struct SampleScore {
  std::string id;
  double accuracy = 0.0;
  double anls = 0.0;
};

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double anls = 0.0;
  bool empty = true;
  double anls_threshold = 0.5;
  std::vector<SampleScore> per_sample;

  nlohmann::json to_json() const;
  std::string summary_table() const;
};

// Scores predictions in their given order. Every id must exist in `corpus`.
EvalReport evaluate(std::span<const PredictionRecord> predictions, std::span<const Sample> corpus,
                    double anls_threshold = 0.5);

}  // namespace ats
