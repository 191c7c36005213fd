#include "ats/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "ats/errors.hpp"
#include "ats/noise.hpp"

namespace ats {

std::string normalize_answer(const std::string& s) {
  std::istringstream in(to_lower(s));
  std::string word, out;
  while (in >> word) {
    if (!out.empty()) out += ' ';
    out += word;
  }
  return out;
}

double soft_vote_accuracy(const std::string& pred, std::span<const std::string> answers) {
  if (answers.size() != kNumAnswers) {
    throw ContractError("soft_vote_accuracy: expected 10 answers, got " + std::to_string(answers.size()));
  }
  const std::string p = normalize_answer(pred);
  std::size_t matches = 0;
  for (const auto& a : answers) matches += normalize_answer(a) == p ? 1 : 0;
  return std::min(static_cast<double>(matches) / 3.0, 1.0);
}

double normalized_similarity(const std::string& a, const std::string& b) {
  const std::string x = normalize_answer(a), y = normalize_answer(b);
  const std::size_t len = std::max(x.size(), y.size());
  if (len == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(x, y)) / static_cast<double>(len);
}

double anls(const std::string& pred, std::span<const std::string> answers, double threshold) {
  if (answers.empty()) throw ContractError("anls: no reference answers");
  double best = 0.0;
  for (const auto& a : answers) best = std::max(best, normalized_similarity(pred, a));
  return best >= threshold ? best : 0.0;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : per_sample) per.push_back({{"id", s.id}, {"accuracy", s.accuracy}, {"anls", s.anls}});
  return {{"n", n},         {"accuracy", accuracy}, {"anls", anls},
          {"empty", empty}, {"anls_threshold", anls_threshold}, {"per_sample", per}};
}

std::string EvalReport::summary_table() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %10s\n%-10s %10zu\n%-10s %10.4f\n%-10s %10.4f\n", "metric", "value",
                "samples", n, "accuracy", accuracy, "anls", anls);
  return buf;
}

EvalReport evaluate(std::span<const PredictionRecord> predictions, std::span<const Sample> corpus,
                    double anls_threshold) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : corpus) by_id[s.id] = &s;
  std::vector<std::string> missing;
  for (const auto& p : predictions) {
    if (!by_id.count(p.id)) missing.push_back(p.id);
  }
  if (!missing.empty()) {
    std::string msg = "evaluate: prediction ids not in corpus:";
    for (const auto& id : missing) msg += " " + id;
    throw ValidationError(msg);
  }
  EvalReport r;
  r.anls_threshold = anls_threshold;
  r.n = predictions.size();
  r.empty = predictions.empty();
  for (const auto& p : predictions) {
    const Sample& s = *by_id.at(p.id);
    SampleScore sc{p.id, soft_vote_accuracy(p.answer, s.answers), anls(p.answer, s.answers, anls_threshold)};
    r.accuracy += sc.accuracy;
    r.anls += sc.anls;
    r.per_sample.push_back(std::move(sc));
  }
  if (r.n > 0) {
    r.accuracy /= static_cast<double>(r.n);
    r.anls /= static_cast<double>(r.n);
  }
  return r;
}

}  // namespace ats
