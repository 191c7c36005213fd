#include <gtest/gtest.h>

#include <algorithm>

#include "ats/errors.hpp"
#include "ats/metrics.hpp"
#include "ats/rng.hpp"
#include "support/oracles.hpp"

using namespace ats;

namespace {

std::vector<std::string> refs(std::size_t hits, const std::string& hit, const std::string& miss = "other") {
  std::vector<std::string> a(10, miss);
  std::fill_n(a.begin(), hits, hit);
  return a;
}

// 1 - d / max(len), computed with the full-matrix Levenshtein.
double sim_oracle(const std::string& a, const std::string& b) {
  const std::size_t len = std::max(a.size(), b.size());
  return len == 0 ? 1.0 : 1.0 - static_cast<double>(oracle::levenshtein(a, b)) / static_cast<double>(len);
}

Sample sample(const std::string& id, std::vector<std::string> answers) {
  Sample s;
  s.id = id;
  s.answers = std::move(answers);
  return s;
}

}  // namespace

TEST(Normalize, LowercaseTrimCollapse) {
  EXPECT_EQ(normalize_answer("  Exit   Now \t"), "exit now");
  EXPECT_EQ(normalize_answer(""), "");
}

TEST(SoftVote, CountsNormalizedMatches) {
  EXPECT_EQ(soft_vote_accuracy("exit", refs(10, "exit")), 1.0);
  EXPECT_EQ(soft_vote_accuracy("exit", refs(2, "exit")), std::min(2.0 / 3.0, 1.0));
  EXPECT_EQ(soft_vote_accuracy("exit", refs(0, "exit")), 0.0);
  EXPECT_EQ(soft_vote_accuracy(" EXIT ", refs(3, "exit")), 1.0);
  EXPECT_EQ(soft_vote_accuracy("exit", refs(1, "Exit")), 1.0 / 3.0);
}

TEST(SoftVote, NeedsTenAnswers) {
  std::vector<std::string> nine(9, "x");
  EXPECT_THROW(soft_vote_accuracy("x", nine), ContractError);
}

TEST(Anls, SimilarityAgainstDpOracle) {
  EXPECT_EQ(normalized_similarity("word", "words"), sim_oracle("word", "words"));
  EXPECT_DOUBLE_EQ(normalized_similarity("word", "words"), 0.8);
  std::vector<std::string> one{"words"};
  EXPECT_DOUBLE_EQ(anls("word", one), 0.8);
  EXPECT_EQ(oracle::levenshtein("kitten", "sitting"), 3u);
  EXPECT_DOUBLE_EQ(normalized_similarity("kitten", "sitting"), sim_oracle("kitten", "sitting"));
  EXPECT_EQ(normalized_similarity("", ""), 1.0);
}

TEST(Anls, ThresholdAndMaximum) {
  std::vector<std::string> r{"xy"};
  EXPECT_EQ(anls("ab", r), 0.0);
  std::vector<std::string> r2{"abcde"};
  // similarity 0.4 falls under the 0.5 threshold
  EXPECT_DOUBLE_EQ(normalized_similarity("abxyz", "abcde"), 0.4);
  EXPECT_EQ(anls("abxyz", r2), 0.0);
  EXPECT_DOUBLE_EQ(anls("abxyz", r2, 0.3), 0.4);
  std::vector<std::string> many{"zzz", "exit", "exits"};
  EXPECT_EQ(anls("exit", many), 1.0);
  EXPECT_EQ(anls("Exit", many), 1.0);
  std::vector<std::string> none;
  EXPECT_THROW(anls("x", none), ContractError);
}

TEST(Anls, RandomPairsMatchOracle) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::string a, b;
    for (std::size_t i = rng.below(6); i > 0; --i) a += "abc"[rng.below(3)];
    for (std::size_t i = rng.below(6); i > 0; --i) b += "abc"[rng.below(3)];
    EXPECT_NEAR(normalized_similarity(a, b), sim_oracle(a, b), 1e-15) << a << " " << b;
  }
}

TEST(Evaluate, EmptyPredictionSet) {
  std::vector<Sample> corpus{sample("a", refs(10, "x"))};
  auto r = evaluate({}, corpus);
  EXPECT_EQ(r.n, 0u);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.accuracy, 0.0);
  EXPECT_EQ(r.anls, 0.0);
}

TEST(Evaluate, AggregatesAreMeansOfSamplesInOrder) {
  std::vector<Sample> corpus{sample("a", refs(10, "exit")), sample("b", refs(2, "north")),
                             sample("c", refs(10, "words"))};
  std::vector<PredictionRecord> preds{{"c", "word", 2, 0, 0}, {"a", "exit", 2, 0, 0}, {"b", "north", 2, 0, 0}};
  auto r = evaluate(preds, corpus);
  ASSERT_EQ(r.per_sample.size(), 3u);
  EXPECT_EQ(r.per_sample[0].id, "c");
  EXPECT_EQ(r.per_sample[1].id, "a");
  double acc = 0, an = 0;
  for (const auto& s : r.per_sample) {
    acc += s.accuracy;
    an += s.anls;
  }
  EXPECT_NEAR(r.accuracy, acc / 3.0, 1e-12);
  EXPECT_NEAR(r.anls, an / 3.0, 1e-12);
  EXPECT_NEAR(r.accuracy, (0.0 + 1.0 + 2.0 / 3.0) / 3.0, 1e-12);
  EXPECT_FALSE(r.empty);
  auto j = r.to_json();
  EXPECT_EQ(j["n"], 3);
  EXPECT_EQ(j["per_sample"].size(), 3u);
  EXPECT_NE(r.summary_table().find("accuracy"), std::string::npos);
}

TEST(Evaluate, SinglePerfectPrediction) {
  std::vector<Sample> corpus{sample("a", refs(10, "exit"))};
  std::vector<PredictionRecord> preds{{"a", "exit", 2, 0, 0}};
  auto r = evaluate(preds, corpus);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.anls, 1.0);
}

TEST(Evaluate, UnknownIdsAreListed) {
  std::vector<Sample> corpus{sample("a", refs(10, "exit"))};
  std::vector<PredictionRecord> preds{{"zz", "exit", 1, 0, 0}, {"yy", "x", 1, 0, 0}};
  try {
    evaluate(preds, corpus);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("zz"), std::string::npos);
    EXPECT_NE(msg.find("yy"), std::string::npos);
  }
}
