#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ats/model.hpp"

namespace ats {

struct Emission {
  bool pointer = false;   // copied from an OCR token
  std::size_t index = 0;  // answer-vocabulary id, or OCR position when pointer
  bool operator==(const Emission&) const = default;
};

struct DecoderState {
  std::size_t step = 0;
  std::vector<Emission> emitted;
  std::vector<TokenSource> inputs{TokenSource::begin()};  // one per decoder row fed so far
  bool finished = false;
};

struct StepScores {
  Tensor vocab_logits;    // V
  Tensor pointer_logits;  // L_ocr
  Tensor combined;        // V + L_ocr
  // combined padded to V + max_ocr_slots; padded pointer slots hold -inf.
  std::vector<double> masked_combined;
};

// Scores for decoder row `state.step` of a fused pass.
StepScores decode_step(const Model& m, const FusionOutput& f, const DecoderState& state);

struct DecodeResult {
  std::string answer;
  std::vector<Emission> emitted;
  std::size_t steps = 0;
};

// Greedy iterative decoding: argmax each step, feed the choice back as the
// next decoder input, stop at <end> or after max_steps.
DecodeResult decode_greedy(const Model& m, const Example& ex, std::size_t max_steps = 12);

struct TeacherTargets {
  std::vector<TokenSource> inputs;  // <begin>, then each gold token's source
  Tensor targets;                   // T x (V + L_ocr), multi-hot
  std::vector<std::vector<std::size_t>> hot;  // hot columns per step
};

// Multi-hot targets over the answer vocabulary and OCR positions for each
// gold token followed by <end>. A token with no source marks <unk>.
TeacherTargets teacher_targets(const Example& ex, const Vocab& words, const Vocab& answers);

struct PredictionRecord {
  std::string id;
  std::string answer;
  std::size_t steps = 0;
  double loss_pred = 0.0;  // teacher-forced loss on the clean input
  double loss_kl = 0.0;    // zero at evaluation (no perturbation)

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
};

PredictionRecord predict(const Model& m, const Example& ex);

}  // namespace ats
