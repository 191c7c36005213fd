#include "ats/decoder.hpp"

#include <limits>

#include "ats/errors.hpp"
#include "ats/losses.hpp"

namespace ats {

StepScores decode_step(const Model& m, const FusionOutput& f, const DecoderState& state) {
  if (state.finished) throw ContractError("decode_step: decoding already finished");
  if (state.step >= m.cfg.max_decode_steps) {
    throw ContractError("decode_step: step " + std::to_string(state.step) + " past max_steps " +
                        std::to_string(m.cfg.max_decode_steps));
  }
  if (state.step >= f.spans.decoder.length) {
    throw ContractError("decode_step: no decoder row for step " + std::to_string(state.step));
  }
  const std::size_t row = f.spans.decoder.start + state.step;
  Tensor dec = slice_rows(f.hidden, row, 1);
  StepScores s;
  s.vocab_logits = reshape(add(matmul(dec, m.head.vocab_w), m.head.vocab_b), {m.answers.size()});
  const std::size_t n_ocr = f.spans.ocr.length;
  if (n_ocr > 0) {
    Tensor ocr = slice_rows(f.hidden, f.spans.ocr.start, n_ocr);
    const double inv = 1.0 / std::sqrt(static_cast<double>(m.cfg.embedding.hidden));
    s.pointer_logits = reshape(
        scale(matmul(matmul(dec, m.head.ptr_q), transpose(matmul(ocr, m.head.ptr_k))), inv), {n_ocr});
  } else {
    s.pointer_logits = Tensor::zeros({0});
  }
  std::vector<double> comb(s.vocab_logits.data().begin(), s.vocab_logits.data().end());
  comb.insert(comb.end(), s.pointer_logits.data().begin(), s.pointer_logits.data().end());
  s.combined = Tensor::from({comb.size()}, comb);
  s.masked_combined = std::move(comb);
  const std::size_t width = m.answers.size() + std::max(m.cfg.max_ocr_slots, n_ocr);
  s.masked_combined.resize(width, -std::numeric_limits<double>::infinity());
  return s;
}

namespace {

std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace

DecodeResult decode_greedy(const Model& m, const Example& ex, std::size_t max_steps) {
  max_steps = std::min(max_steps, m.cfg.max_decode_steps);
  NoGradGuard guard;
  Tensor z = ocr_representation(m, ex);
  DecoderState state;
  DecodeResult out;
  const std::size_t v = m.answers.size();
  while (!state.finished && state.step < max_steps) {
    FusionOutput f = fuse(m, ex, z, state.inputs);
    StepScores s = decode_step(m, f, state);
    const std::size_t k = argmax(s.masked_combined);
    ++state.step;
    if (k == Vocab::kEnd) {
      state.finished = true;
      break;
    }
    Emission e = k < v ? Emission{false, k} : Emission{true, k - v};
    state.emitted.push_back(e);
    if (state.step < max_steps) {
      state.inputs.push_back(e.pointer ? TokenSource::ocr(e.index)
                                       : TokenSource::word(m.words.id(m.answers.token(e.index))));
    }
  }
  out.steps = state.step;
  out.emitted = state.emitted;
  for (const auto& e : state.emitted) {
    if (!out.answer.empty()) out.answer += ' ';
    out.answer += e.pointer ? ex.ocr[e.index].text : m.answers.token(e.index);
  }
  return out;
}

TeacherTargets teacher_targets(const Example& ex, const Vocab& words, const Vocab& answers) {
  const std::size_t v = answers.size();
  const std::size_t n_ocr = ex.ocr.size();
  const std::size_t width = v + n_ocr;
  std::vector<std::string> ocr_lower;
  for (const auto& t : ex.ocr) ocr_lower.push_back(to_lower(t.text));

  TeacherTargets tt;
  tt.inputs.push_back(TokenSource::begin());
  const std::size_t steps = ex.answer.size() + 1;
  std::vector<double> y(steps * width, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::size_t> hot;
    if (t == ex.answer.size()) {
      hot.push_back(Vocab::kEnd);
    } else {
      const std::string tok = to_lower(ex.answer[t]);
      if (auto id = answers.find(tok)) hot.push_back(*id);
      std::optional<std::size_t> first_ocr;
      for (std::size_t j = 0; j < n_ocr; ++j) {
        if (ocr_lower[j] == tok) {
          hot.push_back(v + j);
          if (!first_ocr) first_ocr = j;
        }
      }
      if (hot.empty()) hot.push_back(Vocab::kUnk);
      tt.inputs.push_back(first_ocr ? TokenSource::ocr(*first_ocr) : TokenSource::word(words.id(tok)));
    }
    for (auto c : hot) y[t * width + c] = 1.0;
    tt.hot.push_back(std::move(hot));
  }
  tt.targets = Tensor::from({steps, width}, std::move(y));
  return tt;
}

nlohmann::json PredictionRecord::to_json() const {
  return {{"id", id}, {"answer", answer}, {"steps", steps}, {"loss_pred", loss_pred}, {"loss_kl", loss_kl}};
}

PredictionRecord PredictionRecord::from_json(const nlohmann::json& j) {
  PredictionRecord r;
  r.id = j.at("id").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.steps = j.at("steps").get<std::size_t>();
  r.loss_pred = j.at("loss_pred").get<double>();
  r.loss_kl = j.at("loss_kl").get<double>();
  return r;
}

PredictionRecord predict(const Model& m, const Example& ex) {
  PredictionRecord r;
  r.id = ex.id;
  DecodeResult d = decode_greedy(m, ex, m.cfg.max_decode_steps);
  r.answer = d.answer;
  r.steps = d.steps;
  NoGradGuard guard;
  TeacherTargets tt = teacher_targets(ex, m.words, m.answers);
  Tensor z = ocr_representation(m, ex);
  r.loss_pred = loss_pred(head_logits(m, fuse(m, ex, z, tt.inputs)), tt.targets).item();
  return r;
}

}  // namespace ats
