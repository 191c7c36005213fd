#include "ats/model.hpp"

#include <cmath>

#include "ats/errors.hpp"

namespace ats {

ModelConfig::ModelConfig() { fusion.sasa_enabled = false; }

void ModelConfig::validate() const {
  embedding.validate();
  aoe.validate(embedding.hidden);
  fusion.validate(embedding.hidden);
  if (fusion.sasa_enabled) throw ConfigError("the fusion transformer does not take spatial biases");
  if (max_ocr_slots == 0) throw ConfigError("max_ocr_slots must be positive");
  if (max_ocr_slots > embedding.max_positions) {
    throw ConfigError("max_ocr_slots exceeds the position table");
  }
  if (max_decode_steps < 2 || max_decode_steps > embedding.max_positions) {
    throw ConfigError("max_decode_steps must lie in [2, max_positions]");
  }
}

DecoderHead DecoderHead::create(std::size_t hidden, std::size_t answer_vocab, Rng& rng,
                                ParamStore& store) {
  const double s = 1.0 / std::sqrt(static_cast<double>(hidden));
  DecoderHead h;
  h.ln_gain = store.add("head.ln.gain", constant_param({hidden}, 1.0));
  h.ln_bias = store.add("head.ln.bias", constant_param({hidden}, 0.0));
  h.vocab_w = store.add("head.vocab.w", normal_param({hidden, answer_vocab}, s, rng));
  h.vocab_b = store.add("head.vocab.b", constant_param({answer_vocab}, 0.0));
  h.ptr_q = store.add("head.ptr.q", normal_param({hidden, hidden}, s, rng));
  h.ptr_k = store.add("head.ptr.k", normal_param({hidden, hidden}, s, rng));
  return h;
}

Model Model::create(const ModelConfig& cfg, Vocab words, Vocab answers, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg = cfg;
  m.words = std::move(words);
  m.answers = std::move(answers);
  Rng rng(derive_seed(seed, "model-init"));
  m.emb = EmbeddingTables::create(cfg.embedding, m.words.size(), rng, m.params);
  m.aoe = EncoderParams::create(cfg.aoe, cfg.embedding.hidden, cfg.aoe.sasa_enabled, rng, m.params, "aoe.");
  m.fusion = EncoderParams::create(cfg.fusion, cfg.embedding.hidden, false, rng, m.params, "fusion.");
  m.head = DecoderHead::create(cfg.embedding.hidden, m.answers.size(), rng, m.params);
  return m;
}

Model Model::clone() const {
  Model c = create(cfg, words, answers, 0);
  for (auto& [name, t] : c.params) {
    const auto src = params.get(name).data();
    auto dst = t.mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return c;
}

Example make_example(const Sample& s, const ModelConfig& cfg) {
  Example ex;
  ex.id = s.id;
  ex.question = tokenize(s.question);
  if (ex.question.size() > cfg.embedding.max_positions) ex.question.resize(cfg.embedding.max_positions);
  ex.objects = s.objects;
  ex.ocr = s.ocr;
  if (ex.ocr.size() > cfg.max_ocr_slots) ex.ocr.resize(cfg.max_ocr_slots);
  ex.answer = tokenize(gold_answer(s));
  if (ex.answer.size() > cfg.max_decode_steps - 1) ex.answer.resize(cfg.max_decode_steps - 1);
  return ex;
}

void apply_token_noise(Example& ex, const Dictionary& dict, const NoiseConfig& cfg, Rng& rng) {
  ex.noise = corrupt_tokens(ex.ocr, dict, cfg, rng);
  ex.lambda_tok = cfg.lambda_tok;
}

Tensor ocr_representation(const Model& m, const Example& ex) {
  return aoe_forward(ex.ocr, ex.noise, ex.lambda_tok, m.emb, m.words, m.aoe, m.cfg.embedding, m.cfg.aoe);
}

std::vector<std::uint8_t> fusion_mask(std::size_t encoder_rows, std::size_t decoder_rows) {
  const std::size_t n = encoder_rows + decoder_rows;
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j < encoder_rows) {
        mask[i * n + j] = 1;
      } else if (i >= encoder_rows && j <= i) {
        mask[i * n + j] = 1;
      }
    }
  }
  return mask;
}

FusionOutput fuse(const Model& m, const Example& ex, const Tensor& z_ocr,
                  std::span<const TokenSource> dec_inputs) {
  const auto& ecfg = m.cfg.embedding;
  if (z_ocr.dim() != 2 || z_ocr.rows() != ex.ocr.size() || z_ocr.cols() != ecfg.hidden) {
    throw DimensionError("fuse: OCR segment " + shape_str(z_ocr.shape()) + " for " +
                         std::to_string(ex.ocr.size()) + " tokens");
  }
  if (dec_inputs.empty() || dec_inputs.size() > m.cfg.max_decode_steps) {
    throw ContractError("fuse: decoder length " + std::to_string(dec_inputs.size()) +
                        " outside [1, " + std::to_string(m.cfg.max_decode_steps) + "]");
  }
  Tensor xq = embed_question(ex.question, m.words, m.emb, ecfg);
  Tensor xobj = embed_objects(ex.objects, m.words, m.emb, ecfg);

  std::vector<Tensor> rows;
  rows.reserve(dec_inputs.size());
  for (std::size_t t = 0; t < dec_inputs.size(); ++t) {
    const auto& src = dec_inputs[t];
    Tensor r;
    switch (src.kind) {
      case TokenSource::Kind::Begin: {
        const std::size_t id = Vocab::kBegin;
        r = gather_rows(m.emb.word, std::span<const std::size_t>(&id, 1));
        break;
      }
      case TokenSource::Kind::Word:
        r = gather_rows(m.emb.word, std::span<const std::size_t>(&src.index, 1));
        break;
      case TokenSource::Kind::Ocr:
        if (src.index >= z_ocr.rows()) throw ContractError("fuse: OCR source out of range");
        r = slice_rows(z_ocr, src.index, 1);
        break;
    }
    rows.push_back(add(r, gather_rows(m.emb.pos1d, std::span<const std::size_t>(&t, 1))));
  }
  Tensor xdec = concat(rows, 0);

  JointInput in = assemble_input(xq, xobj, z_ocr, xdec);
  const auto mask = fusion_mask(in.decoder.start, in.decoder.length);
  EncoderContext ctx;
  ctx.allowed = mask;
  Tensor h = encoder_forward(in.matrix, m.fusion, m.cfg.fusion, ctx);
  return {layer_norm(h, m.head.ln_gain, m.head.ln_bias), in};
}

Tensor head_logits(const Model& m, const FusionOutput& f) {
  Tensor dec = slice_rows(f.hidden, f.spans.decoder.start, f.spans.decoder.length);
  Tensor vocab = add(matmul(dec, m.head.vocab_w), m.head.vocab_b);
  if (f.spans.ocr.length == 0) return vocab;
  Tensor ocr = slice_rows(f.hidden, f.spans.ocr.start, f.spans.ocr.length);
  const double inv = 1.0 / std::sqrt(static_cast<double>(m.cfg.embedding.hidden));
  Tensor ptr = scale(matmul(matmul(dec, m.head.ptr_q), transpose(matmul(ocr, m.head.ptr_k))), inv);
  return concat({vocab, ptr}, 1);
}

}  // namespace ats
