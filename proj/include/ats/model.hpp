#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ats/aoe.hpp"
#include "ats/attention.hpp"
#include "ats/dataset.hpp"
#include "ats/embeddings.hpp"
#include "ats/noise.hpp"
#include "ats/params.hpp"

namespace ats {

struct ModelConfig {
  EmbeddingConfig embedding;
  AttentionConfig aoe;     // OCR encoder; spatial-aware by default
  AttentionConfig fusion;  // joint question/object/OCR/decoder transformer
  std::size_t max_ocr_slots = 32;
  std::size_t max_decode_steps = 12;

  ModelConfig();
  void validate() const;
};

struct DecoderHead {
  Tensor ln_gain, ln_bias;  // final layer norm over the fusion output
  Tensor vocab_w, vocab_b;  // d x V, V
  Tensor ptr_q, ptr_k;      // d x d each

  static DecoderHead create(std::size_t hidden, std::size_t answer_vocab, Rng& rng, ParamStore& store);
};

struct Model {
  ModelConfig cfg;
  Vocab words;    // embedding vocabulary
  Vocab answers;  // fixed answer vocabulary scored by the head
  ParamStore params;
  EmbeddingTables emb;
  EncoderParams aoe;
  EncoderParams fusion;
  DecoderHead head;

  // Deterministic in (cfg, vocabularies, seed).
  static Model create(const ModelConfig& cfg, Vocab words, Vocab answers, std::uint64_t seed);
  // Same architecture with copied parameter values and no shared storage.
  Model clone() const;
};

// Where a decoder input row comes from.
struct TokenSource {
  enum class Kind { Begin, Word, Ocr };
  Kind kind = Kind::Begin;
  std::size_t index = 0;  // word id for Word, OCR position for Ocr

  static TokenSource begin() { return {Kind::Begin, 0}; }
  static TokenSource word(std::size_t id) { return {Kind::Word, id}; }
  static TokenSource ocr(std::size_t pos) { return {Kind::Ocr, pos}; }
  bool operator==(const TokenSource&) const = default;
};

// A sample bound to a model: tokenized question, truncated OCR, gold answer
// tokens and the optional character-noise outcomes for this pass.
struct Example {
  std::string id;
  std::vector<std::string> question;
  std::vector<VisualObject> objects;
  std::vector<OcrToken> ocr;
  std::vector<std::string> answer;  // gold answer tokens, at most max_decode_steps - 1
  std::vector<NoiseOutcome> noise;  // empty: no character noise
  double lambda_tok = 0.0;
};

Example make_example(const Sample& s, const ModelConfig& cfg);

// Draws character noise for every OCR token of `ex` from `rng`.
void apply_token_noise(Example& ex, const Dictionary& dict, const NoiseConfig& cfg, Rng& rng);

// OCR representation before the fusion transformer.
Tensor ocr_representation(const Model& m, const Example& ex);

struct FusionOutput {
  Tensor hidden;  // final-normed fusion output, rows x d
  JointInput spans;
};

// Runs the fusion transformer with `z_ocr` as the OCR segment and one decoder
// row per entry of `dec_inputs`. Decoder rows see every non-decoder row and
// decoder rows up to their own; non-decoder rows never see decoder rows.
FusionOutput fuse(const Model& m, const Example& ex, const Tensor& z_ocr,
                  std::span<const TokenSource> dec_inputs);

// Decoder-row scores, T x (V + L_ocr): answer-vocabulary logits then pointer logits.
Tensor head_logits(const Model& m, const FusionOutput& f);

// Attention mask used by fuse(), row-major n x n.
std::vector<std::uint8_t> fusion_mask(std::size_t encoder_rows, std::size_t decoder_rows);

}  // namespace ats
