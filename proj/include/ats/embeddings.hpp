#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ats/dataset.hpp"
#include "ats/params.hpp"
#include "ats/tensor.hpp"

namespace ats {

struct EmbeddingConfig {
  std::size_t hidden = 64;
  std::size_t max_positions = 160;     // P, 1D position table rows
  std::size_t layout_buckets = 32;     // per box component
  double layout_max_size = 1000.0;     // pixel size mapped to the top h/w bucket
  std::size_t object_feature_dim = 16;
  std::size_t object_box_dim = 4;
  std::size_t ocr_feature_dim = 16;
  bool layout_2d = true;               // ablation: 2D layout embeddings
  bool ocr_position_shift = true;      // use position i-1 (clamped) for OCR token i

  void validate() const;
};

// Learnable tables shared by every segment of the joint input.
struct EmbeddingTables {
  Tensor word;                     // V x d; question words, object labels, OCR text
  Tensor pos1d;                    // P x d
  std::array<Tensor, 6> layout2d;  // buckets x d each, for x0, y0, x1, y1, h, w
  Tensor obj_fr_proj;              // appearance_dim x d
  Tensor obj_bx_proj;              // box_dim x d
  Tensor ocr_vis_proj;             // ocr_feature_dim x d
  Tensor ln_fr_gain, ln_fr_bias;
  Tensor ln_bx_gain, ln_bx_bias;

  static EmbeddingTables create(const EmbeddingConfig& cfg, std::size_t vocab_size, Rng& rng,
                                ParamStore& store, const std::string& prefix = "emb.");
};

// Bucket index of each of the six box components.
std::array<std::size_t, 6> layout_bucket_indices(const Box& box, const EmbeddingConfig& cfg);

// Sum of the six layout rows for each box; rows x d.
Tensor layout_rows(std::span<const Box> boxes, const EmbeddingTables& t, const EmbeddingConfig& cfg);

// Question row i = word[tok_i] + pos1d[i] + layout(zero box).
Tensor embed_question(const std::vector<std::string>& tokens, const Vocab& vocab,
                      const EmbeddingTables& t, const EmbeddingConfig& cfg);

// Object row = LN(W1 fr) + LN(W2 bx) + word[label].
Tensor embed_objects(std::span<const VisualObject> objects, const Vocab& vocab,
                     const EmbeddingTables& t, const EmbeddingConfig& cfg);

// Word rows for OCR texts (lowercased lookup).
Tensor ocr_text_rows(std::span<const std::string> texts, const Vocab& vocab, const EmbeddingTables& t);

// OCR row i = ((text_i + W_vis vis_i) + pos1d[i-1]) + layout(box_i), summed in
// that order. `text_rows` may be a noise-mixed text term.
Tensor compose_ocr(const Tensor& text_rows, std::span<const OcrToken> tokens,
                   const EmbeddingTables& t, const EmbeddingConfig& cfg);

Tensor embed_ocr(std::span<const OcrToken> tokens, const Vocab& vocab, const EmbeddingTables& t,
                 const EmbeddingConfig& cfg);

// Position table index used for OCR token i.
std::size_t ocr_position_index(std::size_t i, const EmbeddingConfig& cfg);

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;
  bool operator==(const Span&) const = default;
};

struct JointInput {
  Tensor matrix;  // (Lq + Lobj + Locr + Ldec) x d
  Span question, objects, ocr, decoder;
};

JointInput assemble_input(const Tensor& xq, const Tensor& xobj, const Tensor& xocr, const Tensor& xdec);

}  // namespace ats
