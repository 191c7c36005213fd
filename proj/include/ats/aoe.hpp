#pragma once

#include <span>

#include "ats/attention.hpp"
#include "ats/embeddings.hpp"
#include "ats/noise.hpp"

namespace ats {

// OCR representation z_ocr: corrupted and clean text rows mixed per token,
// composed with visual, position and layout terms, then run through the
// spatial-aware encoder. An empty `noise` span skips the mixing entirely.
Tensor aoe_forward(std::span<const OcrToken> tokens, std::span<const NoiseOutcome> noise,
                   double lambda_tok, const EmbeddingTables& tables, const Vocab& vocab,
                   const EncoderParams& encoder, const EmbeddingConfig& emb_cfg,
                   const AttentionConfig& attn_cfg, AttentionTrace* trace = nullptr);

}  // namespace ats
