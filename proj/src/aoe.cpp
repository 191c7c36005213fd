#include "ats/aoe.hpp"

#include "ats/errors.hpp"

namespace ats {

Tensor aoe_forward(std::span<const OcrToken> tokens, std::span<const NoiseOutcome> noise,
                   double lambda_tok, const EmbeddingTables& tables, const Vocab& vocab,
                   const EncoderParams& encoder, const EmbeddingConfig& emb_cfg,
                   const AttentionConfig& attn_cfg, AttentionTrace* trace) {
  Tensor x;
  if (noise.empty()) {
    x = embed_ocr(tokens, vocab, tables, emb_cfg);
  } else {
    if (noise.size() != tokens.size()) {
      throw DimensionError("aoe_forward: " + std::to_string(noise.size()) + " noise outcomes for " +
                           std::to_string(tokens.size()) + " tokens");
    }
    std::vector<std::string> clean, corrupted;
    std::vector<int> k;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      clean.push_back(tokens[i].text);
      corrupted.push_back(noise[i].corrupted);
      k.push_back(noise[i].bernoulli_k);
    }
    Tensor txt = ocr_text_rows(clean, vocab, tables);
    Tensor txt_c = ocr_text_rows(corrupted, vocab, tables);
    x = compose_ocr(mix_noise(txt, txt_c, lambda_tok, k), tokens, tables, emb_cfg);
  }
  const SasaGeometry geom = SasaGeometry::from_tokens(tokens);
  EncoderContext ctx;
  ctx.geometry = &geom;
  ctx.trace = trace;
  return encoder_forward(x, encoder, attn_cfg, ctx);
}

}  // namespace ats
