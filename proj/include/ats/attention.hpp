#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ats/dataset.hpp"
#include "ats/params.hpp"
#include "ats/tensor.hpp"

namespace ats {

struct AttentionConfig {
  std::size_t heads = 4;
  std::size_t d_k = 16;
  std::size_t layers = 2;
  std::size_t ffn_mult = 4;
  bool sasa_enabled = true;      // ablation: spatial-aware attention in this stack
  std::size_t max_rel_1d = 32;   // R
  std::size_t max_rel_2d = 16;   // B

  void validate(std::size_t hidden) const;
};

// Relative-position bias tables, per head, shared across layers.
struct SasaBias {
  Tensor bias1d;   // heads x (2R+1)
  Tensor bias2dx;  // heads x (2B+1)
  Tensor bias2dy;  // heads x (2B+1)
  std::size_t R = 0;
  std::size_t B = 0;

  static SasaBias create(const AttentionConfig& cfg, Rng& rng, ParamStore& store,
                         const std::string& prefix);
};

// Per-token inputs of the bias lookups: 1D index and the box top-left corner.
struct SasaGeometry {
  std::vector<std::size_t> positions;
  std::vector<double> x, y;

  static SasaGeometry from_tokens(std::span<const OcrToken> tokens);
  std::size_t size() const { return positions.size(); }
};

// Linear bucket of a normalized coordinate: floor(v * B), clamped to [0, B-1].
std::size_t coord_bucket(double v, std::size_t buckets);

// Flat indices into each bias table for head `head`, row-major over (i, j).
struct SasaIndices {
  std::vector<std::size_t> rel1d, rel2dx, rel2dy;
};
SasaIndices sasa_indices(const SasaGeometry& geom, std::size_t head, std::size_t R, std::size_t B);

struct HeadParams {
  Tensor wq, wk, wv;  // d x d_k each
};

struct EncoderLayer {
  Tensor ln1_gain, ln1_bias;
  std::vector<HeadParams> heads;
  Tensor wo;  // heads*d_k x d
  Tensor ln2_gain, ln2_bias;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
};

struct EncoderParams {
  std::vector<EncoderLayer> layers;
  std::optional<SasaBias> sasa;

  static EncoderParams create(const AttentionConfig& cfg, std::size_t hidden, bool with_sasa_tables,
                              Rng& rng, ParamStore& store, const std::string& prefix);
};

// a_ij = (q_i Wq) . (k_j Wk) / sqrt(d_k)
Tensor raw_scores(const Tensor& q_rows, const Tensor& k_rows, const Tensor& wq, const Tensor& wk);

// raw_ij + b1d[j-i] + b2dx[x_j-x_i] + b2dy[y_j-y_i], offsets clamped into table range.
Tensor sasa_scores(const Tensor& raw, std::size_t head, const SasaGeometry& geom, const SasaBias& bias);

// b_i = sum_j softmax_j(scores_i.) (v_j Wv). `allowed` is an optional n x n mask.
Tensor attention_output(const Tensor& scores, const Tensor& v_rows, const Tensor& wv,
                        std::span<const std::uint8_t> allowed = {});

// Collects per-head attention probabilities, for inspection in tests.
struct AttentionTrace {
  std::vector<Tensor> probs;
};

struct EncoderContext {
  const SasaGeometry* geometry = nullptr;    // required when SASA is enabled
  std::span<const std::uint8_t> allowed;     // optional attention mask
  AttentionTrace* trace = nullptr;
};

// Pre-norm transformer stack: x += MHA(LN(x)); x += FFN(LN(x)), per layer.
Tensor encoder_forward(const Tensor& x, const EncoderParams& params, const AttentionConfig& cfg,
                       const EncoderContext& ctx = {});

}  // namespace ats
