#include "ats/attention.hpp"

#include <algorithm>
#include <cmath>

#include "ats/errors.hpp"

namespace ats {

void AttentionConfig::validate(std::size_t hidden) const {
  if (heads == 0 || d_k == 0) throw ConfigError("attention heads and d_k must be positive");
  if (heads * d_k != hidden) {
    throw ConfigError("heads * d_k (" + std::to_string(heads) + " * " + std::to_string(d_k) +
                      ") must equal hidden size " + std::to_string(hidden));
  }
  if (ffn_mult == 0) throw ConfigError("ffn_mult must be positive");
  if (max_rel_1d == 0 || max_rel_2d == 0) throw ConfigError("relative ranges must be positive");
}

SasaBias SasaBias::create(const AttentionConfig& cfg, Rng& rng, ParamStore& store,
                          const std::string& prefix) {
  SasaBias b;
  b.R = cfg.max_rel_1d;
  b.B = cfg.max_rel_2d;
  b.bias1d = store.add(prefix + "bias1d", normal_param({cfg.heads, 2 * b.R + 1}, 0.02, rng));
  b.bias2dx = store.add(prefix + "bias2dx", normal_param({cfg.heads, 2 * b.B + 1}, 0.02, rng));
  b.bias2dy = store.add(prefix + "bias2dy", normal_param({cfg.heads, 2 * b.B + 1}, 0.02, rng));
  return b;
}

SasaGeometry SasaGeometry::from_tokens(std::span<const OcrToken> tokens) {
  SasaGeometry g;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    g.positions.push_back(i);
    g.x.push_back(tokens[i].box.x0);
    g.y.push_back(tokens[i].box.y0);
  }
  return g;
}

std::size_t coord_bucket(double v, std::size_t buckets) {
  v = std::clamp(v, 0.0, 1.0);
  return std::min(static_cast<std::size_t>(std::floor(v * static_cast<double>(buckets))), buckets - 1);
}

SasaIndices sasa_indices(const SasaGeometry& geom, std::size_t head, std::size_t R, std::size_t B) {
  const std::size_t n = geom.size();
  const auto r = static_cast<long>(R), b = static_cast<long>(B);
  std::vector<long> bx(n), by(n);
  for (std::size_t i = 0; i < n; ++i) {
    bx[i] = static_cast<long>(coord_bucket(geom.x[i], B));
    by[i] = static_cast<long>(coord_bucket(geom.y[i], B));
  }
  SasaIndices idx;
  idx.rel1d.resize(n * n);
  idx.rel2dx.resize(n * n);
  idx.rel2dy.resize(n * n);
  const std::size_t w1 = 2 * R + 1, w2 = 2 * B + 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const long d1 = static_cast<long>(geom.positions[j]) - static_cast<long>(geom.positions[i]);
      idx.rel1d[i * n + j] = head * w1 + static_cast<std::size_t>(std::clamp(d1, -r, r) + r);
      idx.rel2dx[i * n + j] = head * w2 + static_cast<std::size_t>(std::clamp(bx[j] - bx[i], -b, b) + b);
      idx.rel2dy[i * n + j] = head * w2 + static_cast<std::size_t>(std::clamp(by[j] - by[i], -b, b) + b);
    }
  }
  return idx;
}

EncoderParams EncoderParams::create(const AttentionConfig& cfg, std::size_t hidden, bool with_sasa_tables,
                                    Rng& rng, ParamStore& store, const std::string& prefix) {
  cfg.validate(hidden);
  EncoderParams p;
  const double s_in = 1.0 / std::sqrt(static_cast<double>(hidden));
  const std::size_t ff = cfg.ffn_mult * hidden;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string lp = prefix + "layer" + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.ln1_gain = store.add(lp + "ln1.gain", constant_param({hidden}, 1.0));
    layer.ln1_bias = store.add(lp + "ln1.bias", constant_param({hidden}, 0.0));
    for (std::size_t h = 0; h < cfg.heads; ++h) {
      const std::string hp = lp + "head" + std::to_string(h) + ".";
      HeadParams head;
      head.wq = store.add(hp + "wq", normal_param({hidden, cfg.d_k}, s_in, rng));
      head.wk = store.add(hp + "wk", normal_param({hidden, cfg.d_k}, s_in, rng));
      head.wv = store.add(hp + "wv", normal_param({hidden, cfg.d_k}, s_in, rng));
      layer.heads.push_back(std::move(head));
    }
    layer.wo = store.add(lp + "wo", normal_param({cfg.heads * cfg.d_k, hidden}, 0.5 * s_in, rng));
    layer.ln2_gain = store.add(lp + "ln2.gain", constant_param({hidden}, 1.0));
    layer.ln2_bias = store.add(lp + "ln2.bias", constant_param({hidden}, 0.0));
    layer.ff1_w = store.add(lp + "ff1.w", normal_param({hidden, ff}, s_in, rng));
    layer.ff1_b = store.add(lp + "ff1.b", constant_param({ff}, 0.0));
    layer.ff2_w = store.add(lp + "ff2.w",
                            normal_param({ff, hidden}, 0.5 / std::sqrt(static_cast<double>(ff)), rng));
    layer.ff2_b = store.add(lp + "ff2.b", constant_param({hidden}, 0.0));
    p.layers.push_back(std::move(layer));
  }
  if (with_sasa_tables) p.sasa = SasaBias::create(cfg, rng, store, prefix + "sasa.");
  return p;
}

Tensor raw_scores(const Tensor& q_rows, const Tensor& k_rows, const Tensor& wq, const Tensor& wk) {
  if (wq.shape() != wk.shape()) {
    throw DimensionError("raw_scores: Wq " + shape_str(wq.shape()) + " and Wk " +
                         shape_str(wk.shape()) + " differ");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(wq.cols()));
  return scale(matmul(matmul(q_rows, wq), transpose(matmul(k_rows, wk))), inv);
}

Tensor sasa_scores(const Tensor& raw, std::size_t head, const SasaGeometry& geom, const SasaBias& bias) {
  const std::size_t n = geom.size();
  if (raw.shape() != Shape{n, n}) {
    throw DimensionError("sasa_scores: scores " + shape_str(raw.shape()) + " for " +
                         std::to_string(n) + " tokens");
  }
  if (head >= bias.bias1d.rows()) throw ContractError("sasa_scores: head index out of range");
  auto idx = sasa_indices(geom, head, bias.R, bias.B);
  Tensor out = add(raw, take(bias.bias1d, idx.rel1d, {n, n}));
  out = add(out, take(bias.bias2dx, idx.rel2dx, {n, n}));
  return add(out, take(bias.bias2dy, idx.rel2dy, {n, n}));
}

Tensor attention_output(const Tensor& scores, const Tensor& v_rows, const Tensor& wv,
                        std::span<const std::uint8_t> allowed) {
  return matmul(softmax_rows(scores, allowed), matmul(v_rows, wv));
}

namespace {

Tensor multi_head(const Tensor& h, const EncoderLayer& layer, const EncoderParams& params,
                  const AttentionConfig& cfg, const EncoderContext& ctx) {
  const bool use_sasa = cfg.sasa_enabled && params.sasa.has_value();
  if (use_sasa && (ctx.geometry == nullptr || ctx.geometry->size() != h.rows())) {
    throw ContractError("SASA attention needs geometry for every row");
  }
  std::vector<Tensor> outs;
  outs.reserve(layer.heads.size());
  for (std::size_t k = 0; k < layer.heads.size(); ++k) {
    const auto& hp = layer.heads[k];
    Tensor scores = raw_scores(h, h, hp.wq, hp.wk);
    if (use_sasa) scores = sasa_scores(scores, k, *ctx.geometry, *params.sasa);
    Tensor probs = softmax_rows(scores, ctx.allowed);
    if (ctx.trace) ctx.trace->probs.push_back(probs);
    // Keys and values are the same rows here, so K_j W^V is V_j W^V.
    outs.push_back(matmul(probs, matmul(h, hp.wv)));
  }
  return matmul(concat(outs, 1), layer.wo);
}

}  // namespace

Tensor encoder_forward(const Tensor& x, const EncoderParams& params, const AttentionConfig& cfg,
                       const EncoderContext& ctx) {
  Tensor out = x;
  for (const auto& layer : params.layers) {
    Tensor h = layer_norm(out, layer.ln1_gain, layer.ln1_bias);
    out = add(out, multi_head(h, layer, params, cfg, ctx));
    Tensor h2 = layer_norm(out, layer.ln2_gain, layer.ln2_bias);
    Tensor f = gelu(add(matmul(h2, layer.ff1_w), layer.ff1_b));
    out = add(out, add(matmul(f, layer.ff2_w), layer.ff2_b));
  }
  return out;
}

}  // namespace ats
