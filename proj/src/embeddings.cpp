#include "ats/embeddings.hpp"

#include <algorithm>
#include <cmath>

#include "ats/errors.hpp"

namespace ats {

void EmbeddingConfig::validate() const {
  if (hidden < 2) throw ConfigError("embedding hidden size must be >= 2");
  if (max_positions == 0 || layout_buckets == 0) throw ConfigError("empty embedding table");
  if (!(layout_max_size > 0.0)) throw ConfigError("layout_max_size must be positive");
}

EmbeddingTables EmbeddingTables::create(const EmbeddingConfig& cfg, std::size_t vocab_size, Rng& rng,
                                        ParamStore& store, const std::string& prefix) {
  cfg.validate();
  const std::size_t d = cfg.hidden;
  EmbeddingTables t;
  t.word = store.add(prefix + "word", normal_param({vocab_size, d}, 0.1, rng));
  t.pos1d = store.add(prefix + "pos1d", normal_param({cfg.max_positions, d}, 0.1, rng));
  static const char* names[6] = {"x0", "y0", "x1", "y1", "h", "w"};
  for (std::size_t c = 0; c < 6; ++c) {
    t.layout2d[c] = store.add(prefix + "layout2d." + names[c],
                              normal_param({cfg.layout_buckets, d}, 0.1, rng));
  }
  auto proj = [&](const char* name, std::size_t in) {
    return store.add(prefix + name, normal_param({in, d}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
  };
  t.obj_fr_proj = proj("obj_fr_proj", cfg.object_feature_dim);
  t.obj_bx_proj = proj("obj_bx_proj", cfg.object_box_dim);
  t.ocr_vis_proj = proj("ocr_vis_proj", cfg.ocr_feature_dim);
  t.ln_fr_gain = store.add(prefix + "ln_fr.gain", constant_param({d}, 1.0));
  t.ln_fr_bias = store.add(prefix + "ln_fr.bias", constant_param({d}, 0.0));
  t.ln_bx_gain = store.add(prefix + "ln_bx.gain", constant_param({d}, 1.0));
  t.ln_bx_bias = store.add(prefix + "ln_bx.bias", constant_param({d}, 0.0));
  return t;
}

std::array<std::size_t, 6> layout_bucket_indices(const Box& box, const EmbeddingConfig& cfg) {
  const auto nb = static_cast<double>(cfg.layout_buckets);
  auto bucket = [&](double v) {
    v = std::clamp(v, 0.0, 1.0);
    return std::min(static_cast<std::size_t>(std::floor(v * nb)), cfg.layout_buckets - 1);
  };
  return {bucket(box.x0),
          bucket(box.y0),
          bucket(box.x1),
          bucket(box.y1),
          bucket(box.h / cfg.layout_max_size),
          bucket(box.w / cfg.layout_max_size)};
}

Tensor layout_rows(std::span<const Box> boxes, const EmbeddingTables& t, const EmbeddingConfig& cfg) {
  std::array<std::vector<std::size_t>, 6> ids;
  for (const auto& b : boxes) {
    auto idx = layout_bucket_indices(b, cfg);
    for (std::size_t c = 0; c < 6; ++c) ids[c].push_back(idx[c]);
  }
  Tensor out = gather_rows(t.layout2d[0], ids[0]);
  for (std::size_t c = 1; c < 6; ++c) out = add(out, gather_rows(t.layout2d[c], ids[c]));
  return out;
}

namespace {

std::vector<std::size_t> range_ids(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

void check_positions(std::size_t n, const EmbeddingConfig& cfg, const char* what) {
  if (n > cfg.max_positions) {
    throw ContractError(std::string(what) + " length " + std::to_string(n) +
                        " exceeds position table size " + std::to_string(cfg.max_positions));
  }
}

}  // namespace

Tensor embed_question(const std::vector<std::string>& tokens, const Vocab& vocab,
                      const EmbeddingTables& t, const EmbeddingConfig& cfg) {
  check_positions(tokens.size(), cfg, "question");
  std::vector<std::size_t> ids;
  for (const auto& tok : tokens) ids.push_back(vocab.id(tok));
  Tensor x = add(gather_rows(t.word, ids), gather_rows(t.pos1d, range_ids(tokens.size())));
  if (cfg.layout_2d) {
    const Box zero{};
    Tensor zero_row = layout_rows(std::span<const Box>(&zero, 1), t, cfg);
    x = add(x, reshape(zero_row, {cfg.hidden}));
  }
  return x;
}

Tensor embed_objects(std::span<const VisualObject> objects, const Vocab& vocab,
                     const EmbeddingTables& t, const EmbeddingConfig& cfg) {
  const std::size_t n = objects.size();
  std::vector<double> fr, bx;
  std::vector<std::size_t> labels;
  for (const auto& o : objects) {
    if (o.appearance.size() != cfg.object_feature_dim || o.box.size() != cfg.object_box_dim) {
      throw DimensionError("embed_objects: object features " + std::to_string(o.appearance.size()) +
                           "/" + std::to_string(o.box.size()) + " do not match projections " +
                           shape_str(t.obj_fr_proj.shape()) + "/" + shape_str(t.obj_bx_proj.shape()));
    }
    fr.insert(fr.end(), o.appearance.begin(), o.appearance.end());
    bx.insert(bx.end(), o.box.begin(), o.box.end());
    labels.push_back(vocab.id(to_lower(o.label)));
  }
  Tensor fr_t = Tensor::from({n, cfg.object_feature_dim}, std::move(fr));
  Tensor bx_t = Tensor::from({n, cfg.object_box_dim}, std::move(bx));
  Tensor a = layer_norm(matmul(fr_t, t.obj_fr_proj), t.ln_fr_gain, t.ln_fr_bias);
  Tensor b = layer_norm(matmul(bx_t, t.obj_bx_proj), t.ln_bx_gain, t.ln_bx_bias);
  return add(add(a, b), gather_rows(t.word, labels));
}

Tensor ocr_text_rows(std::span<const std::string> texts, const Vocab& vocab, const EmbeddingTables& t) {
  std::vector<std::size_t> ids;
  for (const auto& s : texts) ids.push_back(vocab.id(to_lower(s)));
  return gather_rows(t.word, ids);
}

std::size_t ocr_position_index(std::size_t i, const EmbeddingConfig& cfg) {
  if (!cfg.ocr_position_shift) return i;
  return i == 0 ? 0 : i - 1;
}

Tensor compose_ocr(const Tensor& text_rows, std::span<const OcrToken> tokens,
                   const EmbeddingTables& t, const EmbeddingConfig& cfg) {
  const std::size_t n = tokens.size();
  check_positions(n, cfg, "ocr");
  if (text_rows.dim() != 2 || text_rows.size(0) != n || text_rows.size(1) != cfg.hidden) {
    throw DimensionError("compose_ocr: text rows " + shape_str(text_rows.shape()) + " for " +
                         std::to_string(n) + " tokens");
  }
  std::vector<double> vis;
  std::vector<Box> boxes;
  std::vector<std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tok = tokens[i];
    validate_box(tok.box, "ocr[" + std::to_string(i) + "]");
    if (tok.visual.size() != cfg.ocr_feature_dim) {
      throw DimensionError("compose_ocr: visual feature dim " + std::to_string(tok.visual.size()) +
                           " does not match projection " + shape_str(t.ocr_vis_proj.shape()));
    }
    vis.insert(vis.end(), tok.visual.begin(), tok.visual.end());
    boxes.push_back(tok.box);
    pos.push_back(ocr_position_index(i, cfg));
  }
  Tensor v = matmul(Tensor::from({n, cfg.ocr_feature_dim}, std::move(vis)), t.ocr_vis_proj);
  Tensor x = add(add(text_rows, v), gather_rows(t.pos1d, pos));
  if (cfg.layout_2d) x = add(x, layout_rows(boxes, t, cfg));
  return x;
}

Tensor embed_ocr(std::span<const OcrToken> tokens, const Vocab& vocab, const EmbeddingTables& t,
                 const EmbeddingConfig& cfg) {
  std::vector<std::string> texts;
  for (const auto& tok : tokens) texts.push_back(tok.text);
  return compose_ocr(ocr_text_rows(texts, vocab, t), tokens, t, cfg);
}

JointInput assemble_input(const Tensor& xq, const Tensor& xobj, const Tensor& xocr, const Tensor& xdec) {
  const std::size_t d = xq.cols();
  for (const Tensor* x : {&xq, &xobj, &xocr, &xdec}) {
    if (x->dim() != 2 || x->cols() != d) {
      throw DimensionError("assemble_input: segment " + shape_str(x->shape()) +
                           " does not share hidden size " + std::to_string(d));
    }
  }
  JointInput in;
  in.matrix = concat({xq, xobj, xocr, xdec}, 0);
  in.question = {0, xq.rows()};
  in.objects = {in.question.start + in.question.length, xobj.rows()};
  in.ocr = {in.objects.start + in.objects.length, xocr.rows()};
  in.decoder = {in.ocr.start + in.ocr.length, xdec.rows()};
  return in;
}

}  // namespace ats
