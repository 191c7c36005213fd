#include "ats/config.hpp"

#include <cstdio>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "ats/errors.hpp"

namespace ats {

std::string Ablation::code() const {
  std::string c;
  for (bool b : {token_noise, layout_2d, sasa, adv_ocr}) c += b ? '1' : '0';
  return c;
}

Ablation Ablation::from_code(const std::string& code) {
  if (code.size() != 4 || code.find_first_not_of("01") != std::string::npos) {
    throw ConfigError("ablation code '" + code + "' must be four 0/1 digits");
  }
  return {code[0] == '1', code[1] == '1', code[2] == '1', code[3] == '1'};
}

RunConfig::RunConfig() {
  model.aoe.layers = 6;
  model.fusion.layers = 4;
  model.aoe.heads = model.fusion.heads = 12;
  model.embedding.hidden = 768;
  model.aoe.d_k = model.fusion.d_k = 64;
}

void RunConfig::apply_ablation() {
  noise.token_noise_enabled = ablation.token_noise;
  model.embedding.layout_2d = ablation.layout_2d;
  model.aoe.sasa_enabled = ablation.sasa;
  adv.adv_enabled = ablation.adv_ocr;
}

void RunConfig::validate() const {
  model.validate();
  noise.validate();
  adv.validate();
  optimizer.validate();
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (log_every == 0) throw ConfigError("train.log_every must be positive");
  if (target_accuracy < 0.0 || target_accuracy > 1.0) throw ConfigError("train.target_accuracy must lie in [0, 1]");
  if (!(anls_threshold >= 0.0 && anls_threshold <= 1.0)) throw ConfigError("eval.anls_threshold must lie in [0, 1]");
  for (const auto& c : ablation_grid) Ablation::from_code(c);
  if (noise.token_noise_enabled != ablation.token_noise || model.embedding.layout_2d != ablation.layout_2d ||
      model.aoe.sasa_enabled != ablation.sasa || adv.adv_enabled != ablation.adv_ocr) {
    throw ConfigError("ablation toggles disagree with module settings");
  }
}

namespace {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + s + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
  try {
    if (s.empty() || s[0] == '-') throw std::invalid_argument(s);
    std::size_t pos = 0;
    unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::string join_list(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

#define ATS_UINT(k, expr)                                                               \
  Field{k, [](const RunConfig& c) { return std::to_string(c.expr); },                  \
        [](RunConfig& c, const std::string& v) { c.expr = parse_uint(k, v); }}
#define ATS_DOUBLE(k, expr)                                                             \
  Field{k, [](const RunConfig& c) { return fmt_double(c.expr); },                      \
        [](RunConfig& c, const std::string& v) { c.expr = parse_double(k, v); }}
#define ATS_BOOL(k, expr)                                                               \
  Field{k, [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); },  \
        [](RunConfig& c, const std::string& v) { c.expr = parse_bool(k, v); }}
#define ATS_STRING(k, expr)                                                             \
  Field{k, [](const RunConfig& c) { return c.expr; },                                  \
        [](RunConfig& c, const std::string& v) { c.expr = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      ATS_UINT("model.hidden", model.embedding.hidden),
      Field{"model.heads", [](const RunConfig& c) { return std::to_string(c.model.aoe.heads); },
            [](RunConfig& c, const std::string& v) { c.model.aoe.heads = c.model.fusion.heads = parse_uint("model.heads", v); }},
      Field{"model.d_k", [](const RunConfig& c) { return std::to_string(c.model.aoe.d_k); },
            [](RunConfig& c, const std::string& v) { c.model.aoe.d_k = c.model.fusion.d_k = parse_uint("model.d_k", v); }},
      ATS_UINT("model.aoe_layers", model.aoe.layers),
      ATS_UINT("model.fusion_layers", model.fusion.layers),
      Field{"model.ffn_mult", [](const RunConfig& c) { return std::to_string(c.model.aoe.ffn_mult); },
            [](RunConfig& c, const std::string& v) { c.model.aoe.ffn_mult = c.model.fusion.ffn_mult = parse_uint("model.ffn_mult", v); }},
      ATS_UINT("model.max_rel_1d", model.aoe.max_rel_1d),
      ATS_UINT("model.max_rel_2d", model.aoe.max_rel_2d),
      ATS_UINT("model.max_positions", model.embedding.max_positions),
      ATS_UINT("model.layout_buckets", model.embedding.layout_buckets),
      ATS_DOUBLE("model.layout_max_size", model.embedding.layout_max_size),
      ATS_UINT("model.object_feature_dim", model.embedding.object_feature_dim),
      ATS_UINT("model.object_box_dim", model.embedding.object_box_dim),
      ATS_UINT("model.ocr_feature_dim", model.embedding.ocr_feature_dim),
      ATS_BOOL("model.ocr_position_shift", model.embedding.ocr_position_shift),
      ATS_UINT("model.max_ocr_slots", model.max_ocr_slots),
      ATS_UINT("model.max_decode_steps", model.max_decode_steps),
      ATS_UINT("model.seed", model_seed),
      ATS_DOUBLE("noise.lambda_tok", noise.lambda_tok),
      Field{"noise.ops",
            [](const RunConfig& c) {
              std::vector<std::string> v;
              for (auto op : c.noise.ops) v.push_back(to_string(op));
              return join_list(v);
            },
            [](RunConfig& c, const std::string& v) {
              c.noise.ops.clear();
              for (const auto& s : split_list(v)) {
                auto op = char_op_from_string(s);
                if (!op) throw ConfigError("noise.ops: unknown op '" + s + "'");
                c.noise.ops.push_back(*op);
              }
            }},
      ATS_UINT("noise.seed", noise.seed),
      ATS_STRING("noise.dictionary", dictionary_path),
      ATS_UINT("adv.K", adv.K),
      ATS_DOUBLE("adv.alpha", adv.alpha),
      ATS_DOUBLE("adv.lambda", adv.lambda_adv),
      ATS_DOUBLE("adv.kl_weight", adv.kl_weight),
      ATS_BOOL("adv.freeze_delta", adv.freeze_delta),
      ATS_BOOL("adv.kl_anchor_grad", adv.kl_anchor_grad),
      ATS_STRING("train.optimizer", optimizer.rule),
      ATS_DOUBLE("train.lr", optimizer.lr),
      ATS_DOUBLE("train.beta1", optimizer.beta1),
      ATS_DOUBLE("train.beta2", optimizer.beta2),
      ATS_DOUBLE("train.eps", optimizer.eps),
      ATS_DOUBLE("train.weight_decay", optimizer.weight_decay),
      ATS_UINT("train.warmup_iters", optimizer.warmup_iters),
      ATS_DOUBLE("train.warmup_factor", optimizer.warmup_factor),
      ATS_UINT("train.batch_size", batch_size),
      ATS_UINT("train.iterations", iterations),
      ATS_UINT("train.seed", train_seed),
      ATS_UINT("train.log_every", log_every),
      ATS_UINT("train.eval_every", eval_every),
      ATS_DOUBLE("train.target_accuracy", target_accuracy),
      ATS_UINT("train.min_word_freq", min_word_freq),
      ATS_STRING("data.train", train_path),
      ATS_STRING("data.eval", eval_path),
      ATS_DOUBLE("eval.anls_threshold", anls_threshold),
      ATS_BOOL("ablation.token_noise", ablation.token_noise),
      ATS_BOOL("ablation.layout_2d", ablation.layout_2d),
      ATS_BOOL("ablation.sasa", ablation.sasa),
      ATS_BOOL("ablation.adv_ocr", ablation.adv_ocr),
      Field{"ablation.grid", [](const RunConfig& c) { return join_list(c.ablation_grid); },
            [](RunConfig& c, const std::string& v) { c.ablation_grid = split_list(v); }},
      ATS_STRING("output.dir", output_dir),
  };
  return f;
}

#undef ATS_UINT
#undef ATS_DOUBLE
#undef ATS_BOOL
#undef ATS_STRING

const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + key + "'");
  f->set(*this, value);
  if (key.rfind("ablation.", 0) == 0) apply_ablation();
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(path.string() + ": key '" + section + "' outside a section");
    for (const auto& [name, value] : body) {
      const std::string key = section + "." + name;
      const Field* f = find_field(key);
      if (f == nullptr) throw ConfigError(path.string() + ": unknown key '" + key + "'");
      f->set(c, value.get_value<std::string>());
    }
  }
  c.apply_ablation();
  c.validate();
  return c;
}

std::string RunConfig::dump() const {
  std::string out, section;
  for (const auto& f : fields()) {
    const auto dot = f.key.find('.');
    const std::string sec = f.key.substr(0, dot);
    if (sec != section) {
      out += (out.empty() ? "" : "\n") + ("[" + sec + "]\n");
      section = sec;
    }
    out += f.key.substr(dot + 1) + " = " + f.get(*this) + "\n";
  }
  return out;
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(dump())));
  return buf;
}

}  // namespace ats
