#include "ats/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ats/errors.hpp"
#include "ats/rng.hpp"

namespace ats {

using nlohmann::json;

std::string to_lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) out.push_back(to_lower(tok));
  return out;
}

void validate_box(const Box& b, const std::string& where) {
  auto fail = [&](const std::string& what) { throw ValidationError(where + ": bbox " + what); };
  if (!(b.x0 >= 0.0 && b.x1 <= 1.0 && b.y0 >= 0.0 && b.y1 <= 1.0)) fail("coordinate outside [0, 1]");
  if (b.x0 > b.x1) fail("order violated: x0 > x1");
  if (b.y0 > b.y1) fail("order violated: y0 > y1");
  if (!(b.h > 0.0) || !(b.w > 0.0)) fail("height and width must be positive");
}

void validate_sample(const Sample& s, const CorpusLimits& limits, const std::string& where) {
  if (s.id.empty()) throw ValidationError(where + ": field 'id' is empty");
  if (tokenize(s.question).size() > limits.max_question_tokens) {
    throw ValidationError(where + ": field 'question' exceeds " +
                          std::to_string(limits.max_question_tokens) + " tokens");
  }
  if (s.answers.size() != kNumAnswers) {
    throw ValidationError(where + ": field 'answers' must hold exactly 10 entries");
  }
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& o = s.objects[i];
    const std::string w = where + ": objects[" + std::to_string(i) + "]";
    if (o.appearance.size() != limits.object_feature_dim) {
      throw ValidationError(w + ".appearance has dim " + std::to_string(o.appearance.size()) +
                            ", expected " + std::to_string(limits.object_feature_dim));
    }
    if (o.box.size() != limits.object_box_dim) {
      throw ValidationError(w + ".box has dim " + std::to_string(o.box.size()) + ", expected " +
                            std::to_string(limits.object_box_dim));
    }
  }
  for (std::size_t i = 0; i < s.ocr.size(); ++i) {
    const auto& t = s.ocr[i];
    const std::string w = where + ": ocr[" + std::to_string(i) + "]";
    if (t.text.empty()) throw ValidationError(w + ".text is empty");
    validate_box(t.box, w);
    if (t.visual.size() != limits.ocr_feature_dim) {
      throw ValidationError(w + ".visual has dim " + std::to_string(t.visual.size()) +
                            ", expected " + std::to_string(limits.ocr_feature_dim));
    }
  }
}

namespace {

const json& field(const json& j, const char* name, const std::string& where) {
  auto it = j.find(name);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + name + "'");
  return *it;
}

std::vector<double> number_array(const json& j, const std::string& where) {
  if (!j.is_array()) throw ValidationError(where + " must be an array of numbers");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError(where + " must be an array of numbers");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

Sample sample_from_json(const json& j, const CorpusLimits& limits, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": record is not a JSON object");
  Sample s;
  try {
    s.id = field(j, "id", where).get<std::string>();
    s.question = field(j, "question", where).get<std::string>();
    const auto& objs = field(j, "objects", where);
    if (!objs.is_array()) throw ValidationError(where + ": field 'objects' must be an array");
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const std::string w = where + ": objects[" + std::to_string(i) + "]";
      VisualObject o;
      o.appearance = number_array(field(objs[i], "appearance", w), w + ".appearance");
      o.box = number_array(field(objs[i], "box", w), w + ".box");
      o.label = field(objs[i], "label", w).get<std::string>();
      s.objects.push_back(std::move(o));
    }
    const auto& ocr = field(j, "ocr", where);
    if (!ocr.is_array()) throw ValidationError(where + ": field 'ocr' must be an array");
    for (std::size_t i = 0; i < ocr.size(); ++i) {
      const std::string w = where + ": ocr[" + std::to_string(i) + "]";
      OcrToken t;
      t.text = field(ocr[i], "text", w).get<std::string>();
      auto b = number_array(field(ocr[i], "box", w), w + ".box");
      if (b.size() != 6) throw ValidationError(w + ".box must have 6 entries");
      t.box = {b[0], b[1], b[2], b[3], b[4], b[5]};
      t.visual = number_array(field(ocr[i], "visual", w), w + ".visual");
      s.ocr.push_back(std::move(t));
    }
    const auto& ans = field(j, "answers", where);
    if (!ans.is_array() || ans.empty()) {
      throw ValidationError(where + ": field 'answers' must be a non-empty array");
    }
    if (ans.size() > kNumAnswers) {
      throw ValidationError(where + ": field 'answers' has more than 10 entries");
    }
    for (const auto& a : ans) s.answers.push_back(a.get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(where + ": " + e.what());
  }
  // Pad by cyclic repetition to exactly 10 answers.
  const std::size_t given = s.answers.size();
  for (std::size_t i = given; i < kNumAnswers; ++i) s.answers.push_back(s.answers[i % given]);
  validate_sample(s, limits, where);
  return s;
}

json sample_to_json(const Sample& s) {
  json j;
  j["id"] = s.id;
  j["question"] = s.question;
  j["objects"] = json::array();
  for (const auto& o : s.objects) {
    j["objects"].push_back({{"appearance", o.appearance}, {"box", o.box}, {"label", o.label}});
  }
  j["ocr"] = json::array();
  for (const auto& t : s.ocr) {
    auto b = t.box.as_array();
    j["ocr"].push_back({{"text", t.text}, {"box", std::vector<double>(b.begin(), b.end())},
                        {"visual", t.visual}});
  }
  j["answers"] = s.answers;
  return j;
}

std::vector<Sample> load_corpus(const std::filesystem::path& path, const CorpusLimits& limits) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open corpus: " + path.string());
  std::vector<Sample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = path.filename().string() + " line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(where + ": malformed JSON (" + e.what() + ")");
    }
    out.push_back(sample_from_json(j, limits, where));
  }
  return out;
}

std::string corpus_to_string(const std::vector<Sample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    out += sample_to_json(s).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot write corpus: " + path.string());
  os << corpus_to_string(samples);
}

// ---- synthetic scenes ------------------------------------------------------

const std::vector<std::string>& synth_wordlist() {
  static const std::vector<std::string> words = [] {
    std::vector<std::string> w = {
        "apple", "bake",  "baker", "band",  "bank",  "bar",   "bark",  "barn",  "bean",  "bear",
        "beer",  "bell",  "belt",  "bike",  "bird",  "board", "boat",  "book",  "boot",  "bread",
        "bus",   "cafe",  "cake",  "call",  "camp",  "car",   "card",  "care",  "cart",  "case",
        "cash",  "cat",   "city",  "club",  "coat",  "code",  "coffee", "cold", "cord",  "corn",
        "dark",  "date",  "deal",  "deli",  "desk",  "dine",  "dog",   "door",  "east",  "exit",
        "fare",  "farm",  "fast",  "film",  "fire",  "fish",  "food",  "fort",  "free",  "fresh",
        "fuel",  "game",  "gate",  "gift",  "gold",  "golf",  "hall",  "hand",  "hat",   "hill",
        "home",  "hot",   "hotel", "ice",   "inn",   "jazz",  "king",  "lane",  "last",  "left",
        "line",  "lion",  "loan",  "lock",  "main",  "mall",  "map",   "market", "meal", "milk",
        "mint",  "north", "oil",   "open",  "park",  "part",  "pass",  "pizza", "port",  "post",
        "pub",   "rain",  "ride",  "road",  "room",  "rose",  "sale",  "salt",  "sand",  "shoe",
        "shop",  "shot",  "side",  "sign",  "slow",  "soap",  "south", "star",  "stop",  "store",
        "sun",   "sword", "taxi",  "tea",   "tire",  "toy",   "train", "tree",  "wall",  "ward",
        "wash",  "way",   "west",  "wine",  "word",  "words", "work",  "yard",  "zone",  "zoo"};
    std::sort(w.begin(), w.end());
    w.erase(std::unique(w.begin(), w.end()), w.end());
    return w;
  }();
  return words;
}

namespace {

const std::vector<std::string> kObjectLabels = {"board", "car", "poster", "shop", "sign", "wall"};

std::string cell_phrase(std::size_t r, std::size_t c, const LayoutSpec& g) {
  if (g.rows == 3 && g.cols == 3) {
    static const char* rn[] = {"top", "middle", "bottom"};
    static const char* cn[] = {"left", "center", "right"};
    return std::string(rn[r]) + " " + cn[c];
  }
  return "row " + std::to_string(r + 1) + " column " + std::to_string(c + 1);
}

std::vector<double> gaussian(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

}  // namespace

std::vector<Sample> synth_generate(std::uint64_t seed, std::size_t n, const LayoutSpec& grid,
                                   const CorpusLimits& limits) {
  if (n == 0) throw ContractError("synth_generate: n must be >= 1");
  if (grid.rows == 0 || grid.cols == 0) throw ContractError("synth_generate: empty grid");
  const std::size_t cells = grid.rows * grid.cols;
  const std::size_t min_words = std::clamp<std::size_t>(grid.min_words, 2, cells);
  const auto& words = synth_wordlist();
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, "synth", i));
    Sample s;
    s.id = "synth-" + std::to_string(seed) + "-" + std::to_string(i);

    const std::size_t k = min_words + rng.below(cells - min_words + 1);
    std::vector<std::size_t> order(cells);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t a = 0; a < k; ++a) std::swap(order[a], order[a + rng.below(cells - a)]);
    std::vector<std::size_t> occupied(order.begin(), order.begin() + static_cast<long>(k));
    std::sort(occupied.begin(), occupied.end());  // reading order

    std::vector<std::size_t> pool(words.size());
    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::string> texts(k);
    for (std::size_t a = 0; a < k; ++a) {
      std::swap(pool[a], pool[a + rng.below(pool.size() - a)]);
      texts[a] = words[pool[a]];
    }

    // 0: cell lookup, 1: the number, 2: right neighbour of a word.
    std::size_t kind = rng.below(3);
    std::size_t answer_slot = 0;
    std::size_t anchor_slot = 0;
    if (kind == 2) {
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      for (std::size_t a = 0; a + 1 < k; ++a) {
        if (occupied[a] / grid.cols == occupied[a + 1] / grid.cols) pairs.emplace_back(a, a + 1);
      }
      if (pairs.empty()) {
        kind = 0;
      } else {
        std::tie(anchor_slot, answer_slot) = pairs[rng.below(pairs.size())];
      }
    }
    if (kind == 0 || kind == 1) answer_slot = rng.below(k);
    if (kind == 1) texts[answer_slot] = std::to_string(1 + rng.below(999));

    const std::size_t r = occupied[answer_slot] / grid.cols, c = occupied[answer_slot] % grid.cols;
    if (kind == 0) {
      s.question = "what is the word in the " + cell_phrase(r, c, grid);
    } else if (kind == 1) {
      s.question = rng.bernoulli(0.5) ? "what number is on the sign" : "what number is shown";
    } else {
      s.question = "what word is right of " + texts[anchor_slot];
    }

    const double cw = 1.0 / static_cast<double>(grid.cols), ch = 1.0 / static_cast<double>(grid.rows);
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t rr = occupied[a] / grid.cols, cc = occupied[a] % grid.cols;
      OcrToken t;
      t.text = texts[a];
      Box b;
      b.x0 = (static_cast<double>(cc) + 0.05 + 0.25 * rng.uniform()) * cw;
      b.x1 = b.x0 + (0.4 + 0.25 * rng.uniform()) * cw;
      b.y0 = (static_cast<double>(rr) + 0.05 + 0.25 * rng.uniform()) * ch;
      b.y1 = b.y0 + (0.4 + 0.25 * rng.uniform()) * ch;
      b.h = (b.y1 - b.y0) * grid.image_size;
      b.w = (b.x1 - b.x0) * grid.image_size;
      t.box = b;
      t.visual = gaussian(rng, limits.ocr_feature_dim);
      // Digit glyphs get a shifted appearance so the visual channel carries a cue.
      if (std::isdigit(static_cast<unsigned char>(t.text[0]))) {
        for (std::size_t d = 0; d < std::min<std::size_t>(4, t.visual.size()); ++d) t.visual[d] += 1.5;
      }
      s.ocr.push_back(std::move(t));
    }

    for (int o = 0; o < 2; ++o) {
      VisualObject obj;
      obj.appearance = gaussian(rng, limits.object_feature_dim);
      obj.box.resize(limits.object_box_dim);
      for (auto& x : obj.box) x = rng.uniform();
      obj.label = kObjectLabels[rng.below(kObjectLabels.size())];
      s.objects.push_back(std::move(obj));
    }
    s.answers.assign(kNumAnswers, texts[answer_slot]);
    validate_sample(s, limits, s.id);
    out.push_back(std::move(s));
  }
  return out;
}

// ---- vocabularies ----------------------------------------------------------

const std::array<std::string, 4>& Vocab::specials() {
  static const std::array<std::string, 4> s = {"<pad>", "<begin>", "<end>", "<unk>"};
  return s;
}

Vocab::Vocab() : Vocab(std::vector<std::string>(specials().begin(), specials().end())) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < 4 || !std::equal(specials().begin(), specials().end(), tokens_.begin())) {
    throw ValidationError("vocabulary must start with the four special tokens");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) {
      throw ValidationError("duplicate vocabulary token: " + tokens_[i]);
    }
  }
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::optional<std::size_t> Vocab::find(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocab vocab_from_counts(const std::map<std::string, std::size_t>& counts, std::size_t min_freq) {
  std::vector<std::pair<std::string, std::size_t>> items;
  const auto& sp = Vocab::specials();
  for (const auto& [tok, n] : counts) {
    if (n < std::max<std::size_t>(min_freq, 1)) continue;
    if (std::find(sp.begin(), sp.end(), tok) != sp.end()) continue;
    items.emplace_back(tok, n);
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens(sp.begin(), sp.end());
  for (auto& [tok, _] : items) tokens.push_back(tok);
  return Vocab(std::move(tokens));
}

Vocab vocab_build(const std::vector<Sample>& samples, std::size_t min_freq,
                  const std::vector<std::string>& extra) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) {
    for (auto& t : tokenize(s.question)) ++counts[t];
    for (const auto& o : s.objects) ++counts[to_lower(o.label)];
    for (const auto& t : s.ocr) ++counts[to_lower(t.text)];
    for (const auto& a : s.answers)
      for (auto& t : tokenize(a)) ++counts[t];
  }
  for (const auto& w : extra) ++counts[to_lower(w)];
  return vocab_from_counts(counts, min_freq);
}

Vocab answer_vocab_build(const std::vector<Sample>& samples, std::size_t min_freq) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples)
    for (const auto& a : s.answers)
      for (auto& t : tokenize(a)) ++counts[t];
  return vocab_from_counts(counts, min_freq);
}

const std::string& gold_answer(const Sample& s) {
  if (s.answers.empty()) throw ContractError("sample " + s.id + " has no answers");
  std::size_t best = 0, best_count = 0;
  for (std::size_t i = 0; i < s.answers.size(); ++i) {
    const auto c = static_cast<std::size_t>(std::count(s.answers.begin(), s.answers.end(), s.answers[i]));
    if (c > best_count) {
      best = i;
      best_count = c;
    }
  }
  return s.answers[best];
}

// ---- dictionary ------------------------------------------------------------

Dictionary::Dictionary(std::vector<std::string> words) {
  for (auto& w : words) {
    w = to_lower(w);
    if (!w.empty()) words_.push_back(std::move(w));
  }
  std::sort(words_.begin(), words_.end());
  words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
}

Dictionary Dictionary::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open dictionary: " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string w;
    if (ls >> w) words.push_back(w);
  }
  Dictionary d(std::move(words));
  if (d.empty()) throw ValidationError("dictionary is empty: " + path.string());
  return d;
}

void Dictionary::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ValidationError("cannot write dictionary: " + path.string());
  for (const auto& w : words_) os << w << '\n';
}

bool Dictionary::contains(const std::string& w) const {
  return std::binary_search(words_.begin(), words_.end(), w);
}

}  // namespace ats
