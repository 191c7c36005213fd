#include "ats/runner.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <numeric>
#include <thread>

#include "ats/errors.hpp"

namespace ats {

Dictionary corpus_dictionary(std::span<const Sample> samples) {
  std::vector<std::string> words;
  for (const auto& s : samples) {
    for (const auto& t : s.ocr) words.push_back(t.text);
  }
  return Dictionary(std::move(words));
}

Dictionary resolve_dictionary(const RunConfig& cfg, std::span<const Sample> train) {
  if (!cfg.dictionary_path.empty()) return Dictionary::load(cfg.dictionary_path);
  return corpus_dictionary(train);
}

std::vector<CorruptionRecord> corrupt_corpus(std::vector<Sample>& samples, const Dictionary& dict,
                                             const NoiseConfig& cfg, bool protect_answers) {
  std::vector<CorruptionRecord> log;
  for (auto& s : samples) {
    Rng rng(derive_seed(cfg.seed, s.id, 0x636f72));
    std::vector<std::string> answers;
    for (const auto& a : s.answers) answers.push_back(to_lower(a));
    for (std::size_t i = 0; i < s.ocr.size(); ++i) {
      auto& tok = s.ocr[i];
      if (protect_answers &&
          std::find(answers.begin(), answers.end(), to_lower(tok.text)) != answers.end()) {
        continue;
      }
      NoiseOutcome o = corrupt_token(tok.text, dict, cfg, rng);
      tok.text = o.corrupted;
      log.push_back({s.id, i, std::move(o)});
    }
  }
  return log;
}

nlohmann::json log_header(const RunConfig& cfg, const std::string& command) {
  return {{"type", "header"},
          {"command", command},
          {"config_hash", cfg.hash()},
          {"config", cfg.dump()},
          {"ablation", cfg.ablation.code()}};
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

TrainResult run_training(const RunConfig& cfg, std::span<const Sample> train, const Dictionary& dict,
                         const TrainOptions& opts) {
  cfg.validate();
  if (train.empty()) throw ValidationError("training corpus is empty");
  std::vector<Sample> samples(train.begin(), train.end());
  Vocab words = vocab_build(samples, cfg.min_word_freq, dict.words());
  Vocab answers = answer_vocab_build(samples, cfg.min_word_freq);
  TrainResult result{Model::create(cfg.model, std::move(words), std::move(answers), cfg.model_seed), {}, 0,
                     -1.0, false};
  Model& m = result.model;
  Optimizer opt(cfg.optimizer);

  std::vector<Example> base;
  for (const auto& s : samples) base.push_back(make_example(s, cfg.model));
  const bool noisy = cfg.noise.token_noise_enabled && cfg.noise.lambda_tok > 0.0;

  std::vector<std::size_t> order(base.size());
  std::size_t cursor = order.size(), epoch = 0;
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<Example> batch;
    while (batch.size() < cfg.batch_size) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), 0);
        Rng er(derive_seed(cfg.train_seed, "epoch", epoch++));
        shuffle(order, er);
        cursor = 0;
      }
      batch.push_back(base[order[cursor++]]);
    }
    if (noisy) {
      for (auto& ex : batch) {
        Rng nr(derive_seed(cfg.noise.seed, ex.id, it));
        apply_token_noise(ex, dict, cfg.noise, nr);
      }
    }
    Rng dr(derive_seed(cfg.train_seed, "delta", it));
    StepMetrics sm;
    try {
      sm = train_step(m, batch, cfg.adv, opt, dr);
    } catch (const NumericalError& e) {
      if (!opts.abort_checkpoint.empty()) save_model(opts.abort_checkpoint, m, cfg);
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }
    result.steps.push_back(sm);
    result.iterations_run = it + 1;
    if (opts.log && it % cfg.log_every == 0) {
      auto j = sm.to_json(it);
      j["type"] = "step";
      *opts.log << j.dump() << '\n';
    }
    if (cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0) {
      EvalReport r = evaluate_model(m, samples, cfg.anls_threshold);
      result.last_eval_accuracy = r.accuracy;
      if (opts.log) {
        *opts.log << nlohmann::json{{"type", "eval"}, {"iter", it}, {"accuracy", r.accuracy}, {"anls", r.anls}}.dump()
                  << '\n';
      }
      if (cfg.target_accuracy > 0.0 && r.accuracy >= cfg.target_accuracy) {
        result.reached_target = true;
        break;
      }
    }
    if (opts.hook && !opts.hook(it, sm)) break;
  }
  if (opts.log) opts.log->flush();
  return result;
}

std::vector<PredictionRecord> predict_corpus(const Model& m, std::span<const Sample> corpus,
                                             std::size_t threads) {
  std::vector<PredictionRecord> out(corpus.size());
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, corpus.size()));
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < corpus.size(); i += stride) {
      out[i] = predict(m, make_example(corpus[i], m.cfg));
    }
  };
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t, threads);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

EvalReport evaluate_model(const Model& m, std::span<const Sample> corpus, double anls_threshold,
                          std::size_t threads) {
  auto preds = predict_corpus(m, corpus, threads);
  return evaluate(preds, corpus, anls_threshold);
}

void save_model(const std::filesystem::path& path, const Model& m, const RunConfig& cfg) {
  nlohmann::json meta{{"config", cfg.dump()},
                      {"config_hash", cfg.hash()},
                      {"words", m.words.tokens()},
                      {"answers", m.answers.tokens()}};
  write_checkpoint(path, m.params, meta.dump());
}

Model load_model(const std::filesystem::path& path, const RunConfig& cfg) {
  Checkpoint ck = read_checkpoint(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(ck.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": unreadable checkpoint metadata: " + e.what());
  }
  if (!meta.contains("words") || !meta.contains("answers")) {
    throw ValidationError(path.string() + ": checkpoint metadata lacks vocabularies");
  }
  Vocab words(meta["words"].get<std::vector<std::string>>());
  Vocab answers(meta["answers"].get<std::vector<std::string>>());
  Model m = Model::create(cfg.model, std::move(words), std::move(answers), cfg.model_seed);
  try {
    load_into(ck, m.params);
  } catch (const std::exception& e) {
    throw ValidationError(path.string() + " does not match the configured model: " + e.what());
  }
  return m;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::span<const Sample> train,
                                      std::span<const Sample> eval, const Dictionary& dict,
                                      std::ostream* log) {
  std::vector<std::string> codes = cfg.ablation_grid;
  if (codes.empty()) {
    for (int i = 0; i < 16; ++i) {
      std::string c;
      for (int b = 3; b >= 0; --b) c += ((i >> b) & 1) ? '1' : '0';
      codes.push_back(c);
    }
  }
  std::vector<AblationRow> rows;
  for (const auto& code : codes) {
    RunConfig rc = cfg;
    rc.ablation = Ablation::from_code(code);
    rc.apply_ablation();
    TrainOptions to;
    to.log = log;
    if (log) *log << log_header(rc, "ablate-run").dump() << '\n';
    TrainResult tr = run_training(rc, train, dict, to);
    EvalReport r = evaluate_model(tr.model, eval, rc.anls_threshold);
    rows.push_back({rc.ablation, r.accuracy, r.anls});
    if (log) {
      *log << nlohmann::json{{"type", "ablation"}, {"toggles", code}, {"accuracy", r.accuracy}, {"anls", r.anls}}.dump()
           << '\n';
    }
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "token_noise  layout_2d  sasa  adv_ocr  accuracy    anls\n";
  char buf[128];
  for (const auto& r : rows) {
    auto mark = [](bool b) { return b ? "x" : "-"; };
    std::snprintf(buf, sizeof buf, "%-11s  %-9s  %-4s  %-7s  %8.4f  %6.4f\n", mark(r.toggles.token_noise),
                  mark(r.toggles.layout_2d), mark(r.toggles.sasa), mark(r.toggles.adv_ocr), r.accuracy, r.anls);
    out += buf;
  }
  return out;
}

}  // namespace ats
