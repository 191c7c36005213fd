// Command-line driver: generate, corrupt, train, eval, ablate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ats/config.hpp"
#include "ats/errors.hpp"
#include "ats/runner.hpp"

namespace fs = std::filesystem;
using namespace ats;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg = path.empty() ? RunConfig{} : RunConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.apply_ablation();
  cfg.validate();
  return cfg;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + p.string());
  return out;
}

std::vector<Sample> load_required(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("no ") + what + " corpus given");
  return load_corpus(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial scene-text QA trainer"};
  app.require_subcommand(1);

  std::uint64_t gen_seed = 0;
  std::size_t gen_n = 0;
  std::string gen_out;
  LayoutSpec grid;
  auto* gen = app.add_subcommand("generate", "Write a synthetic scene-text QA corpus");
  gen->add_option("--seed", gen_seed, "Generator seed")->required();
  gen->add_option("--n", gen_n, "Number of samples")->required();
  gen->add_option("--out", gen_out, "Output JSONL path")->required();
  gen->add_option("--rows", grid.rows, "Grid rows");
  gen->add_option("--cols", grid.cols, "Grid columns");

  std::string cor_in, cor_out, cor_audit, cor_dict, cor_ops = "delete,insert,substitute";
  double cor_lambda = 0.1;
  std::uint64_t cor_seed = 0;
  bool cor_protect = false;
  auto* cor = app.add_subcommand("corrupt", "Apply character noise to OCR tokens of a corpus");
  cor->add_option("--in", cor_in, "Input corpus")->required();
  cor->add_option("--out", cor_out, "Corrupted corpus")->required();
  cor->add_option("--audit", cor_audit, "Per-token outcome log (JSONL)");
  cor->add_option("--lambda", cor_lambda, "Corruption probability per token");
  cor->add_option("--seed", cor_seed, "Noise seed");
  cor->add_option("--dictionary", cor_dict, "Dictionary file (default: the corpus' own OCR words)");
  cor->add_option("--ops", cor_ops, "Enabled character ops");
  cor->add_flag("--protect-answers", cor_protect, "Leave tokens that equal an answer untouched");

  std::string cfg_path, train_path, eval_path, out_dir, ckpt_path, corpus_path;
  std::vector<std::string> overrides;
  std::size_t threads = 1;

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", cfg_path, "Config file");
  train->add_option("--set", overrides, "Override a config key: section.key=value");
  train->add_option("--train", train_path, "Training corpus (overrides data.train)");
  train->add_option("--out", out_dir, "Output directory (overrides output.dir)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus");
  eval->add_option("--config", cfg_path, "Config file");
  eval->add_option("--set", overrides, "Override a config key");
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("--corpus", corpus_path, "Corpus to evaluate (overrides data.eval)");
  eval->add_option("--out", out_dir, "Output directory");
  eval->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1, 256));

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate over ablation toggle sets");
  ablate->add_option("--config", cfg_path, "Config file");
  ablate->add_option("--set", overrides, "Override a config key");
  ablate->add_option("--train", train_path, "Training corpus");
  ablate->add_option("--eval", eval_path, "Evaluation corpus");
  ablate->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) {
      if (gen_n == 0) throw UsageError("--n must be positive");
      auto samples = synth_generate(gen_seed, gen_n, grid);
      write_corpus(gen_out, samples);
      std::cout << "wrote " << samples.size() << " samples to " << gen_out << "\n";
    } else if (*cor) {
      auto samples = load_corpus(cor_in);
      NoiseConfig nc;
      nc.lambda_tok = cor_lambda;
      nc.seed = cor_seed;
      nc.ops.clear();
      std::string item;
      std::istringstream ops(cor_ops);
      while (std::getline(ops, item, ',')) {
        auto op = char_op_from_string(item);
        if (!op) throw UsageError("unknown op '" + item + "'");
        nc.ops.push_back(*op);
      }
      nc.validate();
      Dictionary dict = cor_dict.empty() ? corpus_dictionary(samples) : Dictionary::load(cor_dict);
      auto records = corrupt_corpus(samples, dict, nc, cor_protect);
      write_corpus(cor_out, samples);
      std::size_t changed = 0;
      if (!cor_audit.empty()) {
        auto out = open_out(cor_audit);
        for (const auto& r : records) {
          auto j = r.outcome.to_json();
          j["id"] = r.id;
          j["position"] = r.position;
          out << j.dump() << '\n';
        }
      }
      for (const auto& r : records) changed += r.outcome.op ? 1 : 0;
      std::cout << "corrupted " << changed << " of " << records.size() << " tokens\n";
    } else if (*train) {
      RunConfig cfg = resolve_config(cfg_path, overrides);
      if (!train_path.empty()) cfg.train_path = train_path;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      auto samples = load_required(cfg.train_path, "training");
      Dictionary dict = resolve_dictionary(cfg, samples);
      const fs::path dir = cfg.output_dir;
      fs::create_directories(dir);
      open_out(dir / "config.resolved.cfg") << cfg.dump();
      auto log = open_out(dir / "train.jsonl");
      log << log_header(cfg, "train").dump() << '\n';
      TrainOptions to;
      to.log = &log;
      to.abort_checkpoint = dir / "checkpoint.bin";
      TrainResult tr = run_training(cfg, samples, dict, to);
      save_model(dir / "checkpoint.bin", tr.model, cfg);
      std::cout << "trained " << tr.iterations_run << " iterations; checkpoint " << (dir / "checkpoint.bin").string()
                << "\n";
    } else if (*eval) {
      RunConfig cfg = resolve_config(cfg_path, overrides);
      if (!corpus_path.empty()) cfg.eval_path = corpus_path;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (!fs::exists(ckpt_path)) throw ValidationError("checkpoint not found: " + ckpt_path);
      Model m = load_model(ckpt_path, cfg);
      auto samples = load_required(cfg.eval_path, "evaluation");
      auto preds = predict_corpus(m, samples, threads);
      EvalReport report = evaluate(preds, samples, cfg.anls_threshold);
      const fs::path dir = cfg.output_dir;
      auto pout = open_out(dir / "predictions.jsonl");
      for (const auto& p : preds) pout << p.to_json().dump() << '\n';
      auto rj = report.to_json();
      rj["config_hash"] = cfg.hash();
      open_out(dir / "report.json") << rj.dump(2) << '\n';
      std::cout << report.summary_table();
    } else if (*ablate) {
      RunConfig cfg = resolve_config(cfg_path, overrides);
      if (!train_path.empty()) cfg.train_path = train_path;
      if (!eval_path.empty()) cfg.eval_path = eval_path;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      auto tr = load_required(cfg.train_path, "training");
      auto ev = load_required(cfg.eval_path, "evaluation");
      Dictionary dict = resolve_dictionary(cfg, tr);
      const fs::path dir = cfg.output_dir;
      auto log = open_out(dir / "ablation.jsonl");
      log << log_header(cfg, "ablate").dump() << '\n';
      auto rows = run_ablation(cfg, tr, ev, dict, &log);
      const std::string table = ablation_table(rows);
      open_out(dir / "ablation.txt") << table;
      std::cout << table;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
