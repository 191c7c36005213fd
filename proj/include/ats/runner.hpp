#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ats/config.hpp"
#include "ats/metrics.hpp"

namespace ats {

// Dictionary of every OCR word in `samples`, lowercased.
Dictionary corpus_dictionary(std::span<const Sample> samples);

// Dictionary from cfg.dictionary_path, or from the training corpus when unset.
Dictionary resolve_dictionary(const RunConfig& cfg, std::span<const Sample> train);

struct CorruptionRecord {
  std::string id;
  std::size_t position = 0;
  NoiseOutcome outcome;
};

// Corrupts OCR texts in place, one derived seed per sample. With
// `protect_answers`, tokens equal to one of the sample's answers are left alone.
std::vector<CorruptionRecord> corrupt_corpus(std::vector<Sample>& samples, const Dictionary& dict,
                                             const NoiseConfig& cfg, bool protect_answers);

struct TrainResult {
  Model model;
  std::vector<StepMetrics> steps;
  std::size_t iterations_run = 0;
  double last_eval_accuracy = -1.0;  // -1 when no periodic evaluation ran
  bool reached_target = false;
};

// Called after every step; returning false stops training.
using StepHook = std::function<bool(std::size_t iter, const StepMetrics&)>;

struct TrainOptions {
  std::ostream* log = nullptr;  // JSONL step and eval records
  StepHook hook;
  // Written with the last good parameters when a step aborts on NaN/Inf.
  std::filesystem::path abort_checkpoint;
};

// Builds vocabularies from `train`, initializes a model and runs the
// configured number of iterations.
TrainResult run_training(const RunConfig& cfg, std::span<const Sample> train, const Dictionary& dict,
                         const TrainOptions& opts = {});

// Clean greedy predictions, aggregated in corpus order.
std::vector<PredictionRecord> predict_corpus(const Model& m, std::span<const Sample> corpus,
                                             std::size_t threads = 1);

EvalReport evaluate_model(const Model& m, std::span<const Sample> corpus, double anls_threshold,
                          std::size_t threads = 1);

nlohmann::json log_header(const RunConfig& cfg, const std::string& command);

void save_model(const std::filesystem::path& path, const Model& m, const RunConfig& cfg);
// Rebuilds a model for `cfg` from a checkpoint; mismatched names or shapes are
// reported as ValidationError.
Model load_model(const std::filesystem::path& path, const RunConfig& cfg);

struct AblationRow {
  Ablation toggles;
  double accuracy = 0.0;
  double anls = 0.0;
};

std::vector<AblationRow> run_ablation(const RunConfig& cfg, std::span<const Sample> train,
                                      std::span<const Sample> eval, const Dictionary& dict,
                                      std::ostream* log = nullptr);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace ats
