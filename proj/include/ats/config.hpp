#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ats/model.hpp"
#include "ats/noise.hpp"
#include "ats/train.hpp"

namespace ats {

struct Ablation {
  bool token_noise = true;
  bool layout_2d = true;
  bool sasa = true;
  bool adv_ocr = true;

  std::string code() const;  // e.g. "1011" in the order above
  static Ablation from_code(const std::string& code);
};

struct RunConfig {
  ModelConfig model;
  std::uint64_t model_seed = 1;
  NoiseConfig noise;
  std::string dictionary_path;  // empty: OCR words of the training corpus
  AdvConfig adv;
  OptimizerConfig optimizer;
  std::size_t batch_size = 8;
  std::size_t iterations = 48000;
  std::uint64_t train_seed = 1;
  std::size_t log_every = 1;
  std::size_t eval_every = 0;      // 0: no periodic evaluation
  double target_accuracy = 0.0;    // > 0: stop once periodic eval reaches it
  std::size_t min_word_freq = 1;
  std::string train_path;
  std::string eval_path;
  double anls_threshold = 0.5;
  Ablation ablation;
  std::vector<std::string> ablation_grid;  // codes; empty: all 16
  std::string output_dir = "runs/default";

  RunConfig();

  // Copies the ablation toggles into the module configs.
  void apply_ablation();
  void validate() const;

  static RunConfig load(const std::filesystem::path& path);
  // `key` is "section.name".
  void set(const std::string& key, const std::string& value);
  // Resolved configuration in the file format, fixed key order.
  std::string dump() const;
  std::string hash() const;  // 16 hex digits of FNV-1a over dump()
};

}  // namespace ats
