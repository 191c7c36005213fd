#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ats/decoder.hpp"
#include "ats/model.hpp"

namespace ats {

struct AdvConfig {
  std::size_t K = 2;         // ascent steps per batch
  double alpha = 0.3;        // ascent step size
  double lambda_adv = 1.0;   // Frobenius bound on the perturbation
  double kl_weight = 1.5;
  bool adv_enabled = true;
  bool freeze_delta = false;      // keep the perturbation at zero (no init noise, no ascent)
  bool kl_anchor_grad = false;    // let parameter gradients flow through the clean anchor too

  void validate() const;
};

struct PerturbationState {
  Tensor delta;  // rows x d, padded per sample
  std::size_t step = 0;
};

// Elements i.i.d. U(-lambda, lambda) / sqrt(N).
PerturbationState init_delta(const Shape& shape, double lambda_adv, Rng& rng);

// delta + alpha * g / ||g||_F, scaled back into the Frobenius ball. A zero
// gradient leaves delta unchanged.
PerturbationState pgd_ascend(const PerturbationState& state, std::span<const double> grad_delta,
                             const AdvConfig& cfg);

// Parameter gradients keyed like the ParamStore.
using GradMap = std::map<std::string, std::vector<double>>;

double grad_norm(const GradMap& g);

struct OptimizerConfig {
  std::string rule = "adamw";  // "sgd" or "adamw"
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t warmup_iters = 1000;
  double warmup_factor = 0.2;  // lr multiplier at iteration 0

  void validate() const;
};

class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg);

  // Learning rate at 0-based iteration `it`.
  double lr_at(std::size_t it) const;
  // Applies one update with gradients `g`; returns the learning rate used.
  double step(ParamStore& params, const GradMap& g);
  std::size_t iteration() const { return iter_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  OptimizerConfig cfg_;
  std::size_t iter_ = 0;
  GradMap m_, v_;
};

// Per-sample layout of the shared perturbation: sample b owns rows
// [b * rows_per_sample, b * rows_per_sample + L_b).
struct BatchLayout {
  std::size_t rows_per_sample = 0;
  std::vector<std::size_t> ocr_counts;
};
BatchLayout batch_layout(std::span<const Example> batch);

// Batch objective at a fixed perturbation: mean over samples of
// loss_pred(adv) + kl_weight * loss_kl(adv, anchor). `anchors` holds the
// clean per-sample probabilities (empty when KL is off).
struct BatchLoss {
  Tensor total;
  double loss_pred = 0.0;
  double loss_kl = 0.0;
};
BatchLoss batch_objective(const Model& m, std::span<const Example> batch, const Tensor* delta,
                          const BatchLayout& layout, const std::vector<Tensor>& anchors,
                          double kl_weight);

// Clean per-sample probabilities, computed without recording gradients.
std::vector<Tensor> clean_anchors(const Model& m, std::span<const Example> batch);

struct StepDiagnostics {
  std::vector<std::vector<double>> deltas;  // perturbation used at each ascent step
  GradMap accumulated;                      // g_K before the optimizer update
};

struct StepMetrics {
  double loss_pred = 0.0;  // mean over ascent steps
  double loss_kl = 0.0;
  double delta_norm = 0.0;  // after the last ascent step
  double grad_norm = 0.0;   // of g_K
  double lr = 0.0;
  nlohmann::json to_json(std::size_t iter) const;
};

// One minibatch of adversarial training: K ascent steps on the OCR
// perturbation with gradient accumulation, then one optimizer update.
StepMetrics train_step(Model& m, std::span<const Example> batch, const AdvConfig& cfg, Optimizer& opt,
                       Rng& rng, StepDiagnostics* diag = nullptr);

}  // namespace ats
