#include "ats/train.hpp"

#include <algorithm>
#include <cmath>

#include "ats/errors.hpp"
#include "ats/losses.hpp"

namespace ats {

void AdvConfig::validate() const {
  if (K < 1) throw ConfigError("adv K must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("adv alpha must be positive");
  if (!(lambda_adv > 0.0)) throw ConfigError("adv lambda must be positive");
  if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be non-negative");
}

namespace {

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Scales v into the ball of radius r, guarding against rounding just above r.
void project(std::vector<double>& v, double r) {
  double n = l2(v);
  if (n <= r) return;
  double f = r / n;
  for (;;) {
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = v[i] * f;
    if (l2(w) <= r) {
      v = std::move(w);
      return;
    }
    f = std::nextafter(f, 0.0);
  }
}

}  // namespace

PerturbationState init_delta(const Shape& shape, double lambda_adv, Rng& rng) {
  const std::size_t n = numel(shape);
  if (n == 0) throw ContractError("init_delta: empty perturbation");
  const double inv = 1.0 / std::sqrt(static_cast<double>(n));
  std::vector<double> d(n);
  for (auto& x : d) x = rng.uniform(-lambda_adv, lambda_adv) * inv;
  project(d, lambda_adv);
  return {Tensor::from(shape, std::move(d)), 0};
}

PerturbationState pgd_ascend(const PerturbationState& state, std::span<const double> grad_delta,
                             const AdvConfig& cfg) {
  const auto cur = state.delta.data();
  if (grad_delta.size() != cur.size()) {
    throw DimensionError("pgd_ascend: gradient has " + std::to_string(grad_delta.size()) +
                         " elements, perturbation " + std::to_string(cur.size()));
  }
  for (double g : grad_delta) {
    if (!std::isfinite(g)) throw NumericalError("pgd_ascend: non-finite perturbation gradient");
  }
  const double gn = l2(grad_delta);
  if (gn == 0.0) return {state.delta.detach(), state.step + 1};
  std::vector<double> d(cur.begin(), cur.end());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += cfg.alpha * (grad_delta[i] / gn);
  project(d, cfg.lambda_adv);
  return {Tensor::from(state.delta.shape(), std::move(d)), state.step + 1};
}

double grad_norm(const GradMap& g) {
  double s = 0.0;
  for (const auto& [name, v] : g) {
    for (double x : v) s += x * x;
  }
  return std::sqrt(s);
}

void OptimizerConfig::validate() const {
  if (rule != "sgd" && rule != "adamw") throw ConfigError("unknown optimizer rule '" + rule + "'");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(warmup_factor > 0.0 && warmup_factor <= 1.0)) throw ConfigError("warmup_factor must lie in (0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0) || !(weight_decay >= 0.0)) throw ConfigError("bad eps or weight_decay");
}

Optimizer::Optimizer(OptimizerConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

double Optimizer::lr_at(std::size_t it) const {
  if (it >= cfg_.warmup_iters) return cfg_.lr;
  const double frac = static_cast<double>(it) / static_cast<double>(cfg_.warmup_iters);
  return cfg_.lr * (cfg_.warmup_factor + (1.0 - cfg_.warmup_factor) * frac);
}

double Optimizer::step(ParamStore& params, const GradMap& g) {
  const double lr = lr_at(iter_);
  ++iter_;
  const double t = static_cast<double>(iter_);
  for (auto& [name, p] : params) {
    auto it = g.find(name);
    if (it == g.end()) throw ContractError("optimizer: no gradient for parameter " + name);
    const auto& grad = it->second;
    auto w = p.mutable_data();
    if (grad.size() != w.size()) throw DimensionError("optimizer: gradient size mismatch for " + name);
    if (cfg_.rule == "sgd") {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * grad[i];
      continue;
    }
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(w.size(), 0.0);
      v.assign(w.size(), 0.0);
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] *= 1.0 - lr * cfg_.weight_decay;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return lr;
}

BatchLayout batch_layout(std::span<const Example> batch) {
  BatchLayout l;
  for (const auto& ex : batch) {
    l.ocr_counts.push_back(ex.ocr.size());
    l.rows_per_sample = std::max(l.rows_per_sample, ex.ocr.size());
  }
  return l;
}

namespace {

std::vector<Tensor> anchors_impl(const Model& m, std::span<const Example> batch) {
  std::vector<Tensor> out;
  for (const auto& ex : batch) {
    TeacherTargets tt = teacher_targets(ex, m.words, m.answers);
    Tensor z = ocr_representation(m, ex);
    out.push_back(sigmoid(head_logits(m, fuse(m, ex, z, tt.inputs))));
  }
  return out;
}

}  // namespace

std::vector<Tensor> clean_anchors(const Model& m, std::span<const Example> batch) {
  NoGradGuard guard;
  return anchors_impl(m, batch);
}

BatchLoss batch_objective(const Model& m, std::span<const Example> batch, const Tensor* delta,
                          const BatchLayout& layout, const std::vector<Tensor>& anchors,
                          double kl_weight) {
  if (batch.empty()) throw ContractError("batch_objective: empty batch");
  if (!anchors.empty() && anchors.size() != batch.size()) {
    throw ContractError("batch_objective: anchor count does not match batch");
  }
  BatchLoss out;
  Tensor total;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const Example& ex = batch[b];
    Tensor z = ocr_representation(m, ex);
    if (delta != nullptr && layout.ocr_counts[b] > 0) {
      z = add(z, slice_rows(*delta, b * layout.rows_per_sample, layout.ocr_counts[b]));
    }
    TeacherTargets tt = teacher_targets(ex, m.words, m.answers);
    Tensor logits = head_logits(m, fuse(m, ex, z, tt.inputs));
    Tensor lp = loss_pred(logits, tt.targets);
    out.loss_pred += lp.item();
    Tensor obj = lp;
    if (!anchors.empty()) {
      Tensor lk = loss_kl(logits, anchors[b]);
      out.loss_kl += lk.item();
      obj = add(obj, scale(lk, kl_weight));
    }
    total = b == 0 ? obj : add(total, obj);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.total = scale(total, inv);
  out.loss_pred *= inv;
  out.loss_kl *= inv;
  return out;
}

nlohmann::json StepMetrics::to_json(std::size_t iter) const {
  return {{"iter", iter},           {"loss_pred", loss_pred}, {"loss_kl", loss_kl},
          {"delta_norm", delta_norm}, {"grad_norm", grad_norm}, {"lr", lr}};
}

StepMetrics train_step(Model& m, std::span<const Example> batch, const AdvConfig& cfg, Optimizer& opt,
                       Rng& rng, StepDiagnostics* diag) {
  cfg.validate();
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const bool adv = cfg.adv_enabled;
  const std::size_t steps = adv ? cfg.K : 1;
  const BatchLayout layout = batch_layout(batch);
  const std::size_t d = m.cfg.embedding.hidden;

  PerturbationState st;
  if (adv) {
    const Shape shape{std::max<std::size_t>(1, batch.size() * layout.rows_per_sample), d};
    if (cfg.freeze_delta) {
      st.delta = Tensor::zeros(shape);
    } else {
      st = init_delta(shape, cfg.lambda_adv, rng);
      // Padding rows carry no perturbation.
      auto data = st.delta.mutable_data();
      for (std::size_t b = 0; b < batch.size(); ++b) {
        for (std::size_t r = layout.ocr_counts[b]; r < layout.rows_per_sample; ++r) {
          std::fill_n(data.begin() + static_cast<std::ptrdiff_t>((b * layout.rows_per_sample + r) * d), d, 0.0);
        }
      }
    }
  }

  std::vector<Tensor> anchors;
  if (adv && !cfg.kl_anchor_grad) anchors = clean_anchors(m, batch);

  GradMap g;
  for (const auto& [name, p] : m.params) g[name].assign(p.numel(), 0.0);

  StepMetrics metrics;
  const double inv_k = 1.0 / static_cast<double>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    m.params.zero_grads();
    Tensor delta_leaf;
    if (adv) {
      const auto cur = st.delta.data();
      delta_leaf = Tensor::from(st.delta.shape(), std::vector<double>(cur.begin(), cur.end()), true);
      if (diag) diag->deltas.emplace_back(cur.begin(), cur.end());
      if (cfg.kl_anchor_grad) anchors = anchors_impl(m, batch);
    }
    BatchLoss loss = batch_objective(m, batch, adv ? &delta_leaf : nullptr, layout, anchors,
                                     adv ? cfg.kl_weight : 0.0);
    backward(loss.total);
    for (auto& [name, p] : m.params) {
      auto& acc = g[name];
      const auto pg = p.grad();
      if (pg.empty()) continue;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += inv_k * pg[i];
    }
    metrics.loss_pred += loss.loss_pred * inv_k;
    metrics.loss_kl += loss.loss_kl * inv_k;
    if (adv && !cfg.freeze_delta) {
      std::vector<double> gd(delta_leaf.numel(), 0.0);
      const auto dg = delta_leaf.grad();
      if (!dg.empty()) std::copy(dg.begin(), dg.end(), gd.begin());
      st = pgd_ascend(st, gd, cfg);
    }
  }
  m.params.zero_grads();
  if (adv) metrics.delta_norm = l2(st.delta.data());
  metrics.grad_norm = grad_norm(g);
  if (!std::isfinite(metrics.grad_norm) || !std::isfinite(metrics.loss_pred)) {
    throw NumericalError("train_step: non-finite loss or gradient");
  }
  if (diag) diag->accumulated = g;
  metrics.lr = opt.step(m.params, g);
  return metrics;
}

}  // namespace ats
