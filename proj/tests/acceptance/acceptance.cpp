// Acceptance run: one PASS/FAIL line per headline property, then a nonzero
// exit if any failed. Details and the robustness seeds go to stdout and to
// acceptance_robustness.jsonl in the working directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ats/config.hpp"
#include "ats/decoder.hpp"
#include "ats/losses.hpp"
#include "ats/metrics.hpp"
#include "ats/noise.hpp"
#include "ats/runner.hpp"
#include "ats/train.hpp"
#include "support/oracles.hpp"
#include "support/tiny_model.hpp"

using namespace ats;
using oracle::random_tensor;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Verdict {
  bool pass = true;
  std::string detail;
  void fail(const std::string& why) {
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
};

double fro(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

GradMap collect_grads(const Model& m) {
  GradMap g;
  for (const auto& [name, p] : m.params) {
    auto pg = p.grad();
    g[name] = pg.empty() ? std::vector<double>(p.numel(), 0.0) : std::vector<double>(pg.begin(), pg.end());
  }
  return g;
}

std::vector<Example> noisy_batch(const fixture::Setup& s, std::size_t count, double lambda, std::uint64_t seed) {
  std::vector<Example> b(s.examples.begin(), s.examples.begin() + static_cast<long>(count));
  NoiseConfig nc;
  nc.lambda_tok = lambda;
  Rng rng(seed);
  for (auto& ex : b) apply_token_noise(ex, s.dict, nc, rng);
  return b;
}

// ---- gradient fidelity -----------------------------------------------------

constexpr double kGradTol = 1e-4;
constexpr double kFdStep = 1e-5;

oracle::GradCheck op_check(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                           const std::vector<Shape>& shapes, std::uint64_t seed, double input_scale = 1.0) {
  Rng rng(seed);
  std::vector<Tensor> xs;
  for (const auto& s : shapes) xs.push_back(random_tensor(s, rng, input_scale));
  Rng wr(seed + 1000);
  Tensor w;
  auto f = [&]() {
    Tensor y = op(xs);
    if (!w.defined()) w = random_tensor(y.shape(), wr, 1.0, false);
    return sum(mul(y, w));
  };
  return oracle::check_gradients(f, xs, {}, {}, kFdStep);
}

struct NamedOp {
  std::string name;
  std::function<Tensor(const std::vector<Tensor>&)> op;
  std::vector<Shape> shapes;
  double scale = 1.0;
};

std::vector<NamedOp> all_ops() {
  static const std::vector<std::size_t> gather_ids{2, 0, 2, 1};
  static const std::vector<std::size_t> take_ids{0, 5, 5, 3, 1, 2};
  static const std::vector<std::uint8_t> mask{1, 1, 0, 1, 0, 1, 1, 1, 1};
  return {
      {"add", [](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"add_broadcast", [](auto& x) { return add(x[0], x[1]); }, {{3, 4}, {4}}},
      {"sub", [](auto& x) { return sub(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"mul", [](auto& x) { return mul(x[0], x[1]); }, {{2, 3, 4}, {3, 4}}},
      {"scale", [](auto& x) { return scale(x[0], -1.7); }, {{5}}},
      {"add_scalar", [](auto& x) { return add_scalar(x[0], 0.3); }, {{5}}},
      {"matmul", [](auto& x) { return matmul(x[0], x[1]); }, {{3, 5}, {5, 2}}},
      {"transpose", [](auto& x) { return transpose(x[0]); }, {{3, 5}}},
      {"reshape", [](auto& x) { return reshape(x[0], {5, 3}); }, {{3, 5}}},
      {"sigmoid", [](auto& x) { return sigmoid(x[0]); }, {{3, 4}}},
      {"log", [](auto& x) { return log(add_scalar(mul(x[0], x[0]), 0.5)); }, {{3, 4}}},
      {"exp", [](auto& x) { return ats::exp(x[0]); }, {{3, 4}}},
      {"gelu", [](auto& x) { return gelu(x[0]); }, {{3, 4}}},
      {"clamp", [](auto& x) { return clamp(x[0], -0.5, 0.5); }, {{3, 4}}, 0.3},
      {"softmax_rows", [](auto& x) { return softmax_rows(x[0]); }, {{3, 5}}},
      {"softmax_rows_masked", [](auto& x) { return softmax_rows(x[0], mask); }, {{3, 3}}},
      {"layer_norm", [](auto& x) { return layer_norm(x[0], x[1], x[2]); }, {{4, 6}, {6}, {6}}},
      {"concat_rows", [](auto& x) { return concat({x[0], x[1]}, 0); }, {{2, 3}, {4, 3}}},
      {"concat_cols", [](auto& x) { return concat({x[0], x[1]}, 1); }, {{2, 3}, {2, 1}}},
      {"slice_rows", [](auto& x) { return slice_rows(x[0], 1, 2); }, {{4, 3}}},
      {"slice_cols", [](auto& x) { return slice_cols(x[0], 1, 2); }, {{4, 3}}},
      {"gather_rows", [](auto& x) { return gather_rows(x[0], gather_ids); }, {{3, 4}}},
      {"take", [](auto& x) { return take(x[0], take_ids, {2, 3}); }, {{2, 3}}},
      {"sum", [](auto& x) { return sum(x[0]); }, {{3, 4}}},
      {"mean", [](auto& x) { return mean(x[0]); }, {{3, 4}}},
      {"frobenius_norm", [](auto& x) { return frobenius_norm(x[0]); }, {{3, 4}}},
      {"loss_pred", [](auto& x) { return loss_pred(x[0], sigmoid(x[1])); }, {{3, 4}, {3, 4}}},
      {"loss_kl", [](auto& x) { return loss_kl(x[0], sigmoid(x[1])); }, {{3, 4}, {3, 4}}},
      {"symmetric_kl", [](auto& x) { return symmetric_kl(sigmoid(x[0]), sigmoid(x[1])); }, {{3, 4}, {3, 4}}},
      {"clamped_probs", [](auto& x) { return clamped_probs(x[0]); }, {{3, 4}}},
      {"mix_noise",
       [](auto& x) {
         const std::vector<int> k{1, 0, 1};
         return mix_noise(x[0], x[1], 0.3, k);
       },
       {{3, 4}, {3, 4}}},
  };
}

// Full desk model: clean anchor, noisy batch, a perturbation inside the ball,
// prediction loss plus weighted symmetric KL. Leaves are every parameter and
// the perturbation; per leaf we probe two entries with a nonzero analytic
// gradient and one entry drawn uniformly.
oracle::GradCheck desk_model_check(std::uint64_t seed) {
  auto s = fixture::make_setup(fixture::desk_config(), seed, 2, seed);
  auto batch = noisy_batch(s, 2, 0.5, seed + 7);
  const BatchLayout layout = batch_layout(batch);
  const auto anchors = clean_anchors(s.model, batch);
  Rng rng(seed + 99);
  const std::size_t d = s.model.cfg.embedding.hidden;
  Tensor delta = random_tensor({batch.size() * layout.rows_per_sample, d}, rng, 0.02);
  auto f = [&]() { return batch_objective(s.model, batch, &delta, layout, anchors, 1.5).total; };

  std::vector<Tensor> leaves{delta};
  std::vector<std::string> names{"delta"};
  for (auto& [name, p] : s.model.params) {
    leaves.push_back(p);
    names.push_back(name);
  }
  s.model.params.zero_grads();
  delta.zero_grad();
  backward(f());
  std::vector<std::vector<std::size_t>> elements;
  for (auto& leaf : leaves) {
    std::vector<std::size_t> live;
    auto g = leaf.grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != 0.0) live.push_back(i);
    std::vector<std::size_t> pick;
    for (int k = 0; k < 2 && !live.empty(); ++k) pick.push_back(live[rng.below(live.size())]);
    pick.push_back(rng.below(leaf.numel()));
    elements.push_back(pick);
  }
  return oracle::check_gradients(f, leaves, names, elements, kFdStep);
}

Verdict gradient_fidelity() {
  const auto t0 = Clock::now();
  Verdict v;
  double worst_op = 0.0, worst_model = 0.0;
  std::size_t n_op = 0, n_model = 0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (const auto& op : all_ops()) {
      auto r = op_check(op.op, op.shapes, seed, op.scale);
      n_op += r.checked;
      if (r.max_rel > worst_op) worst_op = r.max_rel;
      if (r.max_rel > kGradTol) v.fail(op.name + " seed " + std::to_string(seed) + ": " + r.worst);
    }
    auto r = desk_model_check(seed);
    n_model += r.checked;
    if (r.max_rel > worst_model) {
      worst_model = r.max_rel;
      where = r.worst;
    }
    if (r.max_rel > kGradTol) v.fail("desk model seed " + std::to_string(seed) + ": " + r.worst);
  }
  const double secs = seconds_since(t0);
  if (secs > 120.0) v.fail("took " + fmt("%.1f", secs) + " s > 120 s");
  v.detail = "ops max rel " + fmt("%.2e", worst_op) + " over " + std::to_string(n_op) + " entries; desk model max rel " +
             fmt("%.2e", worst_model) + " over " + std::to_string(n_model) + " entries (worst " + where + "); 20 seeds; " +
             fmt("%.1f", secs) + " s" + (v.detail.empty() ? "" : "; " + v.detail);
  return v;
}

// ---- SASA equivalence ------------------------------------------------------

Verdict sasa_equivalence() {
  const auto t0 = Clock::now();
  Verdict v;
  double worst_zero = 0.0, worst_oracle = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    AttentionConfig cfg;
    cfg.heads = 4;
    cfg.d_k = 16;
    cfg.layers = 2;
    ParamStore store;
    Rng rng(seed);
    EncoderParams p = EncoderParams::create(cfg, 64, true, rng, store, "enc.");
    for (auto& [name, t] : store)
      for (auto& x : t.mutable_data()) x += 0.1 * rng.normal();

    const std::size_t n = 1 + rng.below(20);
    Tensor x = random_tensor({n, 64}, rng, 1.0, false);
    SasaGeometry g;
    for (std::size_t i = 0; i < n; ++i) {
      g.positions.push_back(i);
      g.x.push_back(rng.uniform());
      g.y.push_back(rng.uniform());
    }
    // Zero tables: SASA against vanilla attention.
    EncoderParams zeroed = p;
    zeroed.sasa->bias1d = Tensor::zeros(p.sasa->bias1d.shape());
    zeroed.sasa->bias2dx = Tensor::zeros(p.sasa->bias2dx.shape());
    zeroed.sasa->bias2dy = Tensor::zeros(p.sasa->bias2dy.shape());
    Tensor with = encoder_forward(x, zeroed, cfg, {&g});
    AttentionConfig plain = cfg;
    plain.sasa_enabled = false;
    Tensor without = encoder_forward(x, zeroed, plain);
    for (std::size_t i = 0; i < with.numel(); ++i)
      worst_zero = std::max(worst_zero, std::abs(with.data()[i] - without.data()[i]));

    // Brute-force loops per head for n = 1..8.
    for (std::size_t m = 1; m <= 8; ++m) {
      Tensor h = random_tensor({m, 64}, rng, 1.0, false);
      SasaGeometry gm;
      for (std::size_t i = 0; i < m; ++i) {
        gm.positions.push_back(rng.below(40));
        gm.x.push_back(rng.uniform());
        gm.y.push_back(rng.uniform());
      }
      std::vector<double> hv(h.data().begin(), h.data().end());
      for (std::size_t k = 0; k < cfg.heads; ++k) {
        const auto& hp = p.layers[0].heads[k];
        Tensor out = attention_output(sasa_scores(raw_scores(h, h, hp.wq, hp.wk), k, gm, *p.sasa), h, hp.wv);
        auto ref = oracle::sasa_head_bruteforce(hv, m, 64, hp.wq, hp.wk, hp.wv, gm, *p.sasa, k, true);
        for (std::size_t i = 0; i < ref.size(); ++i)
          worst_oracle = std::max(worst_oracle, std::abs(out.data()[i] - ref[i]));
      }
    }
  }
  if (worst_zero > 1e-12) v.fail("zero-table gap " + fmt("%.2e", worst_zero));
  if (worst_oracle > 1e-12) v.fail("brute-force gap " + fmt("%.2e", worst_oracle));
  v.detail = "zero tables vs vanilla max |diff| " + fmt("%.2e", worst_zero) + "; brute force n=1..8 max |diff| " +
             fmt("%.2e", worst_oracle) + "; 20 seeds; " + fmt("%.1f", seconds_since(t0)) + " s" +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- adversarial training loop ---------------------------------------------

Verdict algorithm_conformance() {
  const auto t0 = Clock::now();
  Verdict v;

  // (a) perturbation bound on every logged step of a real training run.
  RunConfig rc;
  rc.model = fixture::tiny_config();
  rc.adv.K = 3;
  rc.adv.alpha = 2.0;
  rc.adv.lambda_adv = 0.05;
  rc.iterations = 1000;
  rc.batch_size = 4;
  rc.optimizer.lr = 1e-3;
  rc.apply_ablation();
  auto corpus = synth_generate(21, 32);
  std::ostringstream log;
  TrainOptions to;
  to.log = &log;
  run_training(rc, corpus, corpus_dictionary(corpus), to);
  std::size_t logged = 0, over = 0;
  double max_norm = 0.0;
  std::istringstream in(log.str());
  for (std::string line; std::getline(in, line);) {
    auto j = nlohmann::json::parse(line);
    if (j["type"] != "step") continue;
    ++logged;
    const double n = j["delta_norm"].get<double>();
    max_norm = std::max(max_norm, n);
    if (!(n <= rc.adv.lambda_adv)) ++over;
  }
  // Every ascent iterate, not just the last, through the diagnostics hook.
  auto s = fixture::make_setup(fixture::tiny_config(), 22, 16, 3);
  Optimizer opt(OptimizerConfig{});
  Rng rng(5);
  std::size_t iterates = 0;
  for (int it = 0; it < 200; ++it) {
    auto batch = noisy_batch(s, 4, 0.3, 500 + static_cast<std::uint64_t>(it));
    StepDiagnostics diag;
    train_step(s.model, batch, rc.adv, opt, rng, &diag);
    for (const auto& d : diag.deltas) {
      ++iterates;
      if (!(fro(d) <= rc.adv.lambda_adv)) ++over;
    }
  }
  if (logged < 1000) v.fail("only " + std::to_string(logged) + " logged steps");
  if (over > 0) v.fail(std::to_string(over) + " perturbations outside the ball");

  // (b) K=1, zero perturbation, no KL against plain SGD, and adversary off.
  std::size_t mismatched = 0;
  for (int variant = 0; variant < 2; ++variant) {
    auto b = fixture::make_setup(fixture::tiny_config(), 30 + static_cast<std::uint64_t>(variant), 8, 4);
    Model ref = b.model.clone();
    std::vector<Example> batch(b.examples.begin(), b.examples.begin() + 4);
    AdvConfig adv;
    if (variant == 0) {
      adv.K = 1;
      adv.freeze_delta = true;
      adv.kl_weight = 0.0;
    } else {
      adv.adv_enabled = false;
    }
    OptimizerConfig oc;
    oc.rule = "sgd";
    oc.lr = 0.05;
    oc.warmup_iters = 0;
    Optimizer sgd(oc);
    Rng r(1);
    for (int it = 0; it < 5; ++it) {
      train_step(b.model, batch, adv, sgd, r);
      oracle::vanilla_sgd_step(ref, batch, 0.05);
    }
    for (const auto& [name, p] : b.model.params) {
      const auto x = p.data(), y = ref.params.get(name).data();
      for (std::size_t i = 0; i < x.size(); ++i) mismatched += x[i] != y[i];
    }
  }
  if (mismatched > 0) v.fail(std::to_string(mismatched) + " parameters differ from plain SGD");

  // (c) accumulated gradient against independently recomputed ascent steps.
  double replay_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = fixture::make_setup(fixture::tiny_config(), 40 + seed, 6, seed);
    Model fresh = r.model.clone();
    auto batch = noisy_batch(r, 3, 0.3, seed);
    AdvConfig adv;
    adv.K = 3;
    Optimizer o(OptimizerConfig{});
    Rng dr(seed);
    StepDiagnostics diag;
    train_step(r.model, batch, adv, o, dr, &diag);
    const BatchLayout layout = batch_layout(batch);
    const auto anchors = clean_anchors(fresh, batch);
    GradMap mean;
    for (const auto& d : diag.deltas) {
      fresh.params.zero_grads();
      Tensor delta = Tensor::from({batch.size() * layout.rows_per_sample, fresh.cfg.embedding.hidden}, d, true);
      backward(batch_objective(fresh, batch, &delta, layout, anchors, adv.kl_weight).total);
      for (auto& [name, g] : collect_grads(fresh)) {
        auto& acc = mean[name];
        acc.resize(g.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i] / static_cast<double>(diag.deltas.size());
      }
    }
    for (const auto& [name, g] : mean) {
      const auto& got = diag.accumulated.at(name);
      for (std::size_t i = 0; i < g.size(); ++i) replay_gap = std::max(replay_gap, std::abs(got[i] - g[i]));
    }
  }
  if (replay_gap > 1e-10) v.fail("replay gap " + fmt("%.2e", replay_gap));

  v.detail = "(a) " + std::to_string(logged) + " logged steps + " + std::to_string(iterates) +
             " ascent iterates, max ||delta||_F " + fmt("%.6g", max_norm) + " <= " + fmt("%g", rc.adv.lambda_adv) +
             "; (b) " + std::to_string(mismatched) + " differing parameters vs plain SGD; (c) replay max |diff| " +
             fmt("%.2e", replay_gap) + "; " + fmt("%.1f", seconds_since(t0)) + " s" + (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- losses ----------------------------------------------------------------

Verdict loss_correctness() {
  Verdict v;
  double bce_gap = 0.0, kl_gap = 0.0, self_kl = 0.0;
  std::size_t asym = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.below(40);
    Tensor l = random_tensor({n}, rng, 4.0, false), l2 = random_tensor({n}, rng, 4.0, false);
    std::vector<double> y(n);
    for (auto& t : y) t = rng.bernoulli(0.3) ? 1.0 : 0.0;
    const std::vector<double> lv(l.data().begin(), l.data().end());
    bce_gap = std::max(bce_gap, std::abs(loss_pred(l, Tensor::from({n}, y)).item() - oracle::bce(lv, y)));

    Tensor p = clamped_probs(l), q = clamped_probs(l2);
    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += oracle::bernoulli_sym_kl(oracle::clampp(oracle::sigm(lv[i])),
                                                                        oracle::clampp(oracle::sigm(l2.data()[i])));
    ref /= static_cast<double>(n);
    kl_gap = std::max(kl_gap, std::abs(symmetric_kl(p, q).item() - ref));
    kl_gap = std::max(kl_gap, std::abs(loss_kl(l, q).item() - ref));
    self_kl = std::max(self_kl, std::abs(symmetric_kl(p, p).item()));
    asym += symmetric_kl(p, q).item() != symmetric_kl(q, p).item();
  }
  if (bce_gap > 1e-12) v.fail("BCE gap " + fmt("%.2e", bce_gap));
  if (kl_gap > 1e-12) v.fail("KL gap " + fmt("%.2e", kl_gap));
  if (self_kl != 0.0) v.fail("KL(p,p) = " + fmt("%.2e", self_kl));
  if (asym > 0) v.fail(std::to_string(asym) + " asymmetric pairs");
  v.detail = "BCE max |diff| " + fmt("%.2e", bce_gap) + ", symmetric KL max |diff| " + fmt("%.2e", kl_gap) +
             ", max |KL(p,p)| " + fmt("%g", self_kl) + ", " + std::to_string(asym) + " asymmetric of 50" +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- noise -----------------------------------------------------------------

Verdict noise_model() {
  Verdict v;
  const auto corpus = synth_generate(3, 400);
  const Dictionary dict = corpus_dictionary(corpus);
  std::vector<std::string> tokens;
  for (const auto& s : corpus)
    for (const auto& t : s.ocr) tokens.push_back(t.text);

  NoiseConfig cfg;
  cfg.lambda_tok = 0.1;
  Rng rng(17);
  std::size_t hit = 0, fallbacks = 0, bad = 0;
  const std::size_t n = 10000;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& w = tokens[t % tokens.size()];
    auto o = corrupt_token(w, dict, cfg, rng);
    if (!o.op) continue;
    ++hit;
    if (o.fallback) {
      ++fallbacks;
      auto best = oracle::nearest_all(to_lower(o.edited), dict.words());
      if (!dict.contains(o.corrupted) || o.corrupted != best.front()) ++bad;
    } else if (!dict.contains(o.corrupted)) {
      ++bad;
    }
  }
  // Fallbacks are rare at 0.1; a full-rate pass exercises many more.
  NoiseConfig all = cfg;
  all.lambda_tok = 1.0;
  for (std::size_t t = 0; t < 3000; ++t) {
    const auto& w = tokens[(t * 7) % tokens.size()];
    auto o = corrupt_token(w, dict, all, rng);
    if (!o.fallback) continue;
    ++fallbacks;
    auto best = oracle::nearest_all(to_lower(o.edited), dict.words());
    if (!dict.contains(o.corrupted) || o.corrupted != best.front()) ++bad;
  }
  const double rate = static_cast<double>(hit) / static_cast<double>(n);
  if (std::abs(rate - cfg.lambda_tok) > 0.02) v.fail("rate " + fmt("%.4f", rate));
  if (bad > 0) v.fail(std::to_string(bad) + " outputs off the dictionary minimum");

  NoiseConfig zero;
  zero.lambda_tok = 0.0;
  std::size_t changed = 0;
  for (const auto& w : tokens) changed += corrupt_token(w, dict, zero, rng).corrupted != w;
  if (changed > 0) v.fail(std::to_string(changed) + " tokens changed at rate 0");
  v.detail = "rate " + fmt("%.4f", rate) + " over 10^4 tokens at 0.1; " + std::to_string(fallbacks) +
             " fallbacks checked by exhaustive scan, " + std::to_string(bad) + " bad; rate 0 changed " +
             std::to_string(changed) + " of " + std::to_string(tokens.size()) + (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- metrics ---------------------------------------------------------------

Verdict metrics() {
  Verdict v;
  const std::vector<std::string> one{"words"};
  const double a = anls("word", one);
  const double a_ref = 1.0 - static_cast<double>(oracle::levenshtein("word", "words")) / 5.0;
  std::vector<std::string> refs(10, "other");
  refs[0] = refs[1] = "exit";
  std::size_t matches = 0;
  for (const auto& r : refs) matches += r == "exit";
  const double sv = soft_vote_accuracy("exit", refs);
  const double sv_ref = std::min(static_cast<double>(matches) / 3.0, 1.0);
  const std::size_t lev = edit_distance("kitten", "sitting");
  if (a != 0.8 || a != a_ref) v.fail("ANLS " + fmt("%.17g", a));
  if (sv != 2.0 / 3.0 || sv != sv_ref) v.fail("soft vote " + fmt("%.17g", sv));
  if (lev != 3 || lev != oracle::levenshtein("kitten", "sitting")) v.fail("Levenshtein " + std::to_string(lev));
  v.detail = "ANLS(word, words) = " + fmt("%.17g", a) + ", soft vote 2 of 10 = " + fmt("%.17g", sv) +
             ", Levenshtein(kitten, sitting) = " + std::to_string(lev) + (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- overfit ---------------------------------------------------------------

RunConfig desk_profile() { return RunConfig::load(std::filesystem::path(ATS_CONFIG_DIR) / "desk.cfg"); }

Verdict overfit() {
  const auto t0 = Clock::now();
  Verdict v;
  RunConfig rc = desk_profile();
  rc.iterations = 5000;
  rc.eval_every = 250;
  rc.target_accuracy = 0.95;
  const auto corpus = synth_generate(64, 64);
  TrainResult tr = run_training(rc, corpus, corpus_dictionary(corpus));
  EvalReport r = evaluate_model(tr.model, corpus, rc.anls_threshold);
  const double secs = seconds_since(t0);
  if (r.accuracy < 0.95) v.fail("accuracy " + fmt("%.4f", r.accuracy));
  if (secs > 1800.0) v.fail("took " + fmt("%.0f", secs) + " s");
  v.detail = "accuracy " + fmt("%.4f", r.accuracy) + " on 64 training samples after " +
             std::to_string(tr.iterations_run) + " iterations (cap 5000), " + fmt("%.0f", secs) + " s" +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

// ---- robustness ------------------------------------------------------------

// Fixed before the five seeds below were ever run; tuned only on a separate
// development seed. A 32-wide model fits ten runs into the time budget, and
// 40k fresh scenes keep it from memorizing the training set.
struct RobustnessSetup {
  std::size_t train_n = 40000;
  std::size_t test_n = 300;
  std::size_t iterations = 10000;
  double lr = 5e-4;
  std::size_t hidden = 32;
  std::size_t heads = 2;
  double corruption = 0.3;
};

Verdict robustness() {
  const auto t0 = Clock::now();
  const RobustnessSetup rs;
  Verdict v;
  std::ofstream audit("acceptance_robustness.jsonl");
  std::size_t wins = 0;
  std::string rows;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::uint64_t train_seed = 200 + seed, test_seed = 800 + seed, noise_seed = 60 + seed;
    const auto train = synth_generate(train_seed, rs.train_n);
    const auto test = synth_generate(test_seed, rs.test_n);
    auto test_c = test;
    NoiseConfig nc;
    nc.lambda_tok = rs.corruption;
    nc.seed = noise_seed;
    corrupt_corpus(test_c, corpus_dictionary(test), nc, false);
    const Dictionary dict = corpus_dictionary(train);

    double acc[2] = {0, 0}, clean[2] = {0, 0};
    for (int variant = 0; variant < 2; ++variant) {
      RunConfig rc = desk_profile();
      rc.ablation = Ablation::from_code(variant == 0 ? "1111" : "0000");
      rc.apply_ablation();
      rc.model.embedding.hidden = rs.hidden;
      rc.model.aoe.heads = rc.model.fusion.heads = rs.heads;
      rc.model.aoe.d_k = rc.model.fusion.d_k = rs.hidden / rs.heads;
      rc.iterations = rs.iterations;
      rc.optimizer.lr = rs.lr;
      rc.train_seed = seed;
      rc.model_seed = seed;
      rc.noise.seed = seed;
      TrainResult tr = run_training(rc, train, dict);
      acc[variant] = evaluate_model(tr.model, test_c, rc.anls_threshold).accuracy;
      clean[variant] = evaluate_model(tr.model, test, rc.anls_threshold).accuracy;
      audit << nlohmann::json{{"seed", seed},
                              {"toggles", rc.ablation.code()},
                              {"config_hash", rc.hash()},
                              {"train_data_seed", train_seed},
                              {"test_data_seed", test_seed},
                              {"corruption_seed", noise_seed},
                              {"corruption_rate", rs.corruption},
                              {"corrupted_accuracy", acc[variant]},
                              {"clean_accuracy", clean[variant]}}
                   .dump()
            << '\n';
      audit.flush();
    }
    const bool win = acc[0] >= acc[1];
    wins += win;
    rows += " seed " + std::to_string(seed) + ": full " + fmt("%.4f", acc[0]) + " vs off " + fmt("%.4f", acc[1]) +
            (win ? " ok" : " worse") + ";";
    std::cout << "  robustness seed " << seed << ": corrupted full " << acc[0] << " off " << acc[1] << ", clean full "
              << clean[0] << " off " << clean[1] << std::endl;
  }
  if (wins < 4) v.fail("full model ahead in only " + std::to_string(wins) + " of 5 seeds");
  v.detail = std::to_string(wins) + " of 5 seeds with full >= all-off on corrupted test;" + rows + " " +
             fmt("%.0f", seconds_since(t0)) + " s" + (v.pass ? "" : "; " + v.detail);
  return v;
}

}  // namespace

// An optional argument runs only the properties whose name contains it.
int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  struct Item {
    const char* name;
    Verdict (*run)();
  };
  const Item items[] = {
      {"Gradient fidelity", gradient_fidelity}, {"SASA equivalence", sasa_equivalence},
      {"Adversarial loop conformance", algorithm_conformance}, {"Loss correctness", loss_correctness},
      {"Noise model", noise_model}, {"Metrics", metrics}, {"Overfit check", overfit},
      {"Robustness direction", robustness},
  };
  int failed = 0;
  for (const auto& it : items) {
    if (!only.empty() && std::string(it.name).find(only) == std::string::npos) continue;
    Verdict v;
    try {
      v = it.run();
    } catch (const std::exception& e) {
      v.fail(std::string("threw: ") + e.what());
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS " : "FAIL ") << it.name << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
