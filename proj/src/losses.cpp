#include "ats/losses.hpp"

#include "ats/errors.hpp"

namespace ats {

namespace {

Tensor one_minus(const Tensor& p) { return add_scalar(scale(p, -1.0), 1.0); }

}  // namespace

Tensor clamped_probs(const Tensor& logits) {
  return clamp(sigmoid(logits), kProbClamp, 1.0 - kProbClamp);
}

Tensor loss_pred(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw DimensionError("loss_pred: logits " + shape_str(logits.shape()) + " vs targets " +
                         shape_str(targets.shape()));
  }
  Tensor p = clamped_probs(logits);
  Tensor pos = mul(targets, log(p));
  Tensor neg = mul(one_minus(targets), log(one_minus(p)));
  return scale(mean(add(pos, neg)), -1.0);
}

Tensor symmetric_kl(const Tensor& p_in, const Tensor& q_in) {
  if (p_in.shape() != q_in.shape()) {
    throw DimensionError("symmetric_kl: " + shape_str(p_in.shape()) + " vs " + shape_str(q_in.shape()));
  }
  Tensor p = clamp(p_in, kProbClamp, 1.0 - kProbClamp);
  Tensor q = clamp(q_in, kProbClamp, 1.0 - kProbClamp);
  // kl(p||q) + kl(q||p) = (p - q) * (logit p - logit q) for Bernoulli labels.
  Tensor lp = sub(log(p), log(one_minus(p)));
  Tensor lq = sub(log(q), log(one_minus(q)));
  return mean(mul(sub(p, q), sub(lp, lq)));
}

Tensor loss_kl(const Tensor& logits, const Tensor& anchor_probs) {
  return symmetric_kl(sigmoid(logits), anchor_probs);
}

}  // namespace ats
