#pragma once

#include "ats/tensor.hpp"

namespace ats {

inline constexpr double kProbClamp = 1e-7;

// Mean binary cross-entropy over all elements, p = sigmoid(logits) clamped to
// [1e-7, 1 - 1e-7].
Tensor loss_pred(const Tensor& logits, const Tensor& targets);

// Mean over labels of the symmetric Bernoulli KL kl(p||q) + kl(q||p) between
// per-label probabilities p = sigmoid(logits) and `anchor_probs`. The anchor
// is used as given; detach it to stop gradients through it.
Tensor loss_kl(const Tensor& logits, const Tensor& anchor_probs);

// Same divergence between two probability tensors (both clamped).
Tensor symmetric_kl(const Tensor& p, const Tensor& q);

// Clamped sigmoid probabilities.
Tensor clamped_probs(const Tensor& logits);

}  // namespace ats
