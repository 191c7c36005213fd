#pragma once

// Dense f64 tensors with reverse-mode differentiation.
//
// A Tensor is a cheap handle onto a graph node. Operations record their
// inputs and a backward closure while gradient recording is enabled; calling
// backward() on a scalar walks the recorded graph in reverse topological
// order. Leaf gradients accumulate (+=) across calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ats {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched by backward
  bool requires_grad = false;
  bool is_leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::span<double> grad_buffer();  // allocates zeros on demand
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t size(std::size_t axis) const;
  std::size_t numel() const;
  std::size_t rows() const;  // leading axis
  std::size_t cols() const;  // trailing axis

  std::span<const double> data() const;
  // Direct write access; only valid between training steps (optimizer, loaders).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;  // empty span when no grad has been accumulated
  void zero_grad();

  // Copy of the data with no history and no gradient.
  Tensor detach() const;

  const char* op_name() const;
  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend Tensor make_result(const char*, Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(detail::Node&)>);
};

// Records a new op output. Checks finiteness and attaches history only when
// recording is enabled and some input requires a gradient.
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward);

bool grad_enabled();

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Nodes reachable from a loss in topological order (inputs first).
struct Tape {
  std::vector<detail::Node*> nodes;
};

Tape build_tape(const Tensor& loss);
Tape backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------
// Elementwise binary ops accept equal shapes or one shape being a trailing
// suffix of the other (broadcast over leading axes). Anything else throws.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sigmoid(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor gelu(const Tensor& a);
// Values outside [lo, hi] are clamped and pass no gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

// Row-wise softmax over the last axis of a 2-D tensor. When `allowed` is
// non-empty it is an m*n 0/1 mask; disallowed entries get probability 0.
Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed = {});

inline constexpr double kLayerNormEps = 1e-6;
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);

// 2-D concat along axis 0 (rows) or 1 (columns).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);

// Embedding lookup: out[i] = table[ids[i]].
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// Flat gather: out.flat[i] = table.flat[indices[i]], reshaped to `shape`.
Tensor take(const Tensor& table, std::span<const std::size_t> indices, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor frobenius_norm(const Tensor& a);

}  // namespace ats
