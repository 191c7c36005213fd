#include "ats/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "ats/errors.hpp"

namespace ats {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

std::span<double> Node::grad_buffer() {
  if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;

using detail::Node;

std::shared_ptr<Node> new_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  if (numel(shape) != data.size()) {
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in tensor data");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

void require_2d(const Tensor& a, const char* op) {
  if (a.dim() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + shape_str(a.shape()));
  }
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

// Broadcast layout of a binary elementwise op.
struct Broadcast {
  Shape out;
  std::size_t na, nb;
};

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape() || is_suffix(b.shape(), a.shape())) {
    return {a.shape(), a.numel(), b.numel()};
  }
  if (is_suffix(a.shape(), b.shape())) return {b.shape(), a.numel(), b.numel()};
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

template <typename F>
std::vector<double> map_unary(const Tensor& a, F f) {
  auto src = a.data();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = f(src[i]);
  return out;
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = ats::numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const auto n = ats::numel(shape);
  return Tensor(new_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(new_leaf({}, {value}, requires_grad));
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size(std::size_t axis) const {
  if (axis >= dim()) throw DimensionError("axis out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }
std::size_t Tensor::rows() const { return dim() == 0 ? 1 : shape().front(); }
std::size_t Tensor::cols() const { return dim() == 0 ? 1 : shape().back(); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  require_2d(*this, "at");
  return node_->data.at(i * cols() + j);
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return Tensor(new_leaf(shape(), node_->data, false)); }

const char* Tensor::op_name() const { return node_->op; }

Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::vector<Tensor> inputs, std::function<void(detail::Node&)> backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value produced by ") + op);
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->op = op;
  n->is_leaf = false;
  if (g_grad_enabled) {
    bool any = std::any_of(inputs.begin(), inputs.end(),
                           [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& t : inputs) n->inputs.push_back(t.node_ptr());
      n->backward = std::move(backward);
    }
  }
  return Tensor(std::move(n));
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- tape ------------------------------------------------------------------

Tape build_tape(const Tensor& loss) {
  Tape tape;
  if (!loss.defined() || !loss.requires_grad()) return tape;
  std::unordered_set<Node*> visited;
  // Iterative post-order DFS: (node, next input index).
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      tape.nodes.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

Tape backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) throw ContractError("backward(): loss is not on the tape");
  Tape tape = build_tape(loss);
  for (Node* n : tape.nodes) {
    if (!n->is_leaf) n->grad.assign(n->data.size(), 0.0);
  }
  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf && n->backward) n->backward(*n);
  }
  for (Node* n : tape.nodes) {
    for (double g : n->grad) {
      if (!std::isfinite(g)) {
        throw NumericalError(std::string("non-finite gradient at ") + n->op);
      }
    }
  }
  return tape;
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  auto bc = broadcast(a, b, "add");
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.na] + db[i % bc.nb];
  return make_result("add", bc.out, std::move(out), {a, b}, [na = bc.na, nb = bc.nb](Node& o) {
    for (std::size_t k = 0; k < 2; ++k) {
      Node& in = *o.inputs[k];
      if (!in.requires_grad) continue;
      auto g = in.grad_buffer();
      const std::size_t m = k == 0 ? na : nb;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % m] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto bc = broadcast(a, b, "sub");
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.na] - db[i % bc.nb];
  return make_result("sub", bc.out, std::move(out), {a, b}, [na = bc.na, nb = bc.nb](Node& o) {
    Node& ia = *o.inputs[0];
    Node& ib = *o.inputs[1];
    if (ia.requires_grad) {
      auto g = ia.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % na] += o.grad[i];
    }
    if (ib.requires_grad) {
      auto g = ib.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % nb] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto bc = broadcast(a, b, "mul");
  const std::size_t n = numel(bc.out);
  std::vector<double> out(n);
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < n; ++i) out[i] = da[i % bc.na] * db[i % bc.nb];
  return make_result("mul", bc.out, std::move(out), {a, b}, [na = bc.na, nb = bc.nb](Node& o) {
    Node& ia = *o.inputs[0];
    Node& ib = *o.inputs[1];
    if (ia.requires_grad) {
      auto g = ia.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % na] += o.grad[i] * ib.data[i % nb];
    }
    if (ib.requires_grad) {
      auto g = ib.grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i % nb] += o.grad[i] * ia.data[i % na];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result("scale", a.shape(), map_unary(a, [s](double x) { return x * s; }), {a},
                     [s](Node& o) {
                       auto g = o.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
                     });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_result("add_scalar", a.shape(), map_unary(a, [s](double x) { return x + s; }), {a},
                     [](Node& o) {
                       auto g = o.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
                     });
}

Tensor sigmoid(const Tensor& a) {
  auto out = map_unary(a, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return make_result("sigmoid", a.shape(), std::move(out), {a}, [](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double y = o.data[i];
      g[i] += o.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor log(const Tensor& a) {
  return make_result("log", a.shape(), map_unary(a, [](double x) { return std::log(x); }), {a},
                     [](Node& o) {
                       Node& in = *o.inputs[0];
                       auto g = in.grad_buffer();
                       for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / in.data[i];
                     });
}

Tensor exp(const Tensor& a) {
  return make_result("exp", a.shape(), map_unary(a, [](double x) { return std::exp(x); }), {a},
                     [](Node& o) {
                       auto g = o.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * o.data[i];
                     });
}

Tensor gelu(const Tensor& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  auto out = map_unary(a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
  return make_result("gelu", a.shape(), std::move(out), {a}, [](Node& o) {
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    Node& in = *o.inputs[0];
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double x = in.data[i];
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      g[i] += o.grad[i] * (cdf + x * pdf);
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  auto out = map_unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); });
  return make_result("clamp", a.shape(), std::move(out), {a}, [lo, hi](Node& o) {
    Node& in = *o.inputs[0];
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (in.data[i] >= lo && in.data[i] <= hi) g[i] += o.grad[i];
    }
  });
}

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.size(0), k = a.size(1), n = b.size(1);
  if (b.size(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  auto da = a.data(), db = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = da[i * k + p];
      const double* brow = db.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& o) {
    Node& ia = *o.inputs[0];
    Node& ib = *o.inputs[1];
    const double* go = o.grad.data();
    if (ia.requires_grad) {
      auto g = ia.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = ib.data.data() + p * n;
          const double* grow = go + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          g[i * k + p] += acc;
        }
      }
    }
    if (ib.requires_grad) {
      auto g = ib.grad_buffer();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = go + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = ia.data[i * k + p];
          double* gb = g.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.size(0), n = a.size(1);
  std::vector<double> out(m * n);
  auto da = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = da[i * n + j];
  return make_result("transpose", {n, m}, std::move(out), {a}, [m, n](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j * m + i];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

// ---- normalization ---------------------------------------------------------

Tensor softmax_rows(const Tensor& a, std::span<const std::uint8_t> allowed) {
  require_2d(a, "softmax_rows");
  const std::size_t m = a.size(0), n = a.size(1);
  if (!allowed.empty() && allowed.size() != m * n) {
    throw DimensionError("softmax_rows: mask size " + std::to_string(allowed.size()) +
                         " does not match " + shape_str(a.shape()));
  }
  std::vector<std::uint8_t> mask(allowed.begin(), allowed.end());
  auto da = a.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* x = da.data() + i * n;
    double* y = out.data() + i * n;
    auto ok = [&](std::size_t j) { return mask.empty() || mask[i * n + j]; };
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (ok(j)) mx = std::max(mx, x[j]);
    if (n > 0 && !std::isfinite(mx)) throw ContractError("softmax_rows: row with no allowed entry");
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!ok(j)) continue;
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (std::size_t j = 0; j < n; ++j) y[j] /= z;
  }
  return make_result("softmax_rows", {m, n}, std::move(out), {a}, [m, n](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      const double* y = o.data.data() + i * n;
      const double* gy = o.grad.data() + i * n;
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias) {
  if (a.dim() == 0) throw DimensionError("layer_norm on a scalar");
  const std::size_t d = a.cols();
  if (d < 2) throw ContractError("layer_norm: degenerate normalized axis of size " + std::to_string(d));
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d}) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match last axis of " + shape_str(a.shape()));
  }
  const std::size_t rows = a.numel() / d;
  auto x = a.data();
  auto gv = gain.data(), bv = bias.data();
  std::vector<double> xhat(a.numel()), inv_std(rows), out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (xr[j] - mu) * inv_std[r];
      out[r * d + j] = xhat[r * d + j] * gv[j] + bv[j];
    }
  }
  return make_result(
      "layer_norm", a.shape(), std::move(out), {a, gain, bias},
      [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& o) {
        Node& in = *o.inputs[0];
        Node& gn = *o.inputs[1];
        Node& bs = *o.inputs[2];
        if (gn.requires_grad) {
          auto g = gn.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += o.grad[r * d + j] * xhat[r * d + j];
        }
        if (bs.requires_grad) {
          auto g = bs.grad_buffer();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < d; ++j) g[j] += o.grad[r * d + j];
        }
        if (in.requires_grad) {
          auto g = in.grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          std::vector<double> dxhat(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = o.grad[r * d + j] * gn.data[j];
              s1 += dxhat[j];
              s2 += dxhat[j] * xhat[r * d + j];
            }
            for (std::size_t j = 0; j < d; ++j) {
              g[r * d + j] += inv_std[r] * (dxhat[j] - s1 * inv_d - xhat[r * d + j] * s2 * inv_d);
            }
          }
        }
      });
}

// ---- structural ------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  if (axis > 1) throw DimensionError("concat supports axis 0 or 1");
  for (const auto& p : parts) require_2d(p, "concat");
  if (axis == 0) {
    const std::size_t c = parts[0].size(1);
    std::size_t total = 0;
    for (const auto& p : parts) {
      if (p.size(1) != c) {
        throw DimensionError("concat(axis=0): column mismatch " + shape_str(parts[0].shape()) +
                             " vs " + shape_str(p.shape()));
      }
      total += p.size(0);
    }
    std::vector<double> out;
    out.reserve(total * c);
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
      offsets.push_back(out.size());
      out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return make_result("concat", {total, c}, std::move(out), parts, [offsets](Node& o) {
      for (std::size_t k = 0; k < o.inputs.size(); ++k) {
        Node& in = *o.inputs[k];
        if (!in.requires_grad) continue;
        auto g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[offsets[k] + i];
      }
    });
  }
  const std::size_t r = parts[0].size(0);
  std::size_t total = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.size(0) != r) {
      throw DimensionError("concat(axis=1): row mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    widths.push_back(p.size(1));
    total += p.size(1);
  }
  std::vector<double> out(r * total);
  std::size_t col = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.size(1);
    auto src = p.data();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total + col + j] = src[i * w + j];
    col += w;
  }
  return make_result("concat", {r, total}, std::move(out), parts, [r, total, widths](Node& o) {
    std::size_t c0 = 0;
    for (std::size_t k = 0; k < o.inputs.size(); ++k) {
      Node& in = *o.inputs[k];
      const std::size_t w = widths[k];
      if (in.requires_grad) {
        auto g = in.grad_buffer();
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < w; ++j) g[i * w + j] += o.grad[i * total + c0 + j];
      }
      c0 += w;
    }
  });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  require_2d(a, "slice_rows");
  if (start + count > a.size(0)) {
    throw DimensionError("slice_rows: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " + shape_str(a.shape()));
  }
  const std::size_t c = a.size(1);
  auto src = a.data();
  std::vector<double> out(src.begin() + static_cast<long>(start * c),
                          src.begin() + static_cast<long>((start + count) * c));
  return make_result("slice_rows", {count, c}, std::move(out), {a}, [off = start * c](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[off + i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  require_2d(a, "slice_cols");
  const std::size_t r = a.size(0), c = a.size(1);
  if (start + count > c) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " + shape_str(a.shape()));
  }
  auto src = a.data();
  std::vector<double> out(r * count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = src[i * c + start + j];
  return make_result("slice_cols", {r, count}, std::move(out), {a}, [r, c, start, count](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) g[i * c + start + j] += o.grad[i * count + j];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_2d(table, "gather_rows");
  const std::size_t n = table.size(0), d = table.size(1);
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  std::vector<double> out(idx.size() * d);
  auto src = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                           shape_str(table.shape()));
    }
    std::copy_n(src.begin() + static_cast<long>(idx[i] * d), d, out.begin() + static_cast<long>(i * d));
  }
  const std::size_t m = idx.size();
  return make_result("gather_rows", {m, d}, std::move(out), {table},
                     [d, idx = std::move(idx)](Node& o) {
                       auto g = o.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += o.grad[i * d + j];
                     });
}

Tensor take(const Tensor& table, std::span<const std::size_t> indices, Shape shape) {
  if (numel(shape) != indices.size()) {
    throw DimensionError("take: " + std::to_string(indices.size()) + " indices for shape " +
                         shape_str(shape));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  auto src = table.data();
  std::vector<double> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= src.size()) {
      throw DimensionError("take: index " + std::to_string(idx[i]) + " out of range for " +
                           shape_str(table.shape()));
    }
    out[i] = src[idx[i]];
  }
  return make_result("take", std::move(shape), std::move(out), {table},
                     [idx = std::move(idx)](Node& o) {
                       auto g = o.inputs[0]->grad_buffer();
                       for (std::size_t i = 0; i < idx.size(); ++i) g[idx[i]] += o.grad[i];
                     });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {}, {s}, {a}, [](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ContractError("mean of an empty tensor");
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double inv = 1.0 / static_cast<double>(a.numel());
  return make_result("mean", {}, {s * inv}, {a}, [inv](Node& o) {
    auto g = o.inputs[0]->grad_buffer();
    for (auto& v : g) v += o.grad[0] * inv;
  });
}

Tensor frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  const double nrm = std::sqrt(s);
  return make_result("frobenius_norm", {}, {nrm}, {a}, [nrm](Node& o) {
    if (nrm == 0.0) return;
    Node& in = *o.inputs[0];
    auto g = in.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0] * in.data[i] / nrm;
  });
}

}  // namespace ats
