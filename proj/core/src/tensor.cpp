// Copyright 2026 The anchorparse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "anchorparse/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace anchorparse {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;
};

}  // namespace detail

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;
using StridedConst = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;
using StridedMut = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;

thread_local bool g_grad_enabled = true;

std::vector<double>& grad_buffer(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.values.size(), 0.0);
  return n.grad;
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

enum class Broadcast { kSame, kSuffix };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kSuffix;
  if (sb.size() <= sa.size() && std::equal(sb.begin(), sb.end(), sa.end() - sb.size()))
    return Broadcast::kSuffix;
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(sb) + " onto " +
                       shape_string(sa));
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size())
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
  auto node = std::make_shared<Node>();
  node->values.assign(shape_numel(shape), value);
  node->shape = std::move(shape);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto d : shape)
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape));
  if (shape_numel(shape) != values.size())
    throw DimensionError("shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  require_defined(*this, "shape");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size())
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const {
  require_defined(*this, "numel");
  return node_->values.size();
}

std::span<const double> Tensor::values() const& {
  require_defined(*this, "values");
  return node_->values;
}

std::span<double> Tensor::mutable_values() {
  require_defined(*this, "mutable_values");
  return node_->values;
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
  return node_->values[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require_defined(*this, "set_requires_grad");
  node_->requires_grad = value;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const& {
  require_defined(*this, "grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "mutable_grad");
  return grad_buffer(*node_);
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return from_values(node_->shape, node_->values, false);
}

Tensor Tensor::clone() const {
  require_defined(*this, "clone");
  return from_values(node_->shape, node_->values, node_->requires_grad);
}

// ---------------------------------------------------------------------------
// Graph traversal

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("backward: loss must be scalar, got shape " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
  Node* root = loss.node();
  if (!root->requires_grad)
    throw ContractError("backward: loss is not connected to any tensor that requires grad");

  // Iterative post-order DFS; `order` ends up topologically sorted (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  grad_buffer(*root)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn) {
      grad_buffer(*node);
      node->backward_fn(*node);
    } else if (node->requires_grad) {
      grad_buffer(*node);
    }
  }
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  classify(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& o) {
    const auto& g = o.grad;
    if (o.inputs[0]->requires_grad) {
      auto& ga = grad_buffer(*o.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (o.inputs[1]->requires_grad) {
      auto& gb = grad_buffer(*o.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  classify(a, b, "sub");
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& o) {
    const auto& g = o.grad;
    if (o.inputs[0]->requires_grad) {
      auto& ga = grad_buffer(*o.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (o.inputs[1]->requires_grad) {
      auto& gb = grad_buffer(*o.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  classify(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  const std::size_t nb = bv.size();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i % nb];
  return make_result(a.shape(), std::move(out), {a, b}, [nb](Node& o) {
    const auto& g = o.grad;
    const auto& av = o.inputs[0]->values;
    const auto& bv = o.inputs[1]->values;
    if (o.inputs[0]->requires_grad) {
      auto& ga = grad_buffer(*o.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i % nb];
    }
    if (o.inputs[1]->requires_grad) {
      auto& gb = grad_buffer(*o.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % nb] += g[i] * av[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  require_defined(a, "scale");
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_result(a.shape(), std::move(out), {a}, [factor](Node& o) {
    auto& ga = grad_buffer(*o.inputs[0]);
    for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i] * factor;
  });
}

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  const auto av = a.values();
  double total = 0.0;
  for (double v : av) total += v;
  return make_result({}, {total}, {a}, [](Node& o) {
    auto& ga = grad_buffer(*o.inputs[0]);
    const double g = o.grad[0];
    for (auto& x : ga) x += g;
  });
}

Tensor mean(const Tensor& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

// ---------------------------------------------------------------------------
// Linear algebra and layout

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  auto mismatch = [&] {
    return DimensionError("matmul: cannot multiply " + shape_string(sa) + " by " +
                          shape_string(sb));
  };
  if (sa.size() < 2 || sa.size() > 3 || sb.size() < 2 || sb.size() > 3) throw mismatch();
  const std::size_t M = sa[sa.size() - 2];
  const std::size_t K = sa[sa.size() - 1];
  const std::size_t Kb = sb[sb.size() - 2];
  const std::size_t N = sb[sb.size() - 1];
  if (K != Kb) throw mismatch();
  const std::size_t ba = sa.size() == 3 ? sa[0] : 1;
  const std::size_t bb = sb.size() == 3 ? sb[0] : 1;
  if (ba != bb && ba != 1 && bb != 1) throw mismatch();
  const std::size_t batch = std::max(ba, bb);
  const bool a_step = ba > 1;
  const bool b_step = bb > 1;

  std::vector<double> out(batch * M * N);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMap A(ap + (a_step ? i * M * K : 0), M, K);
    ConstMap B(bp + (b_step ? i * K * N : 0), K, N);
    MutMap C(out.data() + i * M * N, M, N);
    C.noalias() = A * B;
  }
  Shape so = (sa.size() == 3 || sb.size() == 3) ? Shape{batch, M, N} : Shape{M, N};
  return make_result(std::move(so), std::move(out), {a, b},
                     [=](Node& o) {
                       Node& na = *o.inputs[0];
                       Node& nb = *o.inputs[1];
                       for (std::size_t i = 0; i < batch; ++i) {
                         ConstMap G(o.grad.data() + i * M * N, M, N);
                         if (na.requires_grad) {
                           auto& ga = grad_buffer(na);
                           MutMap GA(ga.data() + (a_step ? i * M * K : 0), M, K);
                           ConstMap B(nb.values.data() + (b_step ? i * K * N : 0), K, N);
                           GA.noalias() += G * B.transpose();
                         }
                         if (nb.requires_grad) {
                           auto& gb = grad_buffer(nb);
                           MutMap GB(gb.data() + (b_step ? i * K * N : 0), K, N);
                           ConstMap A(na.values.data() + (a_step ? i * M * K : 0), M, K);
                           GB.noalias() += A.transpose() * G;
                         }
                       }
                     });
}

Tensor transpose(const Tensor& a) {
  require_defined(a, "transpose");
  const Shape& s = a.shape();
  if (s.size() < 2) throw DimensionError("transpose: need rank >= 2, got " + shape_string(s));
  const std::size_t R = s[s.size() - 2];
  const std::size_t C = s[s.size() - 1];
  const std::size_t batch = a.numel() / (R * C);
  Shape so = s;
  std::swap(so[so.size() - 2], so[so.size() - 1]);
  const auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) out[b * R * C + c * R + r] = av[b * R * C + r * C + c];
  return make_result(std::move(so), std::move(out), {a}, [=](Node& o) {
    auto& ga = grad_buffer(*o.inputs[0]);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) ga[b * R * C + r * C + c] += o.grad[b * R * C + c * R + r];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel())
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(shape));
  std::vector<double> out(a.values().begin(), a.values().end());
  return make_result(std::move(shape), std::move(out), {a}, [](Node& o) {
    auto& ga = grad_buffer(*o.inputs[0]);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  for (const auto& p : parts) require_defined(p, "concat");
  const Shape& s0 = parts[0].shape();
  const AxisSplit base = split_axis(s0, axis, "concat");
  std::size_t total = 0;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i)
      if (i != axis && s[i] != s0[i]) ok = false;
    if (!ok)
      throw DimensionError("concat: incompatible shapes " + shape_string(s0) + " and " +
                           shape_string(s));
    sizes.push_back(s[axis]);
    total += s[axis];
  }
  Shape so = s0;
  so[axis] = total;
  const std::size_t inner = base.inner;
  const std::size_t outer = base.outer;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].values();
    const std::size_t block = sizes[p] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(pv.begin() + o * block, block, out.begin() + o * total * inner + offset);
    offset += block;
  }
  return make_result(std::move(so), std::move(out), parts, [=](Node& o) {
    std::size_t off = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
      const std::size_t block = sizes[p] * inner;
      if (o.inputs[p]->requires_grad) {
        auto& gp = grad_buffer(*o.inputs[p]);
        for (std::size_t r = 0; r < outer; ++r)
          for (std::size_t j = 0; j < block; ++j) gp[r * block + j] += o.grad[r * total * inner + off + j];
      }
      off += block;
    }
  });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  require_defined(table, "embedding_lookup");
  if (table.rank() != 2)
    throw DimensionError("embedding_lookup: table must be rank 2, got " + shape_string(table.shape()));
  if (ids.empty()) throw ContractError("embedding_lookup: empty id list");
  const std::size_t V = table.dim(0);
  const std::size_t d = table.dim(1);
  const auto tv = table.values();
  std::vector<double> out(ids.size() * d);
  std::vector<int> kept(ids.begin(), ids.end());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= V)
      throw ContractError("embedding_lookup: id " + std::to_string(ids[i]) +
                          " outside vocabulary of size " + std::to_string(V));
    std::copy_n(tv.begin() + static_cast<std::size_t>(ids[i]) * d, d, out.begin() + i * d);
  }
  return make_result({ids.size(), d}, std::move(out), {table}, [kept = std::move(kept), d](Node& o) {
    auto& gt = grad_buffer(*o.inputs[0]);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      const std::size_t row = static_cast<std::size_t>(kept[i]) * d;
      for (std::size_t j = 0; j < d; ++j) gt[row + j] += o.grad[i * d + j];
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization and activations

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d)
    throw DimensionError("layer_norm: parameters " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " do not match input " +
                         shape_string(x.shape()));
  const std::size_t rows = x.numel() / d;
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> out(xv.size());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (row[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [xhat, inv_std, rows, d](Node& o) {
                       Node& nx = *o.inputs[0];
                       Node& ng = *o.inputs[1];
                       Node& nb = *o.inputs[2];
                       const auto& g = o.grad;
                       if (ng.requires_grad || nb.requires_grad) {
                         auto& gg = grad_buffer(ng);
                         auto& gb = grad_buffer(nb);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < d; ++j) {
                             gg[j] += g[r * d + j] * (*xhat)[r * d + j];
                             gb[j] += g[r * d + j];
                           }
                       }
                       if (nx.requires_grad) {
                         auto& gx = grad_buffer(nx);
                         const auto& gamma_v = ng.values;
                         const double inv_d = 1.0 / static_cast<double>(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double mean_dh = 0.0;
                           double mean_dh_h = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = g[r * d + j] * gamma_v[j];
                             mean_dh += dh;
                             mean_dh_h += dh * (*xhat)[r * d + j];
                           }
                           mean_dh *= inv_d;
                           mean_dh_h *= inv_d;
                           const double is = (*inv_std)[r];
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = g[r * d + j] * gamma_v[j];
                             gx[r * d + j] += is * (dh - mean_dh - (*xhat)[r * d + j] * mean_dh_h);
                           }
                         }
                       }
                     });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& x) {
  require_defined(x, "gelu");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double v = xv[i];
    out[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  return make_result(x.shape(), std::move(out), {x}, [](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    const auto& xv = o.inputs[0]->values;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double v = xv[i];
      const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
      gx[i] += o.grad[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
    }
  });
}

Tensor relu(const Tensor& x) {
  require_defined(x, "relu");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return make_result(x.shape(), std::move(out), {x}, [](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    const auto& xv = o.inputs[0]->values;
    for (std::size_t i = 0; i < xv.size(); ++i)
      if (xv[i] > 0.0) gx[i] += o.grad[i];
  });
}

Tensor dropout(const Tensor& x, double p, bool train, Rng& rng) {
  require_defined(x, "dropout");
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must be in [0,1)");
  if (!train || p == 0.0) return x;
  const auto xv = x.values();
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(xv.size());
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    (*mask)[i] = u >= p ? keep_scale : 0.0;
    out[i] = xv[i] * (*mask)[i];
  }
  return make_result(x.shape(), std::move(out), {x}, [mask](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i] * (*mask)[i];
  });
}

Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value) {
  require_defined(x, "masked_fill");
  if (mask.size() != x.numel())
    throw DimensionError("masked_fill: mask of " + std::to_string(mask.size()) +
                         " entries for tensor " + shape_string(x.shape()));
  const auto xv = x.values();
  std::vector<double> out(xv.begin(), xv.end());
  std::vector<bool> kept(mask.begin(), mask.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (mask[i]) out[i] = value;
  return make_result(x.shape(), std::move(out), {x}, [kept = std::move(kept)](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (!kept[i]) gx[i] += o.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Softmax family

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - mx);
        out[base + j * s.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] /= z;
    }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    const auto& y = o.values;
    const auto& g = o.grad;
    for (std::size_t oo = 0; oo < s.outer; ++oo)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = oo * s.n * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t k = base + j * s.inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  require_defined(x, "log_softmax");
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.n * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.n; ++j) mx = std::max(mx, xv[base + j * s.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < s.n; ++j) z += std::exp(xv[base + j * s.inner] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t j = 0; j < s.n; ++j) out[base + j * s.inner] = xv[base + j * s.inner] - lz;
    }
  return make_result(x.shape(), std::move(out), {x}, [s](Node& o) {
    auto& gx = grad_buffer(*o.inputs[0]);
    const auto& y = o.values;
    const auto& g = o.grad;
    for (std::size_t oo = 0; oo < s.outer; ++oo)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = oo * s.n * s.inner + i;
        double gs = 0.0;
        for (std::size_t j = 0; j < s.n; ++j) gs += g[base + j * s.inner];
        for (std::size_t j = 0; j < s.n; ++j) {
          const std::size_t k = base + j * s.inner;
          gx[k] += g[k] - std::exp(y[k]) * gs;
        }
      }
  });
}

Tensor cross_entropy_from_logits(const Tensor& logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> ignore, std::size_t* counted) {
  require_defined(logits, "cross_entropy_from_logits");
  if (logits.rank() != 2)
    throw DimensionError("cross_entropy_from_logits: logits must be [L,V], got " +
                         shape_string(logits.shape()));
  const std::size_t L = logits.dim(0);
  const std::size_t V = logits.dim(1);
  if (targets.size() != L)
    throw DimensionError("cross_entropy_from_logits: " + std::to_string(targets.size()) +
                         " targets for logits " + shape_string(logits.shape()));
  if (!ignore.empty() && ignore.size() != L)
    throw DimensionError("cross_entropy_from_logits: ignore mask of " +
                         std::to_string(ignore.size()) + " for logits " +
                         shape_string(logits.shape()));
  const auto lv = logits.values();
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<bool> use(L, true);
  std::size_t count = 0;
  for (std::size_t r = 0; r < L; ++r) {
    if (!ignore.empty() && ignore[r]) use[r] = false;
    if (!use[r]) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= V)
      throw ContractError("cross_entropy_from_logits: target id " + std::to_string(tgt[r]) +
                          " outside vocabulary of size " + std::to_string(V));
    ++count;
  }
  if (counted) *counted = count;
  if (count == 0) return make_result({}, {0.0}, {logits}, [](Node&) {});

  // Per-row softmax is kept for the backward pass.
  auto probs = std::make_shared<std::vector<double>>(L * V, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < L; ++r) {
    if (!use[r]) continue;
    const double* row = lv.data() + r * V;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < V; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) {
      const double e = std::exp(row[j] - mx);
      (*probs)[r * V + j] = e;
      z += e;
    }
    for (std::size_t j = 0; j < V; ++j) (*probs)[r * V + j] /= z;
    total += -(row[tgt[r]] - mx - std::log(z));
  }
  const double inv = 1.0 / static_cast<double>(count);
  return make_result({}, {total * inv}, {logits},
                     [probs, tgt = std::move(tgt), use = std::move(use), inv, V](Node& o) {
                       auto& gl = grad_buffer(*o.inputs[0]);
                       const double g = o.grad[0] * inv;
                       for (std::size_t r = 0; r < use.size(); ++r) {
                         if (!use[r]) continue;
                         for (std::size_t j = 0; j < V; ++j) gl[r * V + j] += g * (*probs)[r * V + j];
                         gl[r * V + static_cast<std::size_t>(tgt[r])] -= g;
                       }
                     });
}

Tensor weighted_sum(const std::vector<Tensor>& parts, const Tensor& coeffs) {
  if (parts.empty()) throw ContractError("weighted_sum: no inputs");
  require_defined(coeffs, "weighted_sum");
  if (coeffs.numel() != parts.size())
    throw DimensionError("weighted_sum: " + std::to_string(parts.size()) + " parts but coeffs " +
                         shape_string(coeffs.shape()));
  const Shape& s0 = parts[0].shape();
  for (const auto& p : parts) {
    require_defined(p, "weighted_sum");
    if (p.shape() != s0)
      throw DimensionError("weighted_sum: mismatched parts " + shape_string(s0) + " and " +
                           shape_string(p.shape()));
  }
  const auto cv = coeffs.values();
  std::vector<double> out(parts[0].numel(), 0.0);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += cv[p] * pv[i];
  }
  std::vector<Tensor> inputs = parts;
  inputs.push_back(coeffs);
  const std::size_t n = parts.size();
  return make_result(s0, std::move(out), inputs, [n](Node& o) {
    Node& nc = *o.inputs[n];
    const auto& g = o.grad;
    for (std::size_t p = 0; p < n; ++p) {
      Node& np = *o.inputs[p];
      if (np.requires_grad) {
        auto& gp = grad_buffer(np);
        const double c = nc.values[p];
        for (std::size_t i = 0; i < g.size(); ++i) gp[i] += c * g[i];
      }
      if (nc.requires_grad) {
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += np.values[i] * g[i];
        grad_buffer(nc)[p] += dot;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Attention

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const AttentionSpec& spec) {
  require_defined(q, "attention");
  require_defined(k, "attention");
  require_defined(v, "attention");
  const std::size_t B = spec.batch;
  const std::size_t Lq = spec.query_len;
  const std::size_t Lk = spec.key_len;
  const std::size_t H = spec.heads;
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(0) != B * Lq ||
      k.dim(0) != B * Lk || v.shape() != k.shape() || q.dim(1) != k.dim(1))
    throw DimensionError("attention: incompatible q " + shape_string(q.shape()) + ", k " +
                         shape_string(k.shape()) + ", v " + shape_string(v.shape()));
  const std::size_t d = q.dim(1);
  if (H == 0 || d % H != 0)
    throw ContractError("attention: model width " + std::to_string(d) +
                        " not divisible by head count " + std::to_string(H));
  if (spec.causal && Lq != Lk) throw ContractError("attention: causal mask needs query_len == key_len");
  if (!spec.key_padding.empty() && spec.key_padding.size() != B * Lk)
    throw DimensionError("attention: key padding mask has wrong length");
  const std::size_t dh = d / H;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

  auto probs = std::make_shared<std::vector<double>>(B * H * Lq * Lk, 0.0);
  std::vector<double> out(B * Lq * d, 0.0);
  const double* qp = q.values().data();
  const double* kp = k.values().data();
  const double* vp = v.values().data();
  RowMat scores(Lq, Lk);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h) {
      StridedConst Q(qp + b * Lq * d + h * dh, Lq, dh, Eigen::OuterStride<>(d));
      StridedConst K(kp + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
      StridedConst Vm(vp + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
      scores.noalias() = (Q * K.transpose()) * scl;
      MutMap P(probs->data() + (b * H + h) * Lq * Lk, Lq, Lk);
      for (std::size_t i = 0; i < Lq; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < Lk; ++j) {
          const bool masked = (spec.causal && j > i) ||
                              (!spec.key_padding.empty() && spec.key_padding[b * Lk + j]);
          if (masked) {
            scores(i, j) = -std::numeric_limits<double>::infinity();
          } else {
            mx = std::max(mx, scores(i, j));
          }
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // fully masked row
        double z = 0.0;
        for (std::size_t j = 0; j < Lk; ++j) {
          const double e = scores(i, j) == -std::numeric_limits<double>::infinity()
                               ? 0.0
                               : std::exp(scores(i, j) - mx);
          P(i, j) = e;
          z += e;
        }
        for (std::size_t j = 0; j < Lk; ++j) P(i, j) /= z;
      }
      StridedMut O(out.data() + b * Lq * d + h * dh, Lq, dh, Eigen::OuterStride<>(d));
      O.noalias() = P * Vm;
    }

  return make_result(q.shape(), std::move(out), {q, k, v}, [=](Node& o) {
    Node& nq = *o.inputs[0];
    Node& nk = *o.inputs[1];
    Node& nv = *o.inputs[2];
    double* gq = nq.requires_grad ? grad_buffer(nq).data() : nullptr;
    double* gk = nk.requires_grad ? grad_buffer(nk).data() : nullptr;
    double* gv = nv.requires_grad ? grad_buffer(nv).data() : nullptr;
    RowMat dP(Lq, Lk);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t h = 0; h < H; ++h) {
        StridedConst G(o.grad.data() + b * Lq * d + h * dh, Lq, dh, Eigen::OuterStride<>(d));
        StridedConst Q(nq.values.data() + b * Lq * d + h * dh, Lq, dh, Eigen::OuterStride<>(d));
        StridedConst K(nk.values.data() + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
        StridedConst Vm(nv.values.data() + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
        ConstMap P(probs->data() + (b * H + h) * Lq * Lk, Lq, Lk);
        if (gv) {
          StridedMut GV(gv + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
          GV.noalias() += P.transpose() * G;
        }
        if (!gq && !gk) continue;
        dP.noalias() = G * Vm.transpose();
        for (std::size_t i = 0; i < Lq; ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < Lk; ++j) dot += dP(i, j) * P(i, j);
          for (std::size_t j = 0; j < Lk; ++j) dP(i, j) = P(i, j) * (dP(i, j) - dot) * scl;
        }
        if (gq) {
          StridedMut GQ(gq + b * Lq * d + h * dh, Lq, dh, Eigen::OuterStride<>(d));
          GQ.noalias() += dP * K;
        }
        if (gk) {
          StridedMut GK(gk + b * Lk * d + h * dh, Lk, dh, Eigen::OuterStride<>(d));
          GK.noalias() += dP.transpose() * Q;
        }
      }
  });
}

}  // namespace anchorparse
