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

// Dense double-precision tensors with reverse-mode automatic differentiation.
//
// Every op records a backward rule on its output when gradient recording is
// enabled and at least one input requires a gradient. backward() walks the
// recorded graph once in reverse topological order and accumulates gradients
// into every reachable tensor that requires one.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anchorparse {

using Shape = std::vector<std::size_t>;
using Rng = std::mt19937_64;
// Byte-per-element boolean mask (std::vector<bool> has no contiguous storage).
using Mask = std::vector<std::uint8_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Raised when operand shapes are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a caller violates an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {
struct Node;
}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  // Views share the node's storage; taking one from a temporary would dangle.
  std::span<const double> values() const&;
  std::span<const double> values() const&& = delete;
  // Direct write access; used for parameter updates and test perturbations.
  // Writing into a tensor that is part of a live graph invalidates it.
  std::span<double> mutable_values();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const&;
  std::span<const double> grad() const&& = delete;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no graph history, requires_grad false.
  Tensor detach() const;
  // Deep copy of values (and requires_grad flag), no history.
  Tensor clone() const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Populates grad on every requires_grad ancestor of `loss`. Gradients are
// summed across fan-out. `loss` must hold exactly one value.
void backward(const Tensor& loss);

bool grad_enabled() noexcept;

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Elementwise arithmetic. `b` may equal `a` in shape, be a trailing suffix of
// it (broadcast over leading dims), or hold a single value.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// [M,K]x[K,N], [B,M,K]x[K,N], [M,K]x[B,K,N] or [B,M,K]x[B,K,N].
Tensor matmul(const Tensor& a, const Tensor& b);
// Swaps the last two axes.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

// Rows of `table` ([V,d]) selected by ids; result [ids.size(), d].
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
// Inverted dropout. Identity when `train` is false or p == 0.
Tensor dropout(const Tensor& x, double p, bool train, Rng& rng);

// Positions where mask is true are replaced by `value` and receive no gradient.
Tensor masked_fill(const Tensor& x, std::span<const std::uint8_t> mask, double value);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

// Mean negative log-likelihood over positions where ignore[i] is false.
// Returns a zero loss when every position is ignored; `counted` (if given)
// receives the number of positions that contributed.
Tensor cross_entropy_from_logits(const Tensor& logits, std::span<const int> targets,
                                 std::span<const std::uint8_t> ignore,
                                 std::size_t* counted = nullptr);

// Sum over i of coeffs[i] * parts[i]; all parts share one shape.
Tensor weighted_sum(const std::vector<Tensor>& parts, const Tensor& coeffs);

struct AttentionSpec {
  std::size_t batch = 1;
  std::size_t query_len = 0;
  std::size_t key_len = 0;
  std::size_t heads = 1;
  bool causal = false;
  // batch * key_len flags, true marks a padded key. Empty means no padding.
  std::span<const std::uint8_t> key_padding;
};

// Scaled dot-product multi-head attention on row-major [batch*len, d] inputs.
// Heads split d into contiguous column blocks. Returns [batch*query_len, d].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                 const AttentionSpec& spec);

}  // namespace anchorparse
