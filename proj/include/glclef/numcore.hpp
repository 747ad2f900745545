#pragma once

// Dense 2-D tensors and a tape-based reverse-mode differentiator.
//
// Every tensor is a row-major matrix; vectors are 1xN rows. A Tape records
// operations in execution order, which is also a topological order, so the
// backward pass is a single reverse sweep.
//
//   Tape tape;
//   Var w = tape.leaf(weights);          // weights.requires_grad == true
//   Var y = softmax_rows(matmul(x, w));
//   tape.backward(sum(y));               // accumulates into weights.grad

#include <array>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace glclef {

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor row(std::vector<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  std::array<std::size_t, 2> shape() const { return {rows_, cols_}; }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row_span(std::size_t r) const {
    return std::span<const double>(values_).subspan(r * cols_, cols_);
  }
  std::span<double> row_span(std::size_t r) {
    return std::span<double>(values_).subspan(r * cols_, cols_);
  }

  // Gradient bookkeeping for leaves. The buffer exists iff requires_grad.
  bool requires_grad() const { return grad_.has_value(); }
  void set_requires_grad(bool on);
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  bool all_finite() const;

  // Compares shape and values bit-for-bit; gradient state is ignored.
  bool same_values(const Tensor& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  std::optional<std::vector<double>> grad_;
};

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;
};

class Tape {
 public:
  // Propagates the output gradient of node `self` to its parents.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // References `t` without copying; `t` must outlive the tape. When t
  // requires grad, backward() accumulates into t.grad().
  Var leaf(Tensor& t);
  Var leaf(const Tensor& t);

  // Records a derived node. `backward` may be empty for nodes that need no
  // gradient; it is also skipped automatically when no parent needs one.
  Var record(Tensor value, std::span<const std::size_t> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, allocated on first touch.
  std::span<double> grad_buffer(std::size_t id);
  // Read-only view; empty when the node received no gradient.
  std::span<const double> grad(std::size_t id) const { return nodes_[id].grad; }

  void backward(Var loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* external = nullptr;
    Tensor* sink = nullptr;
    std::vector<double> grad;
    BackwardFn backward;
    bool needs_grad = false;
  };
  // deque: references to node values stay valid while recording.
  std::deque<Node> nodes_;
};

// Core operations. Shapes are checked and reported as DimensionError.
Var matmul(Var a, Var b);     // [m x k] * [k x p]
Var matmul_nt(Var a, Var b);  // [m x k] * [p x k]^T
Var add(Var a, Var b);        // same shape, or b is [1 x cols] broadcast over rows
Var sub(Var a, Var b);
Var mul(Var a, Var b);        // elementwise, same shape
Var scale(Var a, double factor);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var softmax_rows(Var a);
Var dot(Var p, Var q);  // two 1 x n rows -> 1 x 1
Var sum(Var a);
Var mean(Var a);

// Extensions used by the model and the losses.
Var gather_rows(Var table, std::span<const int> ids);
Var l2_normalize_rows(Var a);
// sum_r -log(max(probs[r, gold[r]], floor))
Var nll_rows(Var probs, std::span<const std::size_t> gold, double floor);

struct FiniteDiffReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "param[i]: tape=..., fd=..."
  bool passed = false;
};

// Compares tape gradients of `loss_fn` with central finite differences for
// every entry of every tensor in `params`. The error for one entry is
// |g_tape - g_fd| / max(|g_tape|, |g_fd|, abs_floor).
FiniteDiffReport finite_diff_check(const std::function<Var(Tape&)>& loss_fn,
                                   std::span<Tensor* const> params, double step, double tol,
                                   double abs_floor = 1e-4);

}  // namespace glclef
