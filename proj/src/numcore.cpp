#include "glclef/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace glclef {

namespace {

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

[[noreturn]] void dim_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw DimensionError(op + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void require_same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands belong to different tapes");
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("tensor: " + std::to_string(values_.size()) + " values for shape [" +
                         std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> v;
  v.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("tensor: ragged initializer");
    v.insert(v.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(v));
}

void Tensor::set_requires_grad(bool on) {
  if (on && !grad_) grad_.emplace(values_.size(), 0.0);
  if (!on) grad_.reset();
}

std::span<double> Tensor::grad() {
  if (!grad_) throw ContractError("tensor does not require grad");
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw ContractError("tensor does not require grad");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), 0.0);
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool Tensor::same_values(const Tensor& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) return false;
  // Bitwise comparison: distinguishes -0.0 and compares NaN payloads.
  return std::equal(values_.begin(), values_.end(), other.values_.begin(),
                    [](double a, double b) {
                      return std::memcmp(&a, &b, sizeof(double)) == 0;
                    });
}

// ---------------------------------------------------------------- Tape

const Tensor& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const Tensor& t = value();
  if (t.size() != 1) throw ContractError("scalar(): tensor has shape " + shape_str(t));
  return t[0];
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor& t) {
  Node n;
  n.external = &t;
  if (t.requires_grad()) {
    n.sink = &t;
    n.needs_grad = true;
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::leaf(const Tensor& t) {
  Node n;
  n.external = &t;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const std::size_t> parents, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = std::any_of(parents.begin(), parents.end(),
                             [this](std::size_t p) { return nodes_[p].needs_grad; });
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(value(loss.id)));
  }
  for (auto& n : nodes_) n.grad.clear();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty() || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      auto g = n.sink->grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

void Tape::clear() { nodes_.clear(); }

// ---------------------------------------------------------------- ops

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) dim_error("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), p = B.cols();
  Tensor out(m, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      const double av = A(i, t);
      for (std::size_t j = 0; j < p; ++j) out(i, j) += av * B(t, j);
    }
  const std::size_t parents[] = {a.id, b.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, bi = b.id, m, k, p](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const Tensor& A = tp.value(ai);
    const Tensor& B = tp.value(bi);
    if (tp.needs_grad(ai)) {
      auto ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          double s = 0.0;
          for (std::size_t j = 0; j < p; ++j) s += g[i * p + j] * B(t, j);
          ga[i * k + t] += s;
        }
    }
    if (tp.needs_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < k; ++t) {
          const double av = A(i, t);
          for (std::size_t j = 0; j < p; ++j) gb[t * p + j] += av * g[i * p + j];
        }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.cols()) dim_error("matmul_nt", A, B);
  const std::size_t m = A.rows(), k = A.cols(), p = B.rows();
  Tensor out(m, p);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += A(i, t) * B(j, t);
      out(i, j) = s;
    }
  const std::size_t parents[] = {a.id, b.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, bi = b.id, m, k, p](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const Tensor& A = tp.value(ai);
    const Tensor& B = tp.value(bi);
    if (tp.needs_grad(ai)) {
      auto ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double gv = g[i * p + j];
          if (gv == 0.0) continue;
          for (std::size_t t = 0; t < k; ++t) ga[i * k + t] += gv * B(j, t);
        }
    }
    if (tp.needs_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          const double gv = g[i * p + j];
          if (gv == 0.0) continue;
          for (std::size_t t = 0; t < k; ++t) gb[j * k + t] += gv * A(i, t);
        }
    }
  });
}

namespace {

Var add_impl(Var a, Var b, double sign, const char* name) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  const bool broadcast = B.rows() == 1 && A.rows() != 1 && B.cols() == A.cols();
  if (!broadcast && A.shape() != B.shape()) dim_error(name, A, B);
  Tensor out = A;
  const std::size_t cols = A.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * B[broadcast ? i % cols : i];
  const std::size_t parents[] = {a.id, b.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, bi = b.id, broadcast, cols, sign](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    if (tp.needs_grad(ai)) {
      auto ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.needs_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[broadcast ? i % cols : i] += sign * g[i];
    }
  });
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = fwd(A[i]);
  const std::size_t parents[] = {a.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, deriv](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const Tensor& x = tp.value(ai);
    const Tensor& y = tp.value(self);
    auto ga = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_impl(a, b, -1.0, "sub"); }

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) dim_error("mul", A, B);
  Tensor out(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * B[i];
  const std::size_t parents[] = {a.id, b.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, bi = b.id](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const Tensor& A = tp.value(ai);
    const Tensor& B = tp.value(bi);
    if (tp.needs_grad(ai)) {
      auto ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
    }
    if (tp.needs_grad(bi)) {
      auto gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no operands");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids, offsets;
  for (const Var& v : parts) {
    require_same_tape(parts[0], v);
    if (v.rows() != rows) dim_error("concat_cols", parts[0].value(), v.value());
    ids.push_back(v.id);
    offsets.push_back(cols);
    cols += v.cols();
  }
  Tensor out(rows, cols);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor& src = parts[p].value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < src.cols(); ++c) out(r, offsets[p] + c) = src(r, c);
  }
  return parts[0].tape->record(std::move(out), ids, [ids, offsets, rows, cols](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!tp.needs_grad(ids[p])) continue;
      const std::size_t w = tp.value(ids[p]).cols();
      auto gp = tp.grad_buffer(ids[p]);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * cols + offsets[p] + c];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no operands");
  const std::size_t cols = parts[0].cols();
  std::vector<std::size_t> ids, offsets;
  std::size_t total = 0;
  for (const Var& v : parts) {
    require_same_tape(parts[0], v);
    if (v.cols() != cols) dim_error("concat_rows", parts[0].value(), v.value());
    ids.push_back(v.id);
    offsets.push_back(total);
    total += v.value().size();
  }
  std::vector<double> values;
  values.reserve(total);
  for (const Var& v : parts) {
    const auto s = v.value().values();
    values.insert(values.end(), s.begin(), s.end());
  }
  Tensor out(total / std::max<std::size_t>(cols, 1), cols, std::move(values));
  return parts[0].tape->record(std::move(out), ids, [ids, offsets](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (!tp.needs_grad(ids[p])) continue;
      auto gp = tp.grad_buffer(ids[p]);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[p] + i];
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  if (begin + count > A.rows() || count == 0) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") out of " + shape_str(A));
  }
  const std::size_t cols = A.cols();
  std::vector<double> v(A.values().begin() + begin * cols, A.values().begin() + (begin + count) * cols);
  const std::size_t parents[] = {a.id};
  return a.tape->record(Tensor(count, cols, std::move(v)), parents, [ai = a.id, begin, cols](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad_buffer(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[begin * cols + i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& A = a.value();
  if (begin + count > A.cols() || count == 0) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                         ") out of " + shape_str(A));
  }
  const std::size_t rows = A.rows(), cols = A.cols();
  Tensor out(rows, count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = A(r, begin + c);
  const std::size_t parents[] = {a.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, begin, count, rows, cols](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    auto ga = tp.grad_buffer(ai);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) ga[r * cols + begin + c] += g[r * count + c];
  });
}

Var softmax_rows(Var a) {
  const Tensor& A = a.value();
  if (A.cols() == 0) throw DimensionError("softmax_rows: zero columns");
  Tensor out(A.rows(), A.cols());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    const auto x = A.row_span(r);
    auto y = out.row_span(r);
    const double m = *std::max_element(x.begin(), x.end());
    double z = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) z += (y[c] = std::exp(x[c] - m));
    for (double& v : y) v /= z;
  }
  const std::size_t parents[] = {a.id};
  return a.tape->record(std::move(out), parents, [ai = a.id](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    const Tensor& y = tp.value(self);
    auto ga = tp.grad_buffer(ai);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += g[r * cols + c] * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += y(r, c) * (g[r * cols + c] - s);
    }
  });
}

Var dot(Var p, Var q) {
  const Tensor& P = p.value();
  const Tensor& Q = q.value();
  if (P.rows() != 1 || Q.rows() != 1 || P.cols() != Q.cols()) dim_error("dot", P, Q);
  return matmul_nt(p, q);
}

Var sum(Var a) {
  const Tensor& A = a.value();
  double s = 0.0;
  for (double v : A.values()) s += v;
  const std::size_t parents[] = {a.id};
  return a.tape->record(Tensor(1, 1, s), parents, [ai = a.id](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad_buffer(ai)) v += g;
  });
}

Var mean(Var a) {
  const auto n = a.value().size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Tensor& T = table.value();
  const std::size_t cols = T.cols();
  Tensor out(ids.size(), cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= T.rows()) {
      throw ContractError("gather_rows: id " + std::to_string(ids[r]) + " outside table of " +
                          std::to_string(T.rows()) + " rows");
    }
    const auto src = T.row_span(static_cast<std::size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.row_span(r).begin());
  }
  const std::size_t parents[] = {table.id};
  std::vector<int> idv(ids.begin(), ids.end());
  return table.tape->record(std::move(out), parents, [ti = table.id, idv = std::move(idv), cols](Tape& tp, std::size_t self) {
    const auto g = tp.grad(self);
    auto gt = tp.grad_buffer(ti);
    for (std::size_t r = 0; r < idv.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gt[static_cast<std::size_t>(idv[r]) * cols + c] += g[r * cols + c];
  });
}

Var l2_normalize_rows(Var a) {
  const Tensor& A = a.value();
  Tensor out(A.rows(), A.cols());
  std::vector<double> norms(A.rows());
  for (std::size_t r = 0; r < A.rows(); ++r) {
    double s = 0.0;
    for (double v : A.row_span(r)) s += v * v;
    if (s == 0.0) throw ContractError("l2_normalize_rows: zero vector in row " + std::to_string(r));
    norms[r] = std::sqrt(s);
    for (std::size_t c = 0; c < A.cols(); ++c) out(r, c) = A(r, c) / norms[r];
  }
  const std::size_t parents[] = {a.id};
  return a.tape->record(std::move(out), parents, [ai = a.id, norms = std::move(norms)](Tape& tp, std::size_t self) {
    // d(x/|x|) = (g - y (g.y)) / |x|
    const auto g = tp.grad(self);
    const Tensor& y = tp.value(self);
    auto ga = tp.grad_buffer(ai);
    const std::size_t cols = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gy += g[r * cols + c] * y(r, c);
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += (g[r * cols + c] - y(r, c) * gy) / norms[r];
    }
  });
}

Var nll_rows(Var probs, std::span<const std::size_t> gold, double floor) {
  const Tensor& P = probs.value();
  if (gold.size() != P.rows()) {
    throw DimensionError("nll_rows: " + std::to_string(gold.size()) + " labels for " + shape_str(P));
  }
  double loss = 0.0;
  for (std::size_t r = 0; r < P.rows(); ++r) {
    if (gold[r] >= P.cols()) throw ContractError("nll_rows: label index out of range");
    loss -= std::log(std::max(P(r, gold[r]), floor));
  }
  const std::size_t parents[] = {probs.id};
  std::vector<std::size_t> gv(gold.begin(), gold.end());
  return probs.tape->record(Tensor(1, 1, loss), parents, [pi = probs.id, gv = std::move(gv), floor](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const Tensor& P = tp.value(pi);
    auto gp = tp.grad_buffer(pi);
    for (std::size_t r = 0; r < gv.size(); ++r) {
      const double p = P(r, gv[r]);
      if (p > floor) gp[r * P.cols() + gv[r]] -= g / p;
    }
  });
}

// ---------------------------------------------------------------- checking

FiniteDiffReport finite_diff_check(const std::function<Var(Tape&)>& loss_fn,
                                   std::span<Tensor* const> params, double step, double tol,
                                   double abs_floor) {
  std::vector<bool> had_grad;
  for (Tensor* p : params) {
    had_grad.push_back(p->requires_grad());
    p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape tape;
    tape.backward(loss_fn(tape));
  }
  auto eval = [&] {
    Tape tape;
    return loss_fn(tape).scalar();
  };

  FiniteDiffReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const std::vector<double> analytic(p.grad().begin(), p.grad().end());
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + step;
      const double up = eval();
      p[i] = saved - step;
      const double down = eval();
      p[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(fd), abs_floor});
      const double err = std::abs(analytic[i] - fd) / denom;
      ++report.checked;
      if (err >= report.max_rel_error) {
        report.max_rel_error = err;
        std::ostringstream os;
        os << "param" << pi << "[" << i << "]: tape=" << analytic[i] << ", fd=" << fd;
        report.worst = os.str();
      }
    }
  }
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    if (!had_grad[pi]) params[pi]->set_requires_grad(false);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace glclef
