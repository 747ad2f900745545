#include "glclef/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace glclef {

namespace {

void check_dim(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw ContractError(std::string(what) + ": representation width " + std::to_string(got) +
                        " does not match queue width " + std::to_string(expected));
  }
}

Tensor normalized_copy(const Tensor& t, bool normalize) {
  if (!normalize) return t;
  Tensor out = t;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    double s = 0.0;
    for (double v : row) s += v * v;
    if (s == 0.0) throw ContractError("similarity: zero vector under normalization");
    const double n = std::sqrt(s);
    for (double& v : row) v /= n;
  }
  return out;
}

Var prepare(Var x, bool normalize) { return normalize ? l2_normalize_rows(x) : x; }

// Negative keys of the queue stacked into one constant matrix. Entry k
// occupies rows [offsets[k], offsets[k] + lengths[k]).
struct StackedNegatives {
  Tensor keys;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> lengths;
};

StackedNegatives stack_cls(const NegativeQueue& queue, bool normalize) {
  StackedNegatives s;
  std::vector<double> v;
  for (std::size_t k = 0; k < queue.size(); ++k) {
    const auto row = queue.cls(k).values();
    v.insert(v.end(), row.begin(), row.end());
    s.offsets.push_back(k);
    s.lengths.push_back(1);
  }
  s.keys = normalized_copy(Tensor(queue.size(), queue.dim(), std::move(v)), normalize);
  return s;
}

StackedNegatives stack_tokens(const NegativeQueue& queue, bool normalize) {
  StackedNegatives s;
  std::vector<double> v;
  std::size_t rows = 0;
  for (std::size_t k = 0; k < queue.size(); ++k) {
    const Tensor& t = queue.tokens(k);
    v.insert(v.end(), t.values().begin(), t.values().end());
    s.offsets.push_back(rows);
    s.lengths.push_back(t.rows());
    rows += t.rows();
  }
  s.keys = normalized_copy(Tensor(rows, queue.dim(), std::move(v)), normalize);
  return s;
}

// Sum of InfoNCE terms. Term (r, c) pairs the positive logit pos[r, c] with
// the negative logits neg[r, offsets[k] + c] of every entry k that is long
// enough (c < lengths[k]). Each term is
//   log(1 + sum_k exp(z_k - z+)),
// evaluated with a max shift so it is exactly 0 when there are no negatives.
Var nce_sum(Var pos, Var neg, const std::vector<std::size_t>& offsets, const std::vector<std::size_t>& lengths,
            bool diagonal_only) {
  const Tensor& P = pos.value();
  const Tensor& N = neg.value();
  const std::size_t rows = P.rows(), cols = P.cols();
  if (diagonal_only && rows != cols) throw ContractError("aligned contrastive loss needs equal token counts");

  struct Term {
    std::size_t r, c;
  };
  std::vector<Term> terms;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (!diagonal_only || r == c) terms.push_back({r, c});

  // Softmax weights of each term, cached for the backward pass.
  std::vector<double> w_pos(terms.size());
  std::vector<std::vector<double>> w_neg(terms.size());
  double total = 0.0;
  std::vector<double> diffs;
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const auto [r, c] = terms[t];
    const double zp = P(r, c);
    diffs.clear();
    for (std::size_t k = 0; k < offsets.size(); ++k)
      if (c < lengths[k]) diffs.push_back(N(r, offsets[k] + c) - zp);
    double m = 0.0;
    for (double d : diffs) m = std::max(m, d);
    double s = std::exp(-m);
    for (double& d : diffs) s += (d = std::exp(d - m));
    total += m + std::log(s);
    w_pos[t] = std::exp(-m) / s;
    for (double& d : diffs) d /= s;
    w_neg[t] = diffs;
  }

  const std::size_t parents[] = {pos.id, neg.id};
  return pos.tape->record(
      Tensor(1, 1, total), parents,
      [pi = pos.id, ni = neg.id, terms = std::move(terms), w_pos = std::move(w_pos), w_neg = std::move(w_neg),
       offsets, lengths, cols](Tape& tp, std::size_t self) {
        const double g = tp.grad(self)[0];
        const std::size_t neg_cols = tp.value(ni).cols();
        const bool pos_grad = tp.needs_grad(pi), neg_grad = tp.needs_grad(ni);
        auto gp = pos_grad ? tp.grad_buffer(pi) : std::span<double>{};
        auto gn = neg_grad ? tp.grad_buffer(ni) : std::span<double>{};
        for (std::size_t t = 0; t < terms.size(); ++t) {
          const auto [r, c] = terms[t];
          if (pos_grad) gp[r * cols + c] += g * (w_pos[t] - 1.0);
          if (!neg_grad) continue;
          std::size_t i = 0;
          for (std::size_t k = 0; k < offsets.size(); ++k)
            if (c < lengths[k]) gn[r * neg_cols + offsets[k] + c] += g * w_neg[t][i++];
        }
      });
}

Var logits(Var queries, Var keys, double temperature) { return scale(matmul_nt(queries, keys), 1.0 / temperature); }

// Sum over j of the token-position terms for one query matrix against keys
// `tokens` and the queue's token negatives, divided by the key count n.
Var token_position_loss(Var queries, Var tokens, const StackedNegatives& negs, const SimilarityConfig& cfg,
                        bool diagonal_only) {
  Tape& tape = *queries.tape;
  const Var pos = logits(queries, tokens, cfg.temperature);
  const Var neg = negs.offsets.empty() ? tape.constant(Tensor(queries.rows(), 0))
                                       : logits(queries, tape.constant(negs.keys), cfg.temperature);
  return scale(nce_sum(pos, neg, negs.offsets, negs.lengths, diagonal_only),
               1.0 / static_cast<double>(tokens.rows()));
}

}  // namespace

NegativeQueue::NegativeQueue(std::size_t capacity, std::size_t dim) : capacity_(capacity), dim_(dim) {}

void NegativeQueue::push(const Tensor& h_cls, const Tensor& tokens) {
  if (h_cls.rows() != 1) throw ContractError("queue push: h_cls must be a single row");
  check_dim(dim_, h_cls.cols(), "queue push");
  check_dim(dim_, tokens.cols(), "queue push");
  if (capacity_ == 0) return;
  Tensor c(h_cls.rows(), h_cls.cols(), std::vector<double>(h_cls.values().begin(), h_cls.values().end()));
  Tensor t(tokens.rows(), tokens.cols(), std::vector<double>(tokens.values().begin(), tokens.values().end()));
  cls_.push_back(std::move(c));
  tokens_.push_back(std::move(t));
  while (cls_.size() > capacity_) {
    cls_.pop_front();
    tokens_.pop_front();
  }
}

void NegativeQueue::clear() {
  cls_.clear();
  tokens_.clear();
}

double sim(std::span<const double> p, std::span<const double> q, const SimilarityConfig& cfg) {
  if (p.size() != q.size()) throw DimensionError("sim: length mismatch");
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pq += p[i] * q[i];
    pp += p[i] * p[i];
    qq += q[i] * q[i];
  }
  if (cfg.normalize) {
    if (pp == 0.0 || qq == 0.0) throw ContractError("sim: zero vector under normalization");
    pq /= std::sqrt(pp) * std::sqrt(qq);
  }
  return std::exp(pq / cfg.temperature);
}

Var loss_li(Var anchor_cls, Var positive_cls, const NegativeQueue& queue, const SimilarityConfig& cfg) {
  check_dim(queue.dim(), anchor_cls.cols(), "loss_li");
  check_dim(queue.dim(), positive_cls.cols(), "loss_li");
  Tape& tape = *anchor_cls.tape;
  const Var a = prepare(anchor_cls, cfg.normalize);
  const Var p = prepare(positive_cls, cfg.normalize);
  const StackedNegatives negs = stack_cls(queue, cfg.normalize);
  const Var pos = logits(a, p, cfg.temperature);
  const Var neg = negs.offsets.empty() ? tape.constant(Tensor(1, 0)) : logits(a, tape.constant(negs.keys), cfg.temperature);
  return nce_sum(pos, neg, negs.offsets, negs.lengths, false);
}

Var loss_ls(Var anchor_tokens, Var positive_tokens, const NegativeQueue& queue, const SimilarityConfig& cfg,
            bool aligned_only) {
  check_dim(queue.dim(), anchor_tokens.cols(), "loss_ls");
  check_dim(queue.dim(), positive_tokens.cols(), "loss_ls");
  if (anchor_tokens.rows() != positive_tokens.rows()) {
    throw ContractError("loss_ls: anchor has " + std::to_string(anchor_tokens.rows()) + " tokens, positive has " +
                        std::to_string(positive_tokens.rows()));
  }
  const Var a = prepare(anchor_tokens, cfg.normalize);
  const Var p = prepare(positive_tokens, cfg.normalize);
  return token_position_loss(a, p, stack_tokens(queue, cfg.normalize), cfg, aligned_only);
}

Var loss_gis(Var anchor_cls, Var anchor_tokens, Var positive_tokens, const NegativeQueue& queue,
             const SimilarityConfig& cfg) {
  check_dim(queue.dim(), anchor_cls.cols(), "loss_gis");
  check_dim(queue.dim(), anchor_tokens.cols(), "loss_gis");
  check_dim(queue.dim(), positive_tokens.cols(), "loss_gis");
  const Var c = prepare(anchor_cls, cfg.normalize);
  const StackedNegatives negs = stack_tokens(queue, cfg.normalize);
  const Var gis1 = token_position_loss(c, prepare(anchor_tokens, cfg.normalize), negs, cfg, false);
  const Var gis2 = token_position_loss(c, prepare(positive_tokens, cfg.normalize), negs, cfg, false);
  return add(gis1, gis2);
}

}  // namespace glclef
