#pragma once

#include <cstddef>
#include <deque>
#include <span>

#include "glclef/encoder.hpp"
#include "glclef/numcore.hpp"

namespace glclef {

struct SimilarityConfig {
  double temperature = 0.07;
  bool normalize = true;  // L2-normalize both vectors before the dot product
};

// Fixed-capacity FIFO of detached sentence vectors and token matrices from
// earlier batches. Both FIFOs move in lockstep; index 0 is the oldest entry.
class NegativeQueue {
 public:
  NegativeQueue(std::size_t capacity, std::size_t dim);

  // Stores copies; the oldest pair is evicted once size would exceed capacity.
  // With capacity 0 nothing is ever stored.
  void push(const Tensor& h_cls, const Tensor& tokens);
  void push(const EncOutput& enc) { push(enc.h_cls.value(), enc.tokens.value()); }

  std::size_t size() const { return cls_.size(); }
  bool empty() const { return cls_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  const Tensor& cls(std::size_t k) const { return cls_.at(k); }
  const Tensor& tokens(std::size_t k) const { return tokens_.at(k); }
  void clear();

 private:
  std::size_t capacity_;
  std::size_t dim_;
  std::deque<Tensor> cls_;
  std::deque<Tensor> tokens_;
};

// s(p, q) = exp(p.q / tau), with p and q unit-normalized when cfg.normalize.
double sim(std::span<const double> p, std::span<const double> q, const SimilarityConfig& cfg);

// Sentence-level local intent loss:
//   -log s(c, c+) / (s(c, c+) + sum_k s(c, c-_k))
Var loss_li(Var anchor_cls, Var positive_cls, const NegativeQueue& queue, const SimilarityConfig& cfg);

// Token-level local slot loss, summed over anchor tokens i:
//   -sum_j log s(h_i, h+_j) / (s(h_i, h+_j) + sum_k s(h_i, h-_{k,j})) / n
// A negative contributes at position j only if it has a token there. With
// aligned_only, the j-sum is restricted to j == i.
Var loss_ls(Var anchor_tokens, Var positive_tokens, const NegativeQueue& queue, const SimilarityConfig& cfg,
            bool aligned_only = false);

// Global intent-slot loss: the same token-position sum with h_CLS as the
// query, once against the anchor's tokens and once against the positive's.
Var loss_gis(Var anchor_cls, Var anchor_tokens, Var positive_tokens, const NegativeQueue& queue,
             const SimilarityConfig& cfg);

}  // namespace glclef
