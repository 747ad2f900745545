#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glclef/corpus.hpp"
#include "glclef/numcore.hpp"
#include "glclef/rng.hpp"

namespace glclef {

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  std::size_t num_intents = 0;
  std::size_t num_slots = 0;

  // Width of h_CLS and of every token representation.
  std::size_t repr_dim() const { return 2 * hidden_dim; }
  bool operator==(const ModelDims&) const = default;
};

// Gate blocks are stacked in the order input, forget, cell, output.
struct LstmParams {
  Tensor w_input;   // [4h x e]
  Tensor w_hidden;  // [4h x h]
  Tensor bias;      // [1 x 4h]
};

struct EncoderParams {
  ModelDims dims;
  Tensor embedding;  // [|V| x e]
  LstmParams forward;
  LstmParams backward;
  Tensor intent_w;  // [n_I x 2h]
  Tensor intent_b;  // [1 x n_I]
  Tensor slot_w;    // [n_S x 2h]
  Tensor slot_b;    // [1 x n_S]

  // Visits every parameter in a fixed order with a stable name.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  void set_requires_grad(bool on);
  void zero_grad();
  bool all_finite() const;
  bool same_values(const EncoderParams& other) const;
};

// U(-1/sqrt(h), 1/sqrt(h)) everywhere except the forget-gate bias, which is 1.
EncoderParams init_params(const ModelDims& dims, std::uint64_t seed);

// Parameters placed on a tape once per step.
struct BoundParams {
  Var embedding;
  Var fwd_in, fwd_hidden, fwd_bias;
  Var bwd_in, bwd_hidden, bwd_bias;
  Var intent_w, intent_b, slot_w, slot_b;
  ModelDims dims;
};

BoundParams bind(Tape& tape, EncoderParams& params);        // leaves accumulate gradients
BoundParams bind(Tape& tape, const EncoderParams& params);  // inference only

struct EncOutput {
  Var h_cls;   // [1 x 2h]
  Var tokens;  // [n x 2h], one row per word
  Var h_sep;   // [1 x 2h]; computed, not consumed by any loss
};

struct EncodeOptions {
  double embedding_dropout = 0.0;
  Rng* rng = nullptr;  // required when embedding_dropout > 0
};

// ids = [CLS] x_1 .. x_n [SEP]; each token row is concat(forward h_t, backward h_t).
EncOutput encode(const BoundParams& params, std::span<const int> ids, const EncodeOptions& options = {});

// softmax(W^I h_cls + b^I) -> [1 x n_I]
Var intent_distribution(const BoundParams& params, Var h_cls);
// row-wise softmax(W^s h_t + b^s) -> [n x n_S]
Var slot_distributions(const BoundParams& params, Var tokens);

// Lowest index wins ties.
std::size_t argmax(std::span<const double> values);

struct Model {
  Vocab vocab;
  LabelSets labels;
  EncoderParams params;
};

struct Prediction {
  std::string intent;
  std::vector<std::string> slot_tags;
};

Prediction predict(const Model& model, const SLUExample& example);
// Detached h_CLS of one utterance.
Tensor sentence_vector(const Model& model, const SLUExample& example);

}  // namespace glclef
