#include "glclef/encoder.hpp"

#include <cmath>

namespace glclef {

namespace {

Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

LstmParams init_lstm(std::size_t e, std::size_t h, double bound, Rng& rng) {
  LstmParams p;
  p.w_input = uniform(4 * h, e, bound, rng);
  p.w_hidden = uniform(4 * h, h, bound, rng);
  p.bias = uniform(1, 4 * h, bound, rng);
  for (std::size_t k = h; k < 2 * h; ++k) p.bias[k] = 1.0;
  return p;
}

// Runs one LSTM direction over the rows of `inputs` and returns the hidden
// state at every position, in position order.
Var run_lstm(Var inputs, Var w_in, Var w_hidden, Var bias, std::size_t h, bool reverse) {
  Tape& tape = *inputs.tape;
  const std::size_t steps = inputs.rows();
  const Var projected = add(matmul_nt(inputs, w_in), bias);  // [T x 4h]
  Var hidden = tape.constant(Tensor(1, h));
  Var cell = tape.constant(Tensor(1, h));
  std::vector<Var> outputs(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = reverse ? steps - 1 - k : k;
    const Var gates = add(slice_rows(projected, t, 1), matmul_nt(hidden, w_hidden));
    const Var act_sig = sigmoid(gates);
    const Var act_tanh = tanh(gates);
    const Var in_gate = slice_cols(act_sig, 0, h);
    const Var forget_gate = slice_cols(act_sig, h, h);
    const Var candidate = slice_cols(act_tanh, 2 * h, h);
    const Var out_gate = slice_cols(act_sig, 3 * h, h);
    cell = add(mul(forget_gate, cell), mul(in_gate, candidate));
    hidden = mul(out_gate, tanh(cell));
    outputs[t] = hidden;
  }
  return concat_rows(outputs);
}

template <typename Params>
BoundParams bind_impl(Tape& tape, Params& p) {
  BoundParams b;
  b.dims = p.dims;
  b.embedding = tape.leaf(p.embedding);
  b.fwd_in = tape.leaf(p.forward.w_input);
  b.fwd_hidden = tape.leaf(p.forward.w_hidden);
  b.fwd_bias = tape.leaf(p.forward.bias);
  b.bwd_in = tape.leaf(p.backward.w_input);
  b.bwd_hidden = tape.leaf(p.backward.w_hidden);
  b.bwd_bias = tape.leaf(p.backward.bias);
  b.intent_w = tape.leaf(p.intent_w);
  b.intent_b = tape.leaf(p.intent_b);
  b.slot_w = tape.leaf(p.slot_w);
  b.slot_b = tape.leaf(p.slot_b);
  return b;
}

}  // namespace

void EncoderParams::for_each(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embedding", embedding);
  fn("forward.w_input", forward.w_input);
  fn("forward.w_hidden", forward.w_hidden);
  fn("forward.bias", forward.bias);
  fn("backward.w_input", backward.w_input);
  fn("backward.w_hidden", backward.w_hidden);
  fn("backward.bias", backward.bias);
  fn("intent_w", intent_w);
  fn("intent_b", intent_b);
  fn("slot_w", slot_w);
  fn("slot_b", slot_b);
}

void EncoderParams::for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<EncoderParams*>(this)->for_each(
      [&](const std::string& name, Tensor& t) { fn(name, static_cast<const Tensor&>(t)); });
}

void EncoderParams::set_requires_grad(bool on) {
  for_each([on](const std::string&, Tensor& t) { t.set_requires_grad(on); });
}

void EncoderParams::zero_grad() {
  for_each([](const std::string&, Tensor& t) { t.zero_grad(); });
}

bool EncoderParams::all_finite() const {
  bool ok = true;
  for_each([&ok](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

bool EncoderParams::same_values(const EncoderParams& other) const {
  if (!(dims == other.dims)) return false;
  std::vector<const Tensor*> mine, theirs;
  for_each([&](const std::string&, const Tensor& t) { mine.push_back(&t); });
  other.for_each([&](const std::string&, const Tensor& t) { theirs.push_back(&t); });
  for (std::size_t i = 0; i < mine.size(); ++i)
    if (!mine[i]->same_values(*theirs[i])) return false;
  return true;
}

EncoderParams init_params(const ModelDims& d, std::uint64_t seed) {
  if (d.vocab_size == 0 || d.embed_dim == 0 || d.hidden_dim == 0 || d.num_intents == 0 || d.num_slots == 0) {
    throw std::invalid_argument("init_params: all dimensions must be positive");
  }
  Rng rng(derive_seed(seed, {0xe1c0de}));
  const double bound = 1.0 / std::sqrt(static_cast<double>(d.hidden_dim));
  EncoderParams p;
  p.dims = d;
  p.embedding = uniform(d.vocab_size, d.embed_dim, bound, rng);
  p.forward = init_lstm(d.embed_dim, d.hidden_dim, bound, rng);
  p.backward = init_lstm(d.embed_dim, d.hidden_dim, bound, rng);
  p.intent_w = uniform(d.num_intents, d.repr_dim(), bound, rng);
  p.intent_b = uniform(1, d.num_intents, bound, rng);
  p.slot_w = uniform(d.num_slots, d.repr_dim(), bound, rng);
  p.slot_b = uniform(1, d.num_slots, bound, rng);
  return p;
}

BoundParams bind(Tape& tape, EncoderParams& params) { return bind_impl(tape, params); }
BoundParams bind(Tape& tape, const EncoderParams& params) { return bind_impl(tape, params); }

EncOutput encode(const BoundParams& p, std::span<const int> ids, const EncodeOptions& options) {
  if (ids.size() < 3) throw ContractError("encode: need [CLS], at least one word and [SEP]");
  Var x = gather_rows(p.embedding, ids);
  if (options.embedding_dropout > 0.0) {
    if (options.rng == nullptr) throw ContractError("encode: dropout requires an rng");
    const double keep = 1.0 - options.embedding_dropout;
    Tensor mask(x.rows(), x.cols());
    for (double& m : mask.values()) m = options.rng->bernoulli(keep) ? 1.0 / keep : 0.0;
    x = mul(x, x.tape->constant(std::move(mask)));
  }
  const std::size_t h = p.dims.hidden_dim;
  const Var fwd = run_lstm(x, p.fwd_in, p.fwd_hidden, p.fwd_bias, h, false);
  const Var bwd = run_lstm(x, p.bwd_in, p.bwd_hidden, p.bwd_bias, h, true);
  const Var both[] = {fwd, bwd};
  const Var states = concat_cols(both);
  const std::size_t n = ids.size() - 2;
  return EncOutput{slice_rows(states, 0, 1), slice_rows(states, 1, n), slice_rows(states, n + 1, 1)};
}

Var intent_distribution(const BoundParams& p, Var h_cls) {
  return softmax_rows(add(matmul_nt(h_cls, p.intent_w), p.intent_b));
}

Var slot_distributions(const BoundParams& p, Var tokens) {
  return softmax_rows(add(matmul_nt(tokens, p.slot_w), p.slot_b));
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

Prediction predict(const Model& model, const SLUExample& example) {
  Tape tape;
  const BoundParams p = bind(tape, model.params);
  const auto ids = encode_ids(example, model.vocab);
  const EncOutput enc = encode(p, ids);
  const Tensor& intent = intent_distribution(p, enc.h_cls).value();
  const Tensor& slots = slot_distributions(p, enc.tokens).value();
  Prediction out;
  out.intent = model.labels.intents()[argmax(intent.row_span(0))];
  for (std::size_t t = 0; t < slots.rows(); ++t) out.slot_tags.push_back(model.labels.slots()[argmax(slots.row_span(t))]);
  return out;
}

Tensor sentence_vector(const Model& model, const SLUExample& example) {
  Tape tape;
  const BoundParams p = bind(tape, model.params);
  const auto ids = encode_ids(example, model.vocab);
  return encode(p, ids).h_cls.value();
}

}  // namespace glclef
