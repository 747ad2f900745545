#include "glclef/trainer.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace glclef {

namespace {

bool known_metric(const std::string& m) { return m == "intent_acc" || m == "slot_f1" || m == "overall_acc"; }

bool needs_positives(const TrainConfig& cfg, std::size_t queue_capacity) {
  return cfg.weights.contrastive() || cfg.supervise_positive || queue_capacity > 0;
}

struct ItemOutputs {
  EncOutput anchor;
  EncOutput positive;
  bool has_positive = false;
};

// Adds the supervised terms of one example to `acc` and returns their
// weighted sum.
Var supervised(const BoundParams& bp, const EncOutput& enc, const EncodedExample& ex, const LossWeights& w,
               LossComponents& acc) {
  const Var li = intent_ce_loss(intent_distribution(bp, enc.h_cls), ex.intent);
  const Var ls = slot_ce_loss(slot_distributions(bp, enc.tokens), ex.slots);
  acc.intent += li.scalar();
  acc.slot += ls.scalar();
  return add(scale(li, w.intent), scale(ls, w.slot));
}

// Builds the batch-mean objective on `tape`. Contrastive terms with a zero
// weight are not built at all.
Var batch_objective(Tape& tape, const BoundParams& bp, std::span<const TrainPair> batch, const NegativeQueue& queue,
                    const TrainConfig& cfg, const EncodeOptions& options, LossComponents& comps,
                    std::vector<ItemOutputs>& outputs) {
  const LossWeights& w = cfg.weights;
  const SimilarityConfig sc = cfg.similarity();
  const bool positives = needs_positives(cfg, queue.capacity());
  comps = {};
  outputs.clear();
  Var total = tape.constant(Tensor(1, 1, 0.0));
  for (const auto& pair : batch) {
    ItemOutputs out;
    out.anchor = encode(bp, pair.anchor.ids, options);
    if (positives) {
      out.positive = encode(bp, pair.positive.ids, options);
      out.has_positive = true;
    }
    Var item = supervised(bp, out.anchor, pair.anchor, w, comps);
    if (cfg.supervise_positive) item = add(item, supervised(bp, out.positive, pair.positive, w, comps));
    if (w.li > 0.0) {
      const Var l = loss_li(out.anchor.h_cls, out.positive.h_cls, queue, sc);
      comps.li += l.scalar();
      item = add(item, scale(l, w.li));
    }
    if (w.ls > 0.0) {
      const Var l = loss_ls(out.anchor.tokens, out.positive.tokens, queue, sc, cfg.ls_aligned_only);
      comps.ls += l.scalar();
      item = add(item, scale(l, w.ls));
    }
    if (w.gis > 0.0) {
      const Var l = loss_gis(out.anchor.h_cls, out.anchor.tokens, out.positive.tokens, queue, sc);
      comps.gis += l.scalar();
      item = add(item, scale(l, w.gis));
    }
    total = add(total, item);
    outputs.push_back(out);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  comps.intent *= inv;
  comps.slot *= inv;
  comps.li *= inv;
  comps.ls *= inv;
  comps.gis *= inv;
  comps.total = total_loss(comps, w);
  return scale(total, inv);
}

void accumulate(LossComponents& acc, const LossComponents& c, double weight) {
  acc.intent += weight * c.intent;
  acc.slot += weight * c.slot;
  acc.li += weight * c.li;
  acc.ls += weight * c.ls;
  acc.gis += weight * c.gis;
  acc.total += weight * c.total;
}

nlohmann::ordered_json losses_json(const LossComponents& c) {
  return {{"intent", c.intent}, {"slot", c.slot}, {"li", c.li},
          {"ls", c.ls},         {"gis", c.gis},   {"total", c.total}};
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> all[] = {
      {"intent", intent}, {"slot", slot}, {"li", li}, {"ls", ls}, {"gis", gis}};
  for (const auto& [name, v] : all) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("loss weight '") + name + "' must be a finite value >= 0");
    }
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw std::invalid_argument("temperature must be a finite value > 0");
  }
}

bool LossComponents::all_finite() const {
  return std::isfinite(intent) && std::isfinite(slot) && std::isfinite(li) && std::isfinite(ls) &&
         std::isfinite(gis) && std::isfinite(total);
}

std::string LossComponents::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "L_I=" << intent << " L_S=" << slot << " L_LI=" << li << " L_LS=" << ls << " L_GIS=" << gis
     << " total=" << total;
  return os.str();
}

Var intent_ce_loss(Var intent_probs, std::size_t gold) {
  if (intent_probs.rows() != 1) throw DimensionError("intent_ce_loss: expected a single distribution row");
  const std::size_t g[] = {gold};
  return nll_rows(intent_probs, g, kProbabilityFloor);
}

Var slot_ce_loss(Var slot_probs, std::span<const std::size_t> gold) {
  if (slot_probs.rows() != gold.size()) {
    throw DimensionError("slot_ce_loss: " + std::to_string(slot_probs.rows()) + " distributions for " +
                         std::to_string(gold.size()) + " gold tags");
  }
  return nll_rows(slot_probs, gold, kProbabilityFloor);
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  return w.intent * c.intent + w.slot * c.slot + w.li * c.li + w.ls * c.ls + w.gis * c.gis;
}

void ModelConfig::validate() const {
  if (embed_dim == 0 || hidden_dim == 0) throw std::invalid_argument("embed_dim and hidden_dim must be positive");
  if (!(embedding_dropout >= 0.0 && embedding_dropout < 1.0)) {
    throw std::invalid_argument("embedding_dropout must lie in [0, 1)");
  }
  if (min_count < 1) throw std::invalid_argument("min_count must be >= 1");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning rate must be a finite value > 0");
  }
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  weights.validate();
  if (!known_metric(dev_metric)) {
    throw std::invalid_argument("unknown dev metric '" + dev_metric + "' (intent_acc, slot_f1, overall_acc)");
  }
}

Adam::Adam(const EncoderParams& params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  params.for_each([this](const std::string&, const Tensor& t) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  });
}

void Adam::step(EncoderParams& params) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  std::size_t k = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    if (k >= m_.size() || m_[k].size() != t.size()) throw ContractError("Adam: parameter layout changed at " + name);
    if (!t.requires_grad()) throw ContractError("Adam: no gradient for " + name);
    auto values = t.values();
    const auto grad = std::as_const(t).grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      values[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
    }
    ++k;
  });
}

EncodedExample encode_example(const SLUExample& example, const Vocab& vocab, const LabelSets& labels) {
  if (example.tokens.empty()) throw std::invalid_argument("cannot train on an empty utterance");
  if (example.tokens.size() != example.slot_tags.size()) {
    throw std::invalid_argument("tag count does not match token count");
  }
  EncodedExample out;
  out.ids = encode_ids(example, vocab);
  const auto intent = labels.intent_index(example.intent);
  if (!intent) throw std::invalid_argument("unknown intent label '" + example.intent + "'");
  out.intent = *intent;
  for (const auto& tag : example.slot_tags) {
    const auto s = labels.slot_index(tag);
    if (!s) throw std::invalid_argument("unknown slot tag '" + tag + "'");
    out.slots.push_back(*s);
  }
  return out;
}

TrainPair encode_pair(const ExamplePair& pair, const Vocab& vocab, const LabelSets& labels) {
  return {encode_example(pair.anchor, vocab, labels), encode_example(pair.positive, vocab, labels)};
}

LossComponents evaluate_batch(std::span<const TrainPair> batch, const EncoderParams& params,
                              const NegativeQueue& queue, const TrainConfig& cfg) {
  if (batch.empty()) throw ContractError("evaluate_batch: empty batch");
  Tape tape;
  const BoundParams bp = bind(tape, params);
  LossComponents comps;
  std::vector<ItemOutputs> outputs;
  batch_objective(tape, bp, batch, queue, cfg, {}, comps, outputs);
  return comps;
}

LossComponents train_step(std::span<const TrainPair> batch, EncoderParams& params, Adam& optimizer,
                          NegativeQueue& queue, const TrainConfig& cfg, Rng* dropout_rng, double embedding_dropout) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  if (queue.dim() != params.dims.repr_dim()) {
    throw ContractError("train_step: queue width " + std::to_string(queue.dim()) + " does not match model width " +
                        std::to_string(params.dims.repr_dim()));
  }
  params.set_requires_grad(true);
  params.zero_grad();
  Tape tape;
  const BoundParams bp = bind(tape, params);
  EncodeOptions options;
  if (embedding_dropout > 0.0) {
    if (dropout_rng == nullptr) throw ContractError("train_step: dropout needs a random stream");
    options = {embedding_dropout, dropout_rng};
  }
  LossComponents comps;
  std::vector<ItemOutputs> outputs;
  const Var objective = batch_objective(tape, bp, batch, queue, cfg, options, comps, outputs);
  if (!comps.all_finite() || !std::isfinite(objective.scalar())) {
    throw TrainingDiverged("non-finite training loss: " + comps.describe(), comps);
  }
  tape.backward(objective);
  optimizer.step(params);
  for (const auto& out : outputs) {
    queue.push(out.anchor);
    if (out.has_positive) queue.push(out.positive);
  }
  return comps;
}

std::size_t select_best_epoch(std::span<const double> dev_metric) {
  if (dev_metric.empty()) throw ContractError("select_best_epoch: no epochs");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_metric.size(); ++i)
    if (dev_metric[i] > dev_metric[best]) best = i;
  return best + 1;
}

Vocab build_training_vocab(const Corpus& train, const BilingualLexicon& lex, const TrainConfig& train_cfg,
                           const ModelConfig& model_cfg) {
  Vocab vocab = build_vocab(train, model_cfg.min_count);
  if (!needs_positives(train_cfg, train_cfg.queue_capacity)) return vocab;
  for (const auto& lang : train_cfg.policy.languages) {
    if (!lex.has_language(lang)) continue;
    for (const auto& source : lex.sources(lang))
      for (const auto& target : *lex.lookup(lang, source)) vocab.add(target);
  }
  return vocab;
}

std::string RunRecord::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["selected_epoch"] = selected_epoch;
  j["seeds"] = {{"run", train.seed},
                {"init", init_seed},
                {"shuffle", shuffle_seed},
                {"dropout", dropout_seed},
                {"code_switch", switch_seed}};
  j["model"] = {{"embed_dim", model.embed_dim},
                {"hidden_dim", model.hidden_dim},
                {"embedding_dropout", model.embedding_dropout},
                {"min_count", model.min_count}};
  const LossWeights& w = train.weights;
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"queue_capacity", train.queue_capacity},
                {"dev_metric", train.dev_metric},
                {"supervise_positive", train.supervise_positive},
                {"ls_aligned_only", train.ls_aligned_only},
                {"normalize", train.normalize}};
  j["loss_weights"] = {{"intent", w.intent}, {"slot", w.slot}, {"li", w.li},
                       {"ls", w.ls},         {"gis", w.gis},   {"temperature", w.temperature}};
  j["switch"] = {{"replace_prob", train.policy.replace_prob},
                 {"languages", train.policy.languages},
                 {"seed", train.policy.seed}};
  j["epochs"] = ordered_json::array();
  for (const auto& e : epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"losses", losses_json(e.mean_losses)},
                           {"dev",
                            {{"lang", e.dev.lang},
                             {"intent_acc", e.dev.intent_acc},
                             {"slot_f1", e.dev.slot_f1},
                             {"overall_acc", e.dev.overall_acc}}}});
  }
  return j.dump(2) + "\n";
}

FitResult fit(const Corpus& train, const Corpus& dev, const BilingualLexicon& lex, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg) {
  model_cfg.validate();
  train_cfg.validate();
  if (train.empty()) throw std::invalid_argument("training corpus is empty");
  if (dev.empty()) throw std::invalid_argument("dev corpus is empty");
  const bool positives = needs_positives(train_cfg, train_cfg.queue_capacity);
  if (positives) validate_policy(train_cfg.policy, lex);

  RunRecord record;
  record.model = model_cfg;
  record.train = train_cfg;
  record.init_seed = derive_seed(train_cfg.seed, {1});
  record.shuffle_seed = derive_seed(train_cfg.seed, {2});
  record.dropout_seed = derive_seed(train_cfg.seed, {3});
  record.switch_seed = derive_seed(train_cfg.seed, {4, train_cfg.policy.seed});

  Model model;
  model.labels = LabelSets::from_corpus(train);
  model.vocab = build_training_vocab(train, lex, train_cfg, model_cfg);
  ModelDims dims;
  dims.vocab_size = model.vocab.size();
  dims.embed_dim = model_cfg.embed_dim;
  dims.hidden_dim = model_cfg.hidden_dim;
  dims.num_intents = model.labels.num_intents();
  dims.num_slots = model.labels.num_slots();
  model.params = init_params(dims, record.init_seed);

  Adam optimizer(model.params, train_cfg.learning_rate);
  NegativeQueue queue(train_cfg.queue_capacity, dims.repr_dim());
  Rng shuffle_rng(record.shuffle_seed);
  Rng dropout_rng(record.dropout_seed);
  const std::string dev_lang = dev.front().lang;

  std::vector<EncodedExample> anchors;
  anchors.reserve(train.size());
  for (const auto& ex : train) anchors.push_back(encode_example(ex, model.vocab, model.labels));

  EncoderParams best = model.params;
  std::vector<double> dev_scores;
  std::vector<std::size_t> order(train.size());
  for (std::size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    std::vector<TrainPair> pairs;
    pairs.reserve(train.size());
    if (positives) {
      SwitchPolicy policy = train_cfg.policy;
      policy.seed = derive_seed(record.switch_seed, {epoch});
      const auto augmented = augment_corpus(train, lex, policy);
      for (std::size_t i = 0; i < train.size(); ++i)
        pairs.push_back({anchors[i], encode_example(augmented[i].positive, model.vocab, model.labels)});
    } else {
      for (const auto& a : anchors) pairs.push_back({a, a});
    }

    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());

    LossComponents epoch_losses;
    std::vector<TrainPair> batch;
    for (std::size_t start = 0; start < order.size(); start += train_cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + train_cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
      const LossComponents c = train_step(batch, model.params, optimizer, queue, train_cfg, &dropout_rng,
                                          model_cfg.embedding_dropout);
      accumulate(epoch_losses, c, static_cast<double>(batch.size()) / static_cast<double>(order.size()));
    }

    EpochRecord er;
    er.epoch = epoch;
    er.mean_losses = epoch_losses;
    er.dev = evaluate_corpus(model, dev, dev_lang);
    const double score = er.dev.get(train_cfg.dev_metric);
    if (dev_scores.empty() || score > dev_scores[select_best_epoch(dev_scores) - 1]) best = model.params;
    dev_scores.push_back(score);
    record.epochs.push_back(er);
  }
  record.selected_epoch = select_best_epoch(dev_scores);
  model.params = std::move(best);
  model.params.set_requires_grad(false);
  return {std::move(model), std::move(record)};
}

}  // namespace glclef
