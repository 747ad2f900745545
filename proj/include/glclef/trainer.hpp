#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "glclef/codeswitch.hpp"
#include "glclef/contrastive.hpp"
#include "glclef/corpus.hpp"
#include "glclef/encoder.hpp"
#include "glclef/metrics.hpp"

namespace glclef {

// Probabilities are clamped to this floor before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossWeights {
  double intent = 1.0;
  double slot = 1.0;
  double li = 0.5;
  double ls = 0.5;
  double gis = 0.5;
  double temperature = 0.07;

  bool contrastive() const { return li > 0.0 || ls > 0.0 || gis > 0.0; }
  void validate() const;
};

struct LossComponents {
  double intent = 0.0;
  double slot = 0.0;
  double li = 0.0;
  double ls = 0.0;
  double gis = 0.0;
  double total = 0.0;

  bool all_finite() const;
  std::string describe() const;
};

// -sum_i y_i log o_i for a one-hot gold label.
Var intent_ce_loss(Var intent_probs, std::size_t gold);
// -sum_j sum_i y_ji log o_ji, summed over tokens.
Var slot_ce_loss(Var slot_probs, std::span<const std::size_t> gold);
// lambda_I L_I + lambda_S L_S + lambda_LI L_LI + lambda_LS L_LS + lambda_GIS L_GIS
double total_loss(const LossComponents& c, const LossWeights& w);

struct ModelConfig {
  std::size_t embed_dim = 32;
  std::size_t hidden_dim = 32;
  double embedding_dropout = 0.0;
  int min_count = 1;

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::size_t queue_capacity = 16;
  std::uint64_t seed = 1;
  LossWeights weights;
  SwitchPolicy policy;
  std::string dev_metric = "overall_acc";
  bool supervise_positive = false;
  bool ls_aligned_only = false;
  bool normalize = true;

  void validate() const;
  SimilarityConfig similarity() const { return {weights.temperature, normalize}; }
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, LossComponents components)
      : std::runtime_error(what), components_(components) {}
  const LossComponents& components() const { return components_; }

 private:
  LossComponents components_;
};

class Adam {
 public:
  Adam(const EncoderParams& params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  // Applies one update from the accumulated gradients.
  void step(EncoderParams& params);
  std::size_t steps() const { return steps_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t steps_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct EncodedExample {
  std::vector<int> ids;  // [CLS] ... [SEP]
  std::size_t intent = 0;
  std::vector<std::size_t> slots;
};

// The positive shares the anchor's labels.
struct TrainPair {
  EncodedExample anchor;
  EncodedExample positive;
};

// Labels must be known to `labels`; throws std::invalid_argument otherwise.
EncodedExample encode_example(const SLUExample& example, const Vocab& vocab, const LabelSets& labels);
TrainPair encode_pair(const ExamplePair& pair, const Vocab& vocab, const LabelSets& labels);

// Batch-mean loss components at the current parameters, measured against
// the queue as given. No update, no dropout.
LossComponents evaluate_batch(std::span<const TrainPair> batch, const EncoderParams& params,
                              const NegativeQueue& queue, const TrainConfig& cfg);

// Encodes anchors and positives, measures the supervised losses on anchors
// and the contrastive losses against the queue as it was before this batch,
// takes one Adam step on the batch-mean objective, then pushes every
// anchor and positive encoding into the queue.
LossComponents train_step(std::span<const TrainPair> batch, EncoderParams& params, Adam& optimizer,
                          NegativeQueue& queue, const TrainConfig& cfg, Rng* dropout_rng = nullptr,
                          double embedding_dropout = 0.0);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossComponents mean_losses;
  LanguageMetrics dev;
};

struct RunRecord {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;  // 1-based
  ModelConfig model;
  TrainConfig train;
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t dropout_seed = 0;
  std::uint64_t switch_seed = 0;

  std::string to_json() const;
};

// Earliest epoch (1-based) with the largest value.
std::size_t select_best_epoch(std::span<const double> dev_metric);

// Source vocabulary (min_count) extended with every translation the
// code-switcher can emit for the pool languages.
Vocab build_training_vocab(const Corpus& train, const BilingualLexicon& lex, const TrainConfig& train_cfg,
                           const ModelConfig& model_cfg);

struct FitResult {
  Model best;
  RunRecord record;
};

FitResult fit(const Corpus& train, const Corpus& dev, const BilingualLexicon& lex, const ModelConfig& model_cfg,
              const TrainConfig& train_cfg);

}  // namespace glclef
