#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glclef/corpus.hpp"
#include "glclef/encoder.hpp"

namespace glclef {

struct Span {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::string type;

  auto operator<=>(const Span&) const = default;
};

// conlleval chunking: B-X opens a span; I-X continues a span of type X and
// otherwise opens a new one; O closes.
std::vector<Span> extract_spans(std::span<const std::string> tags);

double intent_accuracy(std::span<const std::string> predicted, std::span<const std::string> gold);

struct F1Score {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

// Micro-averaged exact span F1. Defined as 1 when neither side has a span.
F1Score slot_f1(std::span<const std::vector<std::string>> predicted, std::span<const std::vector<std::string>> gold);

// Fraction of utterances whose intent and every slot tag are right.
double overall_accuracy(std::span<const Prediction> predicted, std::span<const Prediction> gold);

struct LanguageMetrics {
  std::string lang;
  double intent_acc = 0.0;
  double slot_f1 = 0.0;
  double overall_acc = 0.0;
  std::size_t examples = 0;

  double get(const std::string& metric) const;
};

struct MetricsReport {
  std::vector<LanguageMetrics> languages;
  LanguageMetrics average;  // unweighted mean over languages, lang "AVG"

  std::string to_json() const;
  // Metrics as rows, languages as columns, AVG last; values in percent.
  std::string to_table() const;
};

MetricsReport make_report(std::vector<LanguageMetrics> languages);

Prediction gold_frame(const SLUExample& example);

// Labels unknown to the model are reported through `warnings` and can never
// be predicted, so those utterances count as wrong.
LanguageMetrics evaluate_corpus(const Model& model, const Corpus& corpus, const std::string& lang,
                                std::vector<std::string>* warnings = nullptr);

// Applies the source-trained model unchanged to each language's corpus.
MetricsReport zero_shot_report(const Model& model, const std::vector<std::pair<std::string, Corpus>>& corpora,
                               std::vector<std::string>* warnings = nullptr);

}  // namespace glclef
