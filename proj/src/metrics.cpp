#include "glclef/metrics.hpp"

#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace glclef {

std::vector<Span> extract_spans(std::span<const std::string> tags) {
  std::vector<Span> spans;
  bool open = false;
  Span cur;
  auto close = [&](std::size_t last) {
    if (!open) return;
    cur.end = last;
    spans.push_back(cur);
    open = false;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::string& tag = tags[i];
    if (tag.size() < 3 || tag[1] != '-') {
      close(i - 1);
      continue;
    }
    const std::string type = tag.substr(2);
    if (tag[0] == 'I' && open && cur.type == type) continue;
    close(i - 1);
    cur = Span{i, i, type};
    open = true;
  }
  if (!tags.empty()) close(tags.size() - 1);
  return spans;
}

double intent_accuracy(std::span<const std::string> predicted, std::span<const std::string> gold) {
  if (predicted.size() != gold.size()) throw ContractError("intent_accuracy: length mismatch");
  if (gold.empty()) throw ContractError("intent_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += predicted[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

F1Score slot_f1(std::span<const std::vector<std::string>> predicted, std::span<const std::vector<std::string>> gold) {
  if (predicted.size() != gold.size()) throw ContractError("slot_f1: utterance count mismatch");
  F1Score s;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    if (predicted[u].size() != gold[u].size()) {
      throw ContractError("slot_f1: tag count mismatch in utterance " + std::to_string(u));
    }
    const auto p = extract_spans(predicted[u]);
    const auto g = extract_spans(gold[u]);
    const std::set<Span> gold_set(g.begin(), g.end());
    for (const auto& span : p) s.correct += gold_set.contains(span);
    s.predicted += p.size();
    s.gold += g.size();
  }
  if (s.predicted == 0 && s.gold == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = s.predicted ? static_cast<double>(s.correct) / static_cast<double>(s.predicted) : 0.0;
  s.recall = s.gold ? static_cast<double>(s.correct) / static_cast<double>(s.gold) : 0.0;
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

double overall_accuracy(std::span<const Prediction> predicted, std::span<const Prediction> gold) {
  if (predicted.size() != gold.size()) throw ContractError("overall_accuracy: length mismatch");
  if (gold.empty()) throw ContractError("overall_accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    hits += predicted[i].intent == gold[i].intent && predicted[i].slot_tags == gold[i].slot_tags;
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double LanguageMetrics::get(const std::string& metric) const {
  if (metric == "intent_acc") return intent_acc;
  if (metric == "slot_f1") return slot_f1;
  if (metric == "overall_acc") return overall_acc;
  throw std::invalid_argument("unknown metric '" + metric + "'");
}

MetricsReport make_report(std::vector<LanguageMetrics> languages) {
  MetricsReport r;
  r.languages = std::move(languages);
  r.average.lang = "AVG";
  if (r.languages.empty()) return r;
  for (const auto& m : r.languages) {
    r.average.intent_acc += m.intent_acc;
    r.average.slot_f1 += m.slot_f1;
    r.average.overall_acc += m.overall_acc;
    r.average.examples += m.examples;
  }
  const auto n = static_cast<double>(r.languages.size());
  r.average.intent_acc /= n;
  r.average.slot_f1 /= n;
  r.average.overall_acc /= n;
  return r;
}

std::string MetricsReport::to_json() const {
  auto row = [](const LanguageMetrics& m) {
    return nlohmann::ordered_json{{"lang", m.lang},
                                  {"intent_acc", m.intent_acc},
                                  {"slot_f1", m.slot_f1},
                                  {"overall_acc", m.overall_acc},
                                  {"examples", m.examples}};
  };
  nlohmann::ordered_json j;
  j["languages"] = nlohmann::ordered_json::array();
  for (const auto& m : languages) j["languages"].push_back(row(m));
  j["average"] = row(average);
  return j.dump(2) + "\n";
}

std::string MetricsReport::to_table() const {
  std::vector<const LanguageMetrics*> cols;
  for (const auto& m : languages) cols.push_back(&m);
  cols.push_back(&average);
  std::ostringstream os;
  auto cell = [&os](const std::string& s, int width) {
    os << s;
    for (int i = static_cast<int>(s.size()); i < width; ++i) os << ' ';
  };
  constexpr int kLabel = 18, kCell = 9;
  cell("", kLabel);
  for (const auto* m : cols) cell(m->lang, kCell);
  os << '\n';
  const std::pair<const char*, double LanguageMetrics::*> rows[] = {{"Intent Accuracy", &LanguageMetrics::intent_acc},
                                                                    {"Slot F1", &LanguageMetrics::slot_f1},
                                                                    {"Overall Accuracy", &LanguageMetrics::overall_acc}};
  for (const auto& [name, field] : rows) {
    cell(name, kLabel);
    for (const auto* m : cols) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", 100.0 * (m->*field));
      cell(buf, kCell);
    }
    os << '\n';
  }
  return os.str();
}

Prediction gold_frame(const SLUExample& example) { return Prediction{example.intent, example.slot_tags}; }

LanguageMetrics evaluate_corpus(const Model& model, const Corpus& corpus, const std::string& lang,
                                std::vector<std::string>* warnings) {
  if (corpus.empty()) throw ContractError("evaluate_corpus: empty corpus for " + lang);
  std::vector<Prediction> pred, gold;
  std::set<std::string> unseen;
  for (const auto& ex : corpus) {
    pred.push_back(predict(model, ex));
    gold.push_back(gold_frame(ex));
    if (!model.labels.intent_index(ex.intent)) unseen.insert("intent " + ex.intent);
    for (const auto& t : ex.slot_tags)
      if (!model.labels.slot_index(t)) unseen.insert("slot tag " + t);
  }
  if (warnings) {
    for (const auto& u : unseen) warnings->push_back(lang + ": gold " + u + " is unknown to the model");
  }
  std::vector<std::string> pi, gi;
  std::vector<std::vector<std::string>> ps, gs;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pi.push_back(pred[i].intent);
    gi.push_back(gold[i].intent);
    ps.push_back(pred[i].slot_tags);
    gs.push_back(gold[i].slot_tags);
  }
  LanguageMetrics m;
  m.lang = lang;
  m.intent_acc = intent_accuracy(pi, gi);
  m.slot_f1 = slot_f1(ps, gs).f1;
  m.overall_acc = overall_accuracy(pred, gold);
  m.examples = corpus.size();
  return m;
}

MetricsReport zero_shot_report(const Model& model, const std::vector<std::pair<std::string, Corpus>>& corpora,
                               std::vector<std::string>* warnings) {
  std::vector<LanguageMetrics> rows;
  for (const auto& [lang, corpus] : corpora) rows.push_back(evaluate_corpus(model, corpus, lang, warnings));
  return make_report(std::move(rows));
}

}  // namespace glclef
