#include "glclef/codeswitch.hpp"

#include <fstream>
#include <stdexcept>

namespace glclef {

void BilingualLexicon::add(const std::string& lang, const std::string& source, const std::string& target) {
  auto& entries = langs_[lang];
  auto [it, inserted] = entries.try_emplace(source);
  if (inserted) source_order_[lang].push_back(source);
  it->second.push_back(target);
}

std::vector<std::string> BilingualLexicon::languages() const {
  std::vector<std::string> out;
  for (const auto& [lang, _] : langs_) out.push_back(lang);
  return out;
}

const std::vector<std::string>* BilingualLexicon::lookup(const std::string& lang, const std::string& word) const {
  auto l = langs_.find(lang);
  if (l == langs_.end()) return nullptr;
  auto w = l->second.find(word);
  return w == l->second.end() ? nullptr : &w->second;
}

const BilingualLexicon::Entries& BilingualLexicon::entries(const std::string& lang) const {
  auto l = langs_.find(lang);
  if (l == langs_.end()) throw std::out_of_range("lexicon has no language '" + lang + "'");
  return l->second;
}

const std::vector<std::string>& BilingualLexicon::sources(const std::string& lang) const {
  static const std::vector<std::string> kNone;
  auto it = source_order_.find(lang);
  return it == source_order_.end() ? kNone : it->second;
}

std::vector<std::string> BilingualLexicon::target_words() const {
  std::vector<std::string> out;
  for (const auto& [lang, order] : source_order_) {
    const auto& entries = langs_.at(lang);
    for (const auto& src : order)
      for (const auto& t : entries.at(src)) out.push_back(t);
  }
  return out;
}

BilingualLexicon load_lexicon(const std::map<std::string, std::filesystem::path>& paths) {
  BilingualLexicon lex;
  for (const auto& [lang, path] : paths) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open lexicon file " + path.string());
    lex.ensure_language(lang);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
          line.find('\t', tab + 1) != std::string::npos) {
        throw ParseError("malformed lexicon line (" + path.string() + " line " + std::to_string(lineno) +
                         "): expected source<TAB>target");
      }
      lex.add(lang, line.substr(0, tab), line.substr(tab + 1));
    }
  }
  return lex;
}

void write_lexicon_file(const std::filesystem::path& path, const BilingualLexicon& lex, const std::string& lang) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& entries = lex.entries(lang);
  for (const auto& src : lex.sources(lang))
    for (const auto& t : entries.at(src)) out << src << '\t' << t << '\n';
}

void validate_policy(const SwitchPolicy& policy, const BilingualLexicon& lex) {
  if (!(policy.replace_prob >= 0.0 && policy.replace_prob <= 1.0)) {
    throw std::invalid_argument("replace_prob must lie in [0, 1]");
  }
  if (policy.languages.empty()) throw std::invalid_argument("code-switch language pool is empty");
  for (const auto& lang : policy.languages) {
    if (!lex.has_language(lang)) throw std::invalid_argument("no lexicon for language '" + lang + "'");
  }
}

SLUExample code_switch(const SLUExample& example, const BilingualLexicon& lex, const SwitchPolicy& policy,
                       Rng& rng) {
  SLUExample out = example;
  if (policy.replace_prob <= 0.0) return out;
  for (auto& word : out.tokens) {
    if (!rng.bernoulli(policy.replace_prob)) continue;
    const auto& lang = policy.languages[rng.below(policy.languages.size())];
    const auto* translations = lex.lookup(lang, word);
    if (translations == nullptr) continue;
    word = (*translations)[rng.below(translations->size())];
  }
  return out;
}

std::vector<ExamplePair> augment_corpus(const Corpus& corpus, const BilingualLexicon& lex,
                                        const SwitchPolicy& policy) {
  validate_policy(policy, lex);
  std::vector<ExamplePair> pairs;
  pairs.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Rng rng(derive_seed(policy.seed, {i}));
    pairs.push_back({corpus[i], code_switch(corpus[i], lex, policy, rng)});
  }
  return pairs;
}

}  // namespace glclef
