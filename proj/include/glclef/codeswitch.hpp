#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "glclef/corpus.hpp"
#include "glclef/rng.hpp"

namespace glclef {

// target language -> source word -> translations (file order, non-empty).
class BilingualLexicon {
 public:
  using Entries = std::unordered_map<std::string, std::vector<std::string>>;

  void add(const std::string& lang, const std::string& source, const std::string& target);
  // Registers a language with no entries (an empty dictionary file).
  void ensure_language(const std::string& lang) { langs_[lang]; }

  bool has_language(const std::string& lang) const { return langs_.contains(lang); }
  std::vector<std::string> languages() const;
  // nullptr when the word has no entry for `lang`.
  const std::vector<std::string>* lookup(const std::string& lang, const std::string& word) const;
  const Entries& entries(const std::string& lang) const;
  // Source words of `lang` in insertion order.
  const std::vector<std::string>& sources(const std::string& lang) const;

  // All translation words, deterministic order (language, then file order).
  std::vector<std::string> target_words() const;

 private:
  std::map<std::string, Entries> langs_;
  std::map<std::string, std::vector<std::string>> source_order_;
};

// Reads `source<TAB>target` lines per language file (MUSE layout).
BilingualLexicon load_lexicon(const std::map<std::string, std::filesystem::path>& paths);
void write_lexicon_file(const std::filesystem::path& path, const BilingualLexicon& lex, const std::string& lang);

struct SwitchPolicy {
  double replace_prob = 0.9;
  std::vector<std::string> languages;
  std::uint64_t seed = 0;
};

// Throws std::invalid_argument naming the offending language or value.
void validate_policy(const SwitchPolicy& policy, const BilingualLexicon& lex);

// Builds the code-switched positive view of `example`: each word, with
// probability replace_prob, is swapped for a uniformly drawn translation in a
// uniformly drawn pool language. Words without an entry in the drawn
// language stay as they are. Tags and intent are copied unchanged.
SLUExample code_switch(const SLUExample& example, const BilingualLexicon& lex, const SwitchPolicy& policy,
                       Rng& rng);

struct ExamplePair {
  SLUExample anchor;
  SLUExample positive;
};

// One positive per anchor; example i uses the stream derive_seed(seed, {i}).
std::vector<ExamplePair> augment_corpus(const Corpus& corpus, const BilingualLexicon& lex,
                                        const SwitchPolicy& policy);

}  // namespace glclef
