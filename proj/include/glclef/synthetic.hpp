#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glclef/codeswitch.hpp"
#include "glclef/corpus.hpp"

namespace glclef {

// Desk-scale pseudo-multilingual SLU corpus. Language 0 is the source; every
// other language is a word-for-word bijective substitution of it, so tags
// and intents line up example by example.
struct SyntheticSpec {
  std::size_t languages = 3;
  std::size_t intents = 8;
  std::size_t slot_types = 10;
  std::size_t templates = 4;  // per intent
  std::size_t train = 500;
  std::size_t dev = 100;
  std::size_t test = 100;
  std::size_t values_per_slot = 6;
  double multi_translation_fraction = 0.2;
  std::uint64_t seed = 1;

  bool operator==(const SyntheticSpec&) const = default;
};

// Throws std::invalid_argument describing the first violated constraint.
void validate(const SyntheticSpec& spec);

struct SyntheticLanguage {
  std::string code;
  Corpus train;
  Corpus dev;
  Corpus test;
};

struct SyntheticData {
  std::vector<SyntheticLanguage> languages;  // [0] is the source
  // Source word -> translations for every target language. The first
  // translation is the one used in that language's corpora.
  BilingualLexicon lexicon;
};

std::string synthetic_language_code(std::size_t index);

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace glclef
