#include "glclef/synthetic.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "glclef/rng.hpp"

namespace glclef {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";
constexpr std::size_t kFunctionWords = 12;

class WordMint {
 public:
  explicit WordMint(Rng& rng) : rng_(rng) {}

  std::string fresh() {
    for (;;) {
      const std::size_t syllables = 2 + rng_.below(2);
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w += kConsonants[rng_.below(kConsonants.size())];
        w += kVowels[rng_.below(kVowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

struct Template {
  // Either a literal word or a slot placeholder (slot >= 0).
  struct Element {
    std::string word;
    int slot = -1;
  };
  std::vector<Element> elements;
};

}  // namespace

void validate(const SyntheticSpec& spec) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("synthetic spec: ") + what);
  };
  require(spec.languages >= 1, "languages must be >= 1");
  require(spec.intents >= 1, "intents must be >= 1");
  require(spec.slot_types >= 1, "slot_types must be >= 1");
  require(spec.templates >= 1, "templates must be >= 1");
  require(spec.train >= 1, "train must be >= 1");
  require(spec.dev >= 1, "dev must be >= 1");
  require(spec.test >= 1, "test must be >= 1");
  require(spec.values_per_slot >= 1, "values_per_slot must be >= 1");
  require(spec.multi_translation_fraction >= 0.0 && spec.multi_translation_fraction <= 1.0,
          "multi_translation_fraction must lie in [0, 1]");
}

std::string synthetic_language_code(std::size_t index) { return "l" + std::to_string(index); }

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(derive_seed(spec.seed, {0x51}));
  WordMint mint(rng);
  std::vector<std::string> source_words;
  auto new_word = [&] {
    source_words.push_back(mint.fresh());
    return source_words.back();
  };

  std::vector<std::string> function_words;
  for (std::size_t i = 0; i < kFunctionWords; ++i) function_words.push_back(new_word());

  std::vector<std::string> slot_names;
  std::vector<std::vector<std::vector<std::string>>> slot_values(spec.slot_types);
  for (std::size_t s = 0; s < spec.slot_types; ++s) {
    slot_names.push_back("slot" + std::to_string(s));
    for (std::size_t v = 0; v < spec.values_per_slot; ++v) {
      const std::size_t len = 1 + rng.below(2);
      std::vector<std::string> value;
      for (std::size_t k = 0; k < len; ++k) value.push_back(new_word());
      slot_values[s].push_back(std::move(value));
    }
  }

  std::vector<std::string> intent_names;
  std::vector<std::vector<Template>> templates(spec.intents);
  for (std::size_t c = 0; c < spec.intents; ++c) {
    intent_names.push_back("intent" + std::to_string(c));
    const std::string keywords[2] = {new_word(), new_word()};
    // Each intent draws on a small subset of slot types.
    const std::size_t n_types = std::min<std::size_t>(spec.slot_types, 2 + rng.below(2));
    std::vector<int> types;
    while (types.size() < n_types) {
      const int t = static_cast<int>(rng.below(spec.slot_types));
      if (std::find(types.begin(), types.end(), t) == types.end()) types.push_back(t);
    }
    for (std::size_t t = 0; t < spec.templates; ++t) {
      Template tpl;
      tpl.elements.push_back({keywords[rng.below(2)], -1});
      const std::size_t fillers = 2 + rng.below(3);
      for (std::size_t f = 0; f < fillers; ++f) tpl.elements.push_back({function_words[rng.below(kFunctionWords)], -1});
      const std::size_t n_slots = std::min<std::size_t>(types.size(), 1 + rng.below(2));
      std::vector<int> chosen = types;
      rng.shuffle(chosen.begin(), chosen.end());
      for (std::size_t k = 0; k < n_slots; ++k) tpl.elements.push_back({"", chosen[k]});
      rng.shuffle(tpl.elements.begin(), tpl.elements.end());
      templates[c].push_back(std::move(tpl));
    }
  }

  auto sample = [&] {
    SLUExample ex;
    const auto c = rng.below(spec.intents);
    const auto& tpl = templates[c][rng.below(templates[c].size())];
    for (const auto& el : tpl.elements) {
      if (el.slot < 0) {
        ex.tokens.push_back(el.word);
        ex.slot_tags.push_back("O");
        continue;
      }
      const auto& values = slot_values[static_cast<std::size_t>(el.slot)];
      const auto& value = values[rng.below(values.size())];
      for (std::size_t k = 0; k < value.size(); ++k) {
        ex.tokens.push_back(value[k]);
        ex.slot_tags.push_back((k == 0 ? "B-" : "I-") + slot_names[static_cast<std::size_t>(el.slot)]);
      }
    }
    ex.intent = intent_names[c];
    ex.lang = synthetic_language_code(0);
    return ex;
  };

  SyntheticData data;
  SyntheticLanguage source{synthetic_language_code(0), {}, {}, {}};
  for (std::size_t i = 0; i < spec.train; ++i) source.train.push_back(sample());
  for (std::size_t i = 0; i < spec.dev; ++i) source.dev.push_back(sample());
  for (std::size_t i = 0; i < spec.test; ++i) source.test.push_back(sample());
  data.languages.push_back(std::move(source));

  for (std::size_t l = 1; l < spec.languages; ++l) {
    const std::string code = synthetic_language_code(l);
    data.lexicon.ensure_language(code);
    std::unordered_map<std::string, std::string> primary;
    for (const auto& w : source_words) {
      const std::string t = mint.fresh();
      primary.emplace(w, t);
      data.lexicon.add(code, w, t);
      if (rng.bernoulli(spec.multi_translation_fraction)) data.lexicon.add(code, w, mint.fresh());
    }
    auto translate = [&](const Corpus& corpus) {
      Corpus out = corpus;
      for (auto& ex : out) {
        for (auto& w : ex.tokens) w = primary.at(w);
        ex.lang = code;
      }
      return out;
    };
    const auto& src = data.languages.front();
    data.languages.push_back({code, translate(src.train), translate(src.dev), translate(src.test)});
  }
  return data;
}

}  // namespace glclef
