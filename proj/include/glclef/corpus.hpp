#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace glclef {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One utterance with word-level BIO slot tags and a sentence intent.
struct SLUExample {
  std::vector<std::string> tokens;
  std::vector<std::string> slot_tags;
  std::string intent;
  std::string lang;

  bool operator==(const SLUExample&) const = default;
};

using Corpus = std::vector<SLUExample>;

// O, B-<type> or I-<type> with a non-empty type.
bool is_bio_tag(std::string_view tag);

// Reads `tokens<TAB>bio_tags<TAB>intent` lines. Blank lines and lines
// starting with '#' are skipped. `lang` is stamped on every example.
Corpus parse_tsv(const std::filesystem::path& path, const std::string& lang);
Corpus parse_tsv(std::istream& in, const std::string& lang, const std::string& source = "<stream>");

std::string serialize_tsv(const Corpus& corpus);
void write_tsv(const std::filesystem::path& path, const Corpus& corpus);

class Vocab {
 public:
  static constexpr int kCls = 0;
  static constexpr int kSep = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr std::array<std::string_view, 4> kReserved = {"[CLS]", "[SEP]", "[PAD]", "[UNK]"};

  Vocab();
  // Rebuilds a vocabulary from its id-ordered word list (checkpoint form).
  static Vocab from_words(const std::vector<std::string>& words);

  // Adds `word` if absent; returns its id.
  int add(const std::string& word);
  int id(const std::string& word) const;  // kUnk when absent
  bool contains(const std::string& word) const { return index_.contains(word); }
  const std::string& word(int id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocab& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

// Reserved tokens first, then words seen at least `min_count` times in
// first-appearance order.
Vocab build_vocab(const Corpus& corpus, int min_count);

// [CLS] x_1 ... x_n [SEP]
std::vector<int> encode_ids(const SLUExample& example, const Vocab& vocab);

class LabelSets {
 public:
  LabelSets() = default;
  LabelSets(std::vector<std::string> intents, std::vector<std::string> slots);
  static LabelSets from_corpus(const Corpus& train);

  std::size_t num_intents() const { return intents_.size(); }
  std::size_t num_slots() const { return slots_.size(); }
  const std::vector<std::string>& intents() const { return intents_; }
  const std::vector<std::string>& slots() const { return slots_; }
  std::optional<std::size_t> intent_index(const std::string& label) const;
  std::optional<std::size_t> slot_index(const std::string& tag) const;

  bool operator==(const LabelSets& other) const {
    return intents_ == other.intents_ && slots_ == other.slots_;
  }

 private:
  std::vector<std::string> intents_;
  std::vector<std::string> slots_;
  std::unordered_map<std::string, std::size_t> intent_index_;
  std::unordered_map<std::string, std::size_t> slot_index_;
};

struct CorpusSplit {
  Corpus train;
  Corpus dev;
  Corpus test;
};

// Seeded shuffle, then contiguous train/dev/test blocks sized by rounding.
CorpusSplit split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace glclef
