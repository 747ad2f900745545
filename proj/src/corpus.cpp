#include "glclef/corpus.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "glclef/rng.hpp"

namespace glclef {

namespace {

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ' ';
    out += parts[i];
  }
  return out;
}

}  // namespace

bool is_bio_tag(std::string_view tag) {
  if (tag == "O") return true;
  return tag.size() > 2 && (tag[0] == 'B' || tag[0] == 'I') && tag[1] == '-';
}

Corpus parse_tsv(std::istream& in, const std::string& lang, const std::string& source) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto where = [&] { return " (" + (source == "<stream>" ? "" : source + " ") + "line " + std::to_string(lineno) + ")"; };

    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos) {
      throw ParseError("expected 3 tab-separated fields" + where());
    }
    SLUExample ex;
    ex.tokens = split_spaces(std::string_view(line).substr(0, t1));
    ex.slot_tags = split_spaces(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    ex.intent = line.substr(t2 + 1);
    ex.lang = lang;
    if (ex.tokens.empty()) throw ParseError("empty utterance" + where());
    if (ex.slot_tags.size() != ex.tokens.size()) {
      throw ParseError("tag count " + std::to_string(ex.slot_tags.size()) + " ≠ token count " +
                       std::to_string(ex.tokens.size()) + where());
    }
    for (const auto& tag : ex.slot_tags) {
      if (!is_bio_tag(tag)) throw ParseError("malformed BIO tag '" + tag + "'" + where());
    }
    if (ex.intent.empty()) throw ParseError("empty intent" + where());
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

Corpus parse_tsv(const std::filesystem::path& path, const std::string& lang) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file " + path.string());
  return parse_tsv(in, lang, path.string());
}

std::string serialize_tsv(const Corpus& corpus) {
  std::string out;
  for (const auto& ex : corpus) {
    out += join(ex.tokens);
    out += '\t';
    out += join(ex.slot_tags);
    out += '\t';
    out += ex.intent;
    out += '\n';
  }
  return out;
}

void write_tsv(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_tsv(corpus);
}

// ---------------------------------------------------------------- Vocab

Vocab::Vocab() {
  for (auto w : kReserved) add(std::string(w));
}

Vocab Vocab::from_words(const std::vector<std::string>& words) {
  if (words.size() < kReserved.size()) throw ParseError("vocabulary lacks reserved tokens");
  for (std::size_t i = 0; i < kReserved.size(); ++i) {
    if (words[i] != kReserved[i]) throw ParseError("vocabulary reserved token mismatch at id " + std::to_string(i));
  }
  Vocab v;
  for (std::size_t i = kReserved.size(); i < words.size(); ++i) {
    if (v.contains(words[i])) throw ParseError("duplicate vocabulary word '" + words[i] + "'");
    v.add(words[i]);
  }
  return v;
}

int Vocab::add(const std::string& word) {
  auto [it, inserted] = index_.try_emplace(word, static_cast<int>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

int Vocab::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const { return words_.at(static_cast<std::size_t>(id)); }

Vocab build_vocab(const Corpus& corpus, int min_count) {
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, int> counts;
  std::vector<std::string> order;
  for (const auto& ex : corpus)
    for (const auto& w : ex.tokens)
      if (counts[w]++ == 0) order.push_back(w);
  Vocab vocab;
  for (const auto& w : order)
    if (counts[w] >= min_count) vocab.add(w);
  return vocab;
}

std::vector<int> encode_ids(const SLUExample& example, const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(example.tokens.size() + 2);
  ids.push_back(Vocab::kCls);
  for (const auto& w : example.tokens) ids.push_back(vocab.id(w));
  ids.push_back(Vocab::kSep);
  return ids;
}

// ---------------------------------------------------------------- labels

LabelSets::LabelSets(std::vector<std::string> intents, std::vector<std::string> slots)
    : intents_(std::move(intents)), slots_(std::move(slots)) {
  for (std::size_t i = 0; i < intents_.size(); ++i) {
    if (!intent_index_.emplace(intents_[i], i).second) throw ParseError("duplicate intent label " + intents_[i]);
  }
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (!slot_index_.emplace(slots_[i], i).second) throw ParseError("duplicate slot tag " + slots_[i]);
  }
}

LabelSets LabelSets::from_corpus(const Corpus& train) {
  std::vector<std::string> intents, slots;
  std::unordered_map<std::string, bool> seen_i, seen_s;
  for (const auto& ex : train) {
    if (!seen_i[ex.intent]) {
      seen_i[ex.intent] = true;
      intents.push_back(ex.intent);
    }
    for (const auto& t : ex.slot_tags) {
      if (!seen_s[t]) {
        seen_s[t] = true;
        slots.push_back(t);
      }
    }
  }
  return LabelSets(std::move(intents), std::move(slots));
}

std::optional<std::size_t> LabelSets::intent_index(const std::string& label) const {
  auto it = intent_index_.find(label);
  if (it == intent_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> LabelSets::slot_index(const std::string& tag) const {
  auto it = slot_index_.find(tag);
  if (it == slot_index_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------- split

CorpusSplit split_corpus(const Corpus& corpus, std::array<double, 3> ratios, std::uint64_t seed) {
  const double total = ratios[0] + ratios[1] + ratios[2];
  for (double r : ratios) {
    if (r < 0.0) throw std::invalid_argument("split_corpus: negative ratio");
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("split_corpus: ratios must sum to 1");

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5117}));
  rng.shuffle(order.begin(), order.end());

  const auto n = static_cast<double>(corpus.size());
  const auto n_train = static_cast<std::size_t>(std::llround(n * ratios[0]));
  const auto n_dev = std::min(corpus.size() - n_train, static_cast<std::size_t>(std::llround(n * ratios[1])));
  CorpusSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& ex = corpus[order[i]];
    if (i < n_train) split.train.push_back(ex);
    else if (i < n_train + n_dev) split.dev.push_back(ex);
    else split.test.push_back(ex);
  }
  return split;
}

}  // namespace glclef
