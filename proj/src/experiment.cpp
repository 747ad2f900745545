#include "glclef/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "glclef/checkpoint.hpp"
#include "json.hpp"

namespace glclef {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// ---- strict JSON readers ---------------------------------------------------

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw InputError(where + ": expected a JSON object");
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw InputError(where + ": unknown key '" + key + "'");
    }
  }
}

std::string field(const std::string& where, const std::string& key) { return where + "." + key; }

double read_double(const json& j, const std::string& where, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw InputError(field(where, key) + ": expected a number");
  return v.get<double>();
}

std::uint64_t read_u64(const json& j, const std::string& where, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw InputError(field(where, key) + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::size_t read_size(const json& j, const std::string& where, const char* key, std::size_t fallback) {
  return static_cast<std::size_t>(read_u64(j, where, key, fallback));
}

bool read_bool(const json& j, const std::string& where, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) throw InputError(field(where, key) + ": expected true or false");
  return v.get<bool>();
}

std::string read_string(const json& j, const std::string& where, const char* key, const std::string& fallback,
                        bool required = false) {
  if (!j.contains(key)) {
    if (required) throw InputError(field(where, key) + ": required");
    return fallback;
  }
  const json& v = j.at(key);
  if (!v.is_string()) throw InputError(field(where, key) + ": expected a string");
  return v.get<std::string>();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(what + " is not valid JSON: " + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

SyntheticSpec synthetic_from(const json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"languages", "intents", "slot_types", "templates", "train", "dev", "test", "values_per_slot",
                  "multi_translation_fraction", "seed"});
  SyntheticSpec s;
  s.languages = read_size(j, where, "languages", s.languages);
  s.intents = read_size(j, where, "intents", s.intents);
  s.slot_types = read_size(j, where, "slot_types", s.slot_types);
  s.templates = read_size(j, where, "templates", s.templates);
  s.train = read_size(j, where, "train", s.train);
  s.dev = read_size(j, where, "dev", s.dev);
  s.test = read_size(j, where, "test", s.test);
  s.values_per_slot = read_size(j, where, "values_per_slot", s.values_per_slot);
  s.multi_translation_fraction = read_double(j, where, "multi_translation_fraction", s.multi_translation_fraction);
  s.seed = read_u64(j, where, "seed", s.seed);
  try {
    validate(s);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  return s;
}

ojson synthetic_json(const SyntheticSpec& s) {
  return {{"languages", s.languages},
          {"intents", s.intents},
          {"slot_types", s.slot_types},
          {"templates", s.templates},
          {"train", s.train},
          {"dev", s.dev},
          {"test", s.test},
          {"values_per_slot", s.values_per_slot},
          {"multi_translation_fraction", s.multi_translation_fraction},
          {"seed", s.seed}};
}

LangPaths lang_paths_from(const json& j, const std::string& where, const fs::path& base) {
  require_object(j, where);
  LangPaths out;
  for (const auto& [lang, v] : j.items()) {
    if (!v.is_string()) throw InputError(field(where, lang) + ": expected a path string");
    out.emplace_back(lang, resolve(base, v.get<std::string>()));
  }
  return out;
}

// Wraps library argument errors so callers see one error type per exit code.
template <typename F>
auto as_input_error(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError& e) {
    throw InputError(e.what());
  } catch (const CheckpointError& e) {
    throw InputError(e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  } catch (const fs::filesystem_error& e) {
    throw InputError(e.what());
  }
}

Corpus load_corpus(const fs::path& path, const std::string& lang) {
  return as_input_error([&] {
    if (!fs::is_regular_file(path)) throw InputError("corpus file not found: " + path.string());
    return parse_tsv(path, lang);
  });
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir.string());
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

constexpr const char* kMetrics[] = {"intent_acc", "slot_f1", "overall_acc"};

}  // namespace

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) make_dirs(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

fs::path resolve_corpus_path(const fs::path& p, const std::string& file_name) {
  if (fs::is_directory(p)) return p / file_name;
  return p;
}

// ---- configuration ---------------------------------------------------------

SyntheticSpec parse_synthetic_spec(const std::string& json_text) {
  return synthetic_from(parse_json(json_text, "synthetic spec"), "spec");
}

std::string synthetic_spec_to_json(const SyntheticSpec& spec) { return synthetic_json(spec).dump(2) + "\n"; }

ExperimentConfig parse_experiment_config(const std::string& json_text, const fs::path& base_dir) {
  const json root = parse_json(json_text, "config");
  reject_unknown(root, "config",
                 {"data", "lexicons", "model", "train", "loss_weights", "switch", "seeds", "output_dir"});
  ExperimentConfig cfg;

  if (!root.contains("data")) throw InputError("config.data: required");
  const json& data = root.at("data");
  require_object(data, "config.data");
  if (data.contains("synthetic")) {
    reject_unknown(data, "config.data", {"synthetic"});
    cfg.data.synthetic = synthetic_from(data.at("synthetic"), "config.data.synthetic");
    if (root.contains("lexicons")) {
      throw InputError("config.lexicons: synthetic data brings its own lexicons; remove this section");
    }
  } else {
    reject_unknown(data, "config.data", {"source", "train", "dev", "test"});
    cfg.data.source_lang = read_string(data, "config.data", "source", "", true);
    cfg.data.train = resolve(base_dir, read_string(data, "config.data", "train", "", true));
    cfg.data.dev = resolve(base_dir, read_string(data, "config.data", "dev", "", true));
    if (!data.contains("test")) throw InputError("config.data.test: required");
    cfg.data.test = lang_paths_from(data.at("test"), "config.data.test", base_dir);
    if (cfg.data.test.empty()) throw InputError("config.data.test: needs at least one language");
  }

  if (root.contains("lexicons")) {
    for (auto& [lang, path] : lang_paths_from(root.at("lexicons"), "config.lexicons", base_dir))
      cfg.lexicons[lang] = path;
  }

  if (root.contains("model")) {
    const json& m = root.at("model");
    reject_unknown(m, "config.model", {"embed_dim", "hidden_dim", "embedding_dropout", "min_count"});
    cfg.model.embed_dim = read_size(m, "config.model", "embed_dim", cfg.model.embed_dim);
    cfg.model.hidden_dim = read_size(m, "config.model", "hidden_dim", cfg.model.hidden_dim);
    cfg.model.embedding_dropout = read_double(m, "config.model", "embedding_dropout", cfg.model.embedding_dropout);
    cfg.model.min_count = static_cast<int>(read_size(m, "config.model", "min_count", 1));
  }

  TrainConfig& t = cfg.train;
  if (root.contains("train")) {
    const json& j = root.at("train");
    const std::string w = "config.train";
    reject_unknown(j, w,
                   {"learning_rate", "batch_size", "epochs", "queue_capacity", "dev_metric", "supervise_positive",
                    "ls_aligned_only", "normalize"});
    t.learning_rate = read_double(j, w, "learning_rate", t.learning_rate);
    t.batch_size = read_size(j, w, "batch_size", t.batch_size);
    t.epochs = read_size(j, w, "epochs", t.epochs);
    t.queue_capacity = read_size(j, w, "queue_capacity", t.queue_capacity);
    t.dev_metric = read_string(j, w, "dev_metric", t.dev_metric);
    t.supervise_positive = read_bool(j, w, "supervise_positive", t.supervise_positive);
    t.ls_aligned_only = read_bool(j, w, "ls_aligned_only", t.ls_aligned_only);
    t.normalize = read_bool(j, w, "normalize", t.normalize);
  }
  if (root.contains("loss_weights")) {
    const json& j = root.at("loss_weights");
    const std::string w = "config.loss_weights";
    reject_unknown(j, w, {"intent", "slot", "li", "ls", "gis", "temperature"});
    LossWeights& lw = t.weights;
    lw.intent = read_double(j, w, "intent", lw.intent);
    lw.slot = read_double(j, w, "slot", lw.slot);
    lw.li = read_double(j, w, "li", lw.li);
    lw.ls = read_double(j, w, "ls", lw.ls);
    lw.gis = read_double(j, w, "gis", lw.gis);
    lw.temperature = read_double(j, w, "temperature", lw.temperature);
  }
  if (root.contains("switch")) {
    const json& j = root.at("switch");
    const std::string w = "config.switch";
    reject_unknown(j, w, {"replace_prob", "languages", "seed"});
    t.policy.replace_prob = read_double(j, w, "replace_prob", t.policy.replace_prob);
    t.policy.seed = read_u64(j, w, "seed", t.policy.seed);
    if (j.contains("languages")) {
      const json& langs = j.at("languages");
      if (!langs.is_array()) throw InputError("config.switch.languages: expected an array of strings");
      for (const auto& l : langs) {
        if (!l.is_string()) throw InputError("config.switch.languages: expected an array of strings");
        t.policy.languages.push_back(l.get<std::string>());
      }
    }
  }
  if (root.contains("seeds")) {
    const json& s = root.at("seeds");
    if (!s.is_array() || s.empty()) throw InputError("config.seeds: expected a non-empty array of integers");
    cfg.seeds.clear();
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) throw InputError("config.seeds: expected non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
    if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size()) {
      throw InputError("config.seeds: duplicate seed");
    }
  }
  cfg.output_dir = resolve(base_dir, read_string(root, "config", "output_dir", cfg.output_dir.string()));

  as_input_error([&] {
    cfg.model.validate();
    t.validate();
    if (!(t.policy.replace_prob >= 0.0 && t.policy.replace_prob <= 1.0)) {
      throw std::invalid_argument("config.switch.replace_prob must lie in [0, 1]");
    }
    return 0;
  });
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return parse_experiment_config(read_file(path), path.parent_path());
}

std::string experiment_config_to_json(const ExperimentConfig& cfg) {
  ojson j;
  if (cfg.data.synthetic) {
    j["data"] = {{"synthetic", synthetic_json(*cfg.data.synthetic)}};
  } else {
    ojson test = ojson::object();
    for (const auto& [lang, p] : cfg.data.test) test[lang] = p.generic_string();
    j["data"] = {{"source", cfg.data.source_lang},
                 {"train", cfg.data.train.generic_string()},
                 {"dev", cfg.data.dev.generic_string()},
                 {"test", test}};
    ojson lex = ojson::object();
    for (const auto& [lang, p] : cfg.lexicons) lex[lang] = p.generic_string();
    j["lexicons"] = lex;
  }
  j["model"] = {{"embed_dim", cfg.model.embed_dim},
                {"hidden_dim", cfg.model.hidden_dim},
                {"embedding_dropout", cfg.model.embedding_dropout},
                {"min_count", cfg.model.min_count}};
  const TrainConfig& t = cfg.train;
  j["train"] = {{"learning_rate", t.learning_rate},
                {"batch_size", t.batch_size},
                {"epochs", t.epochs},
                {"queue_capacity", t.queue_capacity},
                {"dev_metric", t.dev_metric},
                {"supervise_positive", t.supervise_positive},
                {"ls_aligned_only", t.ls_aligned_only},
                {"normalize", t.normalize}};
  j["loss_weights"] = {{"intent", t.weights.intent}, {"slot", t.weights.slot},
                       {"li", t.weights.li},         {"ls", t.weights.ls},
                       {"gis", t.weights.gis},       {"temperature", t.weights.temperature}};
  j["switch"] = {{"replace_prob", t.policy.replace_prob}, {"languages", t.policy.languages}, {"seed", t.policy.seed}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir.generic_string();
  return j.dump(2) + "\n";
}

ExperimentData load_experiment_data(ExperimentConfig& cfg) {
  ExperimentData d;
  if (cfg.data.synthetic) {
    SyntheticData syn = generate_synthetic(*cfg.data.synthetic);
    d.source_lang = syn.languages.front().code;
    d.train = std::move(syn.languages.front().train);
    d.dev = std::move(syn.languages.front().dev);
    for (auto& l : syn.languages) d.test.emplace_back(l.code, std::move(l.test));
    d.lexicon = std::move(syn.lexicon);
  } else {
    d.source_lang = cfg.data.source_lang;
    d.train = load_corpus(cfg.data.train, d.source_lang);
    d.dev = load_corpus(cfg.data.dev, d.source_lang);
    for (const auto& [lang, p] : cfg.data.test) {
      Corpus c = load_corpus(resolve_corpus_path(p, "test.tsv"), lang);
      if (c.empty()) throw InputError("test corpus for '" + lang + "' is empty");
      d.test.emplace_back(lang, std::move(c));
    }
    for (const auto& [lang, p] : cfg.lexicons) {
      if (!fs::is_regular_file(p)) throw InputError("lexicon file for '" + lang + "' not found: " + p.string());
    }
    d.lexicon = as_input_error([&] { return load_lexicon(cfg.lexicons); });
  }
  if (d.train.empty()) throw InputError("training corpus is empty");
  if (d.dev.empty()) throw InputError("dev corpus is empty");
  if (cfg.train.policy.languages.empty()) cfg.train.policy.languages = d.lexicon.languages();
  return d;
}

// ---- commands --------------------------------------------------------------

void run_gen_data(const SyntheticSpec& spec, const fs::path& out_dir) {
  const SyntheticData data = as_input_error([&] { return generate_synthetic(spec); });
  make_dirs(out_dir);
  ojson manifest;
  manifest["spec"] = synthetic_json(spec);
  manifest["source"] = data.languages.front().code;
  ojson files = ojson::array();
  for (const auto& l : data.languages) {
    const std::pair<const char*, const Corpus*> splits[] = {{"train", &l.train}, {"dev", &l.dev}, {"test", &l.test}};
    for (const auto& [name, corpus] : splits) {
      const fs::path rel = fs::path(l.code) / (std::string(name) + ".tsv");
      write_text_file(out_dir / rel, serialize_tsv(*corpus));
      files.push_back({{"path", rel.generic_string()}, {"lang", l.code}, {"split", name}, {"rows", corpus->size()}});
    }
  }
  for (const auto& lang : data.lexicon.languages()) {
    const fs::path rel = fs::path("lexicons") / (lang + ".tsv");
    make_dirs(out_dir / "lexicons");
    as_input_error([&] {
      write_lexicon_file(out_dir / rel, data.lexicon, lang);
      return 0;
    });
    std::size_t entries = 0;
    for (const auto& src : data.lexicon.sources(lang)) entries += data.lexicon.lookup(lang, src)->size();
    files.push_back({{"path", rel.generic_string()}, {"lang", lang}, {"split", "lexicon"}, {"rows", entries}});
  }
  manifest["files"] = files;
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

std::size_t run_augment(const ExperimentConfig& config, const fs::path& out_path) {
  ExperimentConfig cfg = config;
  const ExperimentData data = load_experiment_data(cfg);
  const auto pairs = as_input_error([&] { return augment_corpus(data.train, data.lexicon, cfg.train.policy); });
  Corpus positives;
  positives.reserve(pairs.size());
  for (const auto& p : pairs) positives.push_back(p.positive);
  write_text_file(out_path, serialize_tsv(positives));
  return positives.size();
}

MetricSummary summarize(std::vector<double> values) {
  MetricSummary s;
  s.values = values;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  if (n > 1) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.stdev = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

std::string TrainSummary::to_json() const {
  ojson j;
  j["seeds"] = ojson::array();
  for (const auto& r : runs) j["seeds"].push_back(r.seed);
  j["runs"] = ojson::array();
  for (const auto& r : runs) {
    ojson metrics = ojson::object();
    auto put = [&metrics](const LanguageMetrics& m) {
      metrics[m.lang] = {{"intent_acc", m.intent_acc}, {"slot_f1", m.slot_f1}, {"overall_acc", m.overall_acc}};
    };
    for (const auto& m : r.test.languages) put(m);
    put(r.test.average);
    j["runs"].push_back({{"seed", r.seed}, {"selected_epoch", r.selected_epoch}, {"test", metrics}});
  }
  ojson agg = ojson::object();
  // Keep report order: languages as evaluated, then AVG.
  std::vector<std::string> order;
  if (!runs.empty()) {
    for (const auto& m : runs.front().test.languages) order.push_back(m.lang);
    order.push_back("AVG");
  }
  for (const auto& lang : order) {
    const auto it = aggregate.find(lang);
    if (it == aggregate.end()) continue;
    ojson per = ojson::object();
    for (const char* metric : kMetrics) {
      const MetricSummary& s = it->second.at(metric);
      per[metric] = {{"median", s.median}, {"stdev", s.stdev}, {"values", s.values}};
    }
    agg[lang] = per;
  }
  j["aggregate"] = agg;
  return j.dump(2) + "\n";
}

std::string TrainSummary::to_table() const {
  std::ostringstream os;
  os << "metric        lang     median   stdev\n";
  if (runs.empty()) return os.str();
  std::vector<std::string> order;
  for (const auto& m : runs.front().test.languages) order.push_back(m.lang);
  order.push_back("AVG");
  for (const char* metric : kMetrics)
    for (const auto& lang : order) {
      const MetricSummary& s = aggregate.at(lang).at(metric);
      char buf[128];
      std::snprintf(buf, sizeof buf, "%-13s %-8s %6.2f   %6.2f\n", metric, lang.c_str(), 100.0 * s.median,
                    100.0 * s.stdev);
      os << buf;
    }
  return os.str();
}

TrainSummary run_train(ExperimentConfig cfg, unsigned jobs, std::ostream* log) {
  const ExperimentData data = load_experiment_data(cfg);
  as_input_error([&] {
    if (cfg.train.weights.contrastive() || cfg.train.supervise_positive || cfg.train.queue_capacity > 0)
      validate_policy(cfg.train.policy, data.lexicon);
    return 0;
  });
  make_dirs(cfg.output_dir);
  write_text_file(cfg.output_dir / "config.json", experiment_config_to_json(cfg));

  const std::size_t n = cfg.seeds.size();
  std::vector<SeedResult> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::mutex log_mutex;
  auto run_one = [&](std::size_t i) {
    try {
      TrainConfig tc = cfg.train;
      tc.seed = cfg.seeds[i];
      FitResult fr = fit(data.train, data.dev, data.lexicon, cfg.model, tc);
      const MetricsReport report = zero_shot_report(fr.best, data.test);
      const fs::path dir = cfg.output_dir / ("seed-" + std::to_string(tc.seed));
      make_dirs(dir);
      save_checkpoint(dir / "checkpoint.json", fr.best);
      write_text_file(dir / "run_record.json", fr.record.to_json());
      write_text_file(dir / "test_report.json", report.to_json());
      write_text_file(dir / "test_report.txt", report.to_table());
      results[i] = {tc.seed, fr.record.selected_epoch, report};
      if (log) {
        std::lock_guard lock(log_mutex);
        *log << "seed " << tc.seed << ": selected epoch " << fr.record.selected_epoch << ", AVG overall "
             << fmt_double(report.average.overall_acc) << "\n";
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::mutex next_mutex;
    std::size_t next = 0;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(next_mutex);
            if (next == n) return;
            i = next++;
          }
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  TrainSummary summary;
  summary.runs = std::move(results);
  std::vector<const LanguageMetrics*> rows;
  for (std::size_t l = 0; l <= summary.runs.front().test.languages.size(); ++l) {
    const bool avg = l == summary.runs.front().test.languages.size();
    const std::string lang = avg ? "AVG" : summary.runs.front().test.languages[l].lang;
    for (const char* metric : kMetrics) {
      std::vector<double> values;
      for (const auto& r : summary.runs)
        values.push_back((avg ? r.test.average : r.test.languages[l]).get(metric));
      summary.aggregate[lang][metric] = summarize(std::move(values));
    }
  }
  write_text_file(cfg.output_dir / "summary.json", summary.to_json());
  write_text_file(cfg.output_dir / "summary.txt", summary.to_table());
  return summary;
}

MetricsReport run_eval(const fs::path& checkpoint, const LangPaths& tests, const fs::path& out_dir) {
  if (tests.empty()) throw InputError("no test corpora given");
  const Model model = as_input_error([&] {
    if (!fs::is_regular_file(checkpoint)) throw InputError("checkpoint not found: " + checkpoint.string());
    return load_checkpoint(checkpoint);
  });
  std::vector<std::pair<std::string, Corpus>> corpora;
  for (const auto& [lang, p] : tests) {
    const fs::path file = resolve_corpus_path(p, "test.tsv");
    Corpus c = load_corpus(file, lang);
    if (c.empty()) throw InputError("test corpus for '" + lang + "' is empty: " + file.string());
    for (const auto& ex : c) {
      if (!model.labels.intent_index(ex.intent))
        throw InputError(lang + ": intent '" + ex.intent + "' is not in the checkpoint's label set");
      for (const auto& tag : ex.slot_tags)
        if (!model.labels.slot_index(tag))
          throw InputError(lang + ": slot tag '" + tag + "' is not in the checkpoint's label set");
    }
    corpora.emplace_back(lang, std::move(c));
  }
  const MetricsReport report = zero_shot_report(model, corpora);
  make_dirs(out_dir);
  write_text_file(out_dir / "report.json", report.to_json());
  write_text_file(out_dir / "report.txt", report.to_table());
  return report;
}

ProjectionResult run_project(const fs::path& checkpoint, const LangPaths& corpora, const fs::path& out_csv) {
  const Model model = as_input_error([&] {
    if (!fs::is_regular_file(checkpoint)) throw InputError("checkpoint not found: " + checkpoint.string());
    return load_checkpoint(checkpoint);
  });
  ProjectionResult res;
  std::vector<double> values;
  std::size_t rows = 0;
  for (const auto& [lang, p] : corpora) {
    const Corpus c = load_corpus(resolve_corpus_path(p, "test.tsv"), lang);
    for (const auto& ex : c) {
      if (ex.tokens.empty()) continue;
      const Tensor v = sentence_vector(model, ex);
      values.insert(values.end(), v.values().begin(), v.values().end());
      res.langs.push_back(lang);
      ++rows;
    }
  }
  if (rows < 3) throw InputError("projection needs at least 3 sentences, got " + std::to_string(rows));
  const Tensor points(rows, model.params.dims.repr_dim(), std::move(values));
  res.pca = pca_2d(points);

  std::ostringstream csv;
  csv.precision(17);
  csv << "lang,x,y\n";
  for (std::size_t r = 0; r < rows; ++r)
    csv << res.langs[r] << ',' << res.pca.coords(r, 0) << ',' << res.pca.coords(r, 1) << '\n';
  write_text_file(out_csv, csv.str());

  ojson rep = {{"sentences", rows},
               {"dimension", points.cols()},
               {"eigenvalues", {res.pca.eigenvalues[0], res.pca.eigenvalues[1]}},
               {"total_variance", res.pca.total_variance},
               {"explained_variance", res.pca.explained}};
  write_text_file(fs::path(out_csv.string() + ".variance.json"), rep.dump(2) + "\n");
  return res;
}

}  // namespace glclef
