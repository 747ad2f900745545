#pragma once

// Reproducible experiment plumbing behind the command-line tool. Every
// command is deterministic given its inputs; effective settings are echoed
// into the files it writes.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "glclef/codeswitch.hpp"
#include "glclef/corpus.hpp"
#include "glclef/metrics.hpp"
#include "glclef/projection.hpp"
#include "glclef/synthetic.hpp"
#include "glclef/trainer.hpp"

namespace glclef {

// Bad configuration or input files. Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitRuntime = 3;

using LangPaths = std::vector<std::pair<std::string, std::filesystem::path>>;

struct DataConfig {
  std::optional<SyntheticSpec> synthetic;
  // File-based data; unused when `synthetic` is set.
  std::string source_lang;
  std::filesystem::path train;
  std::filesystem::path dev;
  LangPaths test;
};

struct ExperimentConfig {
  DataConfig data;
  std::map<std::string, std::filesystem::path> lexicons;
  ModelConfig model;
  TrainConfig train;  // train.seed is replaced per run by each entry of `seeds`
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "runs";
};

// Strict parsers: unknown keys and wrong types raise InputError naming the
// offending field. Relative paths are resolved against `base_dir`.
SyntheticSpec parse_synthetic_spec(const std::string& json_text);
std::string synthetic_spec_to_json(const SyntheticSpec& spec);
ExperimentConfig parse_experiment_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
// Fully expanded configuration, including defaults.
std::string experiment_config_to_json(const ExperimentConfig& cfg);

struct ExperimentData {
  std::string source_lang;
  Corpus train;
  Corpus dev;
  std::vector<std::pair<std::string, Corpus>> test;
  BilingualLexicon lexicon;
};

// Loads or generates the corpora and lexicons. When switch.languages is
// empty, the pool becomes every lexicon language (the result is written
// back into `cfg`).
ExperimentData load_experiment_data(ExperimentConfig& cfg);

// Writes <out>/<lang>/{train,dev,test}.tsv, <out>/lexicons/<lang>.tsv and
// <out>/manifest.json.
void run_gen_data(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// Writes the code-switched positive of every source training example,
// line-aligned with the anchors, using switch.seed.
std::size_t run_augment(const ExperimentConfig& cfg, const std::filesystem::path& out_path);

struct MetricSummary {
  double median = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single run
  std::vector<double> values;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t selected_epoch = 0;
  MetricsReport test;
};

struct TrainSummary {
  std::vector<SeedResult> runs;
  // lang (including "AVG") -> metric -> summary over seeds
  std::map<std::string, std::map<std::string, MetricSummary>> aggregate;

  std::string to_json() const;
  std::string to_table() const;
};

MetricSummary summarize(std::vector<double> values);

// Runs fit() once per seed (in parallel over `jobs` threads), evaluating
// each best model zero-shot on every test language. Per seed writes
// <output_dir>/seed-<s>/{checkpoint.json,run_record.json,test_report.json,test_report.txt};
// then <output_dir>/{summary.json,summary.txt,config.json}.
TrainSummary run_train(ExperimentConfig cfg, unsigned jobs = 1, std::ostream* log = nullptr);

// Test corpora are TSV files or directories holding test.tsv. Labels the
// checkpoint does not know raise InputError. Writes report.json and
// report.txt into out_dir.
MetricsReport run_eval(const std::filesystem::path& checkpoint, const LangPaths& tests,
                       const std::filesystem::path& out_dir);

struct ProjectionResult {
  Projection2D pca;
  std::vector<std::string> langs;  // one per projected sentence
};

// Writes `lang,x,y` rows to out_csv and the variance report next to it
// (<out_csv>.variance.json).
ProjectionResult run_project(const std::filesystem::path& checkpoint, const LangPaths& corpora,
                             const std::filesystem::path& out_csv);

// Resolves a corpus argument: a TSV file, or a directory containing `file_name`.
std::filesystem::path resolve_corpus_path(const std::filesystem::path& p, const std::string& file_name);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace glclef
