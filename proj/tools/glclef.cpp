// Command-line front end: gen-data, augment, train, eval, project.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "glclef/experiment.hpp"

namespace fs = std::filesystem;
using namespace glclef;

namespace {

LangPaths parse_lang_paths(const std::vector<std::string>& args, const char* flag) {
  LangPaths out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size())
      throw InputError(std::string(flag) + " expects LANG=PATH, got '" + a + "'");
    out.emplace_back(a.substr(0, eq), fs::path(a.substr(eq + 1)));
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive cross-lingual spoken language understanding toolkit"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multilingual SLU corpus and lexicons");
  gen->add_option("--spec", spec_path, "Synthetic corpus spec (JSON)")->required();
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string aug_config, aug_out;
  auto* aug = app.add_subcommand("augment", "Write code-switched positives for the source training set");
  aug->add_option("--config", aug_config, "Experiment config (JSON)")->required();
  aug->add_option("--out", aug_out, "Output TSV path")->required();

  std::string train_config;
  unsigned jobs = 1;
  auto* train = app.add_subcommand("train", "Train one model per seed and summarize across seeds");
  train->add_option("--config", train_config, "Experiment config (JSON)")->required();
  train->add_option("--jobs", jobs, "Seeds trained in parallel")->default_val(1)->check(CLI::PositiveNumber);

  std::string eval_ckpt, eval_out;
  std::vector<std::string> eval_tests;
  auto* eval = app.add_subcommand("eval", "Zero-shot evaluation of a checkpoint");
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint JSON")->required();
  eval->add_option("--test", eval_tests, "LANG=PATH, a TSV file or a directory holding test.tsv (repeatable)")
      ->required();
  eval->add_option("--out", eval_out, "Output directory for report.json and report.txt")->required();

  std::string proj_ckpt, proj_out;
  std::vector<std::string> proj_corpora;
  auto* project = app.add_subcommand("project", "Export a 2-D PCA projection of sentence vectors");
  project->add_option("--checkpoint", proj_ckpt, "Checkpoint JSON")->required();
  project->add_option("--corpus", proj_corpora, "LANG=PATH, a TSV file or a directory holding test.tsv (repeatable)")
      ->required();
  project->add_option("--out", proj_out, "Output CSV (lang,x,y)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (gen->parsed()) {
      const SyntheticSpec spec = parse_synthetic_spec(slurp(spec_path));
      run_gen_data(spec, out_dir);
      std::cout << "wrote corpus for " << spec.languages << " languages to " << out_dir << "\n";
    } else if (aug->parsed()) {
      const std::size_t n = run_augment(load_experiment_config(aug_config), aug_out);
      std::cout << "wrote " << n << " positives to " << aug_out << "\n";
    } else if (train->parsed()) {
      const TrainSummary s = run_train(load_experiment_config(train_config), jobs, &std::cerr);
      std::cout << s.to_table();
    } else if (eval->parsed()) {
      const MetricsReport r = run_eval(eval_ckpt, parse_lang_paths(eval_tests, "--test"), eval_out);
      std::cout << r.to_table();
    } else if (project->parsed()) {
      const ProjectionResult r = run_project(proj_ckpt, parse_lang_paths(proj_corpora, "--corpus"), proj_out);
      std::cout << "projected " << r.langs.size() << " sentences; top-2 components explain "
                << 100.0 * r.pca.explained << "% of variance\n";
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: training diverged\n  " << e.components().describe() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
