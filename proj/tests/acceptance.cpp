// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Tolerances are fixed below.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "baseline_trainer.hpp"
#include "cli_runner.hpp"
#include "contrastive_oracle.hpp"
#include "glclef/checkpoint.hpp"
#include "glclef/experiment.hpp"
#include "json.hpp"
#include "span_oracle.hpp"

using namespace glclef;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-4;         // relative, tape vs central differences
constexpr double kGradStep = 1e-6;
constexpr double kGradSeconds = 30.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kOracleTol = 1e-9;
constexpr double kToySeconds = 600.0;
constexpr double kAlignmentGap = 0.05;
constexpr double kSmokeSeconds = 60.0;
constexpr std::size_t kToySeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double median(std::vector<double> v) { return summarize(std::move(v)).median; }

// ---- 1. gradient suite ---------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  ModelDims dims;
  dims.vocab_size = 10;
  dims.embed_dim = 8;
  dims.hidden_dim = 3;
  dims.num_intents = 3;
  dims.num_slots = 4;

  std::map<std::string, double> worst;
  std::size_t checked = 0;
  bool ok = true;
  for (int trial = 0; trial < 4; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial);  // 1..4 tokens
    const std::size_t k = 1 + static_cast<std::size_t>(trial);  // 1..4 negatives
    EncoderParams params = init_params(dims, 50 + static_cast<std::uint64_t>(trial));
    params.set_requires_grad(true);
    std::vector<int> a_ids{Vocab::kCls}, p_ids{Vocab::kCls};
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < n; ++i) {
      a_ids.push_back(4 + static_cast<int>(rng.below(6)));
      p_ids.push_back(4 + static_cast<int>(rng.below(6)));
      slots.push_back(rng.below(4));
    }
    a_ids.push_back(Vocab::kSep);
    p_ids.push_back(Vocab::kSep);
    const std::size_t intent = rng.below(3);
    NegativeQueue queue(k, dims.repr_dim());
    for (std::size_t i = 0; i < k; ++i)
      queue.push(testutil::random_tensor(1, dims.repr_dim(), rng),
                 testutil::random_tensor(1 + rng.below(4), dims.repr_dim(), rng));
    const SimilarityConfig sc{0.5, true};
    const LossWeights w{1.0, 1.0, 0.5, 0.5, 0.5, 0.5};

    using Builder = std::function<Var(const BoundParams&, const EncOutput&, const EncOutput&)>;
    const std::pair<const char*, Builder> losses[] = {
        {"L_I", [&](const BoundParams& bp, const EncOutput& a,
                    const EncOutput&) { return intent_ce_loss(intent_distribution(bp, a.h_cls), intent); }},
        {"L_S", [&](const BoundParams& bp, const EncOutput& a,
                    const EncOutput&) { return slot_ce_loss(slot_distributions(bp, a.tokens), slots); }},
        {"L_LI", [&](const BoundParams&, const EncOutput& a,
                     const EncOutput& p) { return loss_li(a.h_cls, p.h_cls, queue, sc); }},
        {"L_LS", [&](const BoundParams&, const EncOutput& a,
                     const EncOutput& p) { return loss_ls(a.tokens, p.tokens, queue, sc); }},
        {"L_LS(aligned)", [&](const BoundParams&, const EncOutput& a,
                              const EncOutput& p) { return loss_ls(a.tokens, p.tokens, queue, sc, true); }},
        {"L_GIS", [&](const BoundParams&, const EncOutput& a,
                      const EncOutput& p) { return loss_gis(a.h_cls, a.tokens, p.tokens, queue, sc); }},
        {"total", [&](const BoundParams& bp, const EncOutput& a, const EncOutput& p) {
           Var t = scale(intent_ce_loss(intent_distribution(bp, a.h_cls), intent), w.intent);
           t = add(t, scale(slot_ce_loss(slot_distributions(bp, a.tokens), slots), w.slot));
           t = add(t, scale(loss_li(a.h_cls, p.h_cls, queue, sc), w.li));
           t = add(t, scale(loss_ls(a.tokens, p.tokens, queue, sc), w.ls));
           return add(t, scale(loss_gis(a.h_cls, a.tokens, p.tokens, queue, sc), w.gis));
         }}};
    std::vector<Tensor*> tensors;
    params.for_each([&](const std::string&, Tensor& t) { tensors.push_back(&t); });
    for (const auto& [name, build] : losses) {
      const auto fn = [&](Tape& tape) {
        const BoundParams bp = bind(tape, params);
        return build(bp, encode(bp, a_ids), encode(bp, p_ids));
      };
      const FiniteDiffReport r = finite_diff_check(fn, tensors, kGradStep, kGradTol);
      worst[name] = std::max(worst[name], r.max_rel_error);
      checked += r.checked;
      if (!r.passed) {
        ok = false;
        std::cerr << "  gradient mismatch in " << name << " (n=" << n << ", K=" << k << "): " << r.worst << "\n";
      }
    }
  }
  const double secs = seconds_since(t0);
  double overall = 0.0;
  std::string per;
  for (const auto& [name, e] : worst) {
    overall = std::max(overall, e);
    per += " " + name + "=" + sci(e);
  }
  return {ok && secs < kGradSeconds, std::to_string(checked) + " entries, max rel err " + sci(overall) + " (tol " +
                                         sci(kGradTol) + "), " + fmt(secs, 1) + " s (limit " +
                                         fmt(kGradSeconds, 0) + " s);" + per};
}

// ---- 2. closed forms --------------------------------------------------------------

Outcome closed_forms() {
  Rng rng(7);
  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const testutil::Instance in = testutil::random_instance(rng, 6, 1 + rng.below(4), 0, false);
    Tape tape;
    const Var ac = tape.constant(in.a_cls), pc = tape.constant(in.p_cls);
    const Var at = tape.constant(in.a_tok), pt = tape.constant(in.p_tok);
    ok = ok && loss_li(ac, pc, in.queue, {}).scalar() == 0.0 && loss_ls(at, pt, in.queue, {}).scalar() == 0.0 &&
         loss_ls(at, pt, in.queue, {}, true).scalar() == 0.0 && loss_gis(ac, at, pt, in.queue, {}).scalar() == 0.0;
  }
  std::string detail = "empty queue: all losses exactly 0 = " + std::string(ok ? "yes" : "no") + ";";
  double worst = 0.0;
  for (std::size_t k : {1u, 3u, 7u}) {
    const Tensor a = testutil::random_tensor(1, 6, rng);
    const Tensor p = testutil::random_tensor(1, 6, rng);
    NegativeQueue q(k, 6);
    // Every negative has the positive's similarity to the anchor.
    for (std::size_t i = 0; i < k; ++i) q.push(p, p);
    Tape tape;
    const double li = loss_li(tape.constant(a), tape.constant(p), q, {}).scalar();
    const double err = std::abs(li - std::log(static_cast<double>(k + 1)));
    worst = std::max(worst, err);
    detail += " K=" + std::to_string(k) + ": L_LI=" + fmt(li, 6);
  }
  ok = ok && worst <= kClosedFormTol;
  return {ok, detail + "; max |L_LI - log(K+1)| = " + sci(worst) + " (tol " + sci(kClosedFormTol) + ")"};
}

// ---- 3. oracle equivalence -------------------------------------------------------

Outcome oracle_equivalence() {
  Rng rng(2024);
  std::vector<std::vector<std::string>> pred, gold;
  bool spans_ok = true;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::string> g, p;
    testutil::random_tag_pair(rng, g, p);
    const std::vector<std::vector<std::string>> one_p{p}, one_g{g};
    const F1Score got = slot_f1(one_p, one_g);
    const auto want = testutil::oracle_f1(one_p, one_g);
    spans_ok = spans_ok && got.correct == want.correct && got.predicted == want.predicted &&
               got.gold == want.gold && got.f1 == want.f1;
    pred.push_back(p);
    gold.push_back(g);
  }
  const F1Score micro = slot_f1(pred, gold);
  const auto oracle = testutil::oracle_f1(pred, gold);
  spans_ok = spans_ok && micro.correct == oracle.correct && micro.f1 == oracle.f1;

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 2 + rng.below(6), n = 1 + rng.below(5), k = rng.below(6);
    const SimilarityConfig cfg{0.05 + rng.uniform(), trial % 5 != 0};
    const testutil::Instance in = testutil::random_instance(rng, d, n, k, trial % 2 == 0);
    Tape tape;
    const Var ac = tape.constant(in.a_cls), at = tape.constant(in.a_tok), pt = tape.constant(in.p_tok);
    const auto a = testutil::rows_of(in.a_tok), p = testutil::rows_of(in.p_tok);
    const double ls = loss_ls(at, pt, in.queue, cfg).scalar();
    const double ls_ref = testutil::ls_direct(a, p, in.neg_tokens, cfg.temperature, cfg.normalize);
    const double lsa = loss_ls(at, pt, in.queue, cfg, true).scalar();
    const double lsa_ref = testutil::ls_aligned_direct(a, p, in.neg_tokens, cfg.temperature, cfg.normalize);
    const double gis = loss_gis(ac, at, pt, in.queue, cfg).scalar();
    const double gis_ref = testutil::gis_direct(testutil::rows_of(in.a_cls)[0], a, p, in.neg_tokens, cfg.temperature,
                                                cfg.normalize);
    for (auto [x, y] : {std::pair{ls, ls_ref}, std::pair{lsa, lsa_ref}, std::pair{gis, gis_ref}})
      worst = std::max(worst, std::abs(x - y) / std::max(1.0, std::abs(y)));
  }
  return {spans_ok && worst <= kOracleTol,
          "span F1 exact on 200 sequences = " + std::string(spans_ok ? "yes" : "no") + " (micro F1 " +
              fmt(micro.f1) + "); L_LS/L_GIS max err vs double sum " + sci(worst) + " over 100 instances (tol " +
              sci(kOracleTol) + ")"};
}

// ---- 4. ablation equivalence -----------------------------------------------------

Outcome ablation_equivalence() {
  const SyntheticData data =
      generate_synthetic(SyntheticSpec{.languages = 3, .train = 120, .dev = 10, .test = 10, .seed = 11});
  const Corpus& train = data.languages[0].train;
  TrainConfig cfg;
  cfg.weights.li = cfg.weights.ls = cfg.weights.gis = 0.0;
  cfg.queue_capacity = 0;
  cfg.batch_size = 16;
  cfg.learning_rate = 5e-3;
  cfg.seed = 3;

  const Vocab vocab = build_vocab(train, 1);
  const LabelSets labels = LabelSets::from_corpus(train);
  ModelDims dims;
  dims.vocab_size = vocab.size();
  dims.embed_dim = 16;
  dims.hidden_dim = 16;
  dims.num_intents = labels.num_intents();
  dims.num_slots = labels.num_slots();
  std::vector<EncodedExample> encoded;
  for (const auto& ex : train) encoded.push_back(encode_example(ex, vocab, labels));

  EncoderParams ours = init_params(dims, derive_seed(cfg.seed, {1}));
  EncoderParams ref = ours;
  Adam opt_ours(ours, cfg.learning_rate), opt_ref(ref, cfg.learning_rate);
  NegativeQueue queue(0, dims.repr_dim());
  Rng shuffle(derive_seed(cfg.seed, {2}));
  std::vector<std::size_t> order(encoded.size());
  std::size_t steps = 0, identical = 0;
  for (int epoch = 0; epoch < 3; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<TrainPair> pairs;
      std::vector<EncodedExample> plain;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        pairs.push_back({encoded[order[i]], encoded[order[i]]});
        plain.push_back(encoded[order[i]]);
      }
      train_step(pairs, ours, opt_ours, queue, cfg);
      testutil::baseline_step(plain, ref, opt_ref, cfg.weights.intent, cfg.weights.slot);
      ++steps;
      identical += ours.same_values(ref);
    }
  }
  return {steps > 0 && identical == steps && queue.empty(),
          std::to_string(identical) + "/" + std::to_string(steps) +
              " steps bit-identical to the contrastive-free baseline trainer"};
}

// ---- 5-7. toy zero-shot reproduction ---------------------------------------------

struct ToyRun {
  std::string name;
  TrainSummary summary;
  std::vector<double> target_overall;  // per seed, mean over target languages
  std::vector<double> alignment_gap;   // per seed
  fs::path dir;
};

ExperimentConfig toy_config(const fs::path& out, double li, double ls, double gis) {
  ExperimentConfig cfg;
  cfg.data.synthetic = SyntheticSpec{.languages = 3, .intents = 8, .slot_types = 10, .train = 500, .dev = 100,
                                     .test = 100};
  cfg.train.learning_rate = 5e-3;
  cfg.train.epochs = 15;
  cfg.train.batch_size = 16;
  cfg.train.queue_capacity = 16;
  cfg.train.ls_aligned_only = true;
  cfg.train.weights = {1.0, 1.0, li, ls, gis, 0.07};
  cfg.seeds.clear();
  for (std::uint64_t s = 1; s <= kToySeeds; ++s) cfg.seeds.push_back(s);
  cfg.output_dir = out;
  return cfg;
}

ToyRun run_toy(const std::string& name, ExperimentConfig cfg, unsigned jobs) {
  ToyRun r;
  r.name = name;
  r.dir = cfg.output_dir;
  r.summary = run_train(cfg, jobs);
  for (const auto& run : r.summary.runs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& m : run.test.languages)
      if (m.lang != "l0") {
        sum += m.overall_acc;
        ++n;
      }
    r.target_overall.push_back(sum / static_cast<double>(n));
  }

  // Anchors are the source test sentences, positives their code-switched views.
  const SyntheticData data = generate_synthetic(*cfg.data.synthetic);
  const SwitchPolicy policy{cfg.train.policy.replace_prob, {"l1", "l2"}, 12345};
  const auto pairs = augment_corpus(data.languages[0].test, data.lexicon, policy);
  for (const auto& run : r.summary.runs) {
    const Model m = load_checkpoint(r.dir / ("seed-" + std::to_string(run.seed)) / "checkpoint.json");
    r.alignment_gap.push_back(alignment_stats(m, pairs, 99).gap());
  }
  return r;
}

std::string values(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i], 3);
  return s + "]";
}

// ---- 7. summary well-formedness ---------------------------------------------------

Outcome summary_wellformed(const ToyRun& full) {
  const fs::path json_path = full.dir / "summary.json", txt_path = full.dir / "summary.txt";
  if (!fs::is_regular_file(json_path) || !fs::is_regular_file(txt_path)) return {false, "summary files missing"};
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(testutil::read_file(json_path));
  } catch (const std::exception& e) {
    return {false, std::string("summary.json does not parse: ") + e.what()};
  }
  std::size_t checked = 0;
  bool ok = j.contains("aggregate") && j["seeds"].size() == kToySeeds;
  for (const char* lang : {"l0", "l1", "l2", "AVG"}) {
    for (const char* metric : {"intent_acc", "slot_f1", "overall_acc"}) {
      if (!ok || !j["aggregate"].contains(lang) || !j["aggregate"][lang].contains(metric)) {
        ok = false;
        continue;
      }
      const auto& s = j["aggregate"][lang][metric];
      const bool entry = s.contains("median") && s.contains("stdev") && s["values"].size() == kToySeeds &&
                         s["stdev"].is_number() && std::isfinite(s["stdev"].get<double>()) &&
                         s["stdev"].get<double>() >= 0.0;
      ok = ok && entry;
      ++checked;
    }
  }
  const std::string table = testutil::read_file(txt_path);
  ok = ok && table.find("stdev") != std::string::npos && table.find("AVG") != std::string::npos;
  std::string detail = std::to_string(checked) + " (language, metric) entries with median/stdev over " +
                       std::to_string(kToySeeds) + " seeds";
  if (ok) {
    const auto& avg = j["aggregate"]["AVG"];
    detail += "; AVG stdev intent " + fmt(avg["intent_acc"]["stdev"].get<double>()) + ", slot " +
              fmt(avg["slot_f1"]["stdev"].get<double>()) + ", overall " +
              fmt(avg["overall_acc"]["stdev"].get<double>());
  }
  return {ok, detail};
}

// ---- 8. CLI determinism -------------------------------------------------------------

Outcome cli_determinism() {
  const fs::path root = testutil::temp_dir("acceptance-cli");
  testutil::write_file(root / "spec.json",
                       R"({"languages": 3, "intents": 4, "slot_types": 4, "train": 200, "dev": 40, "test": 40})");
  testutil::write_file(root / "config.json", R"({
    "data": {"source": "l0", "train": "data/l0/train.tsv", "dev": "data/l0/dev.tsv",
             "test": {"l0": "data/l0", "l1": "data/l1", "l2": "data/l2"}},
    "lexicons": {"l1": "data/lexicons/l1.tsv", "l2": "data/lexicons/l2.tsv"},
    "train": {"epochs": 2},
    "switch": {"replace_prob": 0.9, "seed": 5},
    "seeds": [1],
    "output_dir": "runs"
  })");
  const auto q = [](const fs::path& p) { return testutil::shell_quote(p.string()); };
  std::vector<std::string> bytes[2];
  double train_secs = 0.0;
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(root / "data");
    fs::remove_all(root / "runs");
    const auto g = testutil::run_cli("gen-data --spec " + q(root / "spec.json") + " --out " + q(root / "data"), root);
    const auto a = testutil::run_cli("augment --config " + q(root / "config.json") + " --out " + q(root / "aug.tsv"), root);
    const auto t0 = std::chrono::steady_clock::now();
    const auto t = testutil::run_cli("train --config " + q(root / "config.json"), root);
    train_secs = std::max(train_secs, seconds_since(t0));
    if (g.exit_code != 0 || a.exit_code != 0 || t.exit_code != 0)
      return {false, "command failed: " + g.err + a.err + t.err};
    bytes[round] = {testutil::tree_bytes(root / "data"), testutil::read_file(root / "aug.tsv"),
                    testutil::tree_bytes(root / "runs")};
  }
  const bool gen_same = bytes[0][0] == bytes[1][0];
  const bool aug_same = bytes[0][1] == bytes[1][1];
  const bool train_same = bytes[0][2] == bytes[1][2];
  return {gen_same && aug_same && train_same && train_secs < kSmokeSeconds,
          std::string("byte-identical reruns: gen-data ") + (gen_same ? "yes" : "no") + ", augment " +
              (aug_same ? "yes" : "no") + ", 2-epoch train " + (train_same ? "yes" : "no") +
              "; 200-example train took " + fmt(train_secs, 1) + " s (limit " + fmt(kSmokeSeconds, 0) + " s)"};
}

}  // namespace

int main() {
  std::vector<std::pair<std::string, Outcome>> results;
  auto record = [&](const std::string& label, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << label << ": " << o.detail << std::endl;
    results.emplace_back(label, o);
  };

  record("1 gradient suite", gradient_suite);
  record("2 closed-form contrastive values", closed_forms);
  record("3 oracle equivalence", oracle_equivalence);
  record("4 ablation equivalence", ablation_equivalence);

  const unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  const fs::path toy_root = testutil::temp_dir("acceptance-toy");
  std::vector<ToyRun> toys;
  double toy_secs = 0.0;
  std::string toy_error;
  try {
    const auto t0 = std::chrono::steady_clock::now();
    toys.push_back(run_toy("full", toy_config(toy_root / "full", 0.5, 0.5, 0.05), jobs));
    toys.push_back(run_toy("baseline", toy_config(toy_root / "baseline", 0.0, 0.0, 0.0), jobs));
    toys.push_back(run_toy("no-GIS", toy_config(toy_root / "no-gis", 0.5, 0.5, 0.0), jobs));
    toy_secs = seconds_since(t0);
  } catch (const std::exception& e) {
    toy_error = e.what();
  }

  record("5 toy zero-shot reproduction", [&]() -> Outcome {
    if (!toy_error.empty()) return {false, "toy runs failed: " + toy_error};
    const double full = median(toys[0].target_overall);
    const double base = median(toys[1].target_overall);
    const double nogis = median(toys[2].target_overall);
    return {full > base && full > nogis && toy_secs < kToySeconds,
            "median target overall acc: full " + fmt(full, 3) + " " + values(toys[0].target_overall) +
                ", baseline " + fmt(base, 3) + " " + values(toys[1].target_overall) + ", -GIS " + fmt(nogis, 3) +
                " " + values(toys[2].target_overall) + "; " + std::to_string(kToySeeds) + " seeds x 3 configs in " +
                fmt(toy_secs, 0) + " s (limit " + fmt(kToySeconds, 0) + " s, " + std::to_string(jobs) +
                " threads)"};
  });
  record("6 alignment check", [&]() -> Outcome {
    if (!toy_error.empty()) return {false, "toy runs failed: " + toy_error};
    const double full = median(toys[0].alignment_gap);
    const double base = median(toys[1].alignment_gap);
    return {full >= kAlignmentGap && full > base,
            "median cos(anchor, positive) - cos(anchor, other): full " + fmt(full) + " " +
                values(toys[0].alignment_gap) + " (need >= " + fmt(kAlignmentGap, 2) + "), baseline " + fmt(base) +
                " " + values(toys[1].alignment_gap)};
  });
  record("7 multi-seed robustness summary", [&]() -> Outcome {
    if (!toy_error.empty()) return {false, "toy runs failed: " + toy_error};
    return summary_wellformed(toys[0]);
  });
  record("8 CLI determinism", cli_determinism);

  std::size_t passed = 0;
  for (const auto& [label, o] : results) passed += o.pass;
  std::cout << passed << "/" << results.size() << " acceptance criteria passed" << std::endl;
  return passed == results.size() ? 0 : 1;
}
