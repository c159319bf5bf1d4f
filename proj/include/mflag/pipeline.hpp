// Whole-run orchestration shared by the CLI commands: on-disk layouts for
// each stage and the one-shot desk-scale reproduction.
#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "mflag/checkpoint.hpp"
#include "mflag/classifier.hpp"
#include "mflag/corpus.hpp"
#include "mflag/generator.hpp"
#include "mflag/metrics.hpp"
#include "mflag/synth.hpp"
#include "mflag/trainer.hpp"

namespace mflag {

namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

// --- synthetic corpus on disk -------------------------------------------------

inline fs::path split_path(const fs::path& dir, Form f, const char* split) {
  return dir / (std::string(form_name(f)) + "." + split + ".tsv");
}

inline void write_form_corpora(const FormCorpora& corpora, const fs::path& dir) {
  for (const auto& [f, s] : corpora) {
    write_corpus(s.train, split_path(dir, f, "train"));
    write_corpus(s.valid, split_path(dir, f, "valid"));
    write_corpus(s.test, split_path(dir, f, "test"));
  }
}

inline FormCorpora read_form_corpora(const fs::path& dir) {
  FormCorpora out;
  for (Form f : kFigurativeForms) {
    if (!fs::exists(split_path(dir, f, "train"))) continue;
    SplitCorpus s;
    s.train = read_corpus(split_path(dir, f, "train"));
    s.valid = read_corpus(split_path(dir, f, "valid"));
    s.test = read_corpus(split_path(dir, f, "test"));
    out.emplace(f, std::move(s));
  }
  if (out.empty()) throw Error("no <FORM>.train.tsv files in " + dir.string());
  return out;
}

// --- classifiers --------------------------------------------------------------

struct ClassifierSuite {
  ClassifierSet classifiers;
  std::map<Form, ClassifierReport> reports;
  F1Matrix cross_form{};
};

inline ClassifierSuite train_classifier_suite(const FormCorpora& corpora, std::uint64_t seed,
                                              const ClassifierTrainOptions& opt = {}) {
  ClassifierSuite suite;
  std::map<Form, std::vector<ParallelPair>> tests;
  for (const auto& [f, s] : corpora) {
    const auto [pos, neg] = split_labels(s.train);
    suite.classifiers.emplace(f, FormClassifier::train(f, pos, neg, derive_seed(seed, 200 + static_cast<int>(f)), opt));
    const auto [tpos, tneg] = split_labels(s.test);
    suite.reports[f] = evaluate_classifier(suite.classifiers.at(f), tpos, tneg);
    tests[f] = s.test;
  }
  if (suite.classifiers.size() == kFigurativeForms.size()) suite.cross_form = cross_form_matrix(suite.classifiers, tests);
  return suite;
}

inline void write_classifier_suite(const ClassifierSuite& suite, const fs::path& dir) {
  save_classifiers(suite.classifiers, dir);
  nlohmann::json rep = nlohmann::json::object();
  for (const auto& [f, r] : suite.reports) {
    rep[std::string(form_name(f))] = {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}, {"n_test", r.n_test}};
  }
  auto out = detail::open_out(dir / "report.json");
  out << rep.dump(2) << '\n';
  if (suite.classifiers.size() == kFigurativeForms.size()) {
    auto m = detail::open_out(dir / "cross_form_f1.tsv");
    m << "classifier";
    for (Form f : kFigurativeForms) m << '\t' << form_name(f);
    m << '\n';
    for (std::size_t i = 0; i < 5; ++i) {
      m << form_name(kFigurativeForms[i]);
      for (std::size_t j = 0; j < 5; ++j) m << '\t' << detail::format_prob(suite.cross_form[i][j]);
      m << '\n';
    }
  }
}

// --- paraphrase filtering ------------------------------------------------------

struct FilteredData {
  std::map<Form, std::vector<ScoredPair>> scored;
  std::map<Form, std::vector<ParallelPair>> kept;
};

/// Scores every candidate with its form's classifier and keeps pairs above
/// that form's threshold.
inline FilteredData filter_candidates(const std::map<Form, std::vector<ParallelPair>>& pool,
                                      const ClassifierSet& classifiers,
                                      const std::map<Form, double>& sigma_override = {}) {
  FilteredData out;
  for (const auto& [f, pairs] : pool) {
    auto it = classifiers.find(f);
    if (it == classifiers.end()) throw Error("no classifier for " + std::string(form_name(f)));
    out.scored[f] = score_pairs(it->second, pairs);
    const double sigma = sigma_override.count(f) ? sigma_override.at(f) : default_sigma(f);
    out.kept[f] = filter_pairs(out.scored[f], sigma);
  }
  return out;
}

/// Splits filtered pairs into paraphrase-stage train/valid (every tenth pair
/// held out) and derives the per-form denoising texts from both sides.
inline void fill_pretraining(DataBundle& bundle, const std::map<Form, std::vector<ParallelPair>>& kept) {
  bundle.pretrain.clear();
  bundle.pretrain_valid.clear();
  bundle.paraphrase.clear();
  bundle.paraphrase_valid.clear();
  for (const auto& [f, pairs] : kept) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const bool held_out = i % 10 == 9;
      (held_out ? bundle.paraphrase_valid : bundle.paraphrase).push_back(pairs[i]);
      for (const auto* t : {&pairs[i].source, &pairs[i].target}) {
        if (held_out) bundle.pretrain_valid.push_back(*t);
        else bundle.pretrain[t->form].push_back(*t);
      }
    }
  }
}

inline void write_pretraining(const DataBundle& bundle, const fs::path& dir) {
  write_corpus(bundle.paraphrase, dir / "paraphrase.train.tsv");
  write_corpus(bundle.paraphrase_valid, dir / "paraphrase.valid.tsv");
  std::vector<TaggedText> mono;
  for (const auto& [f, t] : bundle.pretrain) mono.insert(mono.end(), t.begin(), t.end());
  write_monolingual(mono, dir / "denoise.train.tsv");
  write_monolingual(bundle.pretrain_valid, dir / "denoise.valid.tsv");
}

/// Reads the pre-training part of a bundle back from `dir`.
inline void read_pretraining(DataBundle& bundle, const fs::path& dir) {
  bundle.paraphrase = read_corpus(dir / "paraphrase.train.tsv");
  bundle.paraphrase_valid = read_corpus(dir / "paraphrase.valid.tsv");
  bundle.pretrain.clear();
  for (auto& t : read_monolingual(dir / "denoise.train.tsv")) bundle.pretrain[t.form].push_back(std::move(t));
  bundle.pretrain_valid = read_monolingual(dir / "denoise.valid.tsv");
}

// --- generation files -----------------------------------------------------------

struct GenerationRow {
  TaggedText source;
  Form target_form = Form::Literal;
  TaggedText output;
  std::optional<TaggedText> pivot;
  double mean_log_prob = 0.0;
  bool truncated = false;
};

/// Input rows: form<TAB>text<TAB>target_form.
inline std::vector<std::pair<TaggedText, Form>> read_generation_input(const fs::path& path) {
  std::vector<std::pair<TaggedText, Form>> out;
  std::size_t row = 0;
  for (auto& f : detail::read_tsv(path, 3)) {
    ++row;
    out.emplace_back(TaggedText{detail::parse_form_field(f[0], path, row), split_ws(f[1])},
                     detail::parse_form_field(f[2], path, row));
  }
  return out;
}

inline void write_generation_input(const std::vector<std::pair<TaggedText, Form>>& rows, const fs::path& path) {
  auto out = detail::open_out(path);
  for (const auto& [t, f] : rows) {
    validate_text(t);
    out << form_name(t.form) << '\t' << t.text() << '\t' << form_name(f) << '\n';
  }
}

/// Output rows append: generated text, pivot text or "-", mean token
/// log-prob (6 decimals; prefixed "!" when decoding was truncated).
inline void write_generations(const std::vector<GenerationRow>& rows, const fs::path& path) {
  auto out = detail::open_out(path);
  for (const auto& r : rows) {
    out << form_name(r.source.form) << '\t' << r.source.text() << '\t' << form_name(r.target_form) << '\t'
        << r.output.text() << '\t' << (r.pivot ? r.pivot->text() : std::string("-")) << '\t'
        << (r.truncated ? "!" : "") << detail::format_prob(r.mean_log_prob) << '\n';
  }
}

inline std::vector<GenerationRow> read_generations(const fs::path& path) {
  std::vector<GenerationRow> out;
  std::size_t row = 0;
  for (auto& f : detail::read_tsv(path, 6)) {
    ++row;
    GenerationRow r;
    r.source = {detail::parse_form_field(f[0], path, row), split_ws(f[1])};
    r.target_form = detail::parse_form_field(f[2], path, row);
    r.output = {r.target_form, split_ws(f[3])};
    if (f[4] != "-") r.pivot = TaggedText{Form::Literal, split_ws(f[4])};
    std::string lp = f[5];
    if (!lp.empty() && lp[0] == '!') {
      r.truncated = true;
      lp.erase(0, 1);
    }
    r.mean_log_prob = std::stod(lp);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<GenerationRow> run_generation(const Checkpoint<float>& ck,
                                                 const std::vector<std::pair<TaggedText, Form>>& inputs, GenMode mode,
                                                 const DecodeOptions& decode = {}, int max_new_tokens = 60,
                                                 std::size_t chunk = 256) {
  std::vector<GenerationRow> out;
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    std::vector<GenRequest> reqs;
    for (std::size_t i = start; i < std::min(inputs.size(), start + chunk); ++i) {
      reqs.push_back({inputs[i].first, inputs[i].second, mode, decode, max_new_tokens});
    }
    auto res = generate_batch(ck, reqs);
    for (std::size_t k = 0; k < res.size(); ++k) {
      out.push_back({reqs[k].source, reqs[k].target_form, res[k].output, res[k].pivot_text, res[k].mean_log_prob(),
                     res[k].truncated});
    }
  }
  return out;
}

inline std::string direction_name(Form s, Form t) {
  return std::string(form_name(s)) + "-" + std::string(form_name(t));
}

/// Test-set directions: literal <-> each figure, and every ordered pair of
/// distinct figures. Rows follow the order of the test split.
inline std::map<std::string, std::vector<std::pair<TaggedText, Form>>> test_generation_inputs(
    const FormCorpora& corpora, bool include_fig_to_fig) {
  std::map<std::string, std::vector<std::pair<TaggedText, Form>>> out;
  for (const auto& [f, s] : corpora) {
    auto& to_fig = out[direction_name(Form::Literal, f)];
    auto& to_lit = out[direction_name(f, Form::Literal)];
    for (const auto& p : s.test) {
      to_fig.emplace_back(p.source, f);
      to_lit.emplace_back(p.target, Form::Literal);
    }
    if (!include_fig_to_fig) continue;
    for (const auto& [g, _] : corpora) {
      if (g == f) continue;
      auto& v = out[direction_name(f, g)];
      for (const auto& p : s.test) v.emplace_back(p.target, g);
    }
  }
  return out;
}

/// Pairs a generation file for direction src->tgt with its test split.
inline DirectionData direction_data(const FormCorpora& corpora, Form src, Form tgt,
                                    const std::vector<GenerationRow>& rows) {
  DirectionData d;
  d.source_form = src;
  d.target_form = tgt;
  const Form key = is_figurative(src) ? src : tgt;
  auto it = corpora.find(key);
  if (it == corpora.end()) throw Error("no test split for " + std::string(form_name(key)));
  const auto& test = it->second.test;
  if (rows.size() != test.size()) {
    throw Error("direction " + direction_name(src, tgt) + ": " + std::to_string(rows.size()) +
                " generations for " + std::to_string(test.size()) + " test pairs");
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& expect_src = src == Form::Literal ? test[i].source : test[i].target;
    if (rows[i].source.tokens != expect_src.tokens) {
      throw Error("direction " + direction_name(src, tgt) + ": row " + std::to_string(i + 1) +
                  " does not match the test split");
    }
    d.outputs.push_back(rows[i].output.tokens);
    if (src == Form::Literal) {
      d.references.push_back(test[i].target.tokens);
    } else if (tgt == Form::Literal) {
      d.references.push_back(test[i].source.tokens);
    } else {
      d.sources.push_back(test[i].target.tokens);
      d.literals.push_back(test[i].source.tokens);
    }
  }
  return d;
}

// --- report tables ---------------------------------------------------------------

inline std::string fmt(double v) { return detail::format_prob(v); }
inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string("-"); }

struct TableRow {
  std::string system;
  std::string direction;
  EvalReport report;
};

/// Table-3 layout: one row per (system, direction) with TGT, BLEU, HM and
/// plugin columns.
inline void write_literal_table(const std::vector<TableRow>& rows, const fs::path& path) {
  auto out = detail::open_out(path);
  std::vector<std::string> plugins;
  if (!rows.empty()) {
    for (const auto& [k, _] : rows.front().report.plugin_scores) plugins.push_back(k);
  }
  out << "system\tdirection\tTGT\tBLEU";
  for (const auto& p : plugins) out << '\t' << p;
  out << "\tHM\n";
  for (const auto& [system, direction, r] : rows) {
    out << system << '\t' << direction << '\t' << fmt(r.tgt_accuracy) << '\t' << fmt(r.bleu);
    for (const auto& p : plugins) out << '\t' << fmt(r.plugin_scores.count(p) ? r.plugin_scores.at(p) : 0.0);
    out << '\t' << fmt(r.hm) << '\n';
  }
}

/// Table-4 layout: SRC, TGT, then BLEU/HM against the source text and
/// against the literal text.
inline void write_figurative_table(const std::vector<TableRow>& rows, const fs::path& path) {
  auto out = detail::open_out(path);
  std::vector<std::string> plugins;
  if (!rows.empty()) {
    for (const auto& [k, _] : rows.front().report.plugin_scores) plugins.push_back(k);
  }
  out << "system\tdirection\tSRC\tTGT\tBLEU_source";
  for (const auto& p : plugins) out << '\t' << p << "_source";
  out << "\tHM_source\tBLEU_literal\tHM_literal\n";
  for (const auto& [system, direction, r] : rows) {
    out << system << '\t' << direction << '\t' << fmt(r.src_accuracy) << '\t'
        << fmt(r.tgt_accuracy) << '\t' << fmt(r.bleu);
    for (const auto& p : plugins) out << '\t' << fmt(r.plugin_scores.count(p) ? r.plugin_scores.at(p) : 0.0);
    out << '\t' << fmt(r.hm) << '\t' << fmt(r.bleu_literal) << '\t' << fmt(r.hm_literal) << '\n';
  }
}

/// Generations of several systems: system name -> direction -> rows, in
/// reporting order.
using GenerationSet = std::vector<std::pair<std::string, std::map<std::string, std::vector<GenerationRow>>>>;

struct EvalTables {
  std::vector<TableRow> literal_rows;
  std::vector<TableRow> figurative_rows;
  nlohmann::json reports = nlohmann::json::object();
};

inline std::pair<Form, Form> parse_direction(const std::string& dir) {
  const auto dash = dir.find('-');
  if (dash == std::string::npos) throw Error("bad direction name '" + dir + "' (expected SRC-TGT)");
  return {parse_form(dir.substr(0, dash)), parse_form(dir.substr(dash + 1))};
}

/// Scores every direction of every system against the test splits and
/// writes out/SYSTEM/DIR.json, table3_literal.tsv (with macro-averaged
/// figure -> literal rows) and table4_figurative.tsv.
inline EvalTables evaluate_generations(const GenerationSet& systems, const FormCorpora& corpora,
                                       const ClassifierSet& classifiers, const ScorerList& plugins,
                                       const fs::path& out) {
  EvalTables t;
  for (const auto& [system, dirs] : systems) {
    for (const auto& [dir, rows] : dirs) {
      const auto [src, tgt] = parse_direction(dir);
      const auto report = evaluate_direction(direction_data(corpora, src, tgt, rows), classifiers, plugins);
      t.reports[system][dir] = to_json(report);
      auto f = detail::open_out(out / system / (dir + ".json"));
      f << to_json(report).dump(2) << '\n';
      const bool fig_to_fig = is_figurative(src) && is_figurative(tgt);
      (fig_to_fig ? t.figurative_rows : t.literal_rows).push_back({system, dir, report});
    }
  }
  std::vector<TableRow> table3 = t.literal_rows;
  for (const auto& [system, _] : systems) {
    std::vector<EvalReport> to_lit;
    for (const auto& row : t.literal_rows) {
      if (row.system == system && row.report.target_form == Form::Literal) to_lit.push_back(row.report);
    }
    if (!to_lit.empty()) table3.push_back({system, "FIGURATIVE-LITERAL(macro)", macro_average(to_lit)});
  }
  write_literal_table(table3, out / "table3_literal.tsv");
  write_figurative_table(t.figurative_rows, out / "table4_figurative.tsv");
  return t;
}

// --- desk-scale reproduction -------------------------------------------------------

/// Settings for the full synthetic run. Training settings are scaled for a
/// CPU: the published lr 1e-5 with batch 32 x 8 is far too slow to train a
/// randomly initialized model at this size.
struct DeskConfig {
  std::uint64_t seed = 7;
  std::size_t n_per_form = 500;
  std::size_t pool_per_form = 600;
  ClassifierTrainOptions classifier{};
  RecipeConfig recipe = default_recipe();

  static RecipeConfig default_recipe() {
    RecipeConfig r;
    r.model.dropout = 0.1;
    for (TrainConfig* c : {&r.denoise, &r.paraphrase, &r.figurative}) {
      c->batch_size = 32;
      c->grad_accum_steps = 1;
      c->learning_rate = 1e-3;
      c->patience = 2;
    }
    r.denoise.max_epochs = 4;
    r.paraphrase.max_epochs = 4;
    r.figurative.max_epochs = 12;
    r.upsample_target = 500;
    return r;
  }
};

inline nlohmann::json to_json(const DeskConfig& c) {
  return {{"seed", c.seed},
          {"n_per_form", c.n_per_form},
          {"pool_per_form", c.pool_per_form},
          {"classifier", {{"epochs", c.classifier.epochs}, {"learning_rate", c.classifier.learning_rate},
                          {"l2", c.classifier.l2}, {"hash_bits", c.classifier.hash_bits}}},
          {"model", c.recipe.model},
          {"denoise", c.recipe.denoise},
          {"paraphrase", c.recipe.paraphrase},
          {"figurative", c.recipe.figurative},
          {"inject_during_paraphrase", c.recipe.inject_during_paraphrase},
          {"upsample_target", c.recipe.upsample_target}};
}

/// Overlays the keys present in `j` onto `c`.
inline void apply_json(DeskConfig& c, const nlohmann::json& j) {
  c.seed = j.value("seed", c.seed);
  c.n_per_form = j.value("n_per_form", c.n_per_form);
  c.pool_per_form = j.value("pool_per_form", c.pool_per_form);
  if (j.contains("classifier")) {
    const auto& k = j.at("classifier");
    c.classifier.epochs = k.value("epochs", c.classifier.epochs);
    c.classifier.learning_rate = k.value("learning_rate", c.classifier.learning_rate);
    c.classifier.l2 = k.value("l2", c.classifier.l2);
    c.classifier.hash_bits = k.value("hash_bits", c.classifier.hash_bits);
  }
  if (j.contains("model")) {
    nlohmann::json m = c.recipe.model;
    m.update(j.at("model"));
    c.recipe.model = m.get<ModelConfig>();
  }
  auto stage = [&](const char* key, TrainConfig& t) {
    if (!j.contains(key)) return;
    nlohmann::json s = t;
    s.update(j.at(key));
    t = s.get<TrainConfig>();
  };
  stage("denoise", c.recipe.denoise);
  stage("paraphrase", c.recipe.paraphrase);
  stage("figurative", c.recipe.figurative);
  c.recipe.inject_during_paraphrase = j.value("inject_during_paraphrase", c.recipe.inject_during_paraphrase);
  c.recipe.upsample_target = j.value("upsample_target", c.recipe.upsample_target);
}

struct DeskSummary {
  ClassifierSuite classifiers;
  std::vector<TableRow> literal_rows;
  std::vector<TableRow> figurative_rows;
  std::map<std::string, std::size_t> parameter_counts;
  nlohmann::json json;
};

using ProgressFn = std::function<void(const std::string&)>;

/// synth -> classifiers -> filtered pre-training data -> PT-TO-FT and MFLAG
/// -> generation (literal <-> figure for both; figure -> figure direct for
/// both and pivot for MFLAG) -> evaluation. Every artifact lands under `out`.
inline DeskSummary reproduce_desk(const DeskConfig& cfg, const fs::path& out, const ProgressFn& progress = {}) {
  auto note = [&](const std::string& s) {
    if (progress) progress(s);
  };
  DeskSummary summary;
  // 1. corpora
  const FormCorpora corpora = synth_corpus(cfg.n_per_form, cfg.seed);
  write_form_corpora(corpora, out / "data");
  note("synthetic corpora written");
  // 2. classifiers
  summary.classifiers = train_classifier_suite(corpora, cfg.seed, cfg.classifier);
  write_classifier_suite(summary.classifiers, out / "classifiers");
  note("classifiers trained");
  // 3. paraphrase pool filtering
  const auto pool = synth_paraphrase_pool(cfg.pool_per_form, derive_seed(cfg.seed, 300));
  const auto filtered = filter_candidates(pool, summary.classifiers.classifiers);
  for (const auto& [f, s] : filtered.scored) {
    write_scored(s, out / "pretrain" / (std::string(form_name(f)) + ".scored.tsv"));
  }
  DataBundle bundle;
  bundle.figurative = corpora;
  fill_pretraining(bundle, filtered.kept);
  write_pretraining(bundle, out / "pretrain");
  note("pre-training data filtered: " + std::to_string(bundle.paraphrase.size()) + " paraphrase pairs");
  // 4. models
  RecipeConfig recipe = cfg.recipe;
  recipe.seed = cfg.seed;
  VariantBuilder builder(bundle, recipe);
  std::map<Variant, Checkpoint<float>> models;
  for (Variant v : {Variant::PtToFt, Variant::Mflag}) {
    auto res = builder.build(v);
    const auto ck_path = out / "models" / (std::string(variant_name(v)) + ".ckpt");
    const auto log_path = out / "models" / (std::string(variant_name(v)) + ".trainlog.jsonl");
    for (auto& log : res.logs) log.best_checkpoint = ck_path.filename().string();
    for (std::size_t i = 0; i < res.logs.size(); ++i) write_train_log(res.logs[i], log_path, i > 0);
    save_checkpoint(ck_path, res.checkpoint);
    summary.parameter_counts[std::string(variant_name(v))] = res.checkpoint.model.parameter_count();
    models.emplace(v, std::move(res.checkpoint));
    note(std::string(variant_name(v)) + " trained");
  }
  // 5. generation
  const auto inputs = test_generation_inputs(corpora, true);
  struct Run {
    Variant variant;
    GenMode mode;
    std::string system;
  };
  const std::vector<Run> runs = {{Variant::PtToFt, GenMode::Direct, "PT-TO-FT"},
                                 {Variant::Mflag, GenMode::Direct, "MFLAG-DR"},
                                 {Variant::Mflag, GenMode::Pivot, "MFLAG-BT"}};
  GenerationSet generations;
  for (const auto& run : runs) {
    auto& dirs = generations.emplace_back(run.system, std::map<std::string, std::vector<GenerationRow>>{}).second;
    for (const auto& [dir, rows] : inputs) {
      const auto [src, tgt] = parse_direction(dir);
      // literal <-> figure directions are single-hop; pivot mode is only for figure -> figure
      if (run.mode == GenMode::Pivot && !(is_figurative(src) && is_figurative(tgt))) continue;
      dirs[dir] = run_generation(models.at(run.variant), rows, run.mode);
      write_generations(dirs[dir], out / "generations" / run.system / (dir + ".tsv"));
    }
    note(run.system + " generated");
  }
  // 6. evaluation
  const ScorerList plugins{std::make_shared<TokenF1Scorer>()};
  auto tables = evaluate_generations(generations, corpora, summary.classifiers.classifiers, plugins, out / "eval");
  summary.literal_rows = std::move(tables.literal_rows);
  summary.figurative_rows = std::move(tables.figurative_rows);
  const auto& reports = tables.reports;
  note("evaluation written");

  summary.json = {{"config", to_json(cfg)},
                  {"parameter_counts", summary.parameter_counts},
                  {"reports", reports},
                  {"paraphrase_pairs", bundle.paraphrase.size()}};
  auto f = detail::open_out(out / "eval" / "summary.json");
  f << summary.json.dump(2) << '\n';
  return summary;
}

}  // namespace mflag
