// Command-line front end. Lives in a header so tests can drive it in-process.
//
// Every command accepts --config FILE (JSON). Keys named like a flag (with
// '_' or '-') fill that flag when it is not given; training commands also
// read the nested "model", "denoise", "paraphrase", "figurative" objects of
// the reproduce-desk schema. Precedence: flags > config > defaults.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mflag/pipeline.hpp"
#include "mflag/probe.hpp"

namespace mflag::cli {

namespace fs = std::filesystem;

/// Written next to every command's outputs.
struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::string> inputs;
  std::map<std::string, std::string> outputs;
  std::uint64_t seed = 0;
  double duration_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"command", command}, {"config", config},     {"inputs", inputs},
            {"outputs", outputs}, {"seed", seed},         {"tool_version", kToolVersion},
            {"duration_seconds", duration_seconds}};
  }

  void write(const fs::path& path) const {
    auto out = detail::open_out(path);
    out << to_json().dump(2) << '\n';
  }
};

/// Manifest location for a command writing into a directory, or a file.
inline fs::path manifest_for_dir(const fs::path& dir) { return dir / "manifest.json"; }
inline fs::path manifest_for_file(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

namespace detail {

inline std::string key_of(const CLI::Option& opt) {
  std::string k = opt.get_single_name();
  for (auto& c : k) {
    if (c == '-') c = '_';
  }
  return k;
}

inline nlohmann::json load_config(const std::string& path) {
  if (path.empty()) return nlohmann::json::object();
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  try {
    auto j = nlohmann::json::parse(in);
    if (!j.is_object()) throw Error("config " + path + ": top level must be an object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config " + path + ": " + e.what());
  }
}

/// Fills flags that were not given on the command line from the config.
inline void apply_config(CLI::App& app, const nlohmann::json& config) {
  for (CLI::Option* opt : app.get_options()) {
    if (opt->count() > 0 || opt->get_single_name() == "help" || opt->get_single_name() == "config") continue;
    std::string key = key_of(*opt);
    std::string dashed = opt->get_single_name();
    const nlohmann::json* v = nullptr;
    if (config.contains(key)) v = &config.at(key);
    else if (config.contains(dashed)) v = &config.at(dashed);
    if (!v || v->is_object()) continue;
    auto as_str = [](const nlohmann::json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
    try {
      if (v->is_array()) {
        for (const auto& x : *v) opt->add_result(as_str(x));
      } else {
        opt->add_result(as_str(*v));
      }
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw UsageError("config key '" + key + "': " + e.what());
    }
  }
}

/// Resolved flag values, for the manifest.
inline nlohmann::json resolved_flags(const CLI::App& app) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_single_name() == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[key_of(*opt)] = r.size() == 1 ? nlohmann::json(r.front()) : nlohmann::json(r);
    } else {
      j[key_of(*opt)] = opt->get_default_str();
    }
  }
  return j;
}

inline Form form_arg(const std::string& s) {
  auto f = try_parse_form(s);
  if (!f) throw UsageError("unknown form '" + s + "' (expected LITERAL, HYPERBOLE, IDIOM, SARCASM, METAPHOR or SIMILE)");
  return *f;
}

/// Training flags shared by pretrain and finetune.
struct TrainFlags {
  std::optional<double> lr;
  std::optional<int> batch_size, accum, patience, max_epochs;

  void add(CLI::App& app) {
    app.add_option("--lr", lr, "learning rate for every stage run by this command");
    app.add_option("--batch-size", batch_size, "micro-batch size");
    app.add_option("--accum", accum, "gradient accumulation steps");
    app.add_option("--patience", patience, "early-stopping patience in epochs");
    app.add_option("--max-epochs", max_epochs, "epoch cap per stage");
  }

  void apply(TrainConfig& c) const {
    if (lr) c.learning_rate = *lr;
    if (batch_size) c.batch_size = *batch_size;
    if (accum) c.grad_accum_steps = *accum;
    if (patience) c.patience = *patience;
    if (max_epochs) c.max_epochs = *max_epochs;
  }
};

/// Desk defaults, overlaid with the config, then with flags.
inline RecipeConfig resolve_recipe(const nlohmann::json& config, std::uint64_t seed, const TrainFlags& flags,
                                   bool inject_during_paraphrase) {
  DeskConfig desk;
  apply_json(desk, config);
  RecipeConfig r = desk.recipe;
  r.seed = seed;
  r.inject_during_paraphrase = inject_during_paraphrase;
  for (TrainConfig* c : {&r.denoise, &r.paraphrase, &r.figurative}) flags.apply(*c);
  return r;
}

inline nlohmann::json recipe_json(const RecipeConfig& r) {
  return {{"model", r.model},
          {"denoise", r.denoise},
          {"paraphrase", r.paraphrase},
          {"figurative", r.figurative},
          {"inject_during_paraphrase", r.inject_during_paraphrase},
          {"upsample_target", r.upsample_target}};
}

inline fs::path trainlog_path(const fs::path& ckpt) {
  fs::path p = ckpt;
  p.replace_extension(".trainlog.jsonl");
  return p;
}

inline void write_logs(std::vector<TrainLog> logs, const fs::path& ckpt) {
  for (std::size_t i = 0; i < logs.size(); ++i) {
    logs[i].best_checkpoint = ckpt.filename().string();
    write_train_log(logs[i], trainlog_path(ckpt), i > 0);
  }
}

}  // namespace detail

/// Parses and runs one command. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Multi-figurative language generation: data, training, generation and evaluation", "mflag"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  app.option_defaults()->always_capture_default();

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config; flags override it")->check(CLI::ExistingFile);
  };
  std::uint64_t seed = 7;

  // synth
  auto* synth = app.add_subcommand("synth", "write the synthetic parallel corpora");
  std::string synth_out;
  std::size_t synth_n = 1000, synth_pool = 0;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--n", synth_n, "pairs per figurative form")->check(CLI::PositiveNumber);
  synth->add_option("--pool", synth_pool, "also write this many paraphrase candidates per form (0 = none)");
  synth->add_option("--seed", seed, "random seed");
  add_config(synth);

  // train-classifiers
  auto* tc = app.add_subcommand("train-classifiers", "train one form classifier per figure");
  std::string tc_data, tc_out;
  ClassifierTrainOptions tc_opt;
  tc->add_option("--data", tc_data, "corpus directory (FORM.train/valid/test.tsv)")->required();
  tc->add_option("--out", tc_out, "output directory")->required();
  tc->add_option("--seed", seed, "random seed");
  tc->add_option("--epochs", tc_opt.epochs, "SGD epochs");
  tc->add_option("--learning-rate", tc_opt.learning_rate, "initial SGD step");
  tc->add_option("--l2", tc_opt.l2, "L2 penalty");
  tc->add_option("--hash-bits", tc_opt.hash_bits, "feature hash width in bits")->check(CLI::Range(8, 24));
  add_config(tc);

  // filter
  auto* filter = app.add_subcommand("filter", "score paraphrase candidates and keep confident pairs");
  std::string f_pool, f_classifiers, f_out;
  std::vector<std::string> f_sigma;
  filter->add_option("--pool", f_pool, "directory of FORM.pool.tsv candidate files")->required();
  filter->add_option("--classifiers", f_classifiers, "classifier directory")->required();
  filter->add_option("--out", f_out, "output directory")->required();
  filter->add_option("--sigma", f_sigma, "per-form threshold override, FORM=value (repeatable)");
  add_config(filter);

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "denoising then paraphrase training from scratch");
  std::string p_pretrain, p_data, p_out, p_variant = "MFLAG";
  bool p_inject_para = true;
  detail::TrainFlags p_flags;
  pretrain->add_option("--pretrain", p_pretrain, "filtered pre-training directory")->required();
  pretrain->add_option("--data", p_data, "figurative corpus directory (vocabulary coverage)")->required();
  pretrain->add_option("--out", p_out, "checkpoint path")->required();
  pretrain->add_option("--variant", p_variant, "PT-TO-FT or MFLAG");
  pretrain->add_option("--inject-during-paraphrase", p_inject_para, "MFLAG: inject during the paraphrase stage");
  pretrain->add_option("--seed", seed, "random seed");
  p_flags.add(*pretrain);
  add_config(pretrain);

  // finetune
  auto* finetune = app.add_subcommand("finetune", "literal <-> figurative fine-tuning");
  std::string ft_init, ft_data, ft_out, ft_variant = "MFLAG";
  detail::TrainFlags ft_flags;
  finetune->add_option("--init", ft_init, "pre-trained checkpoint (omit for BART-MULTI-ANALOG)");
  finetune->add_option("--data", ft_data, "figurative corpus directory")->required();
  finetune->add_option("--out", ft_out, "checkpoint path")->required();
  finetune->add_option("--variant", ft_variant, "BART-MULTI-ANALOG, PT-TO-FT or MFLAG");
  finetune->add_option("--seed", seed, "random seed");
  ft_flags.add(*finetune);
  add_config(finetune);

  // generate
  auto* gen = app.add_subcommand("generate", "rewrite texts into a target form");
  std::string g_ckpt, g_input, g_out, g_mode = "direct", g_target;
  int g_beam = 1, g_max_new = 60;
  gen->add_option("--checkpoint", g_ckpt, "model checkpoint")->required();
  gen->add_option("--input", g_input,
                  "TSV of form<TAB>text (with --target-form) or form<TAB>text<TAB>target_form")
      ->required();
  gen->add_option("--out", g_out, "output TSV")->required();
  gen->add_option("--mode", g_mode, "direct or pivot")->check(CLI::IsMember({"direct", "pivot"}));
  gen->add_option("--target-form", g_target, "target form for every row");
  gen->add_option("--beam", g_beam, "beam width (1 = greedy)");
  gen->add_option("--max-new-tokens", g_max_new, "decoding limit");
  add_config(gen);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score generations and write Table 3/4-shaped reports");
  std::string e_results, e_data, e_classifiers, e_out;
  ev->add_option("--results", e_results, "SYSTEM/DIRECTION.tsv tree, or one system's DIRECTION.tsv files")
      ->required();
  ev->add_option("--data", e_data, "figurative corpus directory (test splits)")->required();
  ev->add_option("--classifiers", e_classifiers, "classifier directory")->required();
  ev->add_option("--out", e_out, "output directory")->required();
  add_config(ev);

  // probe
  auto* probe = app.add_subcommand("probe", "2-D PCA of encoder states for two sentences");
  std::string pr_ckpt, pr_a, pr_a_form = "LITERAL", pr_target, pr_b, pr_b_form, pr_out;
  probe->add_option("--checkpoint", pr_ckpt, "model checkpoint")->required();
  probe->add_option("--a", pr_a, "first sentence")->required();
  probe->add_option("--a-form", pr_a_form, "form of the first sentence");
  probe->add_option("--target-form", pr_target, "form the first sentence is rewritten into")->required();
  probe->add_option("--b", pr_b, "second sentence")->required();
  probe->add_option("--b-form", pr_b_form, "form of the second sentence")->required();
  probe->add_option("--out", pr_out, "output TSV (token, x, y, sentence_id)")->required();
  add_config(probe);

  // reproduce-desk
  auto* desk = app.add_subcommand("reproduce-desk", "run the whole pipeline on the synthetic benchmark");
  std::string d_out;
  std::optional<std::uint64_t> d_seed;
  std::optional<std::size_t> d_n, d_pool;
  bool d_quiet = false;
  desk->add_option("--out", d_out, "output directory")->required();
  desk->add_option("--seed", d_seed, "random seed (default 7)");
  desk->add_option("--n", d_n, "pairs per figurative form (default 500)");
  desk->add_option("--pool", d_pool, "paraphrase candidates per form (default 600)");
  desk->add_flag("--quiet", d_quiet, "no progress messages");
  add_config(desk);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  try {
    CLI::App* sub = app.get_subcommands().front();
    const nlohmann::json config = detail::load_config(config_path);
    if (sub != desk) detail::apply_config(*sub, config);
    RunManifest m;
    m.command = sub->get_name();
    m.config = detail::resolved_flags(*sub);
    m.seed = seed;

    if (sub == synth) {
      const auto corpora = synth_corpus(synth_n, seed);
      write_form_corpora(corpora, synth_out);
      if (synth_pool > 0) {
        for (const auto& [f, pairs] : synth_paraphrase_pool(synth_pool, derive_seed(seed, 300))) {
          write_corpus(pairs, fs::path(synth_out) / "pool" / (std::string(form_name(f)) + ".pool.tsv"));
        }
        m.outputs["pool"] = (fs::path(synth_out) / "pool").string();
      }
      m.outputs["corpus"] = synth_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_dir(synth_out));
      out << "wrote " << corpora.size() << " forms x " << synth_n << " pairs to " << synth_out << '\n';
    } else if (sub == tc) {
      const auto corpora = read_form_corpora(tc_data);
      const auto suite = train_classifier_suite(corpora, seed, tc_opt);
      write_classifier_suite(suite, tc_out);
      for (const auto& [f, r] : suite.reports) {
        out << form_name(f) << "\tP=" << fmt(r.precision) << "\tR=" << fmt(r.recall) << "\tF1=" << fmt(r.f1) << '\n';
      }
      m.inputs["data"] = tc_data;
      m.outputs["classifiers"] = tc_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_dir(tc_out));
    } else if (sub == filter) {
      std::map<Form, double> sigma;
      for (const auto& s : f_sigma) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--sigma expects FORM=value, got '" + s + "'");
        try {
          sigma[detail::form_arg(s.substr(0, eq))] = std::stod(s.substr(eq + 1));
        } catch (const std::logic_error&) {
          throw UsageError("--sigma: bad value in '" + s + "'");
        }
      }
      std::map<Form, std::vector<ParallelPair>> pool;
      for (Form f : kFigurativeForms) {
        const auto path = fs::path(f_pool) / (std::string(form_name(f)) + ".pool.tsv");
        if (fs::exists(path)) pool[f] = read_corpus(path);
      }
      if (pool.empty()) throw Error("no <FORM>.pool.tsv files in " + f_pool);
      const auto filtered = filter_candidates(pool, load_classifiers(f_classifiers), sigma);
      DataBundle bundle;
      fill_pretraining(bundle, filtered.kept);
      for (const auto& [f, s] : filtered.scored) {
        write_scored(s, fs::path(f_out) / (std::string(form_name(f)) + ".scored.tsv"));
        out << form_name(f) << "\tkept " << filtered.kept.at(f).size() << " of " << s.size() << '\n';
      }
      write_pretraining(bundle, f_out);
      m.inputs = {{"pool", f_pool}, {"classifiers", f_classifiers}};
      m.outputs["pretrain"] = f_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_dir(f_out));
    } else if (sub == pretrain) {
      const Variant v = parse_variant(p_variant);
      if (v == Variant::BartMultiAnalog) throw UsageError("BART-MULTI-ANALOG has no pre-training stages");
      DataBundle bundle;
      read_pretraining(bundle, p_pretrain);
      bundle.figurative = read_form_corpora(p_data);
      const bool inject_para = v == Variant::Mflag && p_inject_para;
      const RecipeConfig recipe = detail::resolve_recipe(config, seed, p_flags, p_inject_para);
      Checkpoint<float> ck;
      ck.vocab = Vocabulary::build(bundle.all_texts());
      ck.model = init_model(recipe, ck.vocab);
      std::vector<TrainLog> logs;
      logs.push_back(run_denoise_stage(ck.model, ck.vocab, bundle, recipe));
      logs.push_back(run_paraphrase_stage(ck.model, ck.vocab, bundle, recipe, inject_para));
      ck.meta = variant_meta(v, p_inject_para);
      ck.meta["stage"] = stage_name(Stage::Paraphrase);
      save_checkpoint(p_out, ck);
      detail::write_logs(logs, p_out);
      m.config["recipe"] = detail::recipe_json(recipe);
      m.inputs = {{"pretrain", p_pretrain}, {"data", p_data}};
      m.outputs = {{"checkpoint", p_out}, {"trainlog", detail::trainlog_path(p_out).string()}};
      m.duration_seconds = elapsed();
      m.write(manifest_for_file(p_out));
      out << "wrote " << p_out << " (" << ck.model.parameter_count() << " parameters)\n";
    } else if (sub == finetune) {
      const Variant v = parse_variant(ft_variant);
      if (v == Variant::BartMultiAnalog) {
        if (!ft_init.empty()) throw UsageError("BART-MULTI-ANALOG trains from scratch; drop --init");
      } else if (ft_init.empty()) {
        throw UsageError("--init is required for " + std::string(variant_name(v)));
      }
      const FormCorpora corpora = read_form_corpora(ft_data);
      Checkpoint<float> ck;
      bool inject_para = false;
      RecipeConfig recipe = detail::resolve_recipe(config, seed, ft_flags, false);
      if (ft_init.empty()) {
        DataBundle bundle;
        bundle.figurative = corpora;
        ck.vocab = Vocabulary::build(bundle.all_texts());
        ck.model = init_model(recipe, ck.vocab);
      } else {
        ck = load_checkpoint<float>(ft_init);
        inject_para = ck.meta.value("inject_during_paraphrase", false);
      }
      std::vector<TrainLog> logs{
          run_figurative_stage(ck.model, ck.vocab, corpora, recipe, v == Variant::Mflag)};
      ck.meta = variant_meta(v, inject_para);
      ck.meta["stage"] = stage_name(Stage::Figurative);
      save_checkpoint(ft_out, ck);
      detail::write_logs(logs, ft_out);
      m.config["recipe"] = detail::recipe_json(recipe);
      m.inputs = {{"data", ft_data}};
      if (!ft_init.empty()) m.inputs["init"] = ft_init;
      m.outputs = {{"checkpoint", ft_out}, {"trainlog", detail::trainlog_path(ft_out).string()}};
      m.duration_seconds = elapsed();
      m.write(manifest_for_file(ft_out));
      out << "wrote " << ft_out << '\n';
    } else if (sub == gen) {
      const GenMode mode = g_mode == "pivot" ? GenMode::Pivot : GenMode::Direct;
      std::optional<Form> target;
      if (!g_target.empty()) target = detail::form_arg(g_target);
      // reject ill-formed requests before touching any file
      if (target) GenRequest{{}, *target, mode, {g_beam}, g_max_new}.validate();
      std::vector<std::pair<TaggedText, Form>> inputs;
      if (target) {
        for (auto& t : read_monolingual(g_input)) inputs.emplace_back(std::move(t), *target);
      } else {
        inputs = read_generation_input(g_input);
      }
      const auto ck = load_checkpoint<float>(g_ckpt);
      const auto rows = run_generation(ck, inputs, mode, {g_beam}, g_max_new);
      write_generations(rows, g_out);
      std::size_t truncated = 0;
      for (const auto& r : rows) truncated += r.truncated ? 1 : 0;
      if (truncated > 0) err << "warning: " << truncated << " outputs hit --max-new-tokens\n";
      m.inputs = {{"checkpoint", g_ckpt}, {"input", g_input}};
      m.outputs["generations"] = g_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_file(g_out));
      out << "wrote " << rows.size() << " rows to " << g_out << '\n';
    } else if (sub == ev) {
      const auto corpora = read_form_corpora(e_data);
      const auto classifiers = load_classifiers(e_classifiers);
      auto read_system = [](const fs::path& dir) {
        std::map<std::string, std::vector<GenerationRow>> dirs;
        for (const auto& entry : fs::directory_iterator(dir)) {
          if (entry.is_regular_file() && entry.path().extension() == ".tsv") {
            dirs[entry.path().stem().string()] = read_generations(entry.path());
          }
        }
        return dirs;
      };
      GenerationSet systems;
      std::vector<fs::path> subdirs;
      for (const auto& entry : fs::directory_iterator(e_results)) {
        if (entry.is_directory()) subdirs.push_back(entry.path());
      }
      std::sort(subdirs.begin(), subdirs.end());
      for (const auto& d : subdirs) {
        auto dirs = read_system(d);
        if (!dirs.empty()) systems.emplace_back(d.filename().string(), std::move(dirs));
      }
      if (systems.empty()) {
        auto dirs = read_system(e_results);
        if (!dirs.empty()) systems.emplace_back(fs::path(e_results).filename().string(), std::move(dirs));
      }
      if (systems.empty()) throw Error("no generation files under " + e_results);
      const ScorerList plugins{std::make_shared<TokenF1Scorer>()};
      const auto tables = evaluate_generations(systems, corpora, classifiers, plugins, e_out);
      m.inputs = {{"results", e_results}, {"data", e_data}, {"classifiers", e_classifiers}};
      m.outputs["eval"] = e_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_dir(e_out));
      out << "evaluated " << tables.literal_rows.size() + tables.figurative_rows.size() << " directions into " << e_out
          << '\n';
    } else if (sub == probe) {
      const TaggedText a = TaggedText::from_string(detail::form_arg(pr_a_form), pr_a);
      const TaggedText b = TaggedText::from_string(detail::form_arg(pr_b_form), pr_b);
      const Form target = detail::form_arg(pr_target);
      const auto ck = load_checkpoint<float>(pr_ckpt);
      const auto res = pca_probe(ck, a, target, b);
      auto f = mflag::detail::open_out(pr_out);
      f << "token\tx\ty\tsentence_id\n";
      for (const auto& r : res.rows) f << r.token << '\t' << fmt(r.x) << '\t' << fmt(r.y) << '\t' << r.sentence_id << '\n';
      m.inputs["checkpoint"] = pr_ckpt;
      m.outputs["probe"] = pr_out;
      m.duration_seconds = elapsed();
      m.write(manifest_for_file(pr_out));
      out << "wrote " << res.rows.size() << " rows to " << pr_out << '\n';
    } else if (sub == desk) {
      DeskConfig cfg;
      apply_json(cfg, config);
      if (d_seed) cfg.seed = *d_seed;
      if (d_n) cfg.n_per_form = *d_n;
      if (d_pool) cfg.pool_per_form = *d_pool;
      const auto summary = reproduce_desk(cfg, d_out, [&](const std::string& msg) {
        if (!d_quiet) err << "[" << fmt(elapsed()) << "s] " << msg << '\n';
      });
      m.config = to_json(cfg);
      m.seed = cfg.seed;
      m.outputs = {{"root", d_out}, {"summary", (fs::path(d_out) / "eval" / "summary.json").string()}};
      m.duration_seconds = elapsed();
      m.write(manifest_for_dir(d_out));
      out << "wrote " << d_out << " (" << summary.literal_rows.size() + summary.figurative_rows.size()
          << " evaluated directions)\n";
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace mflag::cli
