// Staged training: denoising pre-training, paraphrase supervision and
// figurative fine-tuning, with gradient accumulation and early stopping.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mflag/checkpoint.hpp"
#include "mflag/corpus.hpp"
#include "mflag/optim.hpp"
#include "mflag/synth.hpp"
#include "mflag/tasks.hpp"

namespace mflag {

enum class Stage { Denoise, Paraphrase, Figurative };

inline std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Denoise: return "DENOISE";
    case Stage::Paraphrase: return "PARAPHRASE";
    case Stage::Figurative: return "FIGURATIVE";
  }
  return "?";
}

inline Stage parse_stage(std::string_view s) {
  if (s == "DENOISE") return Stage::Denoise;
  if (s == "PARAPHRASE") return Stage::Paraphrase;
  if (s == "FIGURATIVE") return Stage::Figurative;
  throw Error("unknown stage '" + std::string(s) + "'");
}

/// Defaults follow the published schedule: batch 32, 8 accumulation steps,
/// lr 1e-5, patience 5.
struct TrainConfig {
  int batch_size = 32;
  int grad_accum_steps = 8;
  double learning_rate = 1e-5;
  int patience = 5;
  std::uint64_t seed = 0;
  Stage stage = Stage::Figurative;
  bool inject_enabled = false;
  int max_epochs = 50;
  double mask_rate = 0.35;

  void validate() const {
    if (batch_size < 1) throw Error("batch_size must be >= 1");
    if (grad_accum_steps < 1) throw Error("grad_accum_steps must be >= 1");
    if (!(learning_rate > 0)) throw Error("learning_rate must be > 0");
    if (patience < 1) throw Error("patience must be >= 1");
    if (max_epochs < 0) throw Error("max_epochs must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size}, {"grad_accum_steps", c.grad_accum_steps},
       {"learning_rate", c.learning_rate}, {"patience", c.patience},
       {"seed", c.seed}, {"stage", stage_name(c.stage)},
       {"inject_enabled", c.inject_enabled}, {"max_epochs", c.max_epochs},
       {"mask_rate", c.mask_rate}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum_steps = j.value("grad_accum_steps", c.grad_accum_steps);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  if (j.contains("stage")) c.stage = parse_stage(j.at("stage").get<std::string>());
  c.inject_enabled = j.value("inject_enabled", c.inject_enabled);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.mask_rate = j.value("mask_rate", c.mask_rate);
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  long optimizer_steps = 0;
  bool improved = false;
};

struct TrainLog {
  Stage stage = Stage::Figurative;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;  // 0: no epoch ran, parameters unchanged
  double best_valid_loss = std::numeric_limits<double>::infinity();
  int stop_epoch = 0;
  bool early_stopped = false;
  std::string best_checkpoint;
};

/// One JSON object per epoch.
inline void write_train_log(const TrainLog& log, const std::filesystem::path& path, bool append = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& e : log.epochs) {
    nlohmann::json j = {{"stage", stage_name(log.stage)},
                        {"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"valid_loss", e.valid_loss},
                        {"optimizer_steps", e.optimizer_steps},
                        {"improved", e.improved},
                        {"best_epoch", log.best_epoch},
                        {"stop_epoch", log.stop_epoch},
                        {"best_checkpoint", log.best_checkpoint}};
    out << j.dump() << '\n';
  }
}

/// Number of optimizer updates for one epoch of `n_batches` micro-batches.
inline long optimizer_steps_per_epoch(std::size_t n_batches, int accum) {
  return static_cast<long>((n_batches + static_cast<std::size_t>(accum) - 1) / static_cast<std::size_t>(accum));
}

using EpochExamples = std::function<std::vector<Example>(int epoch)>;

/// Generic loop. Each epoch shuffles the examples, runs micro-batches of
/// `batch_size`, and takes one Adam step per `grad_accum_steps` micro-batches
/// with the gradient of the token-mean NLL over all of them. Training stops
/// `patience` epochs after the last validation improvement, and the best
/// parameters are restored.
template <typename T>
TrainLog run_training(Seq2Seq<T>& model, const EpochExamples& train_examples, const std::vector<Example>& valid,
                      const TrainConfig& cfg) {
  cfg.validate();
  TrainLog log;
  log.stage = cfg.stage;
  Rng order_rng(derive_seed(cfg.seed, 11));
  Rng dropout_rng(derive_seed(cfg.seed, 12));
  Adam<T> opt(model, {cfg.learning_rate});
  std::optional<Seq2Seq<T>> best;
  int since_best = 0;
  model.zero_grad();
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<Example> examples = train_examples(epoch);
    if (examples.empty()) throw Error("empty training set");
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    order_rng.shuffle(order);

    LossSum epoch_loss, pending;
    int pending_batches = 0;
    std::vector<Example> batch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
      pending += model.forward_backward(batch, &dropout_rng, true);
      if (++pending_batches == cfg.grad_accum_steps || stop == order.size()) {
        opt.step(model, 1.0 / static_cast<double>(pending.tokens));
        epoch_loss += pending;
        pending = {};
        pending_batches = 0;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss.mean();
    rec.valid_loss = valid.empty() ? rec.train_loss : evaluate_loss(model, valid).mean();
    rec.optimizer_steps = opt.steps();
    rec.improved = rec.valid_loss < log.best_valid_loss;
    if (rec.improved) {
      log.best_valid_loss = rec.valid_loss;
      log.best_epoch = epoch;
      best = model;
      since_best = 0;
    } else {
      ++since_best;
    }
    log.epochs.push_back(rec);
    log.stop_epoch = epoch;
    if (since_best >= cfg.patience) {
      log.early_stopped = true;
      break;
    }
  }
  if (best) {
    model = std::move(*best);
    model.zero_grad();
  }
  return log;
}

/// Denoising pre-training over the concatenation of all form-tagged corpora.
/// Each epoch draws a fresh 35% word masking of every text; validation uses
/// one fixed masking.
template <typename T>
TrainLog pretrain_denoise(Seq2Seq<T>& model, const Vocabulary& vocab,
                          const std::map<Form, std::vector<TaggedText>>& corpora,
                          const std::vector<TaggedText>& valid_texts, TrainConfig cfg) {
  cfg.stage = Stage::Denoise;
  std::vector<TaggedText> all;
  for (const auto& [form, texts] : corpora) all.insert(all.end(), texts.begin(), texts.end());
  if (all.empty()) throw Error("pretrain_denoise: no pre-training texts");
  std::vector<Example> valid;
  for (std::size_t i = 0; i < valid_texts.size(); ++i) {
    const auto corrupted = mask_words(valid_texts[i], cfg.mask_rate, derive_seed(cfg.seed ^ 0x5a5a, i));
    valid.push_back(make_denoise_example(vocab, corrupted, valid_texts[i]));
  }
  const EpochExamples train = [&](int epoch) {
    std::vector<Example> out;
    out.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch) * all.size() + i);
      out.push_back(make_denoise_example(vocab, mask_words(all[i], cfg.mask_rate, seed), all[i]));
    }
    return out;
  };
  return run_training(model, train, valid, cfg);
}

/// Teacher-forced supervised rewriting. With cfg.inject_enabled the target
/// form is injected into the encoder.
template <typename T>
TrainLog train_supervised(Seq2Seq<T>& model, const Vocabulary& vocab, const std::vector<ParallelPair>& pairs,
                          const std::vector<ParallelPair>& valid_pairs, const TrainConfig& cfg) {
  if (pairs.empty()) throw Error("train_supervised: empty training pairs");
  std::vector<Example> train, valid;
  for (const auto& p : pairs) train.push_back(make_supervised_example(vocab, p, cfg.inject_enabled));
  for (const auto& p : valid_pairs) valid.push_back(make_supervised_example(vocab, p, cfg.inject_enabled));
  return run_training(model, [&](int) { return train; }, valid, cfg);
}

// ---------------------------------------------------------------------------
// Model variants

enum class Variant { BartMultiAnalog, PtToFt, Mflag };

inline std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::BartMultiAnalog: return "BART-MULTI-ANALOG";
    case Variant::PtToFt: return "PT-TO-FT";
    case Variant::Mflag: return "MFLAG";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "BART-MULTI-ANALOG") return Variant::BartMultiAnalog;
  if (s == "PT-TO-FT") return Variant::PtToFt;
  if (s == "MFLAG") return Variant::Mflag;
  throw UsageError("unknown variant '" + std::string(s) + "' (expected BART-MULTI-ANALOG, PT-TO-FT or MFLAG)");
}

/// Everything the three training stages consume.
struct DataBundle {
  std::map<Form, std::vector<TaggedText>> pretrain;  // denoising texts per form
  std::vector<TaggedText> pretrain_valid;
  std::vector<ParallelPair> paraphrase;  // filtered literal -> figurative pairs
  std::vector<ParallelPair> paraphrase_valid;
  FormCorpora figurative;  // literal -> figurative, per form

  bool has_pretrain() const {
    for (const auto& [f, t] : pretrain) {
      if (!t.empty()) return true;
    }
    return false;
  }

  /// All texts the vocabulary must cover.
  std::vector<TaggedText> all_texts() const {
    std::vector<TaggedText> out;
    for (const auto& [f, t] : pretrain) out.insert(out.end(), t.begin(), t.end());
    out.insert(out.end(), pretrain_valid.begin(), pretrain_valid.end());
    for (const auto* v : {&paraphrase, &paraphrase_valid}) {
      for (const auto& p : *v) {
        out.push_back(p.source);
        out.push_back(p.target);
      }
    }
    for (const auto& [f, s] : figurative) {
      for (const auto* v : {&s.train, &s.valid, &s.test}) {
        for (const auto& p : *v) {
          out.push_back(p.source);
          out.push_back(p.target);
        }
      }
    }
    return out;
  }
};

struct RecipeConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  TrainConfig denoise{.stage = Stage::Denoise};
  TrainConfig paraphrase{.stage = Stage::Paraphrase};
  TrainConfig figurative{.stage = Stage::Figurative};
  bool inject_during_paraphrase = true;
  std::size_t upsample_target = 10000;
  std::vector<Form> upsample_forms{Form::Hyperbole, Form::Idiom};
};

struct VariantResult {
  Checkpoint<float> checkpoint;
  std::vector<TrainLog> logs;
};

/// Both directions of every pair.
inline std::vector<ParallelPair> bidirectional(const std::vector<ParallelPair>& pairs) {
  std::vector<ParallelPair> out = pairs;
  const auto rev = reversed(pairs);
  out.insert(out.end(), rev.begin(), rev.end());
  return out;
}

/// Figurative-stage data: every form's literal<->figurative pairs, with the
/// configured forms upsampled by replication first.
inline std::pair<std::vector<ParallelPair>, std::vector<ParallelPair>> figurative_stage_data(
    const FormCorpora& corpora, const RecipeConfig& recipe) {
  std::vector<ParallelPair> train, valid;
  for (const auto& [form, split] : corpora) {
    auto t = split.train;
    const bool up = std::find(recipe.upsample_forms.begin(), recipe.upsample_forms.end(), form) !=
                    recipe.upsample_forms.end();
    if (up && !t.empty()) t = upsample(t, recipe.upsample_target, derive_seed(recipe.seed, 40 + static_cast<int>(form)));
    const auto tb = bidirectional(t);
    const auto vb = bidirectional(split.valid);
    train.insert(train.end(), tb.begin(), tb.end());
    valid.insert(valid.end(), vb.begin(), vb.end());
  }
  return {train, valid};
}

// Stage runners shared by VariantBuilder and the CLI. Stage seeds derive from
// the recipe seed so one number controls a whole run.

inline TrainConfig stage_config(const RecipeConfig& recipe, Stage stage, bool inject) {
  TrainConfig cfg = stage == Stage::Denoise      ? recipe.denoise
                    : stage == Stage::Paraphrase ? recipe.paraphrase
                                                 : recipe.figurative;
  cfg.stage = stage;
  cfg.inject_enabled = inject;
  cfg.seed = derive_seed(recipe.seed, 20 + static_cast<std::uint64_t>(stage));
  return cfg;
}

inline Seq2Seq<float> init_model(const RecipeConfig& recipe, const Vocabulary& vocab) {
  ModelConfig cfg = recipe.model;
  cfg.vocab_size = vocab.size();
  cfg.validate();
  return Seq2Seq<float>(cfg, derive_seed(recipe.seed, 1));
}

/// Denoising never injects: the form code already leads the target.
inline TrainLog run_denoise_stage(Seq2Seq<float>& model, const Vocabulary& vocab, const DataBundle& data,
                                  const RecipeConfig& recipe) {
  if (!data.has_pretrain()) throw Error("missing data for stage DENOISE");
  return pretrain_denoise(model, vocab, data.pretrain, data.pretrain_valid,
                          stage_config(recipe, Stage::Denoise, false));
}

inline TrainLog run_paraphrase_stage(Seq2Seq<float>& model, const Vocabulary& vocab, const DataBundle& data,
                                     const RecipeConfig& recipe, bool inject) {
  if (data.paraphrase.empty()) throw Error("missing data for stage PARAPHRASE");
  return train_supervised(model, vocab, bidirectional(data.paraphrase), bidirectional(data.paraphrase_valid),
                          stage_config(recipe, Stage::Paraphrase, inject));
}

inline TrainLog run_figurative_stage(Seq2Seq<float>& model, const Vocabulary& vocab, const FormCorpora& corpora,
                                     const RecipeConfig& recipe, bool inject) {
  if (corpora.empty()) throw Error("missing data for stage FIGURATIVE");
  const auto [train, valid] = figurative_stage_data(corpora, recipe);
  return train_supervised(model, vocab, train, valid, stage_config(recipe, Stage::Figurative, inject));
}

inline nlohmann::json variant_meta(Variant variant, bool inject_during_paraphrase) {
  return {{"variant", variant_name(variant)},
          {"inject", variant == Variant::Mflag},
          {"inject_during_paraphrase", variant == Variant::Mflag && inject_during_paraphrase}};
}

/// Builds the three model variants from one data bundle. Stages shared by
/// several variants with identical settings are trained once and reused.
class VariantBuilder {
 public:
  VariantBuilder(DataBundle data, RecipeConfig recipe)
      : data_(std::move(data)), recipe_(std::move(recipe)), vocab_(Vocabulary::build(data_.all_texts())) {
    recipe_.model.vocab_size = vocab_.size();
    recipe_.model.validate();
  }

  const Vocabulary& vocab() const { return vocab_; }
  const RecipeConfig& recipe() const { return recipe_; }

  VariantResult build(Variant variant) {
    if (data_.figurative.empty()) throw Error("missing data for stage FIGURATIVE");
    VariantResult res;
    Seq2Seq<float> model;
    if (variant == Variant::BartMultiAnalog) {
      model = init_model(recipe_, vocab_);
    } else {
      if (!data_.has_pretrain()) throw Error("missing data for stage DENOISE");
      if (data_.paraphrase.empty()) throw Error("missing data for stage PARAPHRASE");
      if (!denoised_) {
        denoised_ = init_model(recipe_, vocab_);
        denoise_log_ = run_denoise_stage(*denoised_, vocab_, data_, recipe_);
      }
      res.logs.push_back(denoise_log_);
      const bool inject_para = variant == Variant::Mflag && recipe_.inject_during_paraphrase;
      auto it = paraphrased_.find(inject_para);
      if (it == paraphrased_.end()) {
        Seq2Seq<float> m = *denoised_;
        auto log = run_paraphrase_stage(m, vocab_, data_, recipe_, inject_para);
        it = paraphrased_.emplace(inject_para, std::make_pair(std::move(m), std::move(log))).first;
      }
      model = it->second.first;
      res.logs.push_back(it->second.second);
    }
    res.logs.push_back(run_figurative_stage(model, vocab_, data_.figurative, recipe_, variant == Variant::Mflag));
    res.checkpoint.model = std::move(model);
    res.checkpoint.vocab = vocab_;
    res.checkpoint.meta = variant_meta(variant, recipe_.inject_during_paraphrase);
    return res;
  }

 private:
  DataBundle data_;
  RecipeConfig recipe_;
  Vocabulary vocab_;
  std::optional<Seq2Seq<float>> denoised_;
  TrainLog denoise_log_;
  std::map<bool, std::pair<Seq2Seq<float>, TrainLog>> paraphrased_;
};

/// One-shot form of VariantBuilder::build.
inline VariantResult build_variant(Variant variant, const DataBundle& data, const RecipeConfig& recipe) {
  return VariantBuilder(data, recipe).build(variant);
}

}  // namespace mflag
