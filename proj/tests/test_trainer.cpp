#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mflag/trainer.hpp"

using namespace mflag;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny(int vocab) {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.n_enc_layers = 1;
  c.n_dec_layers = 1;
  c.ffn_width = 32;
  c.vocab_size = vocab;
  c.max_len = 40;
  c.dropout = 0.0;
  return c;
}

std::vector<ParallelPair> pairs_of(Form f, std::size_t n, std::uint64_t seed) {
  auto c = synth_corpus(n + n / 4 + 10, seed).at(f).train;
  c.resize(n);
  return c;
}

Vocabulary vocab_for(const std::vector<ParallelPair>& pairs) {
  std::vector<TaggedText> texts;
  for (const auto& p : pairs) {
    texts.push_back(p.source);
    texts.push_back(p.target);
  }
  return Vocabulary::build(texts);
}

template <typename T>
double max_param_diff(Seq2Seq<T>& a, Seq2Seq<T>& b) {
  std::vector<const Mat<T>*> va;
  a.for_each_param([&](const std::string&, Param<T>& p) { va.push_back(&p.value); });
  std::size_t i = 0;
  double worst = 0;
  b.for_each_param([&](const std::string&, Param<T>& p) {
    const double scale = std::max(1e-12, static_cast<double>(va[i]->cwiseAbs().maxCoeff()));
    worst = std::max(worst, static_cast<double>((p.value - *va[i]).cwiseAbs().maxCoeff()) / scale);
    ++i;
  });
  return worst;
}

}  // namespace

TEST(TrainConfig, PublishedDefaults) {
  const TrainConfig c;
  EXPECT_EQ(c.batch_size, 32);
  EXPECT_EQ(c.grad_accum_steps, 8);
  EXPECT_DOUBLE_EQ(c.learning_rate, 1e-5);
  EXPECT_EQ(c.patience, 5);
  EXPECT_DOUBLE_EQ(c.mask_rate, 0.35);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  TrainConfig c;
  c.batch_size = 7;
  c.stage = Stage::Paraphrase;
  c.inject_enabled = true;
  nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(back.batch_size, 7);
  EXPECT_EQ(back.stage, Stage::Paraphrase);
  EXPECT_TRUE(back.inject_enabled);
  c.grad_accum_steps = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(parse_stage("WARMUP"), Error);
  EXPECT_THROW(parse_variant("BART"), UsageError);
}

TEST(Trainer, StepsPerEpochOracle) {
  EXPECT_EQ(optimizer_steps_per_epoch(10, 3), 4);
  EXPECT_EQ(optimizer_steps_per_epoch(9, 3), 3);
  EXPECT_EQ(optimizer_steps_per_epoch(1, 8), 1);
  const auto pairs = pairs_of(Form::Simile, 10, 1);
  const auto vocab = vocab_for(pairs);
  Seq2Seq<double> m(tiny(vocab.size()), 1);
  TrainConfig cfg;
  cfg.batch_size = 3;  // 4 micro-batches
  cfg.grad_accum_steps = 3;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 2;
  cfg.patience = 5;
  const auto log = train_supervised(m, vocab, pairs, {}, cfg);
  ASSERT_EQ(log.epochs.size(), 2u);
  EXPECT_EQ(log.epochs[0].optimizer_steps, 2);
  EXPECT_EQ(log.epochs[1].optimizer_steps, 4);
}

// Gradients summed over two micro-batches equal the gradient of one batch.
TEST(Trainer, AccumulatedGradientMatchesLargeBatch) {
  const auto pairs = pairs_of(Form::Idiom, 8, 2);
  const auto vocab = vocab_for(pairs);
  Seq2Seq<double> a(tiny(vocab.size()), 3), b(tiny(vocab.size()), 3);
  std::vector<Example> ex;
  for (const auto& p : pairs) ex.push_back(make_supervised_example(vocab, p, true));
  const std::span<const Example> all(ex);
  a.zero_grad();
  b.zero_grad();
  const auto la = a.forward_backward(all.first(4), nullptr, true).nll + a.forward_backward(all.subspan(4), nullptr, true).nll;
  const auto lb = b.forward_backward(all, nullptr, true).nll;
  EXPECT_NEAR(la, lb, 1e-9 * std::abs(lb));
  std::vector<const Mat<double>*> ga;
  a.for_each_param([&](const std::string&, Param<double>& p) { ga.push_back(&p.grad); });
  double total = 0;
  b.for_each_param([&](const std::string&, Param<double>& p) { total += p.grad.squaredNorm(); });
  total = std::sqrt(total);
  std::size_t i = 0;
  b.for_each_param([&](const std::string& name, Param<double>& p) {
    if (name.ends_with("key.bias")) {
      // softmax ignores a per-query constant, so only rounding noise remains
      EXPECT_LT(p.grad.norm(), 1e-8 * total) << name;
    } else {
      EXPECT_LT((p.grad - *ga[i]).norm() / std::max(p.grad.norm(), 1e-12), 1e-5) << name;
    }
    ++i;
  });
}

// Two micro-batches of 4 with accumulation train like one batch of 8. The
// attention key biases are skipped: softmax is invariant to them, so their
// true gradient is zero and Adam normalizes pure rounding noise into full
// steps. They do not affect any output.
TEST(Trainer, AccumulationMatchesLargeBatch) {
  const auto pairs = pairs_of(Form::Idiom, 12, 2);
  const auto vocab = vocab_for(pairs);
  Seq2Seq<double> a(tiny(vocab.size()), 3), b(tiny(vocab.size()), 3);
  TrainConfig ca;
  ca.batch_size = 4;
  ca.grad_accum_steps = 2;
  ca.learning_rate = 1e-3;
  ca.max_epochs = 2;
  ca.seed = 5;
  TrainConfig cb = ca;
  cb.batch_size = 8;
  cb.grad_accum_steps = 1;
  const auto la = train_supervised(a, vocab, pairs, {}, ca);
  const auto lb = train_supervised(b, vocab, pairs, {}, cb);
  ASSERT_EQ(la.epochs.size(), lb.epochs.size());
  for (std::size_t e = 0; e < la.epochs.size(); ++e) {
    EXPECT_EQ(la.epochs[e].optimizer_steps, lb.epochs[e].optimizer_steps);
    EXPECT_NEAR(la.epochs[e].train_loss, lb.epochs[e].train_loss, 1e-5 * lb.epochs[e].train_loss);
  }
  std::vector<const Mat<double>*> va;
  a.for_each_param([&](const std::string&, Param<double>& p) { va.push_back(&p.value); });
  std::size_t i = 0;
  b.for_each_param([&](const std::string& name, Param<double>& p) {
    if (name.ends_with("key.bias")) {
      ++i;
      return;
    }
    EXPECT_LT((p.value - *va[i]).norm() / p.value.norm(), 1e-5) << name;
    ++i;
  });
}

TEST(Trainer, ZeroEpochsLeavesParametersUnchanged) {
  const auto pairs = pairs_of(Form::Simile, 8, 1);
  const auto vocab = vocab_for(pairs);
  Seq2Seq<double> m(tiny(vocab.size()), 1), ref(tiny(vocab.size()), 1);
  TrainConfig cfg;
  cfg.max_epochs = 0;
  const auto log = train_supervised(m, vocab, pairs, pairs, cfg);
  EXPECT_EQ(log.best_epoch, 0);
  EXPECT_TRUE(log.epochs.empty());
  EXPECT_EQ(max_param_diff(m, ref), 0.0);
}

// Validation asks for the opposite direction of training, so the validation
// loss turns upward and training stops; the best epoch's weights come back.
TEST(Trainer, EarlyStoppingRestoresBest) {
  const auto pairs = pairs_of(Form::Hyperbole, 24, 4);
  const auto vocab = vocab_for(pairs);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.grad_accum_steps = 1;
  cfg.learning_rate = 3e-3;
  cfg.patience = 2;
  cfg.max_epochs = 80;
  cfg.seed = 9;
  Seq2Seq<double> m(tiny(vocab.size()), 2);
  const auto log = train_supervised(m, vocab, pairs, reversed(pairs), cfg);
  ASSERT_TRUE(log.early_stopped);
  int argmin = 0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : log.epochs) {
    if (e.valid_loss < best) {
      best = e.valid_loss;
      argmin = e.epoch;
    }
  }
  EXPECT_EQ(log.best_epoch, argmin);
  EXPECT_EQ(log.stop_epoch, log.best_epoch + cfg.patience);
  EXPECT_DOUBLE_EQ(log.best_valid_loss, best);

  // rerunning for exactly best_epoch epochs gives the restored weights
  TrainConfig again = cfg;
  again.max_epochs = log.best_epoch;
  Seq2Seq<double> ref(tiny(vocab.size()), 2);
  train_supervised(ref, vocab, pairs, reversed(pairs), again);
  EXPECT_EQ(max_param_diff(m, ref), 0.0);
}

TEST(Trainer, DenoisingValidationLossDrops) {
  const auto corpora = synth_corpus(100, 6);
  std::map<Form, std::vector<TaggedText>> texts;
  std::vector<TaggedText> valid, all;
  for (const auto& [f, s] : corpora) {
    for (std::size_t i = 0; i < 20; ++i) {
      texts[f].push_back(s.train[i].target);
      texts[Form::Literal].push_back(s.train[i].source);
    }
    valid.push_back(s.valid[0].target);
  }
  for (const auto& [f, t] : texts) all.insert(all.end(), t.begin(), t.end());
  all.insert(all.end(), valid.begin(), valid.end());
  const auto vocab = Vocabulary::build(all);
  Seq2Seq<float> m(tiny(vocab.size()), 4);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.grad_accum_steps = 1;
  cfg.learning_rate = 2e-3;
  cfg.max_epochs = 4;
  cfg.seed = 3;
  std::vector<Example> probe;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    probe.push_back(make_denoise_example(vocab, mask_words(valid[i], 0.35, i), valid[i]));
  }
  const double before = evaluate_loss(m, probe).mean();
  const auto log = pretrain_denoise(m, vocab, texts, valid, cfg);
  EXPECT_EQ(log.stage, Stage::Denoise);
  EXPECT_LT(evaluate_loss(m, probe).mean(), before * 0.8);
}

TEST(Trainer, TrainLogJsonLines) {
  TrainLog log;
  log.stage = Stage::Paraphrase;
  log.epochs = {{1, 2.0, 1.5, 3, true}, {2, 1.0, 1.6, 6, false}};
  log.best_epoch = 1;
  log.stop_epoch = 2;
  log.best_checkpoint = "m.ckpt";
  const auto path = fs::temp_directory_path() / "mflag_test_trainer" / "log.jsonl";
  write_train_log(log, path);
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("stage"), "PARAPHRASE");
    EXPECT_EQ(j.at("best_epoch"), 1);
    EXPECT_EQ(j.at("best_checkpoint"), "m.ckpt");
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Variants, SameParameterCountAndMeta) {
  const auto corpora = synth_corpus(20, 8);
  DataBundle data;
  data.figurative = corpora;
  for (const auto& [f, s] : corpora) {
    for (const auto& p : s.train) data.pretrain[f].push_back(p.target);
    data.paraphrase.insert(data.paraphrase.end(), s.train.begin(), s.train.begin() + 4);
    data.pretrain_valid.push_back(s.valid[0].target);
  }
  RecipeConfig r;
  r.model = tiny(0);
  r.seed = 1;
  for (TrainConfig* c : {&r.denoise, &r.paraphrase, &r.figurative}) {
    c->max_epochs = 1;
    c->batch_size = 16;
    c->grad_accum_steps = 1;
    c->learning_rate = 1e-3;
  }
  r.upsample_target = 20;
  VariantBuilder b(data, r);
  const auto base = b.build(Variant::BartMultiAnalog);
  const auto pt = b.build(Variant::PtToFt);
  const auto mf = b.build(Variant::Mflag);
  EXPECT_EQ(pt.checkpoint.model.parameter_count(), mf.checkpoint.model.parameter_count());
  EXPECT_EQ(base.checkpoint.model.parameter_count(), mf.checkpoint.model.parameter_count());
  EXPECT_EQ(base.logs.size(), 1u);
  EXPECT_EQ(mf.logs.size(), 3u);
  EXPECT_EQ(mf.logs[0].stage, Stage::Denoise);
  EXPECT_EQ(mf.logs[2].stage, Stage::Figurative);
  EXPECT_TRUE(mf.checkpoint.inject_enabled());
  EXPECT_FALSE(pt.checkpoint.inject_enabled());
  EXPECT_EQ(mf.checkpoint.meta.at("variant"), "MFLAG");

  DataBundle missing = data;
  missing.paraphrase.clear();
  EXPECT_THROW(build_variant(Variant::PtToFt, missing, r), Error);
  EXPECT_NO_THROW(build_variant(Variant::BartMultiAnalog, missing, r));
}

TEST(Variants, StageSeedsFollowRecipeSeed) {
  RecipeConfig a, b;
  a.seed = 1;
  b.seed = 2;
  EXPECT_NE(stage_config(a, Stage::Denoise, false).seed, stage_config(b, Stage::Denoise, false).seed);
  EXPECT_NE(stage_config(a, Stage::Denoise, false).seed, stage_config(a, Stage::Figurative, false).seed);
  EXPECT_TRUE(stage_config(a, Stage::Figurative, true).inject_enabled);
}
