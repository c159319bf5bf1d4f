#include <gtest/gtest.h>

#include <cmath>

#include "mflag/tasks.hpp"

using namespace mflag;

namespace {

Vocabulary small_vocab() {
  return Vocabulary::build({TaggedText::from_string(Form::Literal, "the cat sat on a warm mat ."),
                            TaggedText::from_string(Form::Simile, "the dog ran like a fast wind .")});
}

ModelConfig small_config(int vocab, int d = 16) {
  ModelConfig c;
  c.d_model = d;
  c.n_heads = 2;
  c.n_enc_layers = 2;
  c.n_dec_layers = 2;
  c.ffn_width = 32;
  c.vocab_size = vocab;
  c.max_len = 24;
  return c;
}

// every Param visited in order, as flat pointers
template <typename T>
std::vector<Param<T>*> params(Seq2Seq<T>& m) {
  std::vector<Param<T>*> out;
  m.for_each_param([&](const std::string&, Param<T>& p) { out.push_back(&p); });
  return out;
}

}  // namespace

TEST(ModelConfig, Validation) {
  auto c = small_config(40);
  EXPECT_NO_THROW(c.validate());
  c.d_model = 15;
  EXPECT_THROW(c.validate(), Error);
  c = small_config(5);
  EXPECT_THROW(c.validate(), Error);
  c = small_config(40);
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Seq2Seq, ParameterCountOracle) {
  const int V = 40, d = 16, w = 32;
  Seq2Seq<float> m(small_config(V), 1);
  const std::size_t lin = static_cast<std::size_t>(d * d + d);
  const std::size_t attn = 4 * lin;
  const std::size_t ffn = static_cast<std::size_t>(d * w + w + w * d + d);
  const std::size_t ln = static_cast<std::size_t>(2 * d);
  const std::size_t enc = attn + ffn + 2 * ln;
  const std::size_t dec = 2 * attn + ffn + 3 * ln;
  EXPECT_EQ(m.parameter_count(), static_cast<std::size_t>(V * d) + 2 * enc + 2 * dec + 2 * ln);
}

TEST(Seq2Seq, SameSeedSameWeights) {
  Seq2Seq<float> a(small_config(40), 5), b(small_config(40), 5), c(small_config(40), 6);
  const auto pa = params(a), pb = params(b), pc = params(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i]->value, pb[i]->value);
    any_diff = any_diff || pa[i]->value != pc[i]->value;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Seq2Seq, EncodeShapeAndNextTokenDistribution) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 2);
  const auto src = vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat ."));
  const auto states = m.encode(src, Form::Simile);
  EXPECT_EQ(states.rows(), static_cast<Eigen::Index>(src.size()));
  EXPECT_EQ(states.cols(), 16);
  const auto probs = m.decode_step(states, {form_token_id(Form::Simile), vocab.id("the")});
  ASSERT_EQ(probs.size(), static_cast<std::size_t>(vocab.size()));
  double sum = 0;
  for (double p : probs) {
    EXPECT_GE(p, 0.0);
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_THROW(m.decode_step(states, {}), Error);
}

TEST(Seq2Seq, InjectionChangesEncoderStates) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 2);
  const auto src = vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat ."));
  EXPECT_NE(m.encode(src, Form::Simile), m.encode(src, std::nullopt));
  EXPECT_NE(m.encode(src, Form::Simile), m.encode(src, Form::Idiom));
}

// The teacher-forced loss of a sequence must equal the sum of per-step
// losses computed from prefixes alone, so no position sees its future.
TEST(Seq2Seq, TeacherForcingIsCausal) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 3);
  const auto src = vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat on a mat ."));
  const auto tgt = vocab.encode(TaggedText::from_string(Form::Simile, "the cat ran like a wind ."));
  const Example ex{src, tgt, Form::Simile};
  const double full = m.forward_backward(std::span<const Example>(&ex, 1), nullptr, false).nll;
  const auto enc = m.encode_batch({src}, {Form::Simile});
  double stepwise = 0;
  for (std::size_t k = 1; k < tgt.size(); ++k) {
    const std::vector<int> prefix(tgt.begin(), tgt.begin() + static_cast<std::ptrdiff_t>(k));
    stepwise -= m.next_log_probs(enc, {prefix})(0, tgt[k]);
  }
  EXPECT_NEAR(full, stepwise, 1e-9);
}

TEST(Seq2Seq, BatchedLossEqualsSumOfSingles) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 4);
  std::vector<Example> batch = {
      {vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat .")),
       vocab.encode(TaggedText::from_string(Form::Simile, "the cat sat like a mat .")), Form::Simile},
      {vocab.encode(TaggedText::from_string(Form::Simile, "a dog ran like the wind .")),
       vocab.encode(TaggedText::from_string(Form::Literal, "a dog ran fast .")), std::nullopt}};
  const auto all = m.forward_backward(batch, nullptr, false);
  double sum = 0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    const auto l = m.forward_backward(std::span<const Example>(&ex, 1), nullptr, false);
    sum += l.nll;
    tokens += l.tokens;
  }
  EXPECT_NEAR(all.nll, sum, 1e-9);
  EXPECT_EQ(all.tokens, tokens);
}

TEST(Seq2Seq, ZeroEmbeddingsGiveUniformOutput) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 1);
  m.embedding.value.setZero();
  const auto t = TaggedText::from_string(Form::Literal, "the cat sat .");
  EXPECT_NEAR(denoising_loss(m, vocab, mask_words(t, 0.35, 1), t), std::log(static_cast<double>(vocab.size())), 1e-9);
}

TEST(Seq2Seq, RejectsOverlongAndOutOfRangeInput) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 1);
  EXPECT_THROW(m.encode(std::vector<int>(30, kFirstWordId), std::nullopt), Error);
  EXPECT_THROW(m.encode({vocab.size() + 3}, std::nullopt), Error);
  const Example short_target{{kFirstWordId}, {kFirstFormId}, std::nullopt};
  EXPECT_THROW(m.forward_backward(std::span<const Example>(&short_target, 1), nullptr, false), Error);
}

// Analytic gradients of the token-mean denoising loss against central
// differences on a d=16, 2+2-layer model in double precision.
TEST(Seq2Seq, GradientCheckDenoising) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 11);
  const auto original = TaggedText::from_string(Form::Simile, "the dog ran like a fast wind .");
  const auto corrupted = mask_words(original, 0.35, 3);
  const Example ex = make_denoise_example(vocab, corrupted, original);
  m.zero_grad();
  const auto l = m.forward_backward(std::span<const Example>(&ex, 1), nullptr, true);
  const double n_tok = static_cast<double>(l.tokens);

  auto ps = params(m);
  Rng rng(77);
  const double h = 1e-5;
  int checked = 0;
  double worst = 0;
  for (int s = 0; s < 240; ++s) {
    Param<double>& p = *ps[rng.below(ps.size())];
    const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(p.value.size())));
    const double orig = p.value.data()[idx];
    p.value.data()[idx] = orig + h;
    const double up = denoising_loss(m, vocab, corrupted, original);
    p.value.data()[idx] = orig - h;
    const double down = denoising_loss(m, vocab, corrupted, original);
    p.value.data()[idx] = orig;
    const double numeric = (up - down) / (2 * h);
    const double analytic = p.grad.data()[idx] / n_tok;
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    worst = std::max(worst, rel);
    ++checked;
  }
  EXPECT_GE(checked, 200);
  EXPECT_LT(worst, 1e-3);
}

TEST(Seq2Seq, GradientCheckWithInjection) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 12);
  const Example ex{vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat on a mat .")),
                   vocab.encode(TaggedText::from_string(Form::Simile, "the cat sat like a mat .")), Form::Simile};
  m.zero_grad();
  m.forward_backward(std::span<const Example>(&ex, 1), nullptr, true);
  auto loss = [&] { return m.forward_backward(std::span<const Example>(&ex, 1), nullptr, false).nll; };
  // the simile code's embedding row receives gradient through the injection too
  Param<double>& e = m.embedding;
  const int row = form_token_id(Form::Simile);
  double worst = 0;
  for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
    const double orig = e.value(row, j);
    e.value(row, j) = orig + 1e-5;
    const double up = loss();
    e.value(row, j) = orig - 1e-5;
    const double down = loss();
    e.value(row, j) = orig;
    const double numeric = (up - down) / 2e-5;
    const double a = e.grad(row, j);
    worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Seq2Seq, CastPreservesOutputs) {
  const auto vocab = small_vocab();
  Seq2Seq<double> m(small_config(vocab.size()), 8);
  const Seq2Seq<float> f = m.cast<float>();
  const auto src = vocab.encode(TaggedText::from_string(Form::Literal, "the cat sat ."));
  const Mat<double> a = m.encode(src, Form::Idiom);
  const Mat<double> b = f.encode(src, Form::Idiom).cast<double>();
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-4);
  EXPECT_EQ(f.parameter_count(), m.parameter_count());
}
