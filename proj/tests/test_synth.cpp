#include <gtest/gtest.h>

#include "mflag/synth.hpp"

using namespace mflag;

TEST(SynthCorpus, SplitSizes) {
  const auto c = synth_corpus(1000, 7);
  ASSERT_EQ(c.size(), 5u);
  for (const auto& [f, s] : c) {
    EXPECT_EQ(s.train.size(), 800u) << form_name(f);
    EXPECT_EQ(s.valid.size(), 100u);
    EXPECT_EQ(s.test.size(), 100u);
  }
}

TEST(SynthCorpus, Deterministic) {
  const auto a = synth_corpus(200, 11);
  const auto b = synth_corpus(200, 11);
  const auto c = synth_corpus(200, 12);
  for (Form f : kFigurativeForms) {
    EXPECT_EQ(a.at(f).train, b.at(f).train);
    EXPECT_EQ(a.at(f).test, b.at(f).test);
    EXPECT_NE(a.at(f).train, c.at(f).train);
  }
}

TEST(SynthCorpus, MarkerOnEveryTargetAndNoSource) {
  const auto c = synth_corpus(500, 3);
  for (const auto& [f, s] : c) {
    for (const auto* split : {&s.train, &s.valid, &s.test}) {
      for (const auto& p : *split) {
        EXPECT_EQ(p.source.form, Form::Literal);
        EXPECT_EQ(p.target.form, f);
        EXPECT_TRUE(has_form_marker(f, p.target.tokens)) << p.target.text();
        EXPECT_FALSE(has_form_marker(f, p.source.tokens)) << p.source.text();
      }
    }
  }
}

TEST(SynthCorpus, SimileMarkerExample) {
  for (const auto& p : synth_corpus(100, 1).at(Form::Simile).train) {
    EXPECT_TRUE(synth::contains_phrase(p.target.tokens, "like a"));
    EXPECT_FALSE(synth::contains_phrase(p.source.tokens, "like a"));
  }
}

// A second figure, when present, sits on both sides of the pair.
TEST(SynthCorpus, BackgroundFiguresOnBothSides) {
  const auto c = synth_corpus(1000, 5);
  for (const auto& [f, s] : c) {
    std::size_t with_background = 0;
    for (const auto& p : s.train) {
      bool any = false;
      for (Form g : kFigurativeForms) {
        if (g == f) continue;
        const bool in_src = has_form_marker(g, p.source.tokens);
        EXPECT_EQ(in_src, has_form_marker(g, p.target.tokens)) << p.source.text() << " | " << p.target.text();
        any = any || in_src;
      }
      with_background += any;
    }
    const double share = static_cast<double>(with_background) / static_cast<double>(s.train.size());
    EXPECT_NEAR(share, synth::kBackgroundShare, 0.06) << form_name(f);
  }
}

TEST(SynthCorpus, RejectsZero) { EXPECT_THROW(synth_corpus(0, 1), Error); }

TEST(Render, BackgroundFigureCombines) {
  synth::Frame fr;
  fr.background = Form::Simile;
  const auto t = synth::render(fr, Form::Idiom);
  EXPECT_TRUE(has_form_marker(Form::Idiom, t));
  EXPECT_TRUE(has_form_marker(Form::Simile, t));
  EXPECT_FALSE(synth::compatible(Form::Hyperbole, Form::Sarcasm));
  EXPECT_FALSE(synth::compatible(Form::Metaphor, Form::Idiom));
  EXPECT_TRUE(synth::compatible(Form::Sarcasm, Form::Simile));
}

TEST(ParaphrasePool, TaggedLiteralToForm) {
  const auto pool = synth_paraphrase_pool(400, 9);
  ASSERT_EQ(pool.size(), 5u);
  for (const auto& [f, pairs] : pool) {
    ASSERT_EQ(pairs.size(), 400u);
    std::size_t genuine = 0;
    for (const auto& p : pairs) {
      EXPECT_EQ(p.source.form, Form::Literal);
      EXPECT_EQ(p.target.form, f);
      genuine += has_form_marker(f, p.target.tokens) && !has_form_marker(f, p.source.tokens);
    }
    // most candidates are genuine rewrites, but not all
    EXPECT_GT(genuine, 400u / 2);
    EXPECT_LT(genuine, 400u);
  }
  EXPECT_EQ(synth_paraphrase_pool(50, 9).at(Form::Idiom), synth_paraphrase_pool(50, 9).at(Form::Idiom));
}
