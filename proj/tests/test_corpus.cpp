#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include "mflag/corpus.hpp"

using namespace mflag;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("mflag_test_corpus_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ParallelPair make_pair_n(int i) {
  return {TaggedText::from_string(Form::Literal, "source sentence " + std::to_string(i)),
          TaggedText::from_string(Form::Simile, "target sentence " + std::to_string(i) + " like a rock")};
}

std::vector<ParallelPair> make_pairs(int n) {
  std::vector<ParallelPair> v;
  for (int i = 0; i < n; ++i) v.push_back(make_pair_n(i));
  return v;
}

// multiplicity of every distinct pair, keyed by source text
std::map<std::string, int> multiplicities(const std::vector<ParallelPair>& v) {
  std::map<std::string, int> m;
  for (const auto& p : v) ++m[p.source.text()];
  return m;
}

}  // namespace

TEST(TaggedText, SerializesWithFormCodeAndEos) {
  const auto t = TaggedText::from_string(Form::Hyperbole, "the  biggest house ever");
  EXPECT_EQ(t.tokens.size(), 4u);
  const std::vector<std::string> expect = {"[HYPERBOLE]", "the", "biggest", "house", "ever", "[eos]"};
  EXPECT_EQ(t.serialize(), expect);
  EXPECT_EQ(t.text(), "the biggest house ever");
}

TEST(MaskWords, RateOnLargeSample) {
  std::vector<std::string> toks(20000, "word");
  const TaggedText t{Form::Literal, toks};
  const auto m = mask_words(t, 0.35, 123);
  const auto masked = std::count(m.tokens.begin(), m.tokens.end(), std::string(kMaskToken));
  const double frac = static_cast<double>(masked) / static_cast<double>(toks.size());
  EXPECT_GE(frac, 0.33);
  EXPECT_LE(frac, 0.37);
}

TEST(MaskWords, DegenerateRates) {
  const auto t = TaggedText::from_string(Form::Idiom, "a b c d e f g");
  EXPECT_EQ(mask_words(t, 0.0, 1), t);
  const auto all = mask_words(t, 1.0, 1);
  for (const auto& tok : all.tokens) EXPECT_EQ(tok, kMaskToken);
  EXPECT_EQ(all.form, Form::Idiom);
  EXPECT_THROW(mask_words(t, 1.5, 1), Error);
  EXPECT_THROW(mask_words(t, -0.1, 1), Error);
}

TEST(MaskWords, DeterministicPerSeedAndLengthPreserving) {
  const auto t = TaggedText::from_string(Form::Literal, "one two three four five six seven eight nine ten");
  EXPECT_EQ(mask_words(t, 0.35, 9), mask_words(t, 0.35, 9));
  EXPECT_EQ(mask_words(t, 0.35, 9).tokens.size(), t.tokens.size());
  bool any_differs = false;
  for (std::uint64_t s = 0; s < 20 && !any_differs; ++s) any_differs = mask_words(t, 0.35, s) != mask_words(t, 0.35, 99);
  EXPECT_TRUE(any_differs);
}

TEST(Upsample, HyperboleScaleCounts) {
  const auto pairs = make_pairs(1177);
  const auto up = upsample(pairs, 10000, 5);
  ASSERT_EQ(up.size(), 10000u);
  const auto m = multiplicities(up);
  ASSERT_EQ(m.size(), 1177u);
  // oracle: 10000 = 8 * 1177 + 584, so 584 pairs appear nine times
  int nines = 0;
  for (const auto& [k, c] : m) {
    EXPECT_TRUE(c == 8 || c == 9) << k << " appears " << c << " times";
    nines += c == 9;
  }
  EXPECT_EQ(nines, 10000 - 8 * 1177);
}

TEST(Upsample, SmallBruteForce) {
  const auto up = upsample(make_pairs(3), 7, 42);
  ASSERT_EQ(up.size(), 7u);
  std::vector<int> counts;
  for (const auto& [k, c] : multiplicities(up)) counts.push_back(c);
  std::sort(counts.rbegin(), counts.rend());
  EXPECT_EQ(counts, (std::vector<int>{3, 2, 2}));
}

TEST(Upsample, NoOpAndErrors) {
  const auto pairs = make_pairs(5);
  EXPECT_EQ(upsample(pairs, 5, 1), pairs);
  EXPECT_EQ(upsample(pairs, 3, 1), pairs);
  EXPECT_THROW(upsample({}, 10, 1), Error);
  EXPECT_EQ(upsample(pairs, 12, 3), upsample(pairs, 12, 3));
}

TEST(Upsample, MultiplicitiesDifferByAtMostOne) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(40));
    const std::size_t target = 1 + rng.below(300);
    const auto up = upsample(make_pairs(n), target, trial);
    EXPECT_EQ(up.size(), std::max<std::size_t>(target, static_cast<std::size_t>(n)));
    int lo = 1 << 30, hi = 0;
    for (const auto& [k, c] : multiplicities(up)) {
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    EXPECT_LE(hi - lo, 1);
  }
}

TEST(FilterPairs, StrictThresholdExamples) {
  const auto p = make_pair_n(0);
  EXPECT_EQ(filter_pairs({{p, 0.95, 0.96}}, 0.94).size(), 1u);
  EXPECT_TRUE(filter_pairs({{p, 0.94, 0.96}}, 0.94).empty());
  EXPECT_TRUE(filter_pairs({{p, 0.96, 0.94}}, 0.94).empty());
  EXPECT_THROW(filter_pairs({}, 1.5), Error);
}

TEST(FilterPairs, BruteForceWithBoundaries) {
  Rng rng(3);
  for (Form f : kFigurativeForms) {
    const double sigma = default_sigma(f);
    std::vector<ScoredPair> scored;
    for (int i = 0; i < 1000; ++i) {
      double a = rng.uniform(), b = rng.uniform();
      if (i % 7 == 0) a = sigma;  // boundary cases must be dropped
      if (i % 11 == 0) b = sigma;
      scored.push_back({make_pair_n(i), a, b});
    }
    const auto kept = filter_pairs(scored, sigma);
    std::vector<ParallelPair> expect;
    for (const auto& s : scored) {
      if (s.p_source_literal > sigma && s.p_target_figurative > sigma) expect.push_back(s.pair);
    }
    EXPECT_EQ(kept, expect);
  }
}

TEST(FilterPairs, MonotoneInSigma) {
  Rng rng(8);
  std::vector<ScoredPair> scored;
  for (int i = 0; i < 300; ++i) scored.push_back({make_pair_n(i), rng.uniform(), rng.uniform()});
  std::size_t prev = scored.size() + 1;
  for (double s = 0.0; s <= 1.0; s += 0.05) {
    const auto kept = filter_pairs(scored, s);
    EXPECT_LE(kept.size(), prev);
    prev = kept.size();
  }
}

TEST(DefaultSigma, PublishedThresholds) {
  EXPECT_DOUBLE_EQ(default_sigma(Form::Hyperbole), 0.94);
  EXPECT_DOUBLE_EQ(default_sigma(Form::Idiom), 0.95);
  EXPECT_DOUBLE_EQ(default_sigma(Form::Sarcasm), 0.70);
  EXPECT_DOUBLE_EQ(default_sigma(Form::Metaphor), 0.95);
  EXPECT_DOUBLE_EQ(default_sigma(Form::Simile), 0.76);
  EXPECT_THROW(default_sigma(Form::Literal), Error);
}

TEST(CorpusTsv, RoundTrip) {
  const auto dir = temp_dir("roundtrip");
  const auto pairs = make_pairs(25);
  write_corpus(pairs, dir / "c.tsv");
  EXPECT_EQ(read_corpus(dir / "c.tsv"), pairs);

  const auto mono = monolingual_from_pairs(pairs);
  write_monolingual(mono, dir / "m.tsv");
  EXPECT_EQ(read_monolingual(dir / "m.tsv"), mono);

  std::vector<ScoredPair> scored{{pairs[0], 0.25, 0.875}, {pairs[1], 1.0, 0.0}};
  write_scored(scored, dir / "s.tsv");
  const auto back = read_scored(dir / "s.tsv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].pair, pairs[0]);
  EXPECT_DOUBLE_EQ(back[0].p_source_literal, 0.25);
  EXPECT_DOUBLE_EQ(back[0].p_target_figurative, 0.875);
}

TEST(CorpusTsv, BadColumnCountNamesTheLine) {
  const auto dir = temp_dir("badcols");
  {
    std::ofstream f(dir / "bad.tsv");
    f << "LITERAL\ta b\tSIMILE\tc d\n";
    f << "LITERAL\ta b\tSIMILE\n";
  }
  try {
    read_corpus(dir / "bad.tsv");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("expected 4 columns, got 3"), std::string::npos) << msg;
  }
}

TEST(CorpusTsv, UnknownFormRejected) {
  const auto dir = temp_dir("badform");
  {
    std::ofstream f(dir / "bad.tsv");
    f << "PROSE\ta b\tSIMILE\tc d\n";
  }
  EXPECT_THROW(read_corpus(dir / "bad.tsv"), Error);
}

TEST(CorpusTsv, WriterRejectsTabsAndControlTokens) {
  const auto dir = temp_dir("reject");
  ParallelPair tab{{Form::Literal, {"a\tb"}}, {Form::Simile, {"c"}}};
  EXPECT_THROW(write_corpus({tab}, dir / "x.tsv"), Error);
  ParallelPair ctl{{Form::Literal, {"a", "[eos]"}}, {Form::Simile, {"c"}}};
  EXPECT_THROW(write_corpus({ctl}, dir / "y.tsv"), Error);
  EXPECT_FALSE(fs::exists(dir / "x.tsv"));
}

TEST(CorpusTsv, MissingFile) { EXPECT_THROW(read_corpus("/nonexistent/mflag/file.tsv"), Error); }

TEST(Reversed, SwapsSides) {
  const auto pairs = make_pairs(3);
  const auto r = reversed(pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_EQ(r[i].source, pairs[i].target);
    EXPECT_EQ(r[i].target, pairs[i].source);
  }
}
