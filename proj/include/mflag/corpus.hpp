// Corpus data model: tagged texts, parallel pairs, noising, upsampling,
// threshold filtering and the TSV file formats.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mflag/common.hpp"
#include "mflag/form.hpp"

namespace mflag {

/// A whitespace-tokenized text tagged with its form. Serializes as
/// "[FORM] t1 ... tn [eos]".
struct TaggedText {
  Form form = Form::Literal;
  std::vector<std::string> tokens;

  static TaggedText from_string(Form f, const std::string& text) { return {f, split_ws(text)}; }

  std::string text() const { return join(tokens); }

  std::vector<std::string> serialize() const {
    std::vector<std::string> out;
    out.reserve(tokens.size() + 2);
    out.emplace_back(form_token(form));
    out.insert(out.end(), tokens.begin(), tokens.end());
    out.emplace_back(kEosToken);
    return out;
  }

  friend bool operator==(const TaggedText&, const TaggedText&) = default;
};

struct ParallelPair {
  TaggedText source;
  TaggedText target;

  friend bool operator==(const ParallelPair&, const ParallelPair&) = default;
};

struct ScoredPair {
  ParallelPair pair;
  double p_source_literal = 0.0;
  double p_target_figurative = 0.0;
};

/// Throws unless `t` is free of control tokens and delimiter characters.
inline void validate_text(const TaggedText& t) {
  for (const auto& tok : t.tokens) {
    if (tok.empty()) throw Error("empty token in text");
    if (tok.find_first_of("\t\n\r") != std::string::npos) {
      throw Error("text contains a tab or newline: '" + t.text() + "'");
    }
    if (is_control_token(tok)) throw Error("text contains control token " + tok);
  }
}

/// Replaces each word token by [mask] independently with probability `rate`.
/// The result is a corrupted input and is the one place a TaggedText may
/// carry [mask].
inline TaggedText mask_words(const TaggedText& text, double rate = 0.35, std::uint64_t seed = 0) {
  if (rate < 0.0 || rate > 1.0) throw Error("mask rate must be in [0,1]");
  TaggedText out = text;
  Rng rng(seed);
  for (auto& tok : out.tokens) {
    if (rng.uniform() < rate) tok = std::string(kMaskToken);
  }
  return out;
}

/// Replicates `pairs` to exactly `target_n` items. Each original appears
/// floor(target_n/n) or floor(target_n/n)+1 times; the +1 set is the head of
/// a seeded shuffle.
inline std::vector<ParallelPair> upsample(const std::vector<ParallelPair>& pairs, std::size_t target_n,
                                          std::uint64_t seed) {
  if (pairs.empty()) throw Error("empty dataset");
  if (target_n < 1) throw Error("upsample target must be >= 1");
  const std::size_t n = pairs.size();
  if (n >= target_n) return pairs;
  const std::size_t reps = target_n / n;
  const std::size_t extra = target_n % n;
  std::vector<ParallelPair> out;
  out.reserve(target_n);
  for (std::size_t r = 0; r < reps; ++r) out.insert(out.end(), pairs.begin(), pairs.end());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  for (std::size_t i = 0; i < extra; ++i) out.push_back(pairs[order[i]]);
  return out;
}

/// Keeps pairs whose literal-source and figurative-target probabilities both
/// strictly exceed sigma. Order is preserved.
inline std::vector<ParallelPair> filter_pairs(const std::vector<ScoredPair>& scored, double sigma) {
  if (sigma < 0.0 || sigma > 1.0) throw Error("sigma must be in [0,1]");
  std::vector<ParallelPair> out;
  for (const auto& s : scored) {
    if (s.p_source_literal > sigma && s.p_target_figurative > sigma) out.push_back(s.pair);
  }
  return out;
}

/// Per-form selection thresholds for paraphrase-data filtering.
inline double default_sigma(Form f) {
  switch (f) {
    case Form::Hyperbole: return 0.94;
    case Form::Idiom: return 0.95;
    case Form::Sarcasm: return 0.70;
    case Form::Metaphor: return 0.95;
    case Form::Simile: return 0.76;
    case Form::Literal: break;
  }
  throw Error("no filtering threshold for LITERAL");
}

// ---------------------------------------------------------------------------
// TSV formats

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path& path,
                                                      std::size_t n_columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != n_columns) {
      throw Error(path.string() + ": line " + std::to_string(line_no) + ": expected " +
                  std::to_string(n_columns) + " columns, got " + std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline Form parse_form_field(const std::string& s, const std::filesystem::path& path, std::size_t row) {
  auto f = try_parse_form(s);
  if (!f) throw Error(path.string() + ": row " + std::to_string(row) + ": unknown form '" + s + "'");
  return *f;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

inline std::string format_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", p);
  return buf;
}

}  // namespace detail

inline void write_corpus(const std::vector<ParallelPair>& pairs, const std::filesystem::path& path) {
  for (const auto& p : pairs) {
    validate_text(p.source);
    validate_text(p.target);
  }
  auto out = detail::open_out(path);
  for (const auto& p : pairs) {
    out << form_name(p.source.form) << '\t' << p.source.text() << '\t' << form_name(p.target.form) << '\t'
        << p.target.text() << '\n';
  }
}

inline std::vector<ParallelPair> read_corpus(const std::filesystem::path& path) {
  std::vector<ParallelPair> out;
  std::size_t row = 0;
  for (auto& f : detail::read_tsv(path, 4)) {
    ++row;
    out.push_back({{detail::parse_form_field(f[0], path, row), split_ws(f[1])},
                   {detail::parse_form_field(f[2], path, row), split_ws(f[3])}});
  }
  return out;
}

inline void write_monolingual(const std::vector<TaggedText>& texts, const std::filesystem::path& path) {
  for (const auto& t : texts) validate_text(t);
  auto out = detail::open_out(path);
  for (const auto& t : texts) out << form_name(t.form) << '\t' << t.text() << '\n';
}

inline std::vector<TaggedText> read_monolingual(const std::filesystem::path& path) {
  std::vector<TaggedText> out;
  std::size_t row = 0;
  for (auto& f : detail::read_tsv(path, 2)) {
    ++row;
    out.push_back({detail::parse_form_field(f[0], path, row), split_ws(f[1])});
  }
  return out;
}

inline void write_scored(const std::vector<ScoredPair>& scored, const std::filesystem::path& path) {
  for (const auto& s : scored) {
    validate_text(s.pair.source);
    validate_text(s.pair.target);
  }
  auto out = detail::open_out(path);
  for (const auto& s : scored) {
    out << form_name(s.pair.source.form) << '\t' << s.pair.source.text() << '\t' << form_name(s.pair.target.form)
        << '\t' << s.pair.target.text() << '\t' << detail::format_prob(s.p_source_literal) << '\t'
        << detail::format_prob(s.p_target_figurative) << '\n';
  }
}

inline std::vector<ScoredPair> read_scored(const std::filesystem::path& path) {
  std::vector<ScoredPair> out;
  std::size_t row = 0;
  for (auto& f : detail::read_tsv(path, 6)) {
    ++row;
    ScoredPair s;
    s.pair = {{detail::parse_form_field(f[0], path, row), split_ws(f[1])},
              {detail::parse_form_field(f[2], path, row), split_ws(f[3])}};
    try {
      s.p_source_literal = std::stod(f[4]);
      s.p_target_figurative = std::stod(f[5]);
    } catch (const std::exception&) {
      throw Error(path.string() + ": row " + std::to_string(row) + ": bad probability column");
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// Both sides of every pair, each tagged with its own form.
inline std::vector<TaggedText> monolingual_from_pairs(const std::vector<ParallelPair>& pairs) {
  std::vector<TaggedText> out;
  out.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    out.push_back(p.source);
    out.push_back(p.target);
  }
  return out;
}

/// Swaps source and target of every pair.
inline std::vector<ParallelPair> reversed(const std::vector<ParallelPair>& pairs) {
  std::vector<ParallelPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.target, p.source});
  return out;
}

}  // namespace mflag
