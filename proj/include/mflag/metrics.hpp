// Evaluation: corpus BLEU (multi-bleu semantics), harmonic mean, form
// strength per direction, and pluggable semantic scorers.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mflag/classifier.hpp"
#include "mflag/common.hpp"
#include "mflag/form.hpp"

namespace mflag {

using TokenSeq = std::vector<std::string>;

/// Corpus BLEU with one reference per candidate: clipped n-gram precisions
/// for n = 1..4, geometric mean, brevity penalty exp(1 - r/c) when c <= r.
/// No smoothing: any zero precision gives 0. Case-sensitive whitespace tokens.
inline double bleu(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references) {
  if (candidates.size() != references.size()) {
    throw Error("bleu: " + std::to_string(candidates.size()) + " candidates vs " + std::to_string(references.size()) +
                " references");
  }
  if (candidates.empty()) throw Error("bleu: empty corpus");
  std::array<double, 4> matched{}, total{};
  double c_len = 0, r_len = 0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& cand = candidates[s];
    const auto& ref = references[s];
    c_len += static_cast<double>(cand.size());
    r_len += static_cast<double>(ref.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::vector<std::string>, int> ref_counts, cand_counts;
      for (std::size_t i = 0; i + n <= ref.size(); ++i) ++ref_counts[{ref.begin() + i, ref.begin() + i + n}];
      for (std::size_t i = 0; i + n <= cand.size(); ++i) ++cand_counts[{cand.begin() + i, cand.begin() + i + n}];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        matched[n - 1] += it == ref_counts.end() ? 0 : std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }
  double log_sum = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(matched[n] / total[n]);
  }
  const double bp = c_len > r_len ? 1.0 : std::exp(1.0 - r_len / c_len);
  return bp * std::exp(log_sum / 4.0);
}

/// 2ab / (a + b), and 0 when a + b = 0.
inline double harmonic_mean(double a, double b) {
  if (a < 0 || a > 1 || b < 0 || b > 1) throw Error("harmonic_mean: inputs must lie in [0,1]");
  return a + b == 0 ? 0.0 : 2 * a * b / (a + b);
}

/// Corpus-level semantic similarity scorer.
class SemanticScorer {
 public:
  virtual ~SemanticScorer() = default;
  virtual std::string name() const = 0;
  virtual double score(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references) const = 0;
};

/// Mean bag-of-tokens F1 between candidate and reference. A stand-in that
/// exercises the plugin path without external models.
class TokenF1Scorer final : public SemanticScorer {
 public:
  std::string name() const override { return "token-f1"; }

  double score(const std::vector<TokenSeq>& candidates, const std::vector<TokenSeq>& references) const override {
    if (candidates.size() != references.size() || candidates.empty()) throw Error("token-f1: bad corpus sizes");
    double sum = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      std::map<std::string, int> ref;
      for (const auto& t : references[i]) ++ref[t];
      int common = 0;
      for (const auto& t : candidates[i]) {
        auto it = ref.find(t);
        if (it != ref.end() && it->second > 0) {
          --it->second;
          ++common;
        }
      }
      const double denom = static_cast<double>(candidates[i].size() + references[i].size());
      sum += denom == 0 ? 1.0 : 2.0 * common / denom;
    }
    return sum / static_cast<double>(candidates.size());
  }
};

using ScorerList = std::vector<std::shared_ptr<const SemanticScorer>>;

struct EvalReport {
  Form source_form = Form::Literal;
  Form target_form = Form::Literal;
  std::size_t n = 0;
  double tgt_accuracy = 0.0;
  std::optional<double> src_accuracy;  // figurative -> figurative only
  double bleu = 0.0;                   // vs references, or vs sources for fig -> fig
  double hm = 0.0;
  std::optional<double> bleu_literal;  // fig -> fig with literal texts given
  std::optional<double> hm_literal;
  std::map<std::string, double> plugin_scores;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j = {{"source_form", form_name(r.source_form)},
                      {"target_form", form_name(r.target_form)},
                      {"n", r.n},
                      {"tgt_accuracy", r.tgt_accuracy},
                      {"bleu", r.bleu},
                      {"hm", r.hm},
                      {"plugin_scores", r.plugin_scores}};
  j["src_accuracy"] = r.src_accuracy ? nlohmann::json(*r.src_accuracy) : nlohmann::json(nullptr);
  j["bleu_literal"] = r.bleu_literal ? nlohmann::json(*r.bleu_literal) : nlohmann::json(nullptr);
  j["hm_literal"] = r.hm_literal ? nlohmann::json(*r.hm_literal) : nlohmann::json(nullptr);
  return j;
}

/// Inputs for one generation direction. Form codes and [eos] must already be
/// stripped from every sequence.
struct DirectionData {
  Form source_form = Form::Literal;
  Form target_form = Form::Literal;
  std::vector<TokenSeq> outputs;
  std::vector<TokenSeq> references;  // literal <-> figurative
  std::vector<TokenSeq> sources;     // figurative -> figurative
  std::vector<TokenSeq> literals;    // optional, figurative -> figurative
};

/// Target-form strength. For a LITERAL target it is the fraction the source
/// form's classifier does not label as that form.
inline double target_strength(const ClassifierSet& classifiers, Form source, Form target,
                              const std::vector<TokenSeq>& outputs) {
  if (target != Form::Literal) {
    auto it = classifiers.find(target);
    if (it == classifiers.end()) throw Error("no classifier for target form " + std::string(form_name(target)));
    return form_accuracy(it->second, outputs);
  }
  auto it = classifiers.find(source);
  if (it == classifiers.end()) throw Error("no classifier for source form " + std::string(form_name(source)));
  return 1.0 - form_accuracy(it->second, outputs);
}

inline EvalReport evaluate_direction(const DirectionData& d, const ClassifierSet& classifiers,
                                     const ScorerList& plugins = {}) {
  if (d.outputs.empty()) throw Error("no outputs to score");
  EvalReport r;
  r.source_form = d.source_form;
  r.target_form = d.target_form;
  r.n = d.outputs.size();
  r.tgt_accuracy = target_strength(classifiers, d.source_form, d.target_form, d.outputs);
  const bool fig_to_fig = is_figurative(d.source_form) && is_figurative(d.target_form);
  const std::vector<TokenSeq>* compare = &d.references;
  if (fig_to_fig) {
    auto it = classifiers.find(d.source_form);
    if (it == classifiers.end()) throw Error("no classifier for source form " + std::string(form_name(d.source_form)));
    r.src_accuracy = form_accuracy(it->second, d.outputs);
    compare = &d.sources;
    if (!d.literals.empty()) {
      r.bleu_literal = bleu(d.outputs, d.literals);
      r.hm_literal = harmonic_mean(r.tgt_accuracy, *r.bleu_literal);
    }
  }
  r.bleu = bleu(d.outputs, *compare);
  r.hm = harmonic_mean(r.tgt_accuracy, r.bleu);
  for (const auto& p : plugins) r.plugin_scores[p->name()] = p->score(d.outputs, *compare);
  return r;
}

/// Macro average of reports (mean of per-direction scores).
inline EvalReport macro_average(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw Error("macro_average: no reports");
  EvalReport avg = reports.front();
  auto mean_of = [&](auto get) {
    double s = 0;
    for (const auto& r : reports) s += get(r);
    return s / static_cast<double>(reports.size());
  };
  avg.n = 0;
  for (const auto& r : reports) avg.n += r.n;
  avg.tgt_accuracy = mean_of([](const EvalReport& r) { return r.tgt_accuracy; });
  avg.bleu = mean_of([](const EvalReport& r) { return r.bleu; });
  avg.hm = mean_of([](const EvalReport& r) { return r.hm; });
  if (avg.src_accuracy) avg.src_accuracy = mean_of([](const EvalReport& r) { return r.src_accuracy.value_or(0); });
  if (avg.bleu_literal) avg.bleu_literal = mean_of([](const EvalReport& r) { return r.bleu_literal.value_or(0); });
  if (avg.hm_literal) avg.hm_literal = mean_of([](const EvalReport& r) { return r.hm_literal.value_or(0); });
  for (auto& [name, v] : avg.plugin_scores) {
    v = mean_of([&](const EvalReport& r) { return r.plugin_scores.count(name) ? r.plugin_scores.at(name) : 0.0; });
  }
  return avg;
}

}  // namespace mflag
