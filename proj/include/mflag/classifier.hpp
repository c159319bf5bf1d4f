// Literal-vs-figurative binary classifiers: hashed word/character n-gram
// logistic regression.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "mflag/common.hpp"
#include "mflag/corpus.hpp"
#include "mflag/form.hpp"

namespace mflag {

/// Scores how strongly a text bears one figurative form. Implementations must
/// be deterministic and safe for concurrent reads.
class FormScorer {
 public:
  virtual ~FormScorer() = default;
  virtual Form form() const = 0;
  virtual double predict_proba(std::span<const std::string> tokens) const = 0;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Sparse feature vector: sorted unique bucket indices with counts.
struct Features {
  std::vector<std::uint32_t> index;
  std::vector<double> value;
};

inline constexpr int kDefaultHashBits = 18;

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Word 1..3-grams and per-token character 3..5-grams, hashed into 2^bits
/// buckets. A pure function of the text's n-gram multiset.
inline Features extract_features(std::span<const std::string> tokens, int hash_bits = kDefaultHashBits) {
  const std::uint64_t mask = (std::uint64_t{1} << hash_bits) - 1;
  std::vector<std::uint32_t> raw;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      std::uint64_t h = detail::fnv1a("w" + std::to_string(n));
      for (std::size_t j = 0; j < n; ++j) {
        h = detail::fnv1a(tokens[i + j], h);
        h = detail::fnv1a("\x1f", h);
      }
      raw.push_back(static_cast<std::uint32_t>(h & mask));
    }
  }
  for (const auto& tok : tokens) {
    const std::string padded = "<" + tok + ">";
    for (std::size_t n = 3; n <= 5; ++n) {
      for (std::size_t i = 0; i + n <= padded.size(); ++i) {
        std::uint64_t h = detail::fnv1a("c" + std::to_string(n));
        h = detail::fnv1a(std::string_view(padded).substr(i, n), h);
        raw.push_back(static_cast<std::uint32_t>(h & mask));
      }
    }
  }
  std::sort(raw.begin(), raw.end());
  Features f;
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i;
    while (j < raw.size() && raw[j] == raw[i]) ++j;
    f.index.push_back(raw[i]);
    f.value.push_back(static_cast<double>(j - i));
    i = j;
  }
  return f;
}

struct ClassifierTrainOptions {
  int epochs = 8;
  double learning_rate = 0.2;
  double l2 = 1e-6;
  int hash_bits = kDefaultHashBits;
};

class FormClassifier final : public FormScorer {
 public:
  FormClassifier() = default;
  FormClassifier(Form form, int hash_bits) : form_(form), hash_bits_(hash_bits), weights_(std::size_t{1} << hash_bits) {}

  Form form() const override { return form_; }
  int hash_bits() const { return hash_bits_; }
  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return weights_; }

  double score(const Features& f) const {
    double z = bias_;
    for (std::size_t k = 0; k < f.index.size(); ++k) z += weights_[f.index[k]] * f.value[k];
    return z;
  }

  double predict_proba(std::span<const std::string> tokens) const override {
    return sigmoid(score(extract_features(tokens, hash_bits_)));
  }

  double predict_proba(const TaggedText& t) const { return predict_proba(std::span<const std::string>(t.tokens)); }

  /// L2-regularized logistic regression by SGD over a seeded per-epoch shuffle.
  static FormClassifier train(Form form, const std::vector<TaggedText>& pos, const std::vector<TaggedText>& neg,
                              std::uint64_t seed, const ClassifierTrainOptions& opt = {}) {
    if (pos.empty() || neg.empty()) throw Error("train_classifier: both classes must be nonempty");
    FormClassifier clf(form, opt.hash_bits);
    std::vector<std::pair<Features, double>> data;
    data.reserve(pos.size() + neg.size());
    for (const auto& t : pos) data.emplace_back(extract_features(t.tokens, opt.hash_bits), 1.0);
    for (const auto& t : neg) data.emplace_back(extract_features(t.tokens, opt.hash_bits), 0.0);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
      rng.shuffle(order);
      const double lr = opt.learning_rate / (1.0 + 0.5 * epoch);
      for (std::size_t i : order) {
        const auto& [f, y] = data[i];
        const double g = sigmoid(clf.score(f)) - y;
        for (std::size_t k = 0; k < f.index.size(); ++k) {
          double& w = clf.weights_[f.index[k]];
          w -= lr * (g * f.value[k] + opt.l2 * w);
        }
        clf.bias_ -= lr * g;
      }
    }
    return clf;
  }

  nlohmann::json to_json() const {
    nlohmann::json w = nlohmann::json::array();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (weights_[i] != 0.0) w.push_back({i, weights_[i]});
    }
    return {{"format", "mflag-classifier"}, {"version", 1},      {"form", form_name(form_)},
            {"hash_bits", hash_bits_},      {"bias", bias_},     {"weights", std::move(w)}};
  }

  static FormClassifier from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "mflag-classifier" || j.value("version", 0) != 1) {
      throw Error("not an mflag-classifier v1 model");
    }
    FormClassifier clf(parse_form(j.at("form").get<std::string>()), j.at("hash_bits").get<int>());
    clf.bias_ = j.at("bias").get<double>();
    for (const auto& e : j.at("weights")) {
      const auto idx = e.at(0).get<std::size_t>();
      if (idx >= clf.weights_.size()) throw Error("classifier weight index out of range");
      clf.weights_[idx] = e.at(1).get<double>();
    }
    return clf;
  }

  void save(const std::filesystem::path& path) const {
    auto out = detail::open_out(path);
    out << to_json().dump() << '\n';
  }

  static FormClassifier load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ": " + e.what());
    }
  }

 private:
  Form form_ = Form::Literal;
  int hash_bits_ = kDefaultHashBits;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

using ClassifierSet = std::map<Form, FormClassifier>;

struct ClassifierReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_test = 0;
};

/// Precision/recall/F1 from confusion counts; F1 is 0 when P+R is 0.
inline ClassifierReport report_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t n) {
  ClassifierReport r;
  r.n_test = n;
  r.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

inline ClassifierReport evaluate_classifier(const FormScorer& clf, const std::vector<TaggedText>& pos,
                                            const std::vector<TaggedText>& neg) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& t : pos) (clf.predict_proba(t.tokens) > 0.5 ? tp : fn) += 1;
  for (const auto& t : neg) fp += clf.predict_proba(t.tokens) > 0.5 ? 1 : 0;
  return report_from_counts(tp, fp, fn, pos.size() + neg.size());
}

/// Fraction of texts scored strictly above 0.5.
inline double form_accuracy(const FormScorer& clf, const std::vector<std::vector<std::string>>& texts) {
  if (texts.empty()) throw Error("no outputs to score");
  std::size_t hits = 0;
  for (const auto& t : texts) hits += clf.predict_proba(t) > 0.5 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(texts.size());
}

/// Positives are the figurative targets, negatives the literal sources.
inline std::pair<std::vector<TaggedText>, std::vector<TaggedText>> split_labels(const std::vector<ParallelPair>& pairs) {
  std::pair<std::vector<TaggedText>, std::vector<TaggedText>> out;
  for (const auto& p : pairs) {
    (is_figurative(p.target.form) ? out.first : out.second).push_back(p.target);
    (is_figurative(p.source.form) ? out.first : out.second).push_back(p.source);
  }
  return out;
}

using F1Matrix = std::array<std::array<double, 5>, 5>;

/// Entry (i, j) is the F1 of classifier for form i on the test set of form j.
inline F1Matrix cross_form_matrix(const ClassifierSet& classifiers,
                                  const std::map<Form, std::vector<ParallelPair>>& test_sets) {
  for (Form f : kFigurativeForms) {
    if (!classifiers.count(f)) throw Error("cross_form_matrix: missing classifier for " + std::string(form_name(f)));
    if (!test_sets.count(f)) throw Error("cross_form_matrix: missing test set for " + std::string(form_name(f)));
  }
  F1Matrix m{};
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      const auto [pos, neg] = split_labels(test_sets.at(kFigurativeForms[j]));
      m[i][j] = evaluate_classifier(classifiers.at(kFigurativeForms[i]), pos, neg).f1;
    }
  }
  return m;
}

inline void save_classifiers(const ClassifierSet& set, const std::filesystem::path& dir) {
  for (const auto& [f, clf] : set) clf.save(dir / (std::string(form_name(f)) + ".json"));
}

inline ClassifierSet load_classifiers(const std::filesystem::path& dir) {
  ClassifierSet set;
  for (Form f : kFigurativeForms) {
    const auto path = dir / (std::string(form_name(f)) + ".json");
    if (!std::filesystem::exists(path)) throw Error("missing classifier " + path.string());
    set.emplace(f, FormClassifier::load(path));
  }
  return set;
}

/// Scores each candidate pair with the target form's classifier: the source
/// literal probability is 1 - p(figurative).
inline std::vector<ScoredPair> score_pairs(const FormScorer& clf, const std::vector<ParallelPair>& pairs) {
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    out.push_back({p, 1.0 - clf.predict_proba(p.source.tokens), clf.predict_proba(p.target.tokens)});
  }
  return out;
}

}  // namespace mflag
