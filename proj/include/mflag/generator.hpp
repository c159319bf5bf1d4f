// Inference: direct generation into a target form, and two-hop generation
// through the literal form as a pivot.
#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mflag/checkpoint.hpp"
#include "mflag/corpus.hpp"
#include "mflag/model.hpp"

namespace mflag {

enum class GenMode { Direct, Pivot };

struct DecodeOptions {
  int beam_width = 1;  // 1 = greedy
};

struct GenRequest {
  TaggedText source;
  Form target_form = Form::Literal;
  GenMode mode = GenMode::Direct;
  DecodeOptions decode;
  int max_new_tokens = 60;

  void validate() const {
    if (mode == GenMode::Pivot && target_form == Form::Literal) {
      throw UsageError("pivot generation needs a figurative target form (pivoting to LITERAL is ill-formed)");
    }
    if (max_new_tokens < 1) throw UsageError("max_new_tokens must be >= 1");
    if (decode.beam_width < 1) throw UsageError("beam width must be >= 1");
  }
};

struct GenResult {
  TaggedText output;
  std::optional<TaggedText> pivot_text;
  std::vector<double> token_log_probs;  // one per generated token, [eos] included
  bool truncated = false;               // hit max_new_tokens without [eos]

  double mean_log_prob() const {
    if (token_log_probs.empty()) return 0.0;
    double s = 0;
    for (double x : token_log_probs) s += x;
    return s / static_cast<double>(token_log_probs.size());
  }
};

namespace detail {

struct Hypothesis {
  std::vector<int> ids;  // starts with the target form code
  std::vector<double> log_probs;
  double score = 0.0;
  bool finished = false;
};

/// Tokens the decoder may never emit: padding, mask, unknown and form codes.
template <typename T>
void forbid_control_tokens(Eigen::Ref<RowVec<T>> row) {
  row(kPadId) = -std::numeric_limits<T>::infinity();
  row(kMaskId) = -std::numeric_limits<T>::infinity();
  row(kUnkId) = -std::numeric_limits<T>::infinity();
  for (int f = kFirstFormId; f < kFirstWordId; ++f) row(f) = -std::numeric_limits<T>::infinity();
}

template <typename T>
GenResult finish(const Vocabulary& vocab, Form target, const Hypothesis& h) {
  GenResult r;
  r.output.form = target;
  r.output.tokens = vocab.words(h.ids);
  r.token_log_probs = h.log_probs;
  r.truncated = !h.finished;
  return r;
}

/// Greedy decoding of many sources at once.
template <typename T>
std::vector<GenResult> greedy_hop(const Checkpoint<T>& ck, const std::vector<TaggedText>& sources,
                                  const std::vector<Form>& targets, int max_new_tokens) {
  std::vector<std::vector<int>> src_ids;
  std::vector<std::optional<Form>> inject;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    src_ids.push_back(ck.vocab.encode(sources[i]));
    inject.push_back(ck.inject_enabled() ? std::optional<Form>(targets[i]) : std::nullopt);
  }
  const EncodedBatch<T> enc = ck.model.encode_batch(src_ids, inject);
  std::vector<Hypothesis> hyps(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) hyps[i].ids = {form_token_id(targets[i])};
  const int limit = std::min(max_new_tokens, ck.model.config.max_len - 1);
  for (int step = 0; step < limit; ++step) {
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
      if (!hyps[i].finished) active.push_back(i);
    }
    if (active.empty()) break;
    EncodedBatch<T> sub;
    std::vector<std::vector<int>> prefixes;
    std::vector<int> lengths;
    for (std::size_t i : active) lengths.push_back(enc.segments.length(i));
    sub.segments = Segments::from_lengths(lengths);
    sub.states.resize(sub.segments.total(), enc.states.cols());
    for (std::size_t k = 0; k < active.size(); ++k) {
      sub.states.middleRows(sub.segments.begin(k), lengths[k]) =
          enc.states.middleRows(enc.segments.begin(active[k]), lengths[k]);
      prefixes.push_back(hyps[active[k]].ids);
    }
    Mat<T> lp = ck.model.next_log_probs(sub, prefixes);
    for (std::size_t k = 0; k < active.size(); ++k) {
      auto row = lp.row(static_cast<Eigen::Index>(k));
      forbid_control_tokens<T>(row);
      Eigen::Index best = 0;
      row.maxCoeff(&best);
      auto& h = hyps[active[k]];
      h.ids.push_back(static_cast<int>(best));
      h.log_probs.push_back(static_cast<double>(row(best)));
      if (best == kEosId) h.finished = true;
    }
  }
  std::vector<GenResult> out;
  for (std::size_t i = 0; i < hyps.size(); ++i) out.push_back(finish<T>(ck.vocab, targets[i], hyps[i]));
  return out;
}

/// Beam search for one source; the best finished hypothesis by total
/// log-probability wins.
template <typename T>
GenResult beam_hop(const Checkpoint<T>& ck, const TaggedText& source, Form target, int width, int max_new_tokens) {
  const auto src = ck.vocab.encode(source);
  const Mat<T> states = ck.model.encode(src, ck.inject_enabled() ? std::optional<Form>(target) : std::nullopt);
  std::vector<Hypothesis> beam(1);
  beam[0].ids = {form_token_id(target)};
  const int limit = std::min(max_new_tokens, ck.model.config.max_len - 1);
  for (int step = 0; step < limit; ++step) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < beam.size(); ++i) {
      if (!beam[i].finished) open.push_back(i);
    }
    if (open.empty()) break;
    EncodedBatch<T> enc;
    enc.segments = Segments::from_lengths(std::vector<int>(open.size(), static_cast<int>(states.rows())));
    enc.states.resize(enc.segments.total(), states.cols());
    std::vector<std::vector<int>> prefixes;
    for (std::size_t k = 0; k < open.size(); ++k) {
      enc.states.middleRows(enc.segments.begin(k), states.rows()) = states;
      prefixes.push_back(beam[open[k]].ids);
    }
    Mat<T> lp = ck.model.next_log_probs(enc, prefixes);
    std::vector<Hypothesis> candidates;
    for (const auto& h : beam) {
      if (h.finished) candidates.push_back(h);
    }
    for (std::size_t k = 0; k < open.size(); ++k) {
      auto row = lp.row(static_cast<Eigen::Index>(k));
      forbid_control_tokens<T>(row);
      std::vector<int> idx(static_cast<std::size_t>(row.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = static_cast<int>(j);
      const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(width), idx.size());
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep), idx.end(),
                        [&](int a, int b) { return row(a) > row(b) || (row(a) == row(b) && a < b); });
      for (std::size_t j = 0; j < keep; ++j) {
        if (std::isinf(row(idx[j]))) continue;
        Hypothesis h = beam[open[k]];
        h.ids.push_back(idx[j]);
        h.log_probs.push_back(static_cast<double>(row(idx[j])));
        h.score += static_cast<double>(row(idx[j]));
        h.finished = idx[j] == kEosId;
        candidates.push_back(std::move(h));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (candidates.size() > static_cast<std::size_t>(width)) candidates.resize(static_cast<std::size_t>(width));
    beam = std::move(candidates);
  }
  const Hypothesis* best = nullptr;
  for (const auto& h : beam) {
    if (h.finished && (!best || h.score > best->score)) best = &h;
  }
  if (!best) best = &beam.front();
  return finish<T>(ck.vocab, target, *best);
}

template <typename T>
std::vector<GenResult> hop(const Checkpoint<T>& ck, const std::vector<TaggedText>& sources,
                           const std::vector<Form>& targets, const DecodeOptions& decode, int max_new_tokens) {
  if (decode.beam_width <= 1) return greedy_hop(ck, sources, targets, max_new_tokens);
  std::vector<GenResult> out;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out.push_back(beam_hop(ck, sources[i], targets[i], decode.beam_width, max_new_tokens));
  }
  return out;
}

}  // namespace detail

/// Order-preserving batch generation. All requests must share decode
/// settings. A failing request is reported with its index.
template <typename T>
std::vector<GenResult> generate_batch(const Checkpoint<T>& ck, const std::vector<GenRequest>& requests) {
  if (requests.empty()) return {};
  const auto& first = requests.front();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      requests[i].validate();
      if (requests[i].decode.beam_width != first.decode.beam_width ||
          requests[i].max_new_tokens != first.max_new_tokens) {
        throw UsageError("decode settings differ within one batch");
      }
      const std::size_t len = requests[i].source.tokens.size() + 2;
      if (len > static_cast<std::size_t>(ck.model.config.max_len)) {
        throw Error("source of length " + std::to_string(len) + " exceeds max_len " +
                    std::to_string(ck.model.config.max_len));
      }
    } catch (const UsageError& e) {
      throw UsageError("request " + std::to_string(i) + ": " + e.what());
    } catch (const Error& e) {
      throw Error("request " + std::to_string(i) + ": " + e.what());
    }
  }
  // first hop: direct requests go to their target, pivot requests to LITERAL
  std::vector<TaggedText> sources;
  std::vector<Form> targets;
  for (const auto& r : requests) {
    sources.push_back(r.source);
    targets.push_back(r.mode == GenMode::Pivot ? Form::Literal : r.target_form);
  }
  auto results = detail::hop(ck, sources, targets, first.decode, first.max_new_tokens);

  std::vector<std::size_t> pivots;
  std::vector<TaggedText> pivot_sources;
  std::vector<Form> pivot_targets;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].mode != GenMode::Pivot) continue;
    pivots.push_back(i);
    // re-tokenize the literal text so no control token leaks into hop two
    pivot_sources.push_back(TaggedText::from_string(Form::Literal, results[i].output.text()));
    pivot_targets.push_back(requests[i].target_form);
  }
  if (!pivots.empty()) {
    auto second = detail::hop(ck, pivot_sources, pivot_targets, first.decode, first.max_new_tokens);
    for (std::size_t k = 0; k < pivots.size(); ++k) {
      GenResult& r = results[pivots[k]];
      second[k].pivot_text = r.output;
      second[k].truncated = second[k].truncated || r.truncated;
      r = std::move(second[k]);
    }
  }
  return results;
}

template <typename T>
GenResult generate(const Checkpoint<T>& ck, const GenRequest& req) {
  return generate_batch(ck, std::vector<GenRequest>{req}).front();
}

}  // namespace mflag
