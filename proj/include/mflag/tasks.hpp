// Turning tagged texts into model examples, and the per-example losses.
#pragma once

#include <optional>
#include <vector>

#include "mflag/corpus.hpp"
#include "mflag/model.hpp"
#include "mflag/vocab.hpp"

namespace mflag {

/// Reconstruction example: the encoder reads the corrupted serialization,
/// the decoder reproduces the original. No form injection.
inline Example make_denoise_example(const Vocabulary& vocab, const TaggedText& corrupted, const TaggedText& original) {
  return {vocab.encode(corrupted), vocab.encode(original), std::nullopt};
}

/// Rewriting example; with `inject_target_form` the target's form is
/// injected into the encoder.
inline Example make_supervised_example(const Vocabulary& vocab, const ParallelPair& pair, bool inject_target_form) {
  return {vocab.encode(pair.source), vocab.encode(pair.target),
          inject_target_form ? std::optional<Form>(pair.target.form) : std::nullopt};
}

/// Mean negative log-likelihood of `original` given `corrupted`.
template <typename T>
double denoising_loss(Seq2Seq<T>& model, const Vocabulary& vocab, const TaggedText& corrupted,
                      const TaggedText& original) {
  const Example ex = make_denoise_example(vocab, corrupted, original);
  return model.forward_backward(std::span<const Example>(&ex, 1), nullptr, false).mean();
}

/// Mean NLL over a set of examples, without gradients or dropout.
template <typename T>
LossSum evaluate_loss(Seq2Seq<T>& model, const std::vector<Example>& examples, std::size_t batch_size = 64) {
  LossSum total;
  for (std::size_t i = 0; i < examples.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, examples.size() - i);
    total += model.forward_backward(std::span<const Example>(examples.data() + i, n), nullptr, false);
  }
  return total;
}

}  // namespace mflag
