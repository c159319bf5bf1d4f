// Encoder-decoder transformer with target-form injection into the encoder
// input embeddings. The embedding table is shared by source and target
// tokens, form codes and the (tied) output projection.
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mflag/common.hpp"
#include "mflag/form.hpp"
#include "mflag/layers.hpp"

namespace mflag {

struct ModelConfig {
  int d_model = 64;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int ffn_width = 128;
  int vocab_size = 0;
  int max_len = 64;
  double dropout = 0.1;

  void validate() const {
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) throw Error("d_model must be divisible by n_heads");
    if (n_enc_layers < 0 || n_dec_layers < 1) throw Error("need at least one decoder layer");
    if (ffn_width < 1) throw Error("ffn_width must be >= 1");
    if (vocab_size <= kFirstWordId) throw Error("vocab_size must cover the control tokens and form codes");
    if (max_len < 3) throw Error("max_len too small");
    if (dropout < 0.0 || dropout >= 1.0) throw Error("dropout must be in [0,1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, d_model, n_heads, n_enc_layers, n_dec_layers, ffn_width,
                                                vocab_size, max_len, dropout)

/// One training example: source ids and the full serialized target
/// "[FORM] ... [eos]". The decoder reads target[0..n-2] and predicts
/// target[1..n-1]. `inject` names the form embedded into the encoder input.
struct Example {
  std::vector<int> source;
  std::vector<int> target;
  std::optional<Form> inject;
};

struct LossSum {
  double nll = 0.0;
  std::size_t tokens = 0;

  double mean() const { return tokens ? nll / static_cast<double>(tokens) : 0.0; }
  LossSum& operator+=(const LossSum& o) {
    nll += o.nll;
    tokens += o.tokens;
    return *this;
  }
};

template <typename T>
struct EncoderLayer {
  LayerNorm<T> attn_norm, ffn_norm;
  Attention<T> self_attn;
  FeedForward<T> ffn;

  struct Cache {
    typename LayerNorm<T>::Cache attn_norm, ffn_norm;
    typename Attention<T>::Cache self_attn;
    typename FeedForward<T>::Cache ffn;
    Mat<T> attn_in, ffn_in, drop_attn, drop_ffn;
  };

  void init(const ModelConfig& c, Rng& rng) {
    attn_norm.init(c.d_model);
    ffn_norm.init(c.d_model);
    self_attn.init(c.d_model, c.n_heads, rng);
    ffn.init(c.d_model, c.ffn_width, rng);
  }

  Mat<T> forward(const Mat<T>& x, const Segments& seg, std::span<const char> valid, double p, Rng* rng,
                 Cache& c) const {
    c.attn_in = attn_norm.forward(x, c.attn_norm);
    Mat<T> h = x + dropout_forward<T>(self_attn.forward(c.attn_in, seg, c.attn_in, seg, false, valid, c.self_attn),
                                      p, rng, c.drop_attn);
    c.ffn_in = ffn_norm.forward(h, c.ffn_norm);
    h += dropout_forward<T>(ffn.forward(c.ffn_in, c.ffn), p, rng, c.drop_ffn);
    return h;
  }

  Mat<T> backward(const Mat<T>& dy, const Segments& seg, const Cache& c) {
    Mat<T> dh = dy;
    dh += ffn_norm.backward(c.ffn_norm, ffn.backward(c.ffn_in, c.ffn, dropout_backward<T>(dy, c.drop_ffn)));
    auto [dq, dkv] = self_attn.backward(c.attn_in, seg, c.attn_in, seg, c.self_attn, dropout_backward<T>(dh, c.drop_attn));
    dq += dkv;
    dh += attn_norm.backward(c.attn_norm, dq);
    return dh;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    attn_norm.for_each(prefix + ".attn_norm", fn);
    self_attn.for_each(prefix + ".self_attn", fn);
    ffn_norm.for_each(prefix + ".ffn_norm", fn);
    ffn.for_each(prefix + ".ffn", fn);
  }
};

template <typename T>
struct DecoderLayer {
  LayerNorm<T> self_norm, cross_norm, ffn_norm;
  Attention<T> self_attn, cross_attn;
  FeedForward<T> ffn;

  struct Cache {
    typename LayerNorm<T>::Cache self_norm, cross_norm, ffn_norm;
    typename Attention<T>::Cache self_attn, cross_attn;
    typename FeedForward<T>::Cache ffn;
    Mat<T> self_in, cross_in, ffn_in, drop_self, drop_cross, drop_ffn;
  };

  void init(const ModelConfig& c, Rng& rng) {
    self_norm.init(c.d_model);
    cross_norm.init(c.d_model);
    ffn_norm.init(c.d_model);
    self_attn.init(c.d_model, c.n_heads, rng);
    cross_attn.init(c.d_model, c.n_heads, rng);
    ffn.init(c.d_model, c.ffn_width, rng);
  }

  Mat<T> forward(const Mat<T>& x, const Segments& tseg, const Mat<T>& memory, const Segments& sseg,
                 std::span<const char> memory_valid, double p, Rng* rng, Cache& c) const {
    c.self_in = self_norm.forward(x, c.self_norm);
    Mat<T> h = x + dropout_forward<T>(self_attn.forward(c.self_in, tseg, c.self_in, tseg, true, {}, c.self_attn), p,
                                      rng, c.drop_self);
    c.cross_in = cross_norm.forward(h, c.cross_norm);
    h += dropout_forward<T>(cross_attn.forward(c.cross_in, tseg, memory, sseg, false, memory_valid, c.cross_attn), p,
                            rng, c.drop_cross);
    c.ffn_in = ffn_norm.forward(h, c.ffn_norm);
    h += dropout_forward<T>(ffn.forward(c.ffn_in, c.ffn), p, rng, c.drop_ffn);
    return h;
  }

  /// Returns dx; adds the gradient w.r.t. the encoder memory into `dmemory`.
  Mat<T> backward(const Mat<T>& dy, const Segments& tseg, const Mat<T>& memory, const Segments& sseg, const Cache& c,
                  Mat<T>& dmemory) {
    Mat<T> dh = dy;
    dh += ffn_norm.backward(c.ffn_norm, ffn.backward(c.ffn_in, c.ffn, dropout_backward<T>(dh, c.drop_ffn)));
    auto [dcq, dmem] =
        cross_attn.backward(c.cross_in, tseg, memory, sseg, c.cross_attn, dropout_backward<T>(dh, c.drop_cross));
    dmemory += dmem;
    dh += cross_norm.backward(c.cross_norm, dcq);
    auto [dq, dkv] = self_attn.backward(c.self_in, tseg, c.self_in, tseg, c.self_attn, dropout_backward<T>(dh, c.drop_self));
    dq += dkv;
    dh += self_norm.backward(c.self_norm, dq);
    return dh;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    self_norm.for_each(prefix + ".self_norm", fn);
    self_attn.for_each(prefix + ".self_attn", fn);
    cross_norm.for_each(prefix + ".cross_norm", fn);
    cross_attn.for_each(prefix + ".cross_attn", fn);
    ffn_norm.for_each(prefix + ".ffn_norm", fn);
    ffn.for_each(prefix + ".ffn", fn);
  }
};

/// Sinusoidal position table (max_len x d); fixed, not trained.
template <typename T>
Mat<T> sinusoidal_positions(int max_len, int d) {
  Mat<T> pe(max_len, d);
  for (int pos = 0; pos < max_len; ++pos) {
    for (int i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / d);
      pe(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(pos * freq) : std::cos(pos * freq));
    }
  }
  return pe;
}

/// Stacked encoder output for a batch of sources.
template <typename T>
struct EncodedBatch {
  Mat<T> states;
  Segments segments;
  std::vector<char> valid;  // empty when no source position is padding
};

template <typename T>
class Seq2Seq {
 public:
  ModelConfig config;
  Param<T> embedding;  // vocab x d
  std::vector<EncoderLayer<T>> encoder;
  std::vector<DecoderLayer<T>> decoder;
  LayerNorm<T> encoder_norm, decoder_norm;

  Seq2Seq() = default;

  Seq2Seq(const ModelConfig& cfg, std::uint64_t seed) : config(cfg) {
    cfg.validate();
    Rng rng(seed);
    embedding.resize(cfg.vocab_size, cfg.d_model);
    init_normal(embedding, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)), rng);
    encoder.resize(static_cast<std::size_t>(cfg.n_enc_layers));
    for (auto& l : encoder) l.init(cfg, rng);
    decoder.resize(static_cast<std::size_t>(cfg.n_dec_layers));
    for (auto& l : decoder) l.init(cfg, rng);
    encoder_norm.init(cfg.d_model);
    decoder_norm.init(cfg.d_model);
    positions_ = sinusoidal_positions<T>(cfg.max_len, cfg.d_model);
  }

  /// Visits every trainable tensor as (name, Param&), in a fixed order.
  template <typename F>
  void for_each_param(F&& fn) {
    fn(std::string("embedding"), embedding);
    for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].for_each("encoder." + std::to_string(i), fn);
    encoder_norm.for_each("encoder_norm", fn);
    for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].for_each("decoder." + std::to_string(i), fn);
    decoder_norm.for_each("decoder_norm", fn);
  }

  template <typename F>
  void for_each_param(F&& fn) const {
    const_cast<Seq2Seq*>(this)->for_each_param([&](const std::string& n, Param<T>& p) { fn(n, std::as_const(p)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_param([&](const std::string&, const Param<T>& p) { n += static_cast<std::size_t>(p.value.size()); });
    return n;
  }

  void zero_grad() {
    for_each_param([](const std::string&, Param<T>& p) { p.grad.setZero(); });
  }

  template <typename U>
  Seq2Seq<U> cast() const {
    Seq2Seq<U> out(config, 0);
    std::vector<const Param<T>*> src;
    for_each_param([&](const std::string&, const Param<T>& p) { src.push_back(&p); });
    std::size_t i = 0;
    out.for_each_param([&](const std::string&, Param<U>& p) {
      p.value = src[i++]->value.template cast<U>();
      p.grad.setZero();
    });
    return out;
  }

  /// The embedding F of a form code, on the same scale as token embeddings.
  RowVec<T> form_embedding(Form f) const { return embedding.value.row(form_token_id(f)) * embed_scale(); }

  T embed_scale() const { return std::sqrt(static_cast<T>(config.d_model)); }

  // ------------------------------------------------------------------ training

  /// Summed teacher-forced NLL over all predicted target tokens. With
  /// `accumulate`, gradients of that sum are added into each Param::grad.
  /// `rng` enables dropout.
  LossSum forward_backward(std::span<const Example> batch, Rng* rng, bool accumulate) {
    if (batch.empty()) return {};
    std::vector<std::vector<int>> sources, prefixes;
    std::vector<std::optional<Form>> forms;
    std::vector<int> targets;
    for (const auto& ex : batch) {
      if (ex.target.size() < 2) throw Error("target sequence needs a form code and at least one token");
      sources.push_back(ex.source);
      forms.push_back(ex.inject);
      prefixes.emplace_back(ex.target.begin(), ex.target.end() - 1);
      targets.insert(targets.end(), ex.target.begin() + 1, ex.target.end());
    }
    const double p = rng ? config.dropout : 0.0;
    EncoderCache ec;
    EncodedBatch<T> enc = encode_impl(sources, forms, p, rng, ec);
    DecoderCache dc;
    const Mat<T> hidden = decode_impl(enc, prefixes, p, rng, dc);
    Mat<T> logits = hidden * embedding.value.transpose();
    LossSum loss;
    loss.tokens = targets.size();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const T mx = logits.row(r).maxCoeff();
      auto e = (logits.row(r).array() - mx).exp();
      const T sum = e.sum();
      loss.nll -= static_cast<double>(logits(r, targets[static_cast<std::size_t>(r)]) - mx - std::log(sum));
      if (accumulate) {
        logits.row(r) = e / sum;  // reuse as dlogits
        logits(r, targets[static_cast<std::size_t>(r)]) -= T(1);
      }
    }
    if (!accumulate) return loss;
    const Mat<T>& dlogits = logits;
    embedding.grad.noalias() += dlogits.transpose() * dc.normed;
    Mat<T> dh = dlogits * embedding.value;
    Mat<T> dmemory = Mat<T>::Zero(enc.states.rows(), enc.states.cols());
    backward_decoder(dh, enc, dc, dmemory);
    backward_encoder(dmemory, enc, ec);
    return loss;
  }

  // ----------------------------------------------------------------- inference

  /// Encodes stacked sources; `forms[i]` (if set) is injected into source i.
  EncodedBatch<T> encode_batch(const std::vector<std::vector<int>>& sources,
                               const std::vector<std::optional<Form>>& forms) const {
    EncoderCache ec;
    return encode_impl(sources, forms, 0.0, nullptr, ec);
  }

  /// Encoder states (length x d_model) of one source.
  Mat<T> encode(const std::vector<int>& source, std::optional<Form> target_form) const {
    return encode_batch({source}, {target_form}).states;
  }

  /// Next-token log-probabilities after each prefix; prefix i attends to
  /// source segment i of `enc`. Returns (n_prefixes x vocab).
  Mat<T> next_log_probs(const EncodedBatch<T>& enc, const std::vector<std::vector<int>>& prefixes) const {
    DecoderCache dc;
    const Mat<T> hidden = decode_impl(enc, prefixes, 0.0, nullptr, dc);
    Mat<T> last(static_cast<Eigen::Index>(prefixes.size()), config.d_model);
    for (std::size_t s = 0; s < prefixes.size(); ++s) {
      last.row(static_cast<Eigen::Index>(s)) = hidden.row(dc.segments.begin(s) + dc.segments.length(s) - 1);
    }
    Mat<T> logits = last * embedding.value.transpose();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const T mx = logits.row(r).maxCoeff();
      const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
      logits.row(r).array() -= lse;
    }
    return logits;
  }

  /// Next-token distribution for one prefix over the given encoder states.
  std::vector<T> decode_step(const Mat<T>& encoder_states, const std::vector<int>& prefix) const {
    if (prefix.empty()) throw Error("decode_step: empty prefix");
    EncodedBatch<T> enc;
    enc.states = encoder_states;
    enc.segments = Segments::from_lengths(std::vector<int>{static_cast<int>(encoder_states.rows())});
    const Mat<T> lp = next_log_probs(enc, {prefix});
    std::vector<T> probs(static_cast<std::size_t>(lp.cols()));
    for (Eigen::Index j = 0; j < lp.cols(); ++j) probs[static_cast<std::size_t>(j)] = std::exp(lp(0, j));
    return probs;
  }

 private:
  struct EncoderCache {
    std::vector<int> ids;
    std::vector<std::optional<Form>> forms;
    Mat<T> drop_embed;
    std::vector<typename EncoderLayer<T>::Cache> layers;
    std::vector<Mat<T>> layer_inputs;
    typename LayerNorm<T>::Cache norm;
  };

  struct DecoderCache {
    std::vector<int> ids;
    Segments segments;
    Mat<T> drop_embed;
    std::vector<typename DecoderLayer<T>::Cache> layers;
    std::vector<Mat<T>> layer_inputs;
    typename LayerNorm<T>::Cache norm;
    Mat<T> normed;
  };

  Mat<T> embed(const std::vector<int>& ids, const Segments& seg) const {
    Mat<T> x(static_cast<Eigen::Index>(ids.size()), config.d_model);
    const T scale = embed_scale();
    for (std::size_t s = 0; s < seg.count(); ++s) {
      for (int i = 0; i < seg.length(s); ++i) {
        const int r = seg.begin(s) + i;
        const int id = ids[static_cast<std::size_t>(r)];
        if (id < 0 || id >= config.vocab_size) throw Error("token id out of range: " + std::to_string(id));
        x.row(r) = embedding.value.row(id) * scale + positions_.row(i);
      }
    }
    return x;
  }

  void check_length(std::size_t n) const {
    if (n == 0) throw Error("empty sequence");
    if (n > static_cast<std::size_t>(config.max_len)) {
      throw Error("sequence of length " + std::to_string(n) + " exceeds max_len " + std::to_string(config.max_len));
    }
  }

  EncodedBatch<T> encode_impl(const std::vector<std::vector<int>>& sources,
                              const std::vector<std::optional<Form>>& forms, double p, Rng* rng,
                              EncoderCache& c) const {
    EncodedBatch<T> out;
    c.ids.clear();
    c.forms = forms;
    bool any_pad = false;
    for (const auto& s : sources) {
      check_length(s.size());
      out.segments.offsets.push_back(out.segments.total() + static_cast<int>(s.size()));
      for (int id : s) any_pad |= id == kPadId;
      c.ids.insert(c.ids.end(), s.begin(), s.end());
    }
    if (any_pad) {
      out.valid.resize(c.ids.size());
      for (std::size_t i = 0; i < c.ids.size(); ++i) out.valid[i] = c.ids[i] != kPadId;
    }
    Mat<T> x = embed(c.ids, out.segments);
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (!forms[s]) continue;
      const auto rows = Eigen::seqN(out.segments.begin(s), out.segments.length(s));
      const Mat<T> w = x(rows, Eigen::all);
      x(rows, Eigen::all) = inject<T>(w, Mat<T>(form_embedding(*forms[s])));
    }
    x = dropout_forward<T>(x, p, rng, c.drop_embed);
    c.layers.resize(encoder.size());
    c.layer_inputs.resize(encoder.size());
    for (std::size_t l = 0; l < encoder.size(); ++l) {
      c.layer_inputs[l] = x;
      x = encoder[l].forward(c.layer_inputs[l], out.segments, out.valid, p, rng, c.layers[l]);
    }
    out.states = encoder_norm.forward(x, c.norm);
    return out;
  }

  Mat<T> decode_impl(const EncodedBatch<T>& enc, const std::vector<std::vector<int>>& prefixes, double p, Rng* rng,
                     DecoderCache& c) const {
    if (prefixes.size() != enc.segments.count()) throw Error("prefix count does not match encoded batch");
    c.ids.clear();
    c.segments = Segments{};
    for (const auto& pr : prefixes) {
      if (pr.empty()) throw Error("empty decoder prefix");
      check_length(pr.size());
      c.segments.offsets.push_back(c.segments.total() + static_cast<int>(pr.size()));
      c.ids.insert(c.ids.end(), pr.begin(), pr.end());
    }
    Mat<T> x = dropout_forward<T>(embed(c.ids, c.segments), p, rng, c.drop_embed);
    c.layers.resize(decoder.size());
    c.layer_inputs.resize(decoder.size());
    for (std::size_t l = 0; l < decoder.size(); ++l) {
      c.layer_inputs[l] = x;
      x = decoder[l].forward(c.layer_inputs[l], c.segments, enc.states, enc.segments, enc.valid, p, rng, c.layers[l]);
    }
    c.normed = decoder_norm.forward(x, c.norm);
    return c.normed;
  }

  void scatter_embedding_grad(const std::vector<int>& ids, const Mat<T>& dx) {
    const T scale = embed_scale();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      embedding.grad.row(ids[r]) += dx.row(static_cast<Eigen::Index>(r)) * scale;
    }
  }

  void backward_decoder(const Mat<T>& dhidden, const EncodedBatch<T>& enc, const DecoderCache& c, Mat<T>& dmemory) {
    Mat<T> dx = decoder_norm.backward(c.norm, dhidden);
    for (std::size_t l = decoder.size(); l-- > 0;) {
      dx = decoder[l].backward(dx, c.segments, enc.states, enc.segments, c.layers[l], dmemory);
    }
    scatter_embedding_grad(c.ids, dropout_backward<T>(dx, c.drop_embed));
  }

  void backward_encoder(const Mat<T>& dstates, const EncodedBatch<T>& enc, const EncoderCache& c) {
    Mat<T> dx = encoder_norm.backward(c.norm, dstates);
    for (std::size_t l = encoder.size(); l-- > 0;) dx = encoder[l].backward(dx, enc.segments, c.layers[l]);
    dx = dropout_backward<T>(dx, c.drop_embed);
    for (std::size_t s = 0; s < enc.segments.count(); ++s) {
      if (!c.forms[s]) continue;
      const auto [dw, dform] =
          inject_backward_single<T>(Mat<T>(dx.middleRows(enc.segments.begin(s), enc.segments.length(s))));
      embedding.grad.row(form_token_id(*c.forms[s])) += dform * embed_scale();
    }
    scatter_embedding_grad(c.ids, dx);
  }

  Mat<T> positions_;
};

}  // namespace mflag
