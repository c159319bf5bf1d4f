// Transformer building blocks with explicit forward caches and backward
// passes. Sequences in a batch are stored stacked row-wise (ragged, no
// padding); `Segments` holds the row offsets of each sequence.
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mflag/common.hpp"

namespace mflag {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

/// Row offsets of stacked sequences: sequence s occupies [at(s), at(s+1)).
struct Segments {
  std::vector<int> offsets{0};

  static Segments from_lengths(std::span<const int> lengths) {
    Segments s;
    for (int n : lengths) s.offsets.push_back(s.offsets.back() + n);
    return s;
  }
  std::size_t count() const { return offsets.size() - 1; }
  int begin(std::size_t s) const { return offsets[s]; }
  int length(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
  int total() const { return offsets.back(); }
};

template <typename T>
struct Param {
  Mat<T> value;
  Mat<T> grad;

  void resize(Eigen::Index rows, Eigen::Index cols) {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
  }
};

template <typename T>
void init_normal(Param<T>& p, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(rng.normal() * stddev);
}

// --- Linear -----------------------------------------------------------------

template <typename T>
struct Linear {
  Param<T> weight;  // in x out
  Param<T> bias;    // 1 x out

  void init(int in, int out, Rng& rng) {
    weight.resize(in, out);
    bias.resize(1, out);
    init_normal(weight, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  }

  Mat<T> forward(const Mat<T>& x) const {
    Mat<T> y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat<T> backward(const Mat<T>& x, const Mat<T>& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad.row(0) += dy.colwise().sum();
    return dy * weight.value.transpose();
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    fn(prefix + ".weight", weight);
    fn(prefix + ".bias", bias);
  }
};

// --- LayerNorm --------------------------------------------------------------

template <typename T>
struct LayerNorm {
  Param<T> gain;
  Param<T> bias;
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat<T> xhat;
    Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
  };

  void init(int d) {
    gain.resize(1, d);
    gain.value.setOnes();
    bias.resize(1, d);
  }

  Mat<T> forward(const Mat<T>& x, Cache& c) const {
    const auto n = x.rows();
    const auto d = static_cast<T>(x.cols());
    c.xhat.resize(n, x.cols());
    c.rstd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mean = x.row(i).sum() / d;
      const auto centered = x.row(i).array() - mean;
      const T var = centered.square().sum() / d;
      c.rstd(i) = T(1) / std::sqrt(var + static_cast<T>(kEps));
      c.xhat.row(i) = centered * c.rstd(i);
    }
    Mat<T> y = c.xhat.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Mat<T> backward(const Cache& c, const Mat<T>& dy) {
    gain.grad.row(0) += (dy.array() * c.xhat.array()).matrix().colwise().sum();
    bias.grad.row(0) += dy.colwise().sum();
    const Mat<T> dxhat = dy.array().rowwise() * gain.value.row(0).array();
    Mat<T> dx(dy.rows(), dy.cols());
    const auto d = static_cast<T>(dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const T mean_d = dxhat.row(i).sum() / d;
      const T mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / d;
      dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx);
    }
    return dx;
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    fn(prefix + ".gain", gain);
    fn(prefix + ".bias", bias);
  }
};

// --- Multi-head attention ---------------------------------------------------

template <typename T>
struct Attention {
  Linear<T> query, key, value, out;
  int heads = 1;

  struct Cache {
    Mat<T> q, k, v, context;
    std::vector<Mat<T>> probs;  // [segment * heads + head]
  };

  void init(int d, int n_heads, Rng& rng) {
    heads = n_heads;
    query.init(d, d, rng);
    key.init(d, d, rng);
    value.init(d, d, rng);
    out.init(d, d, rng);
  }

  /// `key_valid`, when nonempty, flags attendable key rows (0 = padding).
  Mat<T> forward(const Mat<T>& xq, const Segments& qseg, const Mat<T>& xkv, const Segments& kseg, bool causal,
                 std::span<const char> key_valid, Cache& c) const {
    c.q = query.forward(xq);
    c.k = key.forward(xkv);
    c.v = value.forward(xkv);
    const int d = static_cast<int>(xq.cols());
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    c.context = Mat<T>::Zero(xq.rows(), d);
    c.probs.assign(qseg.count() * static_cast<std::size_t>(heads), Mat<T>());
    for (std::size_t s = 0; s < qseg.count(); ++s) {
      const int q0 = qseg.begin(s), nq = qseg.length(s);
      const int k0 = kseg.begin(s), nk = kseg.length(s);
      for (int h = 0; h < heads; ++h) {
        Mat<T> scores = (c.q.block(q0, h * dh, nq, dh) * c.k.block(k0, h * dh, nk, dh).transpose()) * scale;
        for (int i = 0; i < nq; ++i) {
          T mx = -std::numeric_limits<T>::infinity();
          for (int j = 0; j < nk; ++j) {
            const bool ok = (!causal || j <= i) && (key_valid.empty() || key_valid[k0 + j]);
            if (!ok) scores(i, j) = -std::numeric_limits<T>::infinity();
            else mx = std::max(mx, scores(i, j));
          }
          T sum = 0;
          for (int j = 0; j < nk; ++j) {
            const T e = std::isinf(scores(i, j)) ? T(0) : std::exp(scores(i, j) - mx);
            scores(i, j) = e;
            sum += e;
          }
          if (sum > 0) scores.row(i) /= sum;
        }
        c.context.block(q0, h * dh, nq, dh).noalias() = scores * c.v.block(k0, h * dh, nk, dh);
        c.probs[s * heads + h] = std::move(scores);
      }
    }
    return out.forward(c.context);
  }

  /// Returns (d xq, d xkv).
  std::pair<Mat<T>, Mat<T>> backward(const Mat<T>& xq, const Segments& qseg, const Mat<T>& xkv,
                                     const Segments& kseg, const Cache& c, const Mat<T>& dout) {
    const Mat<T> dcontext = out.backward(c.context, dout);
    const int d = static_cast<int>(xq.cols());
    const int dh = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    Mat<T> dq = Mat<T>::Zero(c.q.rows(), d);
    Mat<T> dk = Mat<T>::Zero(c.k.rows(), d);
    Mat<T> dv = Mat<T>::Zero(c.v.rows(), d);
    for (std::size_t s = 0; s < qseg.count(); ++s) {
      const int q0 = qseg.begin(s), nq = qseg.length(s);
      const int k0 = kseg.begin(s), nk = kseg.length(s);
      for (int h = 0; h < heads; ++h) {
        const Mat<T>& p = c.probs[s * heads + h];
        const auto dctx = dcontext.block(q0, h * dh, nq, dh);
        dv.block(k0, h * dh, nk, dh).noalias() += p.transpose() * dctx;
        Mat<T> dp = dctx * c.v.block(k0, h * dh, nk, dh).transpose();
        // softmax backward: ds = p * (dp - rowsum(dp * p))
        const Eigen::Matrix<T, Eigen::Dynamic, 1> dot = (dp.array() * p.array()).rowwise().sum();
        Mat<T> ds = (p.array() * (dp.array().colwise() - dot.array())) * scale;
        dq.block(q0, h * dh, nq, dh).noalias() += ds * c.k.block(k0, h * dh, nk, dh);
        dk.block(k0, h * dh, nk, dh).noalias() += ds.transpose() * c.q.block(q0, h * dh, nq, dh);
      }
    }
    Mat<T> dxq = query.backward(xq, dq);
    Mat<T> dxkv = key.backward(xkv, dk);
    dxkv += value.backward(xkv, dv);
    return {std::move(dxq), std::move(dxkv)};
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    query.for_each(prefix + ".query", fn);
    key.for_each(prefix + ".key", fn);
    value.for_each(prefix + ".value", fn);
    out.for_each(prefix + ".out", fn);
  }
};

// --- Position-wise feed-forward ---------------------------------------------

template <typename T>
struct FeedForward {
  Linear<T> in, out;

  struct Cache {
    Mat<T> pre;     // before ReLU
    Mat<T> hidden;  // after ReLU
  };

  void init(int d, int width, Rng& rng) {
    in.init(d, width, rng);
    out.init(width, d, rng);
  }

  Mat<T> forward(const Mat<T>& x, Cache& c) const {
    c.pre = in.forward(x);
    c.hidden = c.pre.cwiseMax(T(0));
    return out.forward(c.hidden);
  }

  Mat<T> backward(const Mat<T>& x, const Cache& c, const Mat<T>& dy) {
    Mat<T> dh = out.backward(c.hidden, dy);
    dh = (c.pre.array() > T(0)).select(dh, T(0));
    return in.backward(x, dh);
  }

  template <typename F>
  void for_each(const std::string& prefix, F&& fn) {
    in.for_each(prefix + ".in", fn);
    out.for_each(prefix + ".out", fn);
  }
};

// --- Dropout ----------------------------------------------------------------

/// Inverted dropout. An empty mask means dropout is inactive.
template <typename T>
Mat<T> dropout_forward(const Mat<T>& x, double rate, Rng* rng, Mat<T>& mask) {
  if (rng == nullptr || rate <= 0.0) {
    mask.resize(0, 0);
    return x;
  }
  mask.resize(x.rows(), x.cols());
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng->uniform() < rate ? T(0) : keep;
  return x.cwiseProduct(mask);
}

template <typename T>
Mat<T> dropout_backward(const Mat<T>& dy, const Mat<T>& mask) {
  return mask.size() == 0 ? dy : Mat<T>(dy.cwiseProduct(mask));
}

// --- Form injection ---------------------------------------------------------

/// Cross-attention of the input embeddings W (m x d) against the form
/// embeddings F (k x d), plus a residual connection:
///   C = softmax(W F^T / sqrt(d)) F + W.
/// Adds no parameters. With a single form row every attention weight is 1,
/// so C_i = W_i + F.
template <typename T>
Mat<T> inject(const Mat<T>& w, const Mat<T>& f) {
  if (w.cols() != f.cols()) {
    throw Error("inject: width mismatch (" + std::to_string(w.cols()) + " vs " + std::to_string(f.cols()) + ")");
  }
  if (f.rows() < 1) throw Error("inject: empty form embedding");
  Mat<T> scores = (w * f.transpose()) / std::sqrt(static_cast<T>(w.cols()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const T mx = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - mx).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  Mat<T> c = scores * f;
  c += w;
  return c;
}

/// Backward of `inject` for a single form row: the softmax over one key is
/// constant, so dW = dC and dF = sum of the rows of dC.
template <typename T>
std::pair<Mat<T>, RowVec<T>> inject_backward_single(const Mat<T>& dc) {
  return {dc, dc.colwise().sum()};
}

}  // namespace mflag
