#include <gtest/gtest.h>

#include "mflag/layers.hpp"

using namespace mflag;

namespace {

Mat<double> random_mat(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * scale;
  return m;
}

// softmax(W F^T / sqrt(d)) F + W, written out element by element
Mat<double> inject_oracle(const Mat<double>& w, const Mat<double>& f) {
  Mat<double> out = w;
  const double s = std::sqrt(static_cast<double>(w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    std::vector<double> a(static_cast<std::size_t>(f.rows()));
    double mx = -1e300;
    for (Eigen::Index k = 0; k < f.rows(); ++k) {
      double dot = 0;
      for (Eigen::Index j = 0; j < w.cols(); ++j) dot += w(i, j) * f(k, j);
      a[static_cast<std::size_t>(k)] = dot / s;
      mx = std::max(mx, a[static_cast<std::size_t>(k)]);
    }
    double z = 0;
    for (auto& x : a) z += (x = std::exp(x - mx));
    for (Eigen::Index k = 0; k < f.rows(); ++k) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) out(i, j) += a[static_cast<std::size_t>(k)] / z * f(k, j);
    }
  }
  return out;
}

}  // namespace

TEST(Inject, SingleFormReducesToBroadcastAdd) {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = 1 + static_cast<Eigen::Index>(rng.below(32));
    const auto d = 1 + static_cast<Eigen::Index>(rng.below(128));
    const auto w = random_mat(rng, m, d, 3.0);
    const auto f = random_mat(rng, 1, d, 3.0);
    const Mat<double> c = inject(w, f);
    const Mat<double> expect = w.rowwise() + f.row(0);
    EXPECT_LT((c - expect).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Inject, MatchesOracleWithSeveralForms) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = random_mat(rng, 7, 12);
    const auto f = random_mat(rng, 3, 12);
    EXPECT_LT((inject(w, f) - inject_oracle(w, f)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Inject, RejectsBadShapes) {
  EXPECT_THROW(inject<double>(Mat<double>::Zero(2, 4), Mat<double>::Zero(1, 3)), Error);
  EXPECT_THROW(inject<double>(Mat<double>::Zero(2, 4), Mat<double>::Zero(0, 4)), Error);
}

TEST(Inject, SingleFormBackward) {
  Rng rng(9);
  const auto dc = random_mat(rng, 5, 6);
  const auto [dw, df] = inject_backward_single(dc);
  EXPECT_EQ(dw, dc);
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_NEAR(df(j), dc.col(j).sum(), 1e-12);
}

TEST(Segments, Offsets) {
  const std::vector<int> lens{3, 1, 4};
  const auto s = Segments::from_lengths(lens);
  EXPECT_EQ(s.count(), 3u);
  EXPECT_EQ(s.begin(2), 4);
  EXPECT_EQ(s.length(1), 1);
  EXPECT_EQ(s.total(), 8);
}

TEST(Linear, BackwardMatchesFiniteDifference) {
  Rng rng(1);
  Linear<double> lin;
  lin.init(4, 3, rng);
  const auto x = random_mat(rng, 5, 4);
  const auto dy = random_mat(rng, 5, 3);
  lin.weight.grad.setZero();
  lin.bias.grad.setZero();
  const Mat<double> dx = lin.backward(x, dy);
  // loss = sum(dy .* forward(x)) is linear, so differences are exact up to rounding
  auto loss = [&](const Mat<double>& xx) { return (lin.forward(xx).cwiseProduct(dy)).sum(); };
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Mat<double> xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    EXPECT_NEAR(dx.data()[i], (loss(xp) - loss(xm)) / (2 * h), 1e-6);
  }
  for (Eigen::Index i = 0; i < lin.weight.value.size(); ++i) {
    const double orig = lin.weight.value.data()[i];
    lin.weight.value.data()[i] = orig + h;
    const double lp = loss(x);
    lin.weight.value.data()[i] = orig - h;
    const double lm = loss(x);
    lin.weight.value.data()[i] = orig;
    EXPECT_NEAR(lin.weight.grad.data()[i], (lp - lm) / (2 * h), 1e-6);
  }
}

TEST(LayerNorm, NormalizesRows) {
  Rng rng(3);
  LayerNorm<double> ln;
  ln.init(8);
  typename LayerNorm<double>::Cache c;
  const Mat<double> y = ln.forward(random_mat(rng, 4, 8, 5.0), c);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(y.row(i).mean(), 0.0, 1e-9);
    EXPECT_NEAR((y.row(i).array() - y.row(i).mean()).square().mean(), 1.0, 1e-3);
  }
}

TEST(Dropout, InactiveWithoutRngAndScaledWhenActive) {
  Rng rng(4);
  const auto x = random_mat(rng, 50, 40);
  Mat<double> mask;
  EXPECT_EQ(dropout_forward(x, 0.5, nullptr, mask), x);
  EXPECT_EQ(mask.size(), 0);
  const Mat<double> ones = Mat<double>::Ones(50, 40);
  const Mat<double> y = dropout_forward(ones, 0.25, &rng, mask);
  const double kept = (mask.array() > 0).cast<double>().mean();
  EXPECT_NEAR(kept, 0.75, 0.03);
  EXPECT_NEAR(y.mean(), 1.0, 0.05);
  EXPECT_EQ(dropout_backward(ones, mask), mask);
}
