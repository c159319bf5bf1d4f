// Two-component PCA of encoder token states for a pair of sentences.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mflag/checkpoint.hpp"

namespace mflag {

struct PcaResult {
  Eigen::MatrixXd components;           // k x d, orthonormal rows
  Eigen::VectorXd explained_variance;   // k, non-increasing
  Eigen::MatrixXd projected;            // n x k
  Eigen::RowVectorXd mean;
};

/// PCA by eigendecomposition of the centered sample covariance. Each
/// component's first nonzero loading is made positive.
inline PcaResult pca(const Eigen::MatrixXd& x, int k) {
  if (x.rows() < 2) throw Error("pca: need at least two rows");
  if (k < 1 || k > x.cols()) throw Error("pca: bad component count");
  PcaResult r;
  r.mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - r.mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("pca: eigendecomposition failed");
  const auto d = x.cols();
  r.components.resize(k, d);
  r.explained_variance.resize(k);
  for (int c = 0; c < k; ++c) {
    // eigenvalues come in increasing order
    Eigen::RowVectorXd v = eig.eigenvectors().col(d - 1 - c).transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(v(j)) > 1e-12) {
        if (v(j) < 0) v = -v;
        break;
      }
    }
    r.components.row(c) = v;
    r.explained_variance(c) = std::max(0.0, eig.eigenvalues()(d - 1 - c));
  }
  r.projected = centered * r.components.transpose();
  return r;
}

struct ProbeRow {
  std::string token;
  double x = 0.0;
  double y = 0.0;
  int sentence_id = 0;
};

struct ProbeResult {
  std::vector<ProbeRow> rows;
  PcaResult pca;
};

/// Encodes both serialized sentences (with target-form injection when the
/// checkpoint uses it), stacks their token states and projects them onto two
/// principal components. Sentence A is rewritten into `target_form`;
/// sentence B is encoded toward its own form.
template <typename T>
ProbeResult pca_probe(const Checkpoint<T>& ck, const TaggedText& sentence_a, Form target_form,
                      const TaggedText& sentence_b) {
  const auto ids_a = ck.vocab.encode(sentence_a);
  const auto ids_b = ck.vocab.encode(sentence_b);
  if (ids_a.size() + ids_b.size() < 3) throw Error("pca_probe: fewer than 3 tokens");
  const bool inj = ck.inject_enabled();
  const Mat<T> a = ck.model.encode(ids_a, inj ? std::optional<Form>(target_form) : std::nullopt);
  const Mat<T> b = ck.model.encode(ids_b, inj ? std::optional<Form>(sentence_b.form) : std::nullopt);
  Eigen::MatrixXd stacked(a.rows() + b.rows(), a.cols());
  stacked.topRows(a.rows()) = a.template cast<double>();
  stacked.bottomRows(b.rows()) = b.template cast<double>();
  ProbeResult out;
  out.pca = pca(stacked, 2);
  const auto toks_a = sentence_a.serialize();
  const auto toks_b = sentence_b.serialize();
  for (Eigen::Index i = 0; i < stacked.rows(); ++i) {
    const bool first = i < a.rows();
    const auto& tok = first ? toks_a[static_cast<std::size_t>(i)] : toks_b[static_cast<std::size_t>(i - a.rows())];
    out.rows.push_back({tok, out.pca.projected(i, 0), out.pca.projected(i, 1), first ? 0 : 1});
  }
  return out;
}

}  // namespace mflag
