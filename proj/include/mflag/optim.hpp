#pragma once

#include <cmath>
#include <vector>

#include "mflag/model.hpp"

namespace mflag {

struct AdamOptions {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam without weight decay over every tensor of a Seq2Seq.
template <typename T>
class Adam {
 public:
  Adam(Seq2Seq<T>& model, AdamOptions opt) : opt_(opt) {
    model.for_each_param([&](const std::string&, Param<T>& p) {
      m_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(Mat<T>::Zero(p.value.rows(), p.value.cols()));
    });
  }

  /// Applies one update using grad * grad_scale, then zeroes the gradients.
  void step(Seq2Seq<T>& model, double grad_scale) {
    ++t_;
    const T b1 = static_cast<T>(opt_.beta1), b2 = static_cast<T>(opt_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(opt_.beta1, t_));
    const T c2 = static_cast<T>(1.0 - std::pow(opt_.beta2, t_));
    const T lr = static_cast<T>(opt_.learning_rate), eps = static_cast<T>(opt_.epsilon);
    const T scale = static_cast<T>(grad_scale);
    std::size_t i = 0;
    model.for_each_param([&](const std::string&, Param<T>& p) {
      auto g = (p.grad.array() * scale);
      m_[i].array() = b1 * m_[i].array() + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g.square();
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
      p.grad.setZero();
      ++i;
    });
  }

  long steps() const { return t_; }

 private:
  AdamOptions opt_;
  std::vector<Mat<T>> m_, v_;
  long t_ = 0;
};

}  // namespace mflag
