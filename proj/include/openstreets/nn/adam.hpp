#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "openstreets/error.hpp"
#include "openstreets/nn/tensor.hpp"

namespace openstreets::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moments are created lazily on the first step and
/// must keep matching the parameter shapes afterwards.
template <class Scalar>
class BasicAdam {
 public:
  explicit BasicAdam(AdamConfig cfg = {}) : cfg_(cfg) {}

  void step(std::span<Parameter<Scalar>* const> params) {
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (m_.size() != params.size()) throw Error(ErrorCode::ShapeMismatch, "adam: parameter count changed");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = *params[i];
      if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() || m_[i].rows() != p.value.rows() ||
          m_[i].cols() != p.value.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "adam: gradient shape differs from parameter '" + p.name + "'");
      }
    }
    ++t_;
    const Scalar b1(cfg_.beta1), b2(cfg_.beta2);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = *params[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * p.grad;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= Scalar(cfg_.learning_rate) * (m_[i].array() / c1) /
                         ((v_[i].array() / c2).sqrt() + Scalar(cfg_.epsilon));
    }
  }

  long steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<Matrix<Scalar>> m_, v_;
};

using Adam = BasicAdam<double>;

template <class Scalar>
void zero_grads(std::span<Parameter<Scalar>* const> params) {
  for (auto* p : params) p->zero_grad();
}

}  // namespace openstreets::nn
