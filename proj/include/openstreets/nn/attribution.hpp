#pragma once

#include <functional>
#include <utility>

#include "openstreets/error.hpp"
#include "openstreets/nn/tensor.hpp"

namespace openstreets::nn {

/// Returns F(x) and dF/dx for a scalar-valued model.
template <class Scalar>
using ValueAndGradient = std::function<std::pair<Scalar, Matrix<Scalar>>(const Matrix<Scalar>&)>;

/// (X - X0) times the average gradient along the straight path X0 -> X, sampled at
/// the midpoints of `steps` equal intervals.
template <class Scalar>
Matrix<Scalar> integrated_gradients(const ValueAndGradient<Scalar>& f, const Matrix<Scalar>& x,
                                    const Matrix<Scalar>& baseline, int steps) {
  if (x.rows() != baseline.rows() || x.cols() != baseline.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "integrated_gradients: input and baseline differ in shape");
  }
  if (steps < 16) throw Error(ErrorCode::BadValue, "integrated_gradients needs at least 16 steps");
  const Matrix<Scalar> delta = x - baseline;
  Matrix<Scalar> total = Matrix<Scalar>::Zero(x.rows(), x.cols());
  if (delta.isZero(Scalar(0))) return total;
  for (int k = 0; k < steps; ++k) {
    const Scalar alpha = (static_cast<Scalar>(k) + Scalar(0.5)) / static_cast<Scalar>(steps);
    auto [value, grad] = f(baseline + alpha * delta);
    (void)value;
    total += grad;
  }
  return delta.cwiseProduct(total) / static_cast<Scalar>(steps);
}

}  // namespace openstreets::nn
