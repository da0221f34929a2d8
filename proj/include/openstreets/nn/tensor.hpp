#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace openstreets::nn {

/// Dense row-major matrix; node representations are stacked one vertex per row.
template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor and its accumulated gradient.
template <class Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  mutable Matrix<Scalar> grad;  // accumulated by BasicTape::backward

  Parameter() = default;
  Parameter(std::string n, Matrix<Scalar> v) : name(std::move(n)), value(std::move(v)) {}

  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
};

/// Glorot/Xavier uniform initialisation for a fan_out x fan_in weight.
template <class Scalar>
Matrix<Scalar> xavier_uniform(Eigen::Index fan_out, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix<Scalar> m(fan_out, fan_in);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

template <class Scalar>
bool all_finite(const Matrix<Scalar>& m) {
  return m.array().isFinite().all();
}

}  // namespace openstreets::nn
