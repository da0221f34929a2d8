#pragma once

#include <random>
#include <string>
#include <vector>

#include "openstreets/nn/tape.hpp"
#include "openstreets/roadnet.hpp"

namespace openstreets::nn {

template <class Scalar>
Matrix<Scalar> activate(const Matrix<Scalar>& x, Activation act) {
  switch (act) {
    case Activation::Relu: return x.cwiseMax(Scalar(0));
    case Activation::Sigmoid: return (Scalar(1) / (Scalar(1) + (-x.array()).exp())).matrix();
    case Activation::Tanh: return x.array().tanh().matrix();
    case Activation::Identity: break;
  }
  return x;
}

/// x'_v = act(Theta * sum_u w_uv x_u): neighbours only, no bias.
template <class Scalar>
struct BasicGraphConvLayer {
  Parameter<Scalar> theta;  // out x in
  Activation activation = Activation::Identity;

  BasicGraphConvLayer() = default;
  BasicGraphConvLayer(std::string name, Matrix<Scalar> t, Activation act)
      : theta(std::move(name), std::move(t)), activation(act) {}

  Eigen::Index in_dim() const { return theta.value.cols(); }
  Eigen::Index out_dim() const { return theta.value.rows(); }

  typename BasicTape<Scalar>::Var forward(BasicTape<Scalar>& tape, typename BasicTape<Scalar>::Var x,
                                          const Eigen::SparseMatrix<Scalar>& adj) const {
    return tape.activate(tape.linear(tape.propagate(adj, x), tape.param(theta)), activation);
  }
};

using GraphConvLayer = BasicGraphConvLayer<double>;

/// Tape-free evaluation of one graph convolution: act(A X Theta^T).
template <class Scalar>
Matrix<Scalar> gcn_forward(const BasicGraphConvLayer<Scalar>& layer, const Matrix<Scalar>& x,
                           const Eigen::SparseMatrix<Scalar>& adj) {
  if (x.rows() != adj.rows() || x.cols() != layer.in_dim()) {
    throw Error(ErrorCode::DimensionMismatch, "gcn_forward: feature matrix does not match graph or layer");
  }
  return activate<Scalar>(Matrix<Scalar>(adj * x) * layer.theta.value.transpose(), layer.activation);
}

inline Matrix<double> gcn_forward(const GraphConvLayer& layer, const Matrix<double>& x, const DualGraph& g) {
  return gcn_forward<double>(layer, x, g.normalized_adjacency());
}

/// Per-row affine map act(X W^T + b).
template <class Scalar>
struct BasicDense {
  Parameter<Scalar> weight;  // out x in
  Parameter<Scalar> bias;    // 1 x out
  Activation activation = Activation::Identity;

  BasicDense() = default;
  BasicDense(const std::string& name, Eigen::Index in, Eigen::Index out, Activation act, std::mt19937_64& rng)
      : weight(name + ".weight", xavier_uniform<Scalar>(out, in, rng)),
        bias(name + ".bias", Matrix<Scalar>::Zero(1, out)),
        activation(act) {}

  typename BasicTape<Scalar>::Var forward(BasicTape<Scalar>& tape, typename BasicTape<Scalar>::Var x) const {
    return tape.activate(tape.add_row(tape.linear(x, tape.param(weight)), tape.param(bias)), activation);
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&weight, &bias}; }
};

using Dense = BasicDense<double>;

/// Gated recurrent graph cell:
///   z = sigmoid(conv_z(X) + conv_z'(H) + b_z)
///   r = sigmoid(conv_r(X) + conv_r'(H) + b_r)
///   c = tanh(conv_c(X) + conv_c'(r * H) + b_c)
///   H' = z * H + (1 - z) * c
template <class Scalar>
struct BasicGatedRecurrentGraphCell {
  Parameter<Scalar> wz, uz, wr, ur, wc, uc;  // graph-conv thetas
  Parameter<Scalar> bz, br, bc;              // 1 x hidden

  BasicGatedRecurrentGraphCell() = default;
  BasicGatedRecurrentGraphCell(const std::string& name, Eigen::Index in, Eigen::Index hidden, std::mt19937_64& rng)
      : wz(name + ".wz", xavier_uniform<Scalar>(hidden, in, rng)),
        uz(name + ".uz", xavier_uniform<Scalar>(hidden, hidden, rng)),
        wr(name + ".wr", xavier_uniform<Scalar>(hidden, in, rng)),
        ur(name + ".ur", xavier_uniform<Scalar>(hidden, hidden, rng)),
        wc(name + ".wc", xavier_uniform<Scalar>(hidden, in, rng)),
        uc(name + ".uc", xavier_uniform<Scalar>(hidden, hidden, rng)),
        bz(name + ".bz", Matrix<Scalar>::Zero(1, hidden)),
        br(name + ".br", Matrix<Scalar>::Zero(1, hidden)),
        bc(name + ".bc", Matrix<Scalar>::Zero(1, hidden)) {}

  Eigen::Index in_dim() const { return wz.value.cols(); }
  Eigen::Index hidden_dim() const { return wz.value.rows(); }

  typename BasicTape<Scalar>::Var step(BasicTape<Scalar>& t, typename BasicTape<Scalar>::Var x,
                                       typename BasicTape<Scalar>::Var h, const Eigen::SparseMatrix<Scalar>& adj) const {
    if (t.value(x).cols() != in_dim() || t.value(h).cols() != hidden_dim() || t.value(x).rows() != t.value(h).rows()) {
      throw Error(ErrorCode::DimensionMismatch, "rgnn_step: input or hidden state has the wrong shape");
    }
    auto ax = t.propagate(adj, x);
    auto ah = t.propagate(adj, h);
    auto gate = [&](const Parameter<Scalar>& w, const Parameter<Scalar>& u, const Parameter<Scalar>& b) {
      return t.sigmoid(t.add_row(t.add(t.linear(ax, t.param(w)), t.linear(ah, t.param(u))), t.param(b)));
    };
    auto z = gate(wz, uz, bz);
    auto r = gate(wr, ur, br);
    auto arh = t.propagate(adj, t.hadamard(r, h));
    auto c = t.tanh(t.add_row(t.add(t.linear(ax, t.param(wc)), t.linear(arh, t.param(uc))), t.param(bc)));
    return t.add(t.hadamard(z, h), t.hadamard(t.one_minus(z), c));
  }

  std::vector<Parameter<Scalar>*> parameters() { return {&wz, &uz, &wr, &ur, &wc, &uc, &bz, &br, &bc}; }
};

using GatedRecurrentGraphCell = BasicGatedRecurrentGraphCell<double>;

/// Tape-free single step, for callers that only need H_t.
template <class Scalar>
Matrix<Scalar> rgnn_step(const BasicGatedRecurrentGraphCell<Scalar>& cell, const Matrix<Scalar>& x,
                         const Matrix<Scalar>& h_prev, const Eigen::SparseMatrix<Scalar>& adj) {
  BasicTape<Scalar> tape(false);
  auto h = cell.step(tape, tape.constant(x), tape.constant(h_prev), adj);
  return tape.value(h);
}

/// Weighted binary cross entropy on plain vectors (see BasicTape::weighted_bce).
template <class Scalar>
Scalar weighted_bce(const Matrix<Scalar>& probs, const Matrix<Scalar>& labels, Scalar pos_weight) {
  BasicTape<Scalar> tape;
  return tape.value(tape.weighted_bce(tape.constant(probs), labels, pos_weight))(0, 0);
}

}  // namespace openstreets::nn
