#pragma once

#include <Eigen/SparseCore>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "openstreets/error.hpp"
#include "openstreets/nn/tensor.hpp"

namespace openstreets::nn {

enum class Activation { Identity, Relu, Sigmoid, Tanh };

/// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] inside the loss.
inline constexpr double kProbFloor = 1e-7;

/// Reverse-mode tape over a fixed vocabulary of matrix ops. Record a forward pass,
/// call backward() on a 1x1 result, then read input gradients or the gradients
/// accumulated into each Parameter. A tape is single-use and single-threaded.
template <class Scalar>
class BasicTape {
 public:
  using Mat = Matrix<Scalar>;
  using Sparse = Eigen::SparseMatrix<Scalar>;

  struct Var {
    std::size_t id = 0;
  };

  /// With `record_grads` false, parameters enter as constants and backward() is a no-op.
  explicit BasicTape(bool record_grads = true) : record_grads_(record_grads) {}

  /// Leaf without gradient.
  Var constant(Mat value) { return push(std::move(value), false, {}); }
  /// Leaf whose gradient can be read back with grad().
  Var input(Mat value) { return push(std::move(value), true, {}); }
  /// Leaf bound to a parameter; backward() adds into p.grad.
  Var param(const Parameter<Scalar>& p) {
    Var v = push(p.value, record_grads_, {});
    if (record_grads_) nodes_[v.id].param = &p;
    return v;
  }

  const Mat& value(Var v) const { return nodes_[v.id].value; }
  /// Zero matrix when nothing flowed into v.
  Mat grad(Var v) const {
    const Node& n = nodes_[v.id];
    return n.grad.size() ? n.grad : Mat::Zero(n.value.rows(), n.value.cols());
  }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var loss) {
    if (value(loss).size() != 1) throw Error(ErrorCode::ShapeMismatch, "backward needs a scalar loss");
    if (!nodes_[loss.id].requires_grad) return;
    nodes_[loss.id].grad = Mat::Ones(1, 1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.grad.size()) continue;
      if (n.back) n.back(*this, i);
      if (n.param) {
        if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
          n.param->grad = n.grad;
        } else {
          n.param->grad += n.grad;
        }
      }
    }
  }

  // Linear algebra --------------------------------------------------------------

  /// A * B.
  Var matmul(Var a, Var b) {
    check(cols(a) == rows(b), "matmul");
    return op(value(a) * value(b), {a, b}, [a, b](BasicTape& t, std::size_t s) {
      t.accum(a, t.g(s) * t.value(b).transpose());
      t.accum(b, t.value(a).transpose() * t.g(s));
    });
  }

  /// X * Theta^T: each row of X mapped by Theta (out x in).
  Var linear(Var x, Var theta) {
    check(cols(x) == cols(theta), "linear");
    return op(value(x) * value(theta).transpose(), {x, theta}, [x, theta](BasicTape& t, std::size_t s) {
      t.accum(x, t.g(s) * t.value(theta));
      t.accum(theta, t.g(s).transpose() * t.value(x));
    });
  }

  /// A * X with a fixed sparse operator (kept by reference; must outlive the tape).
  Var propagate(const Sparse& adj, Var x) {
    check(adj.cols() == rows(x), "propagate");
    const Sparse* a = &adj;
    return op(Mat(adj * value(x)), {x}, [a, x](BasicTape& t, std::size_t s) {
      t.accum(x, Mat(a->transpose() * t.g(s)));
    });
  }

  // Elementwise -----------------------------------------------------------------

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    return op(value(a) + value(b), {a, b}, [a, b](BasicTape& t, std::size_t s) {
      t.accum(a, t.g(s));
      t.accum(b, t.g(s));
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    return op(value(a) - value(b), {a, b}, [a, b](BasicTape& t, std::size_t s) {
      t.accum(a, t.g(s));
      t.accum(b, -t.g(s));
    });
  }

  Var hadamard(Var a, Var b) {
    check_same(a, b, "hadamard");
    return op(value(a).cwiseProduct(value(b)), {a, b}, [a, b](BasicTape& t, std::size_t s) {
      t.accum(a, t.g(s).cwiseProduct(t.value(b)));
      t.accum(b, t.g(s).cwiseProduct(t.value(a)));
    });
  }

  Var scale(Var a, Scalar c) {
    return op(value(a) * c, {a}, [a, c](BasicTape& t, std::size_t s) { t.accum(a, t.g(s) * c); });
  }

  /// 1 - a.
  Var one_minus(Var a) {
    return op((Scalar(1) - value(a).array()).matrix(), {a},
              [a](BasicTape& t, std::size_t s) { t.accum(a, -t.g(s)); });
  }

  Var square(Var a) {
    return op(value(a).array().square().matrix(), {a}, [a](BasicTape& t, std::size_t s) {
      t.accum(a, (Scalar(2) * t.g(s).array() * t.value(a).array()).matrix());
    });
  }

  /// Adds the 1 x d row b to every row of x.
  Var add_row(Var x, Var b) {
    check(rows(b) == 1 && cols(b) == cols(x), "add_row");
    Mat out = value(x);
    out.rowwise() += value(b).row(0);
    return op(std::move(out), {x, b}, [x, b](BasicTape& t, std::size_t s) {
      t.accum(x, t.g(s));
      t.accum(b, Mat(t.g(s).colwise().sum()));
    });
  }

  Var sigmoid(Var a) {
    Mat y = (Scalar(1) / (Scalar(1) + (-value(a).array()).exp())).matrix();
    return op(std::move(y), {a}, [a](BasicTape& t, std::size_t s) {
      const auto& y = t.nodes_[s].value.array();
      t.accum(a, (t.g(s).array() * y * (Scalar(1) - y)).matrix());
    });
  }

  Var tanh(Var a) {
    return op(value(a).array().tanh().matrix(), {a}, [a](BasicTape& t, std::size_t s) {
      const auto& y = t.nodes_[s].value.array();
      t.accum(a, (t.g(s).array() * (Scalar(1) - y.square())).matrix());
    });
  }

  Var relu(Var a) {
    return op(value(a).cwiseMax(Scalar(0)), {a}, [a](BasicTape& t, std::size_t s) {
      t.accum(a, (t.g(s).array() * (t.value(a).array() > Scalar(0)).template cast<Scalar>()).matrix());
    });
  }

  Var activate(Var a, Activation act) {
    switch (act) {
      case Activation::Relu: return relu(a);
      case Activation::Sigmoid: return sigmoid(a);
      case Activation::Tanh: return tanh(a);
      case Activation::Identity: break;
    }
    return a;
  }

  // Shape -----------------------------------------------------------------------

  Var concat_cols(Var a, Var b) {
    check(rows(a) == rows(b), "concat_cols");
    Mat out(rows(a), cols(a) + cols(b));
    out << value(a), value(b);
    const Eigen::Index split = cols(a);
    return op(std::move(out), {a, b}, [a, b, split](BasicTape& t, std::size_t s) {
      const Mat& gs = t.g(s);
      t.accum(a, Mat(gs.leftCols(split)));
      t.accum(b, Mat(gs.rightCols(gs.cols() - split)));
    });
  }

  /// Rows [first, first + count).
  Var slice_rows(Var a, Eigen::Index first, Eigen::Index count) {
    check(first >= 0 && count >= 0 && first + count <= rows(a), "slice_rows");
    return op(Mat(value(a).middleRows(first, count)), {a}, [a, first, count](BasicTape& t, std::size_t s) {
      Mat ga = Mat::Zero(t.value(a).rows(), t.value(a).cols());
      ga.middleRows(first, count) = t.g(s);
      t.accum(a, ga);
    });
  }

  /// Entries at row-major flat positions, as a column.
  Var gather(Var a, std::vector<Eigen::Index> flat) {
    const Mat& v = value(a);
    Mat out(static_cast<Eigen::Index>(flat.size()), 1);
    for (std::size_t i = 0; i < flat.size(); ++i) {
      check(flat[i] >= 0 && flat[i] < v.size(), "gather");
      out(static_cast<Eigen::Index>(i), 0) = v.data()[flat[i]];
    }
    return op(std::move(out), {a}, [a, flat = std::move(flat)](BasicTape& t, std::size_t s) {
      const Mat& va = t.value(a);
      Mat ga = Mat::Zero(va.rows(), va.cols());
      const Mat& gs = t.g(s);
      for (std::size_t i = 0; i < flat.size(); ++i) ga.data()[flat[i]] += gs(static_cast<Eigen::Index>(i), 0);
      t.accum(a, ga);
    });
  }

  // Reductions and losses -------------------------------------------------------

  Var sum(Var a) {
    Mat out(1, 1);
    out(0, 0) = value(a).sum();
    return op(std::move(out), {a}, [a](BasicTape& t, std::size_t s) {
      const Mat& va = t.value(a);
      t.accum(a, Mat::Constant(va.rows(), va.cols(), t.g(s)(0, 0)));
    });
  }

  Var mean(Var a) { return scale(sum(a), Scalar(1) / static_cast<Scalar>(value(a).size())); }

  /// Mean over entries of -[w*y*ln p + (1-y)*ln(1-p)] on p clamped to
  /// [kProbFloor, 1-kProbFloor]; zero gradient where the clamp is active.
  Var weighted_bce(Var probs, const Mat& labels, Scalar pos_weight) {
    const Mat& p = value(probs);
    if (p.rows() != labels.rows() || p.cols() != labels.cols()) {
      throw Error(ErrorCode::LengthMismatch, "weighted_bce: probabilities and labels differ in length");
    }
    const Scalar lo(kProbFloor), hi(1 - kProbFloor);
    const auto n = static_cast<Scalar>(p.size());
    Scalar total(0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const Scalar q = std::clamp(p.data()[i], lo, hi);
      const Scalar y = labels.data()[i];
      total -= pos_weight * y * std::log(q) + (Scalar(1) - y) * std::log(Scalar(1) - q);
    }
    Mat out(1, 1);
    out(0, 0) = total / n;
    return op(std::move(out), {probs}, [probs, labels, pos_weight, lo, hi, n](BasicTape& t, std::size_t s) {
      const Mat& p = t.value(probs);
      const Scalar up = t.g(s)(0, 0) / n;
      Mat gp(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const Scalar q = p.data()[i];
        const Scalar y = labels.data()[i];
        gp.data()[i] = (q < lo || q > hi) ? Scalar(0)
                                          : up * (-pos_weight * y / q + (Scalar(1) - y) / (Scalar(1) - q));
      }
      t.accum(probs, gp);
    });
  }

 private:
  using Back = std::function<void(BasicTape&, std::size_t)>;

  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Back back;
    const Parameter<Scalar>* param = nullptr;
  };

  Var push(Mat value, bool requires_grad, Back back) {
    if (!all_finite(value)) throw Error(ErrorCode::Diverged, "non-finite value in forward pass");
    nodes_.push_back(Node{std::move(value), Mat(), requires_grad, std::move(back), nullptr});
    return {nodes_.size() - 1};
  }

  Var op(Mat value, std::initializer_list<Var> parents, Back back) {
    const bool rg = std::any_of(parents.begin(), parents.end(),
                                [this](Var p) { return nodes_[p.id].requires_grad; });
    return push(std::move(value), rg, rg ? std::move(back) : Back());
  }

  const Mat& g(std::size_t id) const { return nodes_[id].grad; }

  template <class Expr>
  void accum(Var v, const Expr& expr) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (!n.grad.size()) {
      n.grad = expr;
    } else {
      n.grad += expr;
    }
  }

  Eigen::Index rows(Var v) const { return value(v).rows(); }
  Eigen::Index cols(Var v) const { return value(v).cols(); }

  static void check(bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::DimensionMismatch, std::string(what) + ": incompatible shapes");
  }
  void check_same(Var a, Var b, const char* what) const {
    check(rows(a) == rows(b) && cols(a) == cols(b), what);
  }

  std::vector<Node> nodes_;
  bool record_grads_ = true;
};

using Tape = BasicTape<double>;

}  // namespace openstreets::nn
