#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "quill/errors.hpp"

namespace quill {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;

  Parameter() = default;
  Parameter(std::string n, Mat<S> v) : name(std::move(n)), value(std::move(v)) {
    grad = Mat<S>::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(); }
  Eigen::Index count() const { return value.size(); }
};

// Reverse-mode tape over dense Eigen matrices. Nodes are appended in
// evaluation order; backward() walks the tape in reverse and accumulates
// into Parameter::grad for every leaf reachable from the loss.
template <class S>
class Graph {
 public:
  struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  const Mat<S>& value(Var v) const { return node(v).value; }

  Var constant(Mat<S> m) { return push(std::move(m)); }

  Var leaf(Parameter<S>& p) {
    Var v = push(p.value);
    node(v).param = &p;
    return v;
  }

  // ---- arithmetic ----

  Var matmul(Var a, Var b) {
    check(value(a).cols() == value(b).rows(), "matmul: inner dimensions differ");
    Var out = push(value(a) * value(b));
    attach(out, [this, a, b, out] {
      const Mat<S>& g = grad(out);
      grad(a).noalias() += g * value(b).transpose();
      grad(b).noalias() += value(a).transpose() * g;
    });
    return out;
  }

  Var add(Var a, Var b) {
    check(same_shape(a, b), "add: shape mismatch");
    Var out = push(value(a) + value(b));
    attach(out, [this, a, b, out] {
      grad(a) += grad(out);
      grad(b) += grad(out);
    });
    return out;
  }

  // a: n x c, row: 1 x c broadcast over the rows of a.
  Var add_rowvec(Var a, Var row) {
    check(value(row).rows() == 1 && value(row).cols() == value(a).cols(),
          "add_rowvec: row must be 1 x cols(a)");
    Mat<S> v = value(a);
    v.rowwise() += value(row).row(0);
    Var out = push(std::move(v));
    attach(out, [this, a, row, out] {
      grad(a) += grad(out);
      grad(row).row(0) += grad(out).colwise().sum();
    });
    return out;
  }

  Var add_const(Var a, Mat<S> c) {
    check(value(a).rows() == c.rows() && value(a).cols() == c.cols(),
          "add_const: shape mismatch");
    Var out = push(value(a) + c);
    attach(out, [this, a, out] { grad(a) += grad(out); });
    return out;
  }

  // Elementwise product with a constant matrix (dropout masks).
  Var cwise_mul_const(Var a, Mat<S> mask) {
    check(value(a).rows() == mask.rows() && value(a).cols() == mask.cols(),
          "cwise_mul_const: shape mismatch");
    Var out = push(value(a).cwiseProduct(mask));
    attach(out, [this, a, out, m = std::move(mask)] {
      grad(a).array() += grad(out).array() * m.array();
    });
    return out;
  }

  Var scale(Var a, S s) {
    Var out = push(value(a) * s);
    attach(out, [this, a, out, s] { grad(a) += grad(out) * s; });
    return out;
  }

  Var transpose(Var a) {
    Var out = push(value(a).transpose());
    attach(out, [this, a, out] { grad(a) += grad(out).transpose(); });
    return out;
  }

  // ---- nonlinearities ----

  Var gelu(Var a) {
    const S inv_sqrt2 = S(0.7071067811865475244);
    Mat<S> y = value(a).unaryExpr([inv_sqrt2](S x) {
      return S(0.5) * x * (S(1) + S(std::erf(x * inv_sqrt2)));
    });
    Var out = push(std::move(y));
    attach(out, [this, a, out] {
      const S inv_sqrt2c = S(0.7071067811865475244);
      const S inv_sqrt2pi = S(0.3989422804014326779);
      Mat<S> deriv = value(a).unaryExpr([inv_sqrt2c, inv_sqrt2pi](S x) {
        const S cdf = S(0.5) * (S(1) + S(std::erf(x * inv_sqrt2c)));
        const S pdf = inv_sqrt2pi * std::exp(-x * x * S(0.5));
        return cdf + x * pdf;
      });
      grad(a).array() += grad(out).array() * deriv.array();
    });
    return out;
  }

  // Row-wise softmax with max subtraction.
  Var softmax_rows(Var a) {
    Mat<S> p = value(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const S m = p.row(r).maxCoeff();
      p.row(r) = (p.row(r).array() - m).exp();
      p.row(r) /= p.row(r).sum();
    }
    Var out = push(std::move(p));
    attach(out, [this, a, out] {
      const Mat<S>& p2 = value(out);
      const Mat<S>& g = grad(out);
      for (Eigen::Index r = 0; r < p2.rows(); ++r) {
        const S dot = g.row(r).dot(p2.row(r));
        grad(a).row(r).array() += (g.row(r).array() - dot) * p2.row(r).array();
      }
    });
    return out;
  }

  // Row-wise layer norm followed by an affine map: y = xhat .* gain + bias,
  // gain/bias 1 x d.
  Var layer_norm(Var x, Var gain, Var bias, S eps = S(1e-5)) {
    const Mat<S>& v = value(x);
    const Eigen::Index d = v.cols();
    check(value(gain).rows() == 1 && value(gain).cols() == d, "layer_norm: bad gain shape");
    check(value(bias).rows() == 1 && value(bias).cols() == d, "layer_norm: bad bias shape");
    Mat<S> xhat(v.rows(), d);
    Mat<S> inv_std(v.rows(), 1);
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      const S mean = v.row(r).mean();
      const S var = (v.row(r).array() - mean).square().sum() / S(d);
      const S is = S(1) / std::sqrt(var + eps);
      inv_std(r, 0) = is;
      xhat.row(r) = (v.row(r).array() - mean) * is;
    }
    Mat<S> y = xhat;
    y.array().rowwise() *= value(gain).row(0).array();
    y.rowwise() += value(bias).row(0);
    Var out = push(std::move(y));
    attach(out, [this, x, gain, bias, out, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)] {
      const Mat<S>& g = grad(out);
      const Eigen::Index d2 = g.cols();
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        grad(gain).row(0).array() += g.row(r).array() * xhat.row(r).array();
        grad(bias).row(0) += g.row(r);
        Eigen::Array<S, 1, Eigen::Dynamic> dxhat =
            g.row(r).array() * value(gain).row(0).array();
        const S mean_dxhat = dxhat.sum() / S(d2);
        const S mean_dxhat_xhat = (dxhat * xhat.row(r).array()).sum() / S(d2);
        grad(x).row(r).array() +=
            inv_std(r, 0) * (dxhat - mean_dxhat - xhat.row(r).array() * mean_dxhat_xhat);
      }
    });
    return out;
  }

  // ---- structure ----

  // out.row(i) = table.row(rows[i]); gradient scatter-adds back.
  Var gather_rows(Var table, std::vector<int> rows) {
    const Mat<S>& t = value(table);
    Mat<S> v(static_cast<Eigen::Index>(rows.size()), t.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      check(rows[i] >= 0 && rows[i] < t.rows(), "gather_rows: row index out of range");
      v.row(static_cast<Eigen::Index>(i)) = t.row(rows[i]);
    }
    Var out = push(std::move(v));
    attach(out, [this, table, out, rows = std::move(rows)] {
      const Mat<S>& g = grad(out);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        grad(table).row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
      }
    });
    return out;
  }

  Var slice_cols(Var a, int c0, int n) {
    check(c0 >= 0 && n > 0 && c0 + n <= value(a).cols(), "slice_cols: out of range");
    Var out = push(value(a).middleCols(c0, n));
    attach(out, [this, a, out, c0, n] { grad(a).middleCols(c0, n) += grad(out); });
    return out;
  }

  Var concat_cols(const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_cols: empty");
    Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (Var p : parts) {
      check(value(p).rows() == rows, "concat_cols: row mismatch");
      cols += value(p).cols();
    }
    Mat<S> v(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      v.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    Var out = push(std::move(v));
    attach(out, [this, out, parts] {
      Eigen::Index at2 = 0;
      for (Var p : parts) {
        grad(p) += grad(out).middleCols(at2, value(p).cols());
        at2 += value(p).cols();
      }
    });
    return out;
  }

  // 1 x c column-wise log-sum-exp (smooth maximum over rows).
  Var logsumexp_rows(Var a) {
    const Mat<S>& v = value(a);
    Mat<S> m(1, v.cols());
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      const S mx = v.col(c).maxCoeff();
      m(0, c) = mx + std::log((v.col(c).array() - mx).exp().sum());
    }
    Var out = push(std::move(m));
    attach(out, [this, a, out] {
      const Mat<S>& v2 = value(a);
      const Mat<S>& o = value(out);
      for (Eigen::Index c = 0; c < v2.cols(); ++c) {
        grad(a).col(c).array() +=
            grad(out)(0, c) * (v2.col(c).array() - o(0, c)).exp();
      }
    });
    return out;
  }

  // 1 x c column maxima; gradient routes to the first maximal row.
  Var max_rows(Var a) {
    const Mat<S>& v = value(a);
    Mat<S> m(1, v.cols());
    std::vector<int> arg(static_cast<std::size_t>(v.cols()));
    for (Eigen::Index c = 0; c < v.cols(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < v.rows(); ++r) {
        if (v(r, c) > v(best, c)) best = r;
      }
      arg[static_cast<std::size_t>(c)] = static_cast<int>(best);
      m(0, c) = v(best, c);
    }
    Var out = push(std::move(m));
    attach(out, [this, a, out, arg = std::move(arg)] {
      for (Eigen::Index c = 0; c < grad(out).cols(); ++c) {
        grad(a)(arg[static_cast<std::size_t>(c)], c) += grad(out)(0, c);
      }
    });
    return out;
  }

  // 1 x c column means.
  Var mean_rows(Var a) {
    const Mat<S>& v = value(a);
    Mat<S> m = v.colwise().mean();
    Var out = push(std::move(m));
    attach(out, [this, a, out] {
      const S inv_n = S(1) / S(value(a).rows());
      grad(a).rowwise() += (grad(out).row(0) * inv_n).eval();
    });
    return out;
  }

  // Fused softmax cross-entropy: sum over rows r and targets t in
  // targets[r] of -log softmax(logits.row(r))[t]. Rows with an empty target
  // list contribute nothing. Returns a 1x1 scalar.
  Var nll(Var logits, std::vector<std::vector<int>> targets) {
    const Mat<S>& l = value(logits);
    check(static_cast<Eigen::Index>(targets.size()) == l.rows(),
          "nll: one target list per row required");
    S total = S(0);
    for (Eigen::Index r = 0; r < l.rows(); ++r) {
      const auto& ts = targets[static_cast<std::size_t>(r)];
      if (ts.empty()) continue;
      const S m = l.row(r).maxCoeff();
      const S logz = m + std::log((l.row(r).array() - m).exp().sum());
      for (int t : ts) {
        check(t >= 0 && t < l.cols(), "nll: target out of range");
        total += logz - l(r, t);
      }
    }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    Var out = push(std::move(v));
    attach(out, [this, logits, out, targets = std::move(targets)] {
      const S g = grad(out)(0, 0);
      const Mat<S>& l2 = value(logits);
      for (Eigen::Index r = 0; r < l2.rows(); ++r) {
        const auto& ts = targets[static_cast<std::size_t>(r)];
        if (ts.empty()) continue;
        const S m = l2.row(r).maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> p = (l2.row(r).array() - m).exp();
        p /= p.sum();
        grad(logits).row(r).array() += g * S(ts.size()) * p;
        for (int t : ts) {
          grad(logits)(r, t) -= g;
        }
      }
    });
    return out;
  }

  // ---- backward ----

  void backward(Var loss) {
    check(value(loss).rows() == 1 && value(loss).cols() == 1,
          "backward requires a scalar (1x1) loss");
    for (auto& n : nodes_) {
      n.grad_ready = false;
    }
    grad(loss).setConstant(S(1));
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.grad_ready) continue;
      if (n.backprop) n.backprop();
      if (n.param) n.param->grad += n.grad;
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    bool grad_ready = false;
    Parameter<S>* param = nullptr;
    std::function<void()> backprop;
  };

  std::vector<Node> nodes_;

  Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }

  Mat<S>& grad(Var v) {
    Node& n = node(v);
    if (!n.grad_ready) {
      n.grad = Mat<S>::Zero(n.value.rows(), n.value.cols());
      n.grad_ready = true;
    }
    return n.grad;
  }

  Var push(Mat<S> v) {
    nodes_.push_back(Node{std::move(v), {}, false, nullptr, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void attach(Var v, std::function<void()> backprop) {
    node(v).backprop = std::move(backprop);
  }

  static void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  bool same_shape(Var a, Var b) const {
    return value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols();
  }
};

}  // namespace quill
