#ifndef SEPKIT_AUTODIFF_HPP
#define SEPKIT_AUTODIFF_HPP

// Tape-based reverse-mode differentiation over dense Eigen matrices.
//
// A Graph owns every node created while evaluating one objective. Nodes are
// appended in evaluation order, so walking the tape backwards is a valid
// topological order. Values are checked for NaN/Inf as they are produced.

#include "sepkit/common.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace sepkit::nn {

template <typename Scalar>
class Graph;

template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  int id = -1;

  const Matrix<Scalar>& value() const { return graph->value(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

/// Named dense parameters, in a fixed order.
template <typename Scalar>
struct ParameterSet {
  std::vector<std::string> names;
  std::vector<Matrix<Scalar>> values;

  int add(std::string name, Matrix<Scalar> value) {
    names.push_back(std::move(name));
    values.push_back(std::move(value));
    return static_cast<int>(values.size()) - 1;
  }
  int size() const { return static_cast<int>(values.size()); }
  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& v : values) n += v.size();
    return n;
  }
  std::vector<Matrix<Scalar>> zeros_like() const {
    std::vector<Matrix<Scalar>> out;
    for (const auto& v : values) out.push_back(Matrix<Scalar>::Zero(v.rows(), v.cols()));
    return out;
  }
};

template <typename Scalar>
class Graph {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(Graph&, const Mat& grad)>;

  /// With track_gradients false, parameters enter as constants and no backward
  /// closures are kept (inference).
  explicit Graph(bool track_gradients = true) : track_(track_gradients) {}

  Var<Scalar> constant(Mat value) { return push(std::move(value), false, {}); }

  /// Leaf that tracks d(loss)/d(param) for entry `index` of `params`.
  Var<Scalar> parameter(const ParameterSet<Scalar>& params, int index) {
    Var<Scalar> v = push(params.values.at(index), track_, {});
    nodes_.back().param = index;
    return v;
  }

  /// Appends an op result. `backward` receives the node's incoming gradient and
  /// must route it to the inputs via accumulate(); it runs only if some input
  /// requires a gradient.
  Var<Scalar> make_node(Mat value, std::initializer_list<Var<Scalar>> inputs, Backward backward) {
    bool needs = false;
    for (const auto& in : inputs) needs = needs || requires_grad(in);
    return push(std::move(value), needs, needs ? std::move(backward) : Backward{});
  }

  const Mat& value(Var<Scalar> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var<Scalar> v) const { return nodes_.at(v.id).needs_grad; }

  void accumulate(Var<Scalar> v, const Mat& g) {
    Node& n = nodes_.at(v.id);
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = g;
    else n.grad += g;
  }

  /// Gradient accumulated at a node after backward(); zero if nothing flowed there.
  Mat grad(Var<Scalar> v) const {
    const Node& n = nodes_.at(v.id);
    return n.grad.size() ? n.grad : Mat::Zero(n.value.rows(), n.value.cols());
  }

  /// Reverse sweep from a scalar root. May be called once per graph.
  void backward(Var<Scalar> root) {
    require(root.graph == this, ErrorCode::InvalidGraph, "root belongs to another graph");
    require(!backpropagated_, ErrorCode::InvalidGraph, "backward already ran on this graph");
    const Mat& rv = value(root);
    require(rv.rows() == 1 && rv.cols() == 1, ErrorCode::InvalidGraph, "backward root must be a 1x1 scalar");
    backpropagated_ = true;
    nodes_[root.id].grad = Mat::Ones(1, 1);
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      const Mat g = std::move(n.grad);
      n.backward(*this, g);
      n.grad = g;
    }
  }

  /// Per-parameter gradients, zeros for parameters not on the tape.
  std::vector<Mat> parameter_gradients(const ParameterSet<Scalar>& params) const {
    std::vector<Mat> out = params.zeros_like();
    for (const auto& n : nodes_)
      if (n.param >= 0 && n.grad.size()) out[n.param] += n.grad;
    return out;
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool needs_grad = false;
    int param = -1;
  };

  Var<Scalar> push(Mat value, bool needs_grad, Backward backward) {
    require(value.allFinite(), ErrorCode::NumericGuardTripped,
            "non-finite value produced at node " + std::to_string(nodes_.size()));
    nodes_.push_back(Node{std::move(value), Mat{}, std::move(backward), needs_grad, -1});
    return Var<Scalar>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
  bool track_ = true;
  bool backpropagated_ = false;
};

// ---------------------------------------------------------------------------
// Elementary ops

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  auto& g = *a.graph;
  require(a.cols() == b.rows(), ErrorCode::ShapeMismatch, "matmul inner dimensions differ");
  return g.make_node(a.value() * b.value(), {a, b}, [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    if (gr.requires_grad(a)) gr.accumulate(a, d * gr.value(b).transpose());
    if (gr.requires_grad(b)) gr.accumulate(b, gr.value(a).transpose() * d);
  });
}

/// x (R x C) plus a 1 x C row broadcast over rows.
template <typename Scalar>
Var<Scalar> add_bias(Var<Scalar> x, Var<Scalar> bias) {
  require(bias.rows() == 1 && bias.cols() == x.cols(), ErrorCode::ShapeMismatch, "bias shape mismatch");
  Matrix<Scalar> out = x.value();
  out.rowwise() += bias.value().row(0);
  return x.graph->make_node(std::move(out), {x, bias}, [x, bias](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(x, d);
    gr.accumulate(bias, d.colwise().sum());
  });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch, "add shape mismatch");
  return a.graph->make_node(a.value() + b.value(), {a, b}, [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(a, d);
    gr.accumulate(b, d);
  });
}

template <typename Scalar>
Var<Scalar> operator-(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch, "sub shape mismatch");
  return a.graph->make_node(a.value() - b.value(), {a, b}, [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(a, d);
    gr.accumulate(b, -d);
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar c) {
  return a.graph->make_node(a.value() * c, {a},
                            [a, c](Graph<Scalar>& gr, const Matrix<Scalar>& d) { gr.accumulate(a, d * c); });
}

template <typename Scalar>
Var<Scalar> hadamard(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch, "hadamard shape mismatch");
  return a.graph->make_node(a.value().cwiseProduct(b.value()), {a, b},
                            [a, b](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
                              if (gr.requires_grad(a)) gr.accumulate(a, d.cwiseProduct(gr.value(b)));
                              if (gr.requires_grad(b)) gr.accumulate(b, d.cwiseProduct(gr.value(a)));
                            });
}

template <typename Scalar>
Var<Scalar> tanh(Var<Scalar> x) {
  Matrix<Scalar> y = x.value().array().tanh().matrix();
  const int self = static_cast<int>(x.graph->size());
  return x.graph->make_node(std::move(y), {x}, [x, self](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    const auto& y = gr.value(Var<Scalar>{&gr, self});
    gr.accumulate(x, (d.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x) {
  Matrix<Scalar> y = (Scalar(1) / (Scalar(1) + (-x.value().array()).exp())).matrix();
  const int self = static_cast<int>(x.graph->size());
  return x.graph->make_node(std::move(y), {x}, [x, self](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    const auto& y = gr.value(Var<Scalar>{&gr, self});
    gr.accumulate(x, (d.array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  return x.graph->make_node(x.value().cwiseMax(Scalar(0)), {x}, [x](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(x, (gr.value(x).array() > Scalar(0)).select(d.array(), Scalar(0)).matrix());
  });
}

/// Inverted dropout. Identity when `training` is false or rate is 0.
template <typename Scalar>
Var<Scalar> dropout(Var<Scalar> x, double rate, bool training, std::mt19937_64& rng) {
  if (!training || rate <= 0.0) return x;
  require(rate < 1.0, ErrorCode::InvalidConfig, "dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  const Scalar gain = Scalar(1.0 / (1.0 - rate));
  Matrix<Scalar> mask(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < mask.cols(); ++j)
    for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(rng) ? gain : Scalar(0);
  Matrix<Scalar> y = x.value().cwiseProduct(mask);
  return x.graph->make_node(std::move(y), {x}, [x, mask = std::move(mask)](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(x, d.cwiseProduct(mask));
  });
}

template <typename Scalar>
Var<Scalar> concat_cols(Var<Scalar> a, Var<Scalar> b) {
  require(a.rows() == b.rows(), ErrorCode::ShapeMismatch, "concat row mismatch");
  Matrix<Scalar> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  return a.graph->make_node(std::move(out), {a, b}, [a, b, ca, cb](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    if (gr.requires_grad(a)) gr.accumulate(a, d.leftCols(ca));
    if (gr.requires_grad(b)) gr.accumulate(b, d.rightCols(cb));
  });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> x) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  return x.graph->make_node(std::move(out), {x}, [x](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(x, Matrix<Scalar>::Constant(gr.value(x).rows(), gr.value(x).cols(), d(0, 0)));
  });
}

template <typename Scalar>
Var<Scalar> squared_norm(Var<Scalar> x) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().squaredNorm();
  return x.graph->make_node(std::move(out), {x}, [x](Graph<Scalar>& gr, const Matrix<Scalar>& d) {
    gr.accumulate(x, gr.value(x) * (Scalar(2) * d(0, 0)));
  });
}

// ---------------------------------------------------------------------------
// Recurrent layers

/// Weights of one LSTM direction; gate column order is [input, forget, cell, output].
struct LstmWeights {
  int input_weights = -1;      ///< in x 4H
  int recurrent_weights = -1;  ///< H x 4H
  int bias = -1;               ///< 1 x 4H
};

/// Runs one LSTM direction over the rows of `x` (T x in). With `reverse` the
/// sequence is processed from the last frame to the first; the output row t
/// is always the state after consuming frame t. Returns T x H.
template <typename Scalar>
Var<Scalar> lstm(Var<Scalar> x, Var<Scalar> wx, Var<Scalar> wh, Var<Scalar> b, bool reverse) {
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Index steps = x.rows();
  const Eigen::Index hidden = wh.rows();
  require(wx.rows() == x.cols() && wx.cols() == 4 * hidden && wh.cols() == 4 * hidden && b.rows() == 1 &&
              b.cols() == 4 * hidden,
          ErrorCode::ShapeMismatch, "lstm weight shapes inconsistent");

  // Gate activations (T x 4H), cell states and tanh(cell), hidden states.
  RowMat gates = x.value() * wx.value();
  gates.rowwise() += b.value().row(0);
  RowMat cells(steps, hidden), cell_tanh(steps, hidden), hs(steps, hidden);
  const Matrix<Scalar>& whv = wh.value();
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> h = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(hidden);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> c = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(hidden);
  const auto sigm = [](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); };
  for (Eigen::Index k = 0; k < steps; ++k) {
    const Eigen::Index t = reverse ? steps - 1 - k : k;
    auto z = gates.row(t);
    z.noalias() += h * whv;
    for (Eigen::Index j = 0; j < hidden; ++j) {
      z(j) = sigm(z(j));
      z(hidden + j) = sigm(z(hidden + j));
      z(2 * hidden + j) = std::tanh(z(2 * hidden + j));
      z(3 * hidden + j) = sigm(z(3 * hidden + j));
      c(j) = z(hidden + j) * c(j) + z(j) * z(2 * hidden + j);
      cell_tanh(t, j) = std::tanh(c(j));
      h(j) = z(3 * hidden + j) * cell_tanh(t, j);
    }
    cells.row(t) = c;
    hs.row(t) = h;
  }

  Matrix<Scalar> out = hs;
  return x.graph->make_node(
      std::move(out), {x, wx, wh, b},
      [=, gates = std::move(gates), cells = std::move(cells), cell_tanh = std::move(cell_tanh),
       hs = std::move(hs)](Graph<Scalar>& gr, const Matrix<Scalar>& dout) {
        RowMat dz(steps, 4 * hidden);
        RowMat h_prev = RowMat::Zero(steps, hidden);
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dh_next = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(hidden);
        Eigen::Matrix<Scalar, 1, Eigen::Dynamic> dc_next = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(hidden);
        const Matrix<Scalar>& whv = gr.value(wh);
        for (Eigen::Index k = steps - 1; k >= 0; --k) {
          const Eigen::Index t = reverse ? steps - 1 - k : k;
          const bool first = k == 0;
          const Eigen::Index tp = reverse ? t + 1 : t - 1;  // previous step in processing order
          if (!first) h_prev.row(t) = hs.row(tp);
          for (Eigen::Index j = 0; j < hidden; ++j) {
            const Scalar gi = gates(t, j), gf = gates(t, hidden + j), gg = gates(t, 2 * hidden + j),
                         go = gates(t, 3 * hidden + j);
            const Scalar ct = cell_tanh(t, j);
            const Scalar dh = dout(t, j) + dh_next(j);
            const Scalar dc = dh * go * (Scalar(1) - ct * ct) + dc_next(j);
            const Scalar c_prev = first ? Scalar(0) : cells(tp, j);
            dz(t, j) = dc * gg * gi * (Scalar(1) - gi);
            dz(t, hidden + j) = dc * c_prev * gf * (Scalar(1) - gf);
            dz(t, 2 * hidden + j) = dc * gi * (Scalar(1) - gg * gg);
            dz(t, 3 * hidden + j) = dh * ct * go * (Scalar(1) - go);
            dc_next(j) = dc * gf;
          }
          dh_next.noalias() = dz.row(t) * whv.transpose();
        }
        if (gr.requires_grad(x)) gr.accumulate(x, dz * gr.value(wx).transpose());
        if (gr.requires_grad(wx)) gr.accumulate(wx, gr.value(x).transpose() * dz);
        if (gr.requires_grad(wh)) gr.accumulate(wh, h_prev.transpose() * dz);
        if (gr.requires_grad(b)) gr.accumulate(b, dz.colwise().sum());
      });
}

/// Linear map per row: x * W + b.
template <typename Scalar>
Var<Scalar> linear(Var<Scalar> x, Var<Scalar> w, Var<Scalar> b) {
  return add_bias(matmul(x, w), b);
}

}  // namespace sepkit::nn

#endif  // SEPKIT_AUTODIFF_HPP
