#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hopchain/errors.hpp"
#include "hopchain/rng.hpp"

// Reverse-mode differentiation over dense Eigen matrices. Operations are
// recorded eagerly on a Tape; backward() replays the records in reverse.
// Column vectors (n x 1) carry embeddings, (L x d) matrices carry token
// sequences.

namespace hopchain::ad {

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <class Scalar>
class Tape;

/// Lightweight handle to a node on a tape.
template <class Scalar>
struct Value {
  Tape<Scalar>* tape = nullptr;
  int idx = -1;

  bool valid() const { return tape != nullptr && idx >= 0; }
  const Mat<Scalar>& val() const;
  Scalar scalar() const;
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
};

/// Named trainable tensors, in a stable registration order.
template <class Scalar>
class ParamStore {
 public:
  Mat<Scalar>& add(const std::string& name, Mat<Scalar> value) {
    if (index_.count(name)) throw contract_error("parameter already registered: " + name);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(value));
    return items_.back().second;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Mat<Scalar>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw not_found_error("no such parameter: " + name);
    return items_[it->second].second;
  }
  const Mat<Scalar>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw not_found_error("no such parameter: " + name);
    return items_[it->second].second;
  }

  std::size_t size() const { return items_.size(); }
  const std::vector<std::pair<std::string, Mat<Scalar>>>& items() const { return items_; }
  std::vector<std::pair<std::string, Mat<Scalar>>>& items() { return items_; }

  std::size_t coefficient_count() const {
    std::size_t n = 0;
    for (const auto& [name, m] : items_) n += static_cast<std::size_t>(m.size());
    return n;
  }

 private:
  std::vector<std::pair<std::string, Mat<Scalar>>> items_;
  std::map<std::string, std::size_t> index_;
};

template <class Scalar>
using GradMap = std::map<std::string, Mat<Scalar>>;

template <class Scalar>
class Tape {
 public:
  using M = Mat<Scalar>;
  using V = Value<Scalar>;

  struct Node {
    M value;
    M grad;
    bool has_grad = false;
    std::function<void()> backprop;  // empty for leaves
    std::string param;               // registered parameter name, if a parameter leaf
  };

  /// Constant leaf.
  V input(M v) {
    nodes_.push_back(Node{std::move(v), {}, false, nullptr, {}});
    return V{this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Parameter leaf; memoized per name so every use shares one node.
  V param(const ParamStore<Scalar>& store, const std::string& name) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return V{this, it->second};
    nodes_.push_back(Node{store.at(name), {}, false, nullptr, name});
    const int idx = static_cast<int>(nodes_.size()) - 1;
    param_nodes_[name] = idx;
    return V{this, idx};
  }

  const Node& node(int idx) const { return nodes_[idx]; }
  Node& node(int idx) { return nodes_[idx]; }
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates `g` into the gradient of node `idx`.
  template <class Expr>
  void accum(int idx, const Expr& g) {
    Node& n = nodes_[idx];
    if (!n.has_grad) {
      n.grad = M::Zero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    n.grad += g;
  }

  const M& grad_of(const V& v) const {
    const Node& n = nodes_[v.idx];
    if (!n.has_grad) throw contract_error("node has no gradient; run backward first");
    return n.grad;
  }

  V emit(M value, std::function<void()> backprop) {
    nodes_.push_back(Node{std::move(value), {}, false, std::move(backprop), {}});
    return V{this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Reverse pass from a scalar loss. Returns one gradient per parameter
  /// inserted on this tape; parameters the loss does not reach map to zero.
  GradMap<Scalar> backward(const V& loss) {
    if (!loss.valid() || loss.tape != this) throw contract_error("loss is not a node of this tape");
    if (loss.rows() != 1 || loss.cols() != 1) throw contract_error("backward requires a scalar loss");
    for (Node& n : nodes_) {
      n.has_grad = false;
      n.grad.resize(0, 0);
    }
    accum(loss.idx, M::Constant(1, 1, Scalar(1)));
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.has_grad && n.backprop) n.backprop();
    }
    GradMap<Scalar> grads;
    for (const auto& [name, idx] : param_nodes_) {
      const Node& n = nodes_[idx];
      grads[name] = n.has_grad ? n.grad : M::Zero(n.value.rows(), n.value.cols());
    }
    return grads;
  }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, int> param_nodes_;
};

template <class Scalar>
const Mat<Scalar>& Value<Scalar>::val() const {
  return tape->node(idx).value;
}

template <class Scalar>
Scalar Value<Scalar>::scalar() const {
  const auto& m = val();
  if (m.size() != 1) throw contract_error("scalar() on a non-scalar node");
  return m(0, 0);
}

namespace detail {
template <class Scalar>
void same_tape(const Value<Scalar>& a, const Value<Scalar>& b) {
  if (a.tape != b.tape) throw contract_error("operands live on different tapes");
}
}  // namespace detail

// ---- kernels ---------------------------------------------------------------
//
// Each kernel computes its value eagerly and records a closure that reads the
// output gradient and accumulates into the inputs. `out` is the index the
// freshly emitted node receives.

template <class Scalar>
Value<Scalar> add(Value<Scalar> a, Value<Scalar> b) {
  detail::same_tape(a, b);
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, ib = b.idx, out = static_cast<int>(t->size());
  return t->emit(a.val() + b.val(), [t, ia, ib, out] {
    const auto& g = t->node(out).grad;
    t->accum(ia, g);
    t->accum(ib, g);
  });
}

template <class Scalar>
Value<Scalar> sub(Value<Scalar> a, Value<Scalar> b) {
  detail::same_tape(a, b);
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, ib = b.idx, out = static_cast<int>(t->size());
  return t->emit(a.val() - b.val(), [t, ia, ib, out] {
    const auto& g = t->node(out).grad;
    t->accum(ia, g);
    t->accum(ib, -g);
  });
}

template <class Scalar>
Value<Scalar> scale(Value<Scalar> a, Scalar c) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val() * c, [t, ia, c, out] { t->accum(ia, t->node(out).grad * c); });
}

/// Multiplies a tensor by a 1x1 node (trainable scalar weight).
template <class Scalar>
Value<Scalar> scale_by(Value<Scalar> s, Value<Scalar> a) {
  detail::same_tape(s, a);
  if (s.rows() != 1 || s.cols() != 1) throw contract_error("scale_by expects a 1x1 scale");
  Tape<Scalar>* t = a.tape;
  const int is = s.idx, ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(s.scalar() * a.val(), [t, is, ia, out] {
    const auto& g = t->node(out).grad;
    const auto& av = t->node(ia).value;
    const Scalar sv = t->node(is).value(0, 0);
    t->accum(is, Mat<Scalar>::Constant(1, 1, (g.array() * av.array()).sum()));
    t->accum(ia, g * sv);
  });
}

template <class Scalar>
Value<Scalar> hadamard(Value<Scalar> a, Value<Scalar> b) {
  detail::same_tape(a, b);
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, ib = b.idx, out = static_cast<int>(t->size());
  return t->emit((a.val().array() * b.val().array()).matrix(), [t, ia, ib, out] {
    const auto& g = t->node(out).grad;
    t->accum(ia, (g.array() * t->node(ib).value.array()).matrix());
    t->accum(ib, (g.array() * t->node(ia).value.array()).matrix());
  });
}

template <class Scalar>
Value<Scalar> matmul(Value<Scalar> a, Value<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows()) throw contract_error("matmul shape mismatch");
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, ib = b.idx, out = static_cast<int>(t->size());
  return t->emit(a.val() * b.val(), [t, ia, ib, out] {
    const auto& g = t->node(out).grad;
    t->accum(ia, g * t->node(ib).value.transpose());
    t->accum(ib, t->node(ia).value.transpose() * g);
  });
}

template <class Scalar>
Value<Scalar> transpose(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().transpose(), [t, ia, out] { t->accum(ia, t->node(out).grad.transpose()); });
}

template <class Scalar>
Value<Scalar> block(Value<Scalar> a, int row, int col, int nrows, int ncols) {
  if (row < 0 || col < 0 || row + nrows > a.rows() || col + ncols > a.cols())
    throw contract_error("block out of range");
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().block(row, col, nrows, ncols), [t, ia, row, col, nrows, ncols, out] {
    Mat<Scalar> g = Mat<Scalar>::Zero(t->node(ia).value.rows(), t->node(ia).value.cols());
    g.block(row, col, nrows, ncols) = t->node(out).grad;
    t->accum(ia, g);
  });
}

/// Column vector from row `r` of a sequence matrix.
template <class Scalar>
Value<Scalar> row_vec(Value<Scalar> a, int r) {
  return transpose(block(a, r, 0, 1, static_cast<int>(a.cols())));
}

template <class Scalar>
Value<Scalar> concat_rows(const std::vector<Value<Scalar>>& parts) {
  if (parts.empty()) throw contract_error("concat_rows of nothing");
  Tape<Scalar>* t = parts[0].tape;
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    if (p.cols() != cols) throw contract_error("concat_rows column mismatch");
    rows += p.rows();
  }
  Mat<Scalar> v(rows, cols);
  std::vector<int> idxs;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.val();
    idxs.push_back(p.idx);
    offsets.push_back(at);
    at += p.rows();
  }
  const int out = static_cast<int>(t->size());
  return t->emit(std::move(v), [t, idxs, offsets, out] {
    const auto& g = t->node(out).grad;
    for (std::size_t i = 0; i < idxs.size(); ++i) {
      const Eigen::Index n = t->node(idxs[i]).value.rows();
      t->accum(idxs[i], g.middleRows(offsets[i], n));
    }
  });
}

template <class Scalar>
Value<Scalar> concat_cols(const std::vector<Value<Scalar>>& parts) {
  if (parts.empty()) throw contract_error("concat_cols of nothing");
  Tape<Scalar>* t = parts[0].tape;
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    detail::same_tape(parts[0], p);
    if (p.rows() != rows) throw contract_error("concat_cols row mismatch");
    cols += p.cols();
  }
  Mat<Scalar> v(rows, cols);
  std::vector<int> idxs;
  std::vector<Eigen::Index> offsets;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.val();
    idxs.push_back(p.idx);
    offsets.push_back(at);
    at += p.cols();
  }
  const int out = static_cast<int>(t->size());
  return t->emit(std::move(v), [t, idxs, offsets, out] {
    const auto& g = t->node(out).grad;
    for (std::size_t i = 0; i < idxs.size(); ++i) {
      const Eigen::Index n = t->node(idxs[i]).value.cols();
      t->accum(idxs[i], g.middleCols(offsets[i], n));
    }
  });
}

/// Gathers rows of `table` by index (embedding lookup); backward scatter-adds.
template <class Scalar>
Value<Scalar> gather_rows(Value<Scalar> table, const std::vector<int>& rows) {
  Tape<Scalar>* t = table.tape;
  Mat<Scalar> v(static_cast<Eigen::Index>(rows.size()), table.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= table.rows()) throw contract_error("gather_rows index out of range");
    v.row(static_cast<Eigen::Index>(i)) = table.val().row(rows[i]);
  }
  const int it = table.idx, out = static_cast<int>(t->size());
  return t->emit(std::move(v), [t, it, rows, out] {
    const auto& g = t->node(out).grad;
    Mat<Scalar> acc = Mat<Scalar>::Zero(t->node(it).value.rows(), t->node(it).value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) acc.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
    t->accum(it, acc);
  });
}

/// Adds a column vector `v` (d x 1) to every row of `a` (broadcast bias).
template <class Scalar>
Value<Scalar> add_rowwise(Value<Scalar> a, Value<Scalar> v) {
  detail::same_tape(a, v);
  if (v.cols() != 1 || v.rows() != a.cols()) throw contract_error("add_rowwise shape mismatch");
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, iv = v.idx, out = static_cast<int>(t->size());
  Mat<Scalar> val = a.val();
  val.rowwise() += v.val().col(0).transpose();
  return t->emit(std::move(val), [t, ia, iv, out] {
    const auto& g = t->node(out).grad;
    t->accum(ia, g);
    t->accum(iv, g.colwise().sum().transpose());
  });
}

template <class Scalar>
Value<Scalar> tanh(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().array().tanh().matrix(), [t, ia, out] {
    const auto& y = t->node(out).value;
    t->accum(ia, (t->node(out).grad.array() * (Scalar(1) - y.array().square())).matrix());
  });
}

template <class Scalar>
Value<Scalar> sigmoid(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  Mat<Scalar> v = a.val().unaryExpr([](Scalar x) {
    return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                          : std::exp(x) / (Scalar(1) + std::exp(x));
  });
  return t->emit(std::move(v), [t, ia, out] {
    const auto& y = t->node(out).value;
    t->accum(ia, (t->node(out).grad.array() * y.array() * (Scalar(1) - y.array())).matrix());
  });
}

template <class Scalar>
Value<Scalar> relu(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().cwiseMax(Scalar(0)), [t, ia, out] {
    const auto mask = (t->node(ia).value.array() > Scalar(0)).template cast<Scalar>();
    t->accum(ia, (t->node(out).grad.array() * mask).matrix());
  });
}

template <class Scalar>
Value<Scalar> exp(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().array().exp().matrix(), [t, ia, out] {
    t->accum(ia, (t->node(out).grad.array() * t->node(out).value.array()).matrix());
  });
}

template <class Scalar>
Value<Scalar> log(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(a.val().array().log().matrix(), [t, ia, out] {
    t->accum(ia, (t->node(out).grad.array() / t->node(ia).value.array()).matrix());
  });
}

/// Elementwise log(sigmoid(x)), computed without underflow for |x| >> 1.
/// log(1 - sigmoid(x)) is available as log_sigmoid(-x).
template <class Scalar>
Value<Scalar> log_sigmoid(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  Mat<Scalar> v = a.val().unaryExpr([](Scalar x) {
    return x >= Scalar(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
  });
  return t->emit(std::move(v), [t, ia, out] {
    // d/dx log(sigmoid(x)) = 1 - sigmoid(x) = 1 - exp(log_sigmoid(x))
    const auto& y = t->node(out).value;
    t->accum(ia, (t->node(out).grad.array() * (Scalar(1) - y.array().exp())).matrix());
  });
}

/// Row-wise softmax with max subtraction; each row sums to one.
template <class Scalar>
Value<Scalar> softmax_rows(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  Mat<Scalar> v = a.val();
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const Scalar m = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - m).exp();
    v.row(r) /= v.row(r).sum();
  }
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(std::move(v), [t, ia, out] {
    const auto& y = t->node(out).value;
    const auto& g = t->node(out).grad;
    Mat<Scalar> gi(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const Scalar dot = (g.row(r).array() * y.row(r).array()).sum();
      gi.row(r) = (y.row(r).array() * (g.row(r).array() - dot)).matrix();
    }
    t->accum(ia, gi);
  });
}

/// Softmax over a single column vector (one distribution).
template <class Scalar>
Value<Scalar> softmax_col(Value<Scalar> a) {
  if (a.cols() != 1) throw contract_error("softmax_col expects a column vector");
  return transpose(softmax_rows(transpose(a)));
}

/// Per-row layer normalization with learned gain/bias (both d x 1).
template <class Scalar>
Value<Scalar> layer_norm_rows(Value<Scalar> a, Value<Scalar> gain, Value<Scalar> bias,
                              Scalar eps = Scalar(1e-5)) {
  detail::same_tape(a, gain);
  detail::same_tape(a, bias);
  if (gain.cols() != 1 || gain.rows() != a.cols() || bias.cols() != 1 || bias.rows() != a.cols())
    throw contract_error("layer_norm gain/bias shape mismatch");
  Tape<Scalar>* t = a.tape;
  const Eigen::Index R = a.rows(), C = a.cols();
  Mat<Scalar> xhat(R, C);
  Mat<Scalar> inv_std(R, 1);
  for (Eigen::Index r = 0; r < R; ++r) {
    const Scalar mu = a.val().row(r).mean();
    const Scalar var = (a.val().row(r).array() - mu).square().sum() / Scalar(C);
    const Scalar s = Scalar(1) / std::sqrt(var + eps);
    inv_std(r, 0) = s;
    xhat.row(r) = ((a.val().row(r).array() - mu) * s).matrix();
  }
  Mat<Scalar> v = (xhat.array().rowwise() * gain.val().col(0).transpose().array()).matrix();
  v.rowwise() += bias.val().col(0).transpose();
  const int ia = a.idx, ig = gain.idx, ib = bias.idx, out = static_cast<int>(t->size());
  return t->emit(std::move(v), [t, ia, ig, ib, out, xhat, inv_std] {
    const auto& g = t->node(out).grad;
    const auto& gn = t->node(ig).value;
    const Eigen::Index R = g.rows(), C = g.cols();
    t->accum(ib, g.colwise().sum().transpose());
    t->accum(ig, (g.array() * xhat.array()).colwise().sum().transpose().matrix());
    Mat<Scalar> gi(R, C);
    for (Eigen::Index r = 0; r < R; ++r) {
      const auto gg = (g.row(r).array() * gn.col(0).transpose().array()).eval();
      const Scalar m1 = gg.mean();
      const Scalar m2 = (gg * xhat.row(r).array()).mean();
      gi.row(r) = (inv_std(r, 0) * (gg - m1 - xhat.row(r).array() * m2)).matrix();
    }
    t->accum(ia, gi);
  });
}

/// Dot product of two column vectors; returns a 1x1 node.
template <class Scalar>
Value<Scalar> dot(Value<Scalar> a, Value<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows())
    throw contract_error("dot expects column vectors of equal length");
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, ib = b.idx, out = static_cast<int>(t->size());
  return t->emit(Mat<Scalar>::Constant(1, 1, a.val().col(0).dot(b.val().col(0))), [t, ia, ib, out] {
    const Scalar g = t->node(out).grad(0, 0);
    t->accum(ia, g * t->node(ib).value);
    t->accum(ib, g * t->node(ia).value);
  });
}

template <class Scalar>
Value<Scalar> sum(Value<Scalar> a) {
  Tape<Scalar>* t = a.tape;
  const int ia = a.idx, out = static_cast<int>(t->size());
  return t->emit(Mat<Scalar>::Constant(1, 1, a.val().sum()), [t, ia, out] {
    const auto& n = t->node(ia).value;
    t->accum(ia, Mat<Scalar>::Constant(n.rows(), n.cols(), t->node(out).grad(0, 0)));
  });
}

template <class Scalar>
Value<Scalar> mean(Value<Scalar> a) {
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.rows() * a.cols()));
}

template <class Scalar>
Value<Scalar> operator+(Value<Scalar> a, Value<Scalar> b) { return add(a, b); }
template <class Scalar>
Value<Scalar> operator-(Value<Scalar> a, Value<Scalar> b) { return sub(a, b); }
template <class Scalar>
Value<Scalar> operator*(Value<Scalar> a, Value<Scalar> b) { return matmul(a, b); }
template <class Scalar>
Value<Scalar> operator*(Scalar c, Value<Scalar> a) { return scale(a, c); }
template <class Scalar>
Value<Scalar> neg(Value<Scalar> a) { return scale(a, Scalar(-1)); }

// ---- non-tape scalar helpers ------------------------------------------------

/// Numerically stable scalar sigmoid.
template <class Scalar>
Scalar sigmoid_value(Scalar x) {
  return x >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-x))
                        : std::exp(x) / (Scalar(1) + std::exp(x));
}

/// Stable log(sigmoid(x)).
template <class Scalar>
Scalar log_sigmoid_value(Scalar x) {
  return x >= Scalar(0) ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

/// Softmax of a plain vector with max subtraction.
template <class Scalar>
std::vector<Scalar> softmax_values(const std::vector<Scalar>& v) {
  Scalar m = v[0];
  for (Scalar x : v) m = std::max(m, x);
  std::vector<Scalar> out(v.size());
  Scalar z = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    z += out[i];
  }
  for (Scalar& x : out) x /= z;
  return out;
}

}  // namespace hopchain::ad

