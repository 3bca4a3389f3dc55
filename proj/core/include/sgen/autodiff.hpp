// Copyright 2026 The sgen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reverse-mode differentiation over row-major dense matrices.
//
// A Tape records every op applied to its Vars. Backward closures only read
// values and accumulate into gradients, so ops composed from other ops are
// themselves differentiable (the flow trace relies on this for second-order
// terms).

#include <cmath>
#include <deque>
#include <functional>
#include <initializer_list>
#include <unordered_map>
#include <vector>

#include "sgen/error.hpp"
#include "sgen/param_store.hpp"
#include "sgen/tensor.hpp"

namespace sgen::ad {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
 public:
  using Mat = Matrix<T>;
  using Backward = std::function<void(Tape&, const Mat&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Mat value) { return emplace(std::move(value), false, nullptr); }
  Var variable(Mat value) { return emplace(std::move(value), record_, nullptr); }

  /// Leaf bound to a parameter; the same parameter always maps to one node.
  Var param(Parameter<T>& p) {
    auto it = cache_.find(&p);
    if (it != cache_.end()) return Var{it->second};
    Var v = emplace(p.value, record_, nullptr);
    cache_.emplace(&p, v.id);
    bound_.emplace_back(v.id, &p);
    return v;
  }
  Var param(ParamStore<T>& store, const std::string& name) { return param(store.at(name)); }

  const Mat& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  T scalar(Var v) const { return value(v)(0, 0); }
  bool needs_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

  /// Gradient accumulated by the last backward(); zero-sized if unreached.
  const Mat& grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].grad; }

  Mat& grad_ref(Var v) {
    auto& n = nodes_[static_cast<size_t>(v.id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  Var push(Mat value, std::initializer_list<Var> inputs, Backward fn) {
    bool needs = false;
    if (record_) {
      for (Var in : inputs) needs = needs || needs_grad(in);
    }
    return emplace(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  Var push(Mat value, const std::vector<Var>& inputs, Backward fn) {
    bool needs = false;
    if (record_) {
      for (Var in : inputs) needs = needs || needs_grad(in);
    }
    return emplace(std::move(value), needs, needs ? std::move(fn) : nullptr);
  }

  /// Back-propagates from a 1x1 node and adds the results into bound
  /// parameters' gradients (setting has_grad).
  void backward(Var loss) {
    if (value(loss).size() != 1) throw Error(ErrorCode::kInvalidArgument, "backward needs a scalar");
    grad_ref(loss).setConstant(T(1));
    for (int id = loss.id; id >= 0; --id) {
      auto& n = nodes_[static_cast<size_t>(id)];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, n.grad);
    }
    for (auto& [id, p] : bound_) {
      const auto& g = nodes_[static_cast<size_t>(id)].grad;
      if (g.size() == 0) {
        p->has_grad = true;
        continue;
      }
      p->grad += g;
      p->has_grad = true;
    }
  }

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool needs_grad = false;
  };

  Var emplace(Mat value, bool needs, Backward fn) {
    nodes_.push_back(Node{std::move(value), Mat(), std::move(fn), needs});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const void*, int> cache_;
  std::vector<std::pair<int, Parameter<T>*>> bound_;
};

// ---------------------------------------------------------------------------
// Linear algebra and elementwise arithmetic.

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  Matrix<T> out;
  out.noalias() = t.value(a) * t.value(b);
  return t.push(std::move(out), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a).noalias() += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.grad_ref(b).noalias() += t.value(a).transpose() * g;
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  return t.push(t.value(a) + t.value(b), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) += g;
  });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  return t.push(t.value(a) - t.value(b), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(b)) t.grad_ref(b) -= g;
  });
}

template <typename T>
Var mul(Tape<T>& t, Var a, Var b) {
  return t.push(t.value(a).cwiseProduct(t.value(b)), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g.cwiseProduct(t.value(b));
    if (t.needs_grad(b)) t.grad_ref(b) += g.cwiseProduct(t.value(a));
  });
}

template <typename T>
Var scale(Tape<T>& t, Var a, T s) {
  return t.push(t.value(a) * s, {a}, [a, s](Tape<T>& t, const Matrix<T>& g) { t.grad_ref(a) += g * s; });
}

template <typename T>
Var add_scalar(Tape<T>& t, Var a, T s) {
  return t.push((t.value(a).array() + s).matrix(), {a}, [a](Tape<T>& t, const Matrix<T>& g) { t.grad_ref(a) += g; });
}

/// a (r x c) + row (1 x c) broadcast over rows.
template <typename T>
Var add_row(Tape<T>& t, Var a, Var row) {
  Matrix<T> out = t.value(a);
  out.rowwise() += t.value(row).row(0);
  return t.push(std::move(out), {a, row}, [a, row](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(row)) t.grad_ref(row) += g.colwise().sum();
  });
}

/// a (r x c) * row (1 x c) broadcast over rows.
template <typename T>
Var mul_row(Tape<T>& t, Var a, Var row) {
  Matrix<T> out = t.value(a);
  out.array().rowwise() *= t.value(row).row(0).array();
  return t.push(std::move(out), {a, row}, [a, row](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) {
      Matrix<T> ga = g;
      ga.array().rowwise() *= t.value(row).row(0).array();
      t.grad_ref(a) += ga;
    }
    if (t.needs_grad(row)) t.grad_ref(row) += g.cwiseProduct(t.value(a)).colwise().sum();
  });
}

/// a (r x c) * col (r x 1) broadcast over columns.
template <typename T>
Var mul_col(Tape<T>& t, Var a, Var col) {
  Matrix<T> out = t.value(a);
  out.array().colwise() *= t.value(col).col(0).array();
  return t.push(std::move(out), {a, col}, [a, col](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) {
      Matrix<T> ga = g;
      ga.array().colwise() *= t.value(col).col(0).array();
      t.grad_ref(a) += ga;
    }
    if (t.needs_grad(col)) t.grad_ref(col) += g.cwiseProduct(t.value(a)).rowwise().sum();
  });
}

/// a (r x c) + col (r x 1) broadcast over columns.
template <typename T>
Var add_col(Tape<T>& t, Var a, Var col) {
  Matrix<T> out = t.value(a);
  out.colwise() += t.value(col).col(0);
  return t.push(std::move(out), {a, col}, [a, col](Tape<T>& t, const Matrix<T>& g) {
    if (t.needs_grad(a)) t.grad_ref(a) += g;
    if (t.needs_grad(col)) t.grad_ref(col) += g.rowwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.

template <typename T>
Var tanh(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a).array().tanh().matrix();
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var{self});
    t.grad_ref(a) += (g.array() * (T(1) - y.array().square())).matrix();
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var a) {
  Matrix<T> out = (T(1) / (T(1) + (-t.value(a).array()).exp())).matrix();
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var{self});
    t.grad_ref(a) += (g.array() * y.array() * (T(1) - y.array())).matrix();
  });
}

/// x * sigmoid(x).
template <typename T>
Var silu(Tape<T>& t, Var a) {
  const auto& x = t.value(a);
  Matrix<T> out = (x.array() / (T(1) + (-x.array()).exp())).matrix();
  return t.push(std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    const auto& x = t.value(a);
    auto s = (T(1) / (T(1) + (-x.array()).exp()));
    t.grad_ref(a) += (g.array() * (s * (T(1) + x.array() * (T(1) - s)))).matrix();
  });
}

/// ELU with alpha = 1 (continuously differentiable at 0).
template <typename T>
Var elu(Tape<T>& t, Var a) {
  const auto& x = t.value(a);
  Matrix<T> out = x.unaryExpr([](T v) { return v > T(0) ? v : std::expm1(v); });
  return t.push(std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    const auto& x = t.value(a);
    t.grad_ref(a) += g.cwiseProduct(x.unaryExpr([](T v) { return v > T(0) ? T(1) : std::exp(v); }));
  });
}

template <typename T>
Var exp(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a).array().exp().matrix();
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [a, self](Tape<T>& t, const Matrix<T>& g) {
    t.grad_ref(a) += g.cwiseProduct(t.value(Var{self}));
  });
}

template <typename T>
Var square(Tape<T>& t, Var a) {
  return t.push(t.value(a).array().square().matrix(), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    t.grad_ref(a) += (T(2) * g.array() * t.value(a).array()).matrix();
  });
}

template <typename T>
Var clamp(Tape<T>& t, Var a, T lo, T hi) {
  return t.push(t.value(a).cwiseMax(lo).cwiseMin(hi), {a}, [a, lo, hi](Tape<T>& t, const Matrix<T>& g) {
    const auto& x = t.value(a);
    t.grad_ref(a) += g.cwiseProduct(x.unaryExpr([lo, hi](T v) { return (v >= lo && v <= hi) ? T(1) : T(0); }));
  });
}

// ---------------------------------------------------------------------------
// Reductions and reshaping.

template <typename T>
Var sum(Tape<T>& t, Var a) {
  Matrix<T> out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.push(std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) { t.grad_ref(a).array() += g(0, 0); });
}

template <typename T>
Var mean(Tape<T>& t, Var a) {
  const T inv = T(1) / static_cast<T>(t.value(a).size());
  return scale(t, sum(t, a), inv);
}

/// Row sums, r x 1.
template <typename T>
Var row_sum(Tape<T>& t, Var a) {
  Matrix<T> out = t.value(a).rowwise().sum();
  return t.push(std::move(out), {a}, [a](Tape<T>& t, const Matrix<T>& g) {
    t.grad_ref(a).colwise() += g.col(0);
  });
}

template <typename T>
Var concat_cols(Tape<T>& t, const std::vector<Var>& parts) {
  Eigen::Index rows = t.value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) throw Error(ErrorCode::kInvalidArgument, "concat_cols row mismatch");
    cols += t.value(p).cols();
  }
  Matrix<T> out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, t.value(p).cols()) = t.value(p);
    at += t.value(p).cols();
  }
  return t.push(std::move(out), parts, [parts](Tape<T>& t, const Matrix<T>& g) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const Eigen::Index c = t.value(p).cols();
      if (t.needs_grad(p)) t.grad_ref(p) += g.middleCols(at, c);
      at += c;
    }
  });
}

template <typename T>
Var slice_cols(Tape<T>& t, Var a, Eigen::Index start, Eigen::Index len) {
  Matrix<T> out = t.value(a).middleCols(start, len);
  return t.push(std::move(out), {a}, [a, start, len](Tape<T>& t, const Matrix<T>& g) {
    t.grad_ref(a).middleCols(start, len) += g;
  });
}

/// out.row(i) = a.row(index[i]).
template <typename T>
Var gather_rows(Tape<T>& t, Var a, std::vector<int> index) {
  const auto& x = t.value(a);
  Matrix<T> out(static_cast<Eigen::Index>(index.size()), x.cols());
  for (size_t i = 0; i < index.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(index[i]);
  return t.push(std::move(out), {a}, [a, index = std::move(index)](Tape<T>& t, const Matrix<T>& g) {
    auto& ga = t.grad_ref(a);
    for (size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

/// Each row repeated k times consecutively: (r x c) -> (r*k x c).
template <typename T>
Var repeat_rows(Tape<T>& t, Var a, Eigen::Index k) {
  const auto& x = t.value(a);
  Matrix<T> out(x.rows() * k, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.middleRows(i * k, k).rowwise() = x.row(i);
  return t.push(std::move(out), {a}, [a, k](Tape<T>& t, const Matrix<T>& g) {
    auto& ga = t.grad_ref(a);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) ga.row(i) += g.middleRows(i * k, k).colwise().sum();
  });
}

/// Whole matrix stacked k times: (r x c) -> (k*r x c).
template <typename T>
Var tile_rows(Tape<T>& t, Var a, Eigen::Index k) {
  const auto& x = t.value(a);
  Matrix<T> out(x.rows() * k, x.cols());
  for (Eigen::Index b = 0; b < k; ++b) out.middleRows(b * x.rows(), x.rows()) = x;
  return t.push(std::move(out), {a}, [a, k](Tape<T>& t, const Matrix<T>& g) {
    auto& ga = t.grad_ref(a);
    const Eigen::Index r = ga.rows();
    for (Eigen::Index b = 0; b < k; ++b) ga += g.middleRows(b * r, r);
  });
}

/// Mean of the rows sharing each segment id; empty segments give zero rows.
template <typename T>
Var segment_mean(Tape<T>& t, Var a, std::vector<int> segment, int segments) {
  const auto& x = t.value(a);
  std::vector<T> counts(static_cast<size_t>(segments), T(0));
  for (int s : segment) counts[static_cast<size_t>(s)] += T(1);
  Matrix<T> out = Matrix<T>::Zero(segments, x.cols());
  for (size_t i = 0; i < segment.size(); ++i) out.row(segment[i]) += x.row(static_cast<Eigen::Index>(i));
  for (int s = 0; s < segments; ++s) {
    if (counts[static_cast<size_t>(s)] > T(0)) out.row(s) /= counts[static_cast<size_t>(s)];
  }
  return t.push(std::move(out), {a},
                [a, segment = std::move(segment), counts = std::move(counts)](Tape<T>& t, const Matrix<T>& g) {
                  auto& ga = t.grad_ref(a);
                  for (size_t i = 0; i < segment.size(); ++i) {
                    ga.row(static_cast<Eigen::Index>(i)) += g.row(segment[i]) / counts[static_cast<size_t>(segment[i])];
                  }
                });
}

/// For J stacked as (B*d x d): out(b) = sum_i J(b*d + i, i).
template <typename T>
Var block_trace(Tape<T>& t, Var jac, Eigen::Index d) {
  const auto& J = t.value(jac);
  const Eigen::Index blocks = J.rows() / d;
  Matrix<T> out(blocks, 1);
  for (Eigen::Index b = 0; b < blocks; ++b) {
    T acc = T(0);
    for (Eigen::Index i = 0; i < d; ++i) acc += J(b * d + i, i);
    out(b, 0) = acc;
  }
  return t.push(std::move(out), {jac}, [jac, d](Tape<T>& t, const Matrix<T>& g) {
    auto& gj = t.grad_ref(jac);
    const Eigen::Index blocks = gj.rows() / d;
    for (Eigen::Index b = 0; b < blocks; ++b) {
      for (Eigen::Index i = 0; i < d; ++i) gj(b * d + i, i) += g(b, 0);
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization, attention and losses (fused, hand-derived backward).

/// Per-row zero mean / unit variance (no affine).
template <typename T>
Var layer_norm(Tape<T>& t, Var a, T eps = T(1e-5)) {
  const auto& x = t.value(a);
  const Eigen::Index c = x.cols();
  Matrix<T> out(x.rows(), c);
  Matrix<T> inv_std(x.rows(), 1);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    inv_std(i, 0) = is;
    out.row(i) = (x.row(i).array() - mu) * is;
  }
  const int self = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [a, self, inv_std = std::move(inv_std)](Tape<T>& t, const Matrix<T>& g) {
    const auto& y = t.value(Var{self});
    auto& ga = t.grad_ref(a);
    const T c = static_cast<T>(y.cols());
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const T mg = g.row(i).mean();
      const T mgy = g.row(i).dot(y.row(i)) / c;
      ga.row(i).array() += inv_std(i, 0) * (g.row(i).array() - mg - y.row(i).array() * mgy);
    }
  });
}

/// Multi-head attention of each query row over the `tokens` key/value rows of
/// its group: out_i = softmax(q_i k^T / sqrt(head_dim)) v per head, heads
/// concatenated. `group[i]` selects key rows group[i]*tokens ... +tokens-1.
template <typename T>
Var cross_attention(Tape<T>& t, Var q, Var k, Var v, std::vector<int> group, int tokens, int heads) {
  const auto& Q = t.value(q);
  const auto& K = t.value(k);
  const auto& V = t.value(v);
  const Eigen::Index n = Q.rows();
  const Eigen::Index w = Q.cols();
  const Eigen::Index hd = w / heads;
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(hd));
  Matrix<T> out = Matrix<T>::Zero(n, w);
  Matrix<T> probs(n, static_cast<Eigen::Index>(heads) * tokens);
  std::vector<T> s(static_cast<size_t>(tokens));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(group[static_cast<size_t>(i)]) * tokens;
    for (int h = 0; h < heads; ++h) {
      T mx = -std::numeric_limits<T>::infinity();
      for (int j = 0; j < tokens; ++j) {
        s[j] = Q.row(i).segment(h * hd, hd).dot(K.row(base + j).segment(h * hd, hd)) * inv_scale;
        mx = std::max(mx, s[j]);
      }
      T z = T(0);
      for (int j = 0; j < tokens; ++j) {
        s[j] = std::exp(s[j] - mx);
        z += s[j];
      }
      for (int j = 0; j < tokens; ++j) {
        const T p = s[j] / z;
        probs(i, h * tokens + j) = p;
        out.row(i).segment(h * hd, hd) += p * V.row(base + j).segment(h * hd, hd);
      }
    }
  }
  return t.push(std::move(out), {q, k, v},
                [q, k, v, group = std::move(group), tokens, heads, hd, inv_scale,
                 probs = std::move(probs)](Tape<T>& t, const Matrix<T>& g) {
                  const auto& Q = t.value(q);
                  const auto& K = t.value(k);
                  const auto& V = t.value(v);
                  Matrix<T>* gq = t.needs_grad(q) ? &t.grad_ref(q) : nullptr;
                  Matrix<T>* gk = t.needs_grad(k) ? &t.grad_ref(k) : nullptr;
                  Matrix<T>* gv = t.needs_grad(v) ? &t.grad_ref(v) : nullptr;
                  std::vector<T> dp(static_cast<size_t>(tokens));
                  for (Eigen::Index i = 0; i < Q.rows(); ++i) {
                    const Eigen::Index base = static_cast<Eigen::Index>(group[static_cast<size_t>(i)]) * tokens;
                    for (int h = 0; h < heads; ++h) {
                      const auto go = g.row(i).segment(h * hd, hd);
                      T dot = T(0);
                      for (int j = 0; j < tokens; ++j) {
                        dp[j] = go.dot(V.row(base + j).segment(h * hd, hd));
                        dot += probs(i, h * tokens + j) * dp[j];
                      }
                      for (int j = 0; j < tokens; ++j) {
                        const T p = probs(i, h * tokens + j);
                        if (gv) gv->row(base + j).segment(h * hd, hd) += p * go;
                        const T ds = p * (dp[j] - dot) * inv_scale;
                        if (gq) gq->row(i).segment(h * hd, hd) += ds * K.row(base + j).segment(h * hd, hd);
                        if (gk) gk->row(base + j).segment(h * hd, hd) += ds * Q.row(i).segment(h * hd, hd);
                      }
                    }
                  }
                });
}

/// Graph attention over small per-graph node sets. `wh` holds projected node
/// features (G*m x heads*hd); `a_src`/`a_dst` are (1 x heads*hd) attention
/// vectors; mask(r, j) = 1 when node j of row r's graph is in r's
/// neighborhood. Logits are LeakyReLU(a_src.wh_i + a_dst.wh_j) per head, and
/// rows with an empty neighborhood produce zeros.
template <typename T>
Var graph_attention(Tape<T>& t, Var wh, Var a_src, Var a_dst, Matrix<T> mask, int m, int heads, T slope = T(0.2)) {
  const auto& H = t.value(wh);
  const auto& As = t.value(a_src);
  const auto& Ad = t.value(a_dst);
  const Eigen::Index rows = H.rows();
  const Eigen::Index hd = H.cols() / heads;
  Matrix<T> out = Matrix<T>::Zero(rows, H.cols());
  Matrix<T> probs = Matrix<T>::Zero(rows, static_cast<Eigen::Index>(heads) * m);
  Matrix<T> raw(rows, static_cast<Eigen::Index>(heads) * m);  // pre-activation logits
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index base = (r / m) * m;
    for (int h = 0; h < heads; ++h) {
      const T src = H.row(r).segment(h * hd, hd).dot(As.row(0).segment(h * hd, hd));
      T mx = -std::numeric_limits<T>::infinity();
      std::vector<T> e(static_cast<size_t>(m), T(0));
      for (int j = 0; j < m; ++j) {
        const T x = src + H.row(base + j).segment(h * hd, hd).dot(Ad.row(0).segment(h * hd, hd));
        raw(r, h * m + j) = x;
        if (mask(r, j) == T(0)) continue;
        e[j] = x > T(0) ? x : slope * x;
        mx = std::max(mx, e[j]);
      }
      if (mx == -std::numeric_limits<T>::infinity()) continue;
      T z = T(0);
      for (int j = 0; j < m; ++j) {
        if (mask(r, j) == T(0)) continue;
        e[j] = std::exp(e[j] - mx);
        z += e[j];
      }
      for (int j = 0; j < m; ++j) {
        if (mask(r, j) == T(0)) continue;
        const T p = e[j] / z;
        probs(r, h * m + j) = p;
        out.row(r).segment(h * hd, hd) += p * H.row(base + j).segment(h * hd, hd);
      }
    }
  }
  return t.push(std::move(out), {wh, a_src, a_dst},
                [wh, a_src, a_dst, mask = std::move(mask), m, heads, hd, slope, probs = std::move(probs),
                 raw = std::move(raw)](Tape<T>& t, const Matrix<T>& g) {
                  const auto& H = t.value(wh);
                  const auto& As = t.value(a_src);
                  const auto& Ad = t.value(a_dst);
                  Matrix<T> gh = Matrix<T>::Zero(H.rows(), H.cols());
                  Matrix<T> gas = Matrix<T>::Zero(1, H.cols());
                  Matrix<T> gad = Matrix<T>::Zero(1, H.cols());
                  std::vector<T> dp(static_cast<size_t>(m));
                  for (Eigen::Index r = 0; r < H.rows(); ++r) {
                    const Eigen::Index base = (r / m) * m;
                    for (int h = 0; h < heads; ++h) {
                      const auto go = g.row(r).segment(h * hd, hd);
                      T dot = T(0);
                      for (int j = 0; j < m; ++j) {
                        if (mask(r, j) == T(0)) continue;
                        dp[j] = go.dot(H.row(base + j).segment(h * hd, hd));
                        dot += probs(r, h * m + j) * dp[j];
                      }
                      for (int j = 0; j < m; ++j) {
                        if (mask(r, j) == T(0)) continue;
                        const T p = probs(r, h * m + j);
                        gh.row(base + j).segment(h * hd, hd) += p * go;
                        const T de = p * (dp[j] - dot);
                        const T dx = de * (raw(r, h * m + j) > T(0) ? T(1) : slope);
                        // x = a_src . h_r + a_dst . h_j
                        gh.row(r).segment(h * hd, hd) += dx * As.row(0).segment(h * hd, hd);
                        gas.row(0).segment(h * hd, hd) += dx * H.row(r).segment(h * hd, hd);
                        gh.row(base + j).segment(h * hd, hd) += dx * Ad.row(0).segment(h * hd, hd);
                        gad.row(0).segment(h * hd, hd) += dx * H.row(base + j).segment(h * hd, hd);
                      }
                    }
                  }
                  if (t.needs_grad(wh)) t.grad_ref(wh) += gh;
                  if (t.needs_grad(a_src)) t.grad_ref(a_src) += gas;
                  if (t.needs_grad(a_dst)) t.grad_ref(a_dst) += gad;
                });
}

/// Mean binary cross-entropy with logits over entries where weight != 0.
template <typename T>
Var bce_with_logits(Tape<T>& t, Var logits, Matrix<T> targets, Matrix<T> weight) {
  const auto& x = t.value(logits);
  T total = T(0);
  T count = T(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T w = weight.data()[i];
    if (w == T(0)) continue;
    const T v = x.data()[i];
    const T softplus = v > T(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    total += w * (softplus - targets.data()[i] * v);
    count += w;
  }
  Matrix<T> out(1, 1);
  out(0, 0) = count > T(0) ? total / count : T(0);
  return t.push(std::move(out), {logits},
                [logits, targets = std::move(targets), weight = std::move(weight), count](Tape<T>& t,
                                                                                          const Matrix<T>& g) {
                  if (count == T(0)) return;
                  const auto& x = t.value(logits);
                  auto& gl = t.grad_ref(logits);
                  for (Eigen::Index i = 0; i < x.size(); ++i) {
                    const T w = weight.data()[i];
                    if (w == T(0)) continue;
                    const T s = T(1) / (T(1) + std::exp(-x.data()[i]));
                    gl.data()[i] += g(0, 0) * w * (s - targets.data()[i]) / count;
                  }
                });
}

// ---------------------------------------------------------------------------
// Layers.

/// x W + b with W: in x out and b: 1 x out.
template <typename T>
Var linear(Tape<T>& t, ParamStore<T>& store, const std::string& prefix, Var x) {
  Var y = matmul(t, x, t.param(store, prefix + "/w"));
  if (store.contains(prefix + "/b")) y = add_row(t, y, t.param(store, prefix + "/b"));
  return y;
}

template <typename T>
void register_linear(ParamStore<T>& store, const std::string& prefix, Eigen::Index in, Eigen::Index out, Rng& rng,
                     bool bias = true, double gain = 1.0) {
  store.add(prefix + "/w", glorot<T>(in, out, rng, gain));
  if (bias) store.add(prefix + "/b", Matrix<T>::Zero(1, out));
}

}  // namespace sgen::ad
