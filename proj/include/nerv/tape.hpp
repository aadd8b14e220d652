// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode differentiation engine. Values on the tape are dense
// matrices (columns are batch entries), which keeps MLP evaluation and
// per-direction shading math vectorized while the recorded graph stays small.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "nerv/vec.hpp"

namespace nerv {

using Mat = Eigen::MatrixXd;

enum class Act { kIdentity, kRelu, kSoftplus, kSigmoid };

inline double act_eval(Act a, double x) {
  switch (a) {
    case Act::kIdentity: return x;
    case Act::kRelu: return x > 0.0 ? x : 0.0;
    case Act::kSoftplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Act::kSigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

inline double act_prime(Act a, double x) {
  switch (a) {
    case Act::kIdentity: return 1.0;
    case Act::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case Act::kSoftplus: return 1.0 / (1.0 + std::exp(-x));
    case Act::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
  }
  return 1.0;
}

inline double act_second(Act a, double x) {
  switch (a) {
    case Act::kIdentity:
    case Act::kRelu: return 0.0;
    case Act::kSoftplus: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case Act::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
  }
  return 0.0;
}

// Sinusoidal feature lift of coordinates, frequencies 2^0..2^(L-1) times pi.
struct PosEncSpec {
  int num_frequencies = 0;
  bool include_identity = true;

  int encoded_width(int in_dim) const {
    return (include_identity ? in_dim : 0) + 2 * num_frequencies * in_dim;
  }
};

// -----------------------------------------------------------------------------
// Parameter and gradient storage. Parameters live in one bank shared by all
// networks; gradients accumulate in a parallel bank so per-ray contributions
// can be reduced in a deterministic order.
// -----------------------------------------------------------------------------

class ParamBank {
 public:
  int add(Mat value) {
    values_.push_back(std::move(value));
    return int(values_.size()) - 1;
  }
  Mat& value(int id) { return values_[size_t(id)]; }
  const Mat& value(int id) const { return values_[size_t(id)]; }
  int count() const { return int(values_.size()); }
  int64_t scalar_count() const {
    int64_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
  }

 private:
  std::vector<Mat> values_;
};

class GradBank {
 public:
  GradBank() = default;
  explicit GradBank(const ParamBank& bank) { resize(bank); }

  void resize(const ParamBank& bank) {
    grads_.resize(size_t(bank.count()));
    for (int i = 0; i < bank.count(); ++i)
      grads_[size_t(i)] = Mat::Zero(bank.value(i).rows(), bank.value(i).cols());
  }
  void set_zero() {
    for (auto& g : grads_) g.setZero();
  }
  Mat& grad(int id) { return grads_[size_t(id)]; }
  const Mat& grad(int id) const { return grads_[size_t(id)]; }
  void accumulate(const GradBank& other) {
    for (size_t i = 0; i < grads_.size(); ++i) grads_[i] += other.grads_[i];
  }
  int count() const { return int(grads_.size()); }
  bool all_finite() const {
    for (const auto& g : grads_)
      if (!g.allFinite()) return false;
    return true;
  }

 private:
  std::vector<Mat> grads_;
};

// -----------------------------------------------------------------------------
// GradientTape: one forward evaluation's operation graph. Nodes are appended
// in topological order; backward() walks them once in reverse and accumulates
// parameter gradients additively.
// -----------------------------------------------------------------------------

class Tape {
 public:
  explicit Tape(const ParamBank* params) : params_(params) {}

  // ---- leaves ----
  int constant(Mat v) { return push(Op::kConst, -1, -1, std::move(v)); }
  int scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
  }
  int input(Mat v) { return push(Op::kInput, -1, -1, std::move(v)); }

  // ---- network primitives ----
  int linear(int w_id, int b_id, int x) {
    if (w_id < 0 || w_id >= params_->count())
      throw NervError("tape: parameter id outside the bound bank");
    const Mat& w = params_->value(w_id);
    Mat y = w * value(x);
    if (b_id >= 0) y.colwise() += Eigen::VectorXd(params_->value(b_id).col(0));
    int n = push(Op::kLinear, x, -1, std::move(y));
    nodes_[size_t(n)].w_id = w_id;
    nodes_[size_t(n)].b_id = b_id;
    return n;
  }
  int linear_const(Mat c, int x) {
    Mat y = c * value(x);
    int n = push(Op::kLinearConst, x, -1, std::move(y));
    nodes_[size_t(n)].aux = std::move(c);
    return n;
  }
  int linear_t(int w_id, int x) {
    Mat y = params_->value(w_id).transpose() * value(x);
    int n = push(Op::kLinearT, x, -1, std::move(y));
    nodes_[size_t(n)].w_id = w_id;
    return n;
  }
  int activation(Act a, int x) {
    Mat y = value(x).unaryExpr([a](double v) { return act_eval(a, v); });
    int n = push(Op::kAct, x, -1, std::move(y));
    nodes_[size_t(n)].act = a;
    return n;
  }
  int activation_prime(Act a, int x) {
    Mat y = value(x).unaryExpr([a](double v) { return act_prime(a, v); });
    int n = push(Op::kActPrime, x, -1, std::move(y));
    nodes_[size_t(n)].act = a;
    return n;
  }

  // ---- elementwise / structural ----
  int add(int a, int b) { return push(Op::kAdd, a, b, value(a) + value(b)); }
  int sub(int a, int b) { return push(Op::kSub, a, b, value(a) - value(b)); }
  int hadamard(int a, int b) { return push(Op::kHadamard, a, b, value(a).cwiseProduct(value(b))); }
  int hadamard_const(int a, Mat c) {
    Mat y = value(a).cwiseProduct(c);
    int n = push(Op::kHadamardConst, a, -1, std::move(y));
    nodes_[size_t(n)].aux = std::move(c);
    return n;
  }
  // s0 * A + s1
  int affine(int a, double s0, double s1) {
    Mat y = (value(a).array() * s0 + s1).matrix();
    int n = push(Op::kAffine, a, -1, std::move(y));
    nodes_[size_t(n)].s0 = s0;
    return n;
  }
  int add_const(int a, Mat c) { return push(Op::kAddConst, a, -1, value(a) + c); }
  // A (m x n) scaled per column by row vector r (1 x n)
  int row_scale(int a, int r) {
    Mat y = value(a).array().rowwise() * value(r).row(0).array();
    int n = push(Op::kRowScale, a, r, std::move(y));
    return n;
  }
  int scalar_mul(int s, int a) { return push(Op::kScalarMul, s, a, value(s)(0, 0) * value(a)); }
  int scalar_add(int s, int a) {
    return push(Op::kScalarAdd, s, a, (value(a).array() + value(s)(0, 0)).matrix());
  }
  int bcast_cols(int a, int n_cols) {
    Mat y = value(a).col(0).replicate(1, n_cols);
    return push(Op::kBcastCols, a, -1, std::move(y));
  }
  int bcast_rows(int a, int n_rows) {
    Mat y = value(a).row(0).replicate(n_rows, 1);
    return push(Op::kBcastRows, a, -1, std::move(y));
  }
  int concat_rows(int a, int b) {
    Mat y(value(a).rows() + value(b).rows(), value(a).cols());
    y.topRows(value(a).rows()) = value(a);
    y.bottomRows(value(b).rows()) = value(b);
    return push(Op::kConcatRows, a, b, std::move(y));
  }
  int slice_rows(int a, int r0, int nrows) {
    Mat y = value(a).middleRows(r0, nrows);
    int n = push(Op::kSliceRows, a, -1, std::move(y));
    nodes_[size_t(n)].r0 = r0;
    return n;
  }
  int select_cols(int a, std::vector<int> idx) {
    Mat y(value(a).rows(), Eigen::Index(idx.size()));
    for (size_t j = 0; j < idx.size(); ++j) y.col(Eigen::Index(j)) = value(a).col(idx[j]);
    int n = push(Op::kSelectCols, a, -1, std::move(y));
    nodes_[size_t(n)].idx = std::move(idx);
    return n;
  }
  // Scatters the columns of a into a zero matrix of width n_cols (inverse of
  // select_cols); idx[j] gives the destination of column j.
  int pad_cols(int a, int n_cols, std::vector<int> idx) {
    Mat y = Mat::Zero(value(a).rows(), n_cols);
    for (size_t j = 0; j < idx.size(); ++j) y.col(idx[j]) = value(a).col(Eigen::Index(j));
    int n = push(Op::kPadCols, a, -1, std::move(y));
    nodes_[size_t(n)].idx = std::move(idx);
    return n;
  }
  int concat_cols(int a, int b) {
    Mat y(value(a).rows(), value(a).cols() + value(b).cols());
    y.leftCols(value(a).cols()) = value(a);
    y.rightCols(value(b).cols()) = value(b);
    return push(Op::kConcatCols, a, b, std::move(y));
  }
  int transpose(int a) { return push(Op::kTranspose, a, -1, value(a).transpose()); }
  int sum_cols(int a) { return push(Op::kSumCols, a, -1, value(a).rowwise().sum()); }
  int sum_all(int a) {
    Mat y(1, 1);
    y(0, 0) = value(a).sum();
    return push(Op::kSumAll, a, -1, std::move(y));
  }
  int cumsum_excl_row(int a) {
    const Mat& x = value(a);
    Mat y(1, x.cols());
    double acc = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      y(0, j) = acc;
      acc += x(0, j);
    }
    return push(Op::kCumsumExcl, a, -1, std::move(y));
  }
  int exp(int a) { return push(Op::kExp, a, -1, value(a).array().exp().matrix()); }
  int recip(int a) { return push(Op::kRecip, a, -1, value(a).cwiseInverse()); }
  int tonemap(int a) {
    Mat y = (value(a).array() / (1.0 + value(a).array())).matrix();
    return push(Op::kTonemap, a, -1, std::move(y));
  }
  int clamp(int a, double lo, double hi) {
    Mat y = value(a).cwiseMax(lo).cwiseMin(hi);
    int n = push(Op::kClamp, a, -1, std::move(y));
    nodes_[size_t(n)].s0 = lo;
    nodes_[size_t(n)].s1 = hi;
    return n;
  }

  // ---- positional encoding ----
  int posenc(int x, const PosEncSpec& spec) {
    const Mat& in = value(x);
    if (!in.allFinite()) throw NervError("positional_encode: non-finite input");
    Mat y = encode_matrix(in, spec);
    int n = push(Op::kPosEnc, x, -1, std::move(y));
    nodes_[size_t(n)].enc = spec;
    return n;
  }
  // J_enc(x)^T v: pulls a cotangent w.r.t. the encoding back to coordinates.
  int posenc_pullback(int x, int v, const PosEncSpec& spec) {
    const Mat& xv = value(x);
    const Mat& vv = value(v);
    Mat y = Mat::Zero(xv.rows(), xv.cols());
    pullback_apply(xv, vv, spec, &y);
    int n = push(Op::kPosEncPullback, x, v, std::move(y));
    nodes_[size_t(n)].enc = spec;
    return n;
  }

  // ---- normalization of column 3-vectors ----
  // y = -a/|a| per column; columns with |a| <= eps are zeroed and masked.
  int neg_normalize3(int a, double eps = 1e-8) { return normalize_impl(a, eps, true); }
  int normalize3(int a, double eps = 1e-8) { return normalize_impl(a, eps, false); }

  // 1.0 where the column was non-degenerate (usable as a constant mask).
  Mat normalize_mask(int node) const { return nodes_[size_t(node)].aux; }

  const Mat& value(int node) const { return nodes_[size_t(node)].val; }
  int num_nodes() const { return int(nodes_.size()); }

  // Gradient of <cotangent, output>. Parameter gradients accumulate into
  // `bank`; input-leaf gradients stay readable through input_grad().
  void backward(int root, const Mat& cotangent, GradBank* bank) {
    if (consumed_) throw NervError("backward: tape already consumed");
    consumed_ = true;
    grads_.assign(nodes_.size(), Mat());
    grads_[size_t(root)] = cotangent;
    for (int i = int(nodes_.size()) - 1; i >= 0; --i) {
      if (grads_[size_t(i)].size() == 0) continue;
      step_backward(i, bank);
    }
  }
  void backward_scalar(int root, GradBank* bank) {
    Mat one(1, 1);
    one(0, 0) = 1.0;
    backward(root, one, bank);
  }

  const Mat& input_grad(int node) const {
    if (grads_.empty()) throw NervError("input_grad: backward has not run");
    return grads_[size_t(node)];
  }

  void reset() {
    nodes_.clear();
    grads_.clear();
    consumed_ = false;
  }
  bool consumed() const { return consumed_; }

  // J_enc(x)^T v computed on plain matrices; shared with non-tape callers.
  static void pullback_matrix(const Mat& x, const Mat& v, const PosEncSpec& spec, Mat* out) {
    pullback_apply(x, v, spec, out);
  }

  static Mat encode_matrix(const Mat& in, const PosEncSpec& spec) {
    const Eigen::Index d = in.rows(), n = in.cols();
    Mat y(spec.encoded_width(int(d)), n);
    Eigen::Index row = 0;
    if (spec.include_identity) {
      y.topRows(d) = in;
      row = d;
    }
    double freq = kPi;
    for (int k = 0; k < spec.num_frequencies; ++k, freq *= 2.0) {
      y.middleRows(row, d) = (in.array() * freq).sin().matrix();
      y.middleRows(row + d, d) = (in.array() * freq).cos().matrix();
      row += 2 * d;
    }
    return y;
  }

 private:
  enum class Op {
    kConst, kInput, kLinear, kLinearConst, kLinearT, kAct, kActPrime,
    kAdd, kSub, kHadamard, kHadamardConst, kAffine, kAddConst, kRowScale,
    kScalarMul, kScalarAdd, kBcastCols, kBcastRows, kConcatRows, kSliceRows,
    kSelectCols, kPadCols, kConcatCols, kTranspose, kSumCols, kSumAll, kCumsumExcl,
    kExp, kRecip, kTonemap,
    kClamp, kPosEnc, kPosEncPullback, kNegNormalize3, kNormalize3,
  };

  struct Node {
    Op op;
    int a = -1, b = -1;
    int w_id = -1, b_id = -1;
    Act act = Act::kIdentity;
    PosEncSpec enc;
    double s0 = 0.0, s1 = 0.0;
    int r0 = 0;
    Mat val;
    Mat aux;
    std::vector<int> idx;
  };

  int push(Op op, int a, int b, Mat val) {
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = std::move(val);
    nodes_.push_back(std::move(n));
    return int(nodes_.size()) - 1;
  }

  int normalize_impl(int a, double eps, bool negate) {
    const Mat& x = value(a);
    Mat y(x.rows(), x.cols());
    Mat mask(1, x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double len = x.col(j).norm();
      if (len <= eps) {
        y.col(j).setZero();
        mask(0, j) = 0.0;
      } else {
        y.col(j) = (negate ? -1.0 : 1.0) / len * x.col(j);
        mask(0, j) = 1.0;
      }
    }
    int n = push(negate ? Op::kNegNormalize3 : Op::kNormalize3, a, -1, std::move(y));
    nodes_[size_t(n)].aux = std::move(mask);
    nodes_[size_t(n)].s0 = eps;
    return n;
  }

  void add_grad(int node, const Mat& g) {
    if (node < 0) return;
    Mat& slot = grads_[size_t(node)];
    if (slot.size() == 0)
      slot = g;
    else
      slot += g;
  }

  static void pullback_apply(const Mat& x, const Mat& v, const PosEncSpec& spec, Mat* out) {
    const Eigen::Index d = x.rows();
    Eigen::Index row = 0;
    if (spec.include_identity) {
      *out += v.topRows(d);
      row = d;
    }
    double freq = kPi;
    for (int k = 0; k < spec.num_frequencies; ++k, freq *= 2.0) {
      out->array() += freq * ((x.array() * freq).cos() * v.middleRows(row, d).array() -
                              (x.array() * freq).sin() * v.middleRows(row + d, d).array());
      row += 2 * d;
    }
  }

  void step_backward(int i, GradBank* bank) {
    Node& nd = nodes_[size_t(i)];
    const Mat& u = grads_[size_t(i)];
    switch (nd.op) {
      case Op::kConst:
      case Op::kInput:
        break;
      case Op::kLinear: {
        const Mat& x = value(nd.a);
        bank->grad(nd.w_id).noalias() += u * x.transpose();
        if (nd.b_id >= 0) bank->grad(nd.b_id).col(0).noalias() += u.rowwise().sum();
        add_grad(nd.a, params_->value(nd.w_id).transpose() * u);
        break;
      }
      case Op::kLinearConst:
        add_grad(nd.a, nd.aux.transpose() * u);
        break;
      case Op::kLinearT: {
        const Mat& x = value(nd.a);
        bank->grad(nd.w_id).noalias() += x * u.transpose();
        add_grad(nd.a, params_->value(nd.w_id) * u);
        break;
      }
      case Op::kAct: {
        const Mat& x = value(nd.a);
        Mat g = u.binaryExpr(x, [a = nd.act](double uu, double xx) { return uu * act_prime(a, xx); });
        add_grad(nd.a, g);
        break;
      }
      case Op::kActPrime: {
        const Mat& x = value(nd.a);
        Mat g = u.binaryExpr(x, [a = nd.act](double uu, double xx) { return uu * act_second(a, xx); });
        add_grad(nd.a, g);
        break;
      }
      case Op::kAdd:
        add_grad(nd.a, u);
        add_grad(nd.b, u);
        break;
      case Op::kSub:
        add_grad(nd.a, u);
        add_grad(nd.b, -u);
        break;
      case Op::kHadamard:
        add_grad(nd.a, u.cwiseProduct(value(nd.b)));
        add_grad(nd.b, u.cwiseProduct(value(nd.a)));
        break;
      case Op::kHadamardConst:
        add_grad(nd.a, u.cwiseProduct(nd.aux));
        break;
      case Op::kAffine:
        add_grad(nd.a, nd.s0 * u);
        break;
      case Op::kAddConst:
        add_grad(nd.a, u);
        break;
      case Op::kRowScale: {
        add_grad(nd.a, u.array().rowwise() * value(nd.b).row(0).array());
        Mat gr = (u.cwiseProduct(value(nd.a))).colwise().sum();
        add_grad(nd.b, gr);
        break;
      }
      case Op::kScalarMul: {
        Mat gs(1, 1);
        gs(0, 0) = u.cwiseProduct(value(nd.b)).sum();
        add_grad(nd.a, gs);
        add_grad(nd.b, value(nd.a)(0, 0) * u);
        break;
      }
      case Op::kScalarAdd: {
        Mat gs(1, 1);
        gs(0, 0) = u.sum();
        add_grad(nd.a, gs);
        add_grad(nd.b, u);
        break;
      }
      case Op::kBcastCols:
        add_grad(nd.a, u.rowwise().sum());
        break;
      case Op::kBcastRows:
        add_grad(nd.a, u.colwise().sum());
        break;
      case Op::kConcatRows: {
        const Eigen::Index ra = value(nd.a).rows();
        add_grad(nd.a, u.topRows(ra));
        add_grad(nd.b, u.bottomRows(u.rows() - ra));
        break;
      }
      case Op::kSliceRows: {
        Mat g = Mat::Zero(value(nd.a).rows(), value(nd.a).cols());
        g.middleRows(nd.r0, u.rows()) = u;
        add_grad(nd.a, g);
        break;
      }
      case Op::kSelectCols: {
        Mat g = Mat::Zero(value(nd.a).rows(), value(nd.a).cols());
        for (size_t j = 0; j < nd.idx.size(); ++j) g.col(nd.idx[j]) += u.col(Eigen::Index(j));
        add_grad(nd.a, g);
        break;
      }
      case Op::kPadCols: {
        Mat g(value(nd.a).rows(), value(nd.a).cols());
        for (size_t j = 0; j < nd.idx.size(); ++j) g.col(Eigen::Index(j)) = u.col(nd.idx[j]);
        add_grad(nd.a, g);
        break;
      }
      case Op::kConcatCols:
        add_grad(nd.a, u.leftCols(value(nd.a).cols()));
        add_grad(nd.b, u.rightCols(u.cols() - value(nd.a).cols()));
        break;
      case Op::kTranspose:
        add_grad(nd.a, u.transpose());
        break;
      case Op::kSumCols:
        add_grad(nd.a, u.col(0).replicate(1, value(nd.a).cols()));
        break;
      case Op::kSumAll:
        add_grad(nd.a, Mat::Constant(value(nd.a).rows(), value(nd.a).cols(), u(0, 0)));
        break;
      case Op::kCumsumExcl: {
        Mat g(1, u.cols());
        double acc = 0.0;
        for (Eigen::Index j = u.cols() - 1; j >= 0; --j) {
          g(0, j) = acc;
          acc += u(0, j);
        }
        add_grad(nd.a, g);
        break;
      }
      case Op::kExp:
        add_grad(nd.a, u.cwiseProduct(nd.val));
        break;
      case Op::kRecip:
        add_grad(nd.a, -u.cwiseProduct(nd.val).cwiseProduct(nd.val));
        break;
      case Op::kTonemap: {
        const Mat& x = value(nd.a);
        Mat g = u.binaryExpr(x, [](double uu, double xx) {
          const double d = 1.0 + xx;
          return uu / (d * d);
        });
        add_grad(nd.a, g);
        break;
      }
      case Op::kClamp: {
        const Mat& x = value(nd.a);
        Mat g = u;
        for (Eigen::Index c = 0; c < x.cols(); ++c)
          for (Eigen::Index r = 0; r < x.rows(); ++r)
            if (x(r, c) <= nd.s0 || x(r, c) >= nd.s1) g(r, c) = 0.0;
        add_grad(nd.a, g);
        break;
      }
      case Op::kPosEnc: {
        Mat g = Mat::Zero(value(nd.a).rows(), value(nd.a).cols());
        pullback_apply(value(nd.a), u, nd.enc, &g);
        add_grad(nd.a, g);
        break;
      }
      case Op::kPosEncPullback: {
        const Mat& x = value(nd.a);
        const Mat& v = value(nd.b);
        const Eigen::Index d = x.rows();
        // dv: J_enc(x) u
        Mat gv(v.rows(), v.cols());
        Eigen::Index row = 0;
        if (nd.enc.include_identity) {
          gv.topRows(d) = u;
          row = d;
        }
        double freq = kPi;
        Mat gx = Mat::Zero(d, x.cols());
        for (int k = 0; k < nd.enc.num_frequencies; ++k, freq *= 2.0) {
          const auto sin_k = (x.array() * freq).sin();
          const auto cos_k = (x.array() * freq).cos();
          gv.middleRows(row, d) = (freq * cos_k * u.array()).matrix();
          gv.middleRows(row + d, d) = (-freq * sin_k * u.array()).matrix();
          gx.array() += freq * freq *
                        (-sin_k * v.middleRows(row, d).array() -
                         cos_k * v.middleRows(row + d, d).array()) *
                        u.array();
          row += 2 * d;
        }
        add_grad(nd.b, gv);
        add_grad(nd.a, gx);
        break;
      }
      case Op::kNegNormalize3:
      case Op::kNormalize3: {
        const Mat& x = value(nd.a);
        Mat g = Mat::Zero(x.rows(), x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
          if (nd.aux(0, j) == 0.0) continue;
          const double len = x.col(j).norm();
          const Eigen::Vector3d y = nd.val.col(j);
          const Eigen::Vector3d uc = u.col(j);
          const double sign = (nd.op == Op::kNegNormalize3) ? -1.0 : 1.0;
          g.col(j) = sign / len * (uc - y * y.dot(uc));
        }
        add_grad(nd.a, g);
        break;
      }
    }
  }

  const ParamBank* params_;
  std::vector<Node> nodes_;
  std::vector<Mat> grads_;
  bool consumed_ = false;
};

}  // namespace nerv
