// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "nerv/tape.hpp"
#include "nerv/vec.hpp"

namespace nerv {

// Sinusoidal lift of a coordinate batch (columns). Throws on non-finite input.
inline Mat positional_encode(const Mat& x, const PosEncSpec& spec) {
  if (!x.allFinite()) throw NervError("positional_encode: non-finite input");
  return Tape::encode_matrix(x, spec);
}

struct DenseLayer {
  int w_id = -1;
  int b_id = -1;
  Act act = Act::kIdentity;
};

// Result of a recorded forward pass; keeps the nodes the gradient network and
// auxiliary heads need to hook into.
struct TapeForward {
  int out = -1;
  std::vector<int> preact;  // pre-activation node per layer
  int last_hidden = -1;     // post-activation node of the last hidden layer
};

// Fully-connected network. Parameters live in an external ParamBank so the
// optimizer and checkpoints can address them uniformly.
class DenseNetwork {
 public:
  DenseNetwork() = default;

  static DenseNetwork create(ParamBank* bank, int in_width, const std::vector<int>& hidden,
                             int out_width, Act hidden_act, Act out_act, Rng* rng) {
    DenseNetwork net;
    net.in_width_ = in_width;
    net.out_width_ = out_width;
    net.hidden_widths_ = hidden;
    int prev = in_width;
    for (int width : hidden) {
      net.layers_.push_back(make_layer(bank, prev, width, hidden_act, rng));
      prev = width;
    }
    net.layers_.push_back(make_layer(bank, prev, out_width, out_act, rng));
    return net;
  }

  int in_width() const { return in_width_; }
  int out_width() const { return out_width_; }
  const std::vector<int>& hidden_widths() const { return hidden_widths_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<int> param_ids() const {
    std::vector<int> ids;
    for (const auto& l : layers_) {
      ids.push_back(l.w_id);
      ids.push_back(l.b_id);
    }
    return ids;
  }

  // Affine + activation composition over a column batch.
  Mat forward_plain(const ParamBank& bank, const Mat& x) const {
    if (x.rows() != in_width_) throw NervError("forward: input width mismatch");
    Mat cur = x;
    for (const auto& l : layers_) {
      Mat z = bank.value(l.w_id) * cur;
      z.colwise() += Eigen::VectorXd(bank.value(l.b_id).col(0));
      if (l.act == Act::kIdentity)
        cur = std::move(z);
      else
        cur = z.unaryExpr([a = l.act](double v) { return act_eval(a, v); });
    }
    if (!cur.allFinite()) throw NervError("forward: non-finite network output");
    return cur;
  }

  TapeForward forward_tape(Tape* tape, int x) const {
    if (tape->value(x).rows() != in_width_) throw NervError("forward: input width mismatch");
    TapeForward r;
    int cur = x;
    for (size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      int z = tape->linear(l.w_id, l.b_id, cur);
      r.preact.push_back(z);
      cur = (l.act == Act::kIdentity) ? z : tape->activation(l.act, z);
      if (k + 1 < layers_.size()) r.last_hidden = cur;
    }
    r.out = cur;
    return r;
  }

  // Emits the gradient of raw output row `row` w.r.t. the network input as
  // further tape operations, so downstream losses differentiate through it.
  int input_gradient_tape(Tape* tape, const TapeForward& fwd, int row = 0) const {
    const Eigen::Index n = tape->value(fwd.out).cols();
    Mat seed = Mat::Zero(out_width_, n);
    seed.row(row).setOnes();
    int v = tape->constant(std::move(seed));
    for (int k = int(layers_.size()) - 1; k >= 0; --k) {
      const auto& l = layers_[size_t(k)];
      if (l.act != Act::kIdentity) {
        int dp = tape->activation_prime(l.act, fwd.preact[size_t(k)]);
        v = tape->hadamard(v, dp);
      }
      v = tape->linear_t(l.w_id, v);
    }
    return v;  // gradient w.r.t. the (encoded) input, one column per batch entry
  }

  // Plain raw forward plus gradient of output row `row` w.r.t. the input.
  // Activations of the final layer are ignored (raw pre-activation returned).
  void value_and_input_grad(const ParamBank& bank, const Mat& x, int row, Mat* raw_out,
                            Mat* input_grad) const {
    if (x.rows() != in_width_) throw NervError("forward: input width mismatch");
    std::vector<Mat> preact(layers_.size());
    Mat cur = x;
    for (size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      Mat z = bank.value(l.w_id) * cur;
      z.colwise() += Eigen::VectorXd(bank.value(l.b_id).col(0));
      preact[k] = z;
      if (k + 1 == layers_.size() || l.act == Act::kIdentity)
        cur = std::move(z);
      else
        cur = preact[k].unaryExpr([a = l.act](double v) { return act_eval(a, v); });
    }
    *raw_out = preact.back();
    Mat v = Mat::Zero(out_width_, x.cols());
    v.row(row).setOnes();
    for (int k = int(layers_.size()) - 1; k >= 0; --k) {
      const auto& l = layers_[size_t(k)];
      if (k + 1 < int(layers_.size()) && l.act != Act::kIdentity) {
        Mat dp = preact[size_t(k)].unaryExpr([a = l.act](double vv) { return act_prime(a, vv); });
        v = v.cwiseProduct(dp);
      }
      v = bank.value(l.w_id).transpose() * v;
    }
    *input_grad = std::move(v);
  }

 private:
  static DenseLayer make_layer(ParamBank* bank, int in, int out, Act act, Rng* rng) {
    const double bound = std::sqrt(6.0 / double(in + out));
    Mat w(out, in);
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = rng->uniform(-bound, bound);
    DenseLayer l;
    l.w_id = bank->add(std::move(w));
    l.b_id = bank->add(Mat::Zero(out, 1));
    l.act = act;
    return l;
  }

  std::vector<DenseLayer> layers_;
  std::vector<int> hidden_widths_;
  int in_width_ = 0;
  int out_width_ = 0;
};

// forward(net, input, tape): spec-level convenience wrappers.
inline Mat forward(const DenseNetwork& net, const ParamBank& bank, const Mat& input) {
  return net.forward_plain(bank, input);
}
inline int forward(const DenseNetwork& net, Tape* tape, int input) {
  return net.forward_tape(tape, input).out;
}

}  // namespace nerv
