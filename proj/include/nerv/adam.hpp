// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "nerv/tape.hpp"

namespace nerv {

// Exponential decay from lr_start at step 0 to lr_end at total_steps.
inline double lr_schedule(int64_t step, int64_t total_steps, double lr_start, double lr_end) {
  if (step < 0 || step > total_steps || !(lr_start >= lr_end) || !(lr_end > 0.0))
    throw NervError("lr_schedule: invalid arguments");
  if (step == 0) return lr_start;
  if (step == total_steps) return lr_end;
  const double frac = double(step) / double(total_steps);
  return lr_start * std::pow(lr_end / lr_start, frac);
}

// Bias-corrected Adam over a subset of ParamBank entries.
class AdamState {
 public:
  AdamState() = default;
  AdamState(const ParamBank& bank, std::vector<int> param_ids, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8)
      : ids_(std::move(param_ids)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (int id : ids_) {
      m_.push_back(Mat::Zero(bank.value(id).rows(), bank.value(id).cols()));
      v_.push_back(Mat::Zero(bank.value(id).rows(), bank.value(id).cols()));
    }
  }

  void step(ParamBank* bank, const GradBank& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (size_t i = 0; i < ids_.size(); ++i) {
      const int id = ids_[i];
      const Mat& g = grads.grad(id);
      Mat& p = bank->value(id);
      if (g.rows() != p.rows() || g.cols() != p.cols())
        throw NervError("adam_step: shape mismatch");
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      p.array() -= lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  const std::vector<int>& param_ids() const { return ids_; }
  Mat& first_moment(size_t i) { return m_[i]; }
  Mat& second_moment(size_t i) { return v_[i]; }
  const Mat& first_moment(size_t i) const { return m_[i]; }
  const Mat& second_moment(size_t i) const { return v_[i]; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return eps_; }

 private:
  std::vector<int> ids_;
  std::vector<Mat> m_, v_;
  int64_t t_ = 0;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

inline void adam_step(ParamBank* params, const GradBank& grads, AdamState* state, double lr) {
  state->step(params, grads, lr);
}

}  // namespace nerv
