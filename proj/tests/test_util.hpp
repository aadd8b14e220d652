// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test suites: finite-difference oracles and small
// reference implementations kept independent of the library code they check.

#pragma once

#include <cmath>
#include <functional>

#include "nerv/tape.hpp"

namespace nerv_test {

inline double rel_err(double got, double want) {
  const double denom = std::fmax(std::fabs(want), 1e-12);
  return std::fabs(got - want) / denom;
}

// Symmetric relative error, tolerant when both values are tiny.
inline double rel_err_sym(double a, double b, double floor = 1e-9) {
  const double denom = std::fmax(std::fmax(std::fabs(a), std::fabs(b)), floor);
  return std::fabs(a - b) / denom;
}

// Central finite difference of f w.r.t. one ParamBank entry element.
inline double fd_param(nerv::ParamBank* bank, int id, Eigen::Index r, Eigen::Index c,
                       const std::function<double()>& f, double h = 1e-4) {
  double& slot = bank->value(id)(r, c);
  const double saved = slot;
  slot = saved + h;
  const double fp = f();
  slot = saved - h;
  const double fm = f();
  slot = saved;
  return (fp - fm) / (2.0 * h);
}

// Central finite difference w.r.t. an element of a plain matrix input.
inline double fd_input(nerv::Mat* x, Eigen::Index r, Eigen::Index c,
                       const std::function<double()>& f, double h = 1e-4) {
  double& slot = (*x)(r, c);
  const double saved = slot;
  slot = saved + h;
  const double fp = f();
  slot = saved - h;
  const double fm = f();
  slot = saved;
  return (fp - fm) / (2.0 * h);
}

}  // namespace nerv_test
