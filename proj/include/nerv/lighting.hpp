// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Known illumination: a lat-long environment radiance grid (default 12x24)
// plus zero or more point lights outside the grid with inverse-square falloff.

#pragma once

#include <vector>

#include "nerv/tape.hpp"
#include "nerv/vec.hpp"

namespace nerv {

struct PointLight {
  Vec3 position;
  Rgb intensity;  // radiant intensity; irradiance at distance d is I/d^2
};

class EnvironmentGrid {
 public:
  EnvironmentGrid(int height = 12, int width = 24) : h_(height), w_(width) {
    radiance_.assign(size_t(h_ * w_), Rgb(0.0));
    build_geometry();
  }

  static EnvironmentGrid constant(const Rgb& value, int height = 12, int width = 24) {
    EnvironmentGrid g(height, width);
    for (auto& c : g.radiance_) c = value;
    return g;
  }

  int height() const { return h_; }
  int width() const { return w_; }
  int cells() const { return h_ * w_; }
  Rgb& at(int row, int col) { return radiance_[size_t(row * w_ + col)]; }
  const Rgb& at(int row, int col) const { return radiance_[size_t(row * w_ + col)]; }

  // Cell-center direction (pointing from the shaded point toward the
  // environment), z-up lat-long: row sweeps polar angle from +z.
  const Mat& directions() const { return dirs_; }
  // Exact per-cell solid angles, dphi * (cos th0 - cos th1); sums to 4*pi.
  const Eigen::RowVectorXd& solid_angles() const { return omega_; }

  // 3 x cells radiance matrix.
  Mat radiance_rows() const {
    Mat e(3, h_ * w_);
    for (int i = 0; i < h_ * w_; ++i) {
      e(0, i) = radiance_[size_t(i)].x;
      e(1, i) = radiance_[size_t(i)].y;
      e(2, i) = radiance_[size_t(i)].z;
    }
    return e;
  }

  bool is_black() const {
    for (const auto& c : radiance_)
      if (c.x != 0.0 || c.y != 0.0 || c.z != 0.0) return false;
    return true;
  }

 private:
  void build_geometry() {
    dirs_.resize(3, h_ * w_);
    omega_.resize(h_ * w_);
    const double dphi = 2.0 * kPi / w_;
    for (int r = 0; r < h_; ++r) {
      const double th0 = kPi * r / h_;
      const double th1 = kPi * (r + 1) / h_;
      const double thc = 0.5 * (th0 + th1);
      const double area = dphi * (std::cos(th0) - std::cos(th1));
      for (int c = 0; c < w_; ++c) {
        const double phi = dphi * (c + 0.5);
        const int i = r * w_ + c;
        dirs_(0, i) = std::sin(thc) * std::cos(phi);
        dirs_(1, i) = std::sin(thc) * std::sin(phi);
        dirs_(2, i) = std::cos(thc);
        omega_(i) = area;
      }
    }
  }

  int h_, w_;
  std::vector<Rgb> radiance_;
  Mat dirs_;
  Eigen::RowVectorXd omega_;
};

struct LightingCondition {
  EnvironmentGrid env;
  std::vector<PointLight> points;

  bool is_black() const { return env.is_black() && points.empty(); }

  LightingCondition scaled(double s) const {
    LightingCondition out = *this;
    for (int r = 0; r < out.env.height(); ++r)
      for (int c = 0; c < out.env.width(); ++c) out.env.at(r, c) *= s;
    for (auto& p : out.points) p.intensity *= s;
    return out;
  }
};

// Adds two lighting conditions cellwise (grids must match in resolution).
inline LightingCondition operator+(const LightingCondition& a, const LightingCondition& b) {
  if (a.env.height() != b.env.height() || a.env.width() != b.env.width())
    throw NervError("lighting sum: mismatched environment grids");
  LightingCondition out = a;
  for (int r = 0; r < out.env.height(); ++r)
    for (int c = 0; c < out.env.width(); ++c) out.env.at(r, c) += b.env.at(r, c);
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  return out;
}

}  // namespace nerv
