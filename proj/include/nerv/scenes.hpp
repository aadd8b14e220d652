// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Procedural analytic scenes: signed-distance compositions with closed-form
// gradients, a logistic density profile, and piecewise material fields. These
// are the ground-truth substrate the learned fields are checked against.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "nerv/brdf.hpp"
#include "nerv/vec.hpp"

namespace nerv {

struct SdfHit {
  double distance = 0.0;
  Vec3 gradient{0.0, 0.0, 1.0};
  int material = 0;
};

// Primitive / combinator tree. Gradients are closed-form per node; smooth
// union uses the exponential smooth-min whose gradient is the softmin blend.
// eval_batch computes distances only, vectorized over columns; it must agree
// bitwise with eval() since the brute-force oracles alternate between them.
class SdfNode {
 public:
  virtual ~SdfNode() = default;
  virtual SdfHit eval(const Vec3& p) const = 0;
  virtual void eval_batch(const Mat& pts, Eigen::RowVectorXd* dist) const = 0;
};

class SdfSphere final : public SdfNode {
 public:
  SdfSphere(Vec3 center, double radius, int material)
      : center_(center), radius_(radius), material_(material) {}
  SdfHit eval(const Vec3& p) const override {
    const Vec3 d = p - center_;
    const double len = norm(d);
    SdfHit h;
    h.distance = len - radius_;
    h.gradient = len > 1e-12 ? d / len : Vec3{0.0, 0.0, 1.0};
    h.material = material_;
    return h;
  }
  void eval_batch(const Mat& pts, Eigen::RowVectorXd* dist) const override {
    dist->resize(pts.cols());
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const double dx = pts(0, j) - center_.x;
      const double dy = pts(1, j) - center_.y;
      const double dz = pts(2, j) - center_.z;
      (*dist)(j) = std::sqrt(dx * dx + dy * dy + dz * dz) - radius_;
    }
  }

 private:
  Vec3 center_;
  double radius_;
  int material_;
};

class SdfBox final : public SdfNode {
 public:
  SdfBox(Vec3 center, Vec3 half_extent, int material)
      : center_(center), half_(half_extent), material_(material) {}
  SdfHit eval(const Vec3& p) const override {
    const Vec3 d = p - center_;
    const Vec3 a{std::fabs(d.x), std::fabs(d.y), std::fabs(d.z)};
    const Vec3 q = a - half_;
    SdfHit h;
    h.material = material_;
    const Vec3 qp = max(q, Vec3(0.0));
    const double outside = norm(qp);
    const double inside = std::fmin(max_component(q), 0.0);
    h.distance = outside + inside;
    if (outside > 1e-12) {
      Vec3 g = qp / outside;
      h.gradient = {std::copysign(g.x, d.x), std::copysign(g.y, d.y), std::copysign(g.z, d.z)};
    } else {
      // Inside: gradient points along the axis of least penetration.
      int axis = 0;
      if (q.y > q[axis]) axis = 1;
      if (q.z > q[axis]) axis = 2;
      Vec3 g(0.0);
      g[axis] = std::copysign(1.0, d[axis]);
      h.gradient = g;
    }
    return h;
  }
  void eval_batch(const Mat& pts, Eigen::RowVectorXd* dist) const override {
    dist->resize(pts.cols());
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const double qx = std::fabs(pts(0, j) - center_.x) - half_.x;
      const double qy = std::fabs(pts(1, j) - center_.y) - half_.y;
      const double qz = std::fabs(pts(2, j) - center_.z) - half_.z;
      const double px = std::fmax(qx, 0.0), py = std::fmax(qy, 0.0), pz = std::fmax(qz, 0.0);
      const double outside = std::sqrt(px * px + py * py + pz * pz);
      const double inside = std::fmin(std::fmax(qx, std::fmax(qy, qz)), 0.0);
      (*dist)(j) = outside + inside;
    }
  }

 private:
  Vec3 center_, half_;
  int material_;
};

class SdfUnion final : public SdfNode {
 public:
  SdfUnion(std::shared_ptr<SdfNode> a, std::shared_ptr<SdfNode> b)
      : a_(std::move(a)), b_(std::move(b)) {}
  SdfHit eval(const Vec3& p) const override {
    const SdfHit ha = a_->eval(p);
    const SdfHit hb = b_->eval(p);
    return ha.distance <= hb.distance ? ha : hb;
  }
  void eval_batch(const Mat& pts, Eigen::RowVectorXd* dist) const override {
    Eigen::RowVectorXd db;
    a_->eval_batch(pts, dist);
    b_->eval_batch(pts, &db);
    *dist = dist->cwiseMin(db);
  }

 private:
  std::shared_ptr<SdfNode> a_, b_;
};

class SdfSmoothUnion final : public SdfNode {
 public:
  SdfSmoothUnion(std::shared_ptr<SdfNode> a, std::shared_ptr<SdfNode> b, double k)
      : a_(std::move(a)), b_(std::move(b)), k_(k) {}
  SdfHit eval(const Vec3& p) const override {
    const SdfHit ha = a_->eval(p);
    const SdfHit hb = b_->eval(p);
    // smin(a,b) = -k log(exp(-a/k) + exp(-b/k)), stabilized around the min.
    const double m = std::fmin(ha.distance, hb.distance);
    const double ea = std::exp(-(ha.distance - m) / k_);
    const double eb = std::exp(-(hb.distance - m) / k_);
    SdfHit h;
    h.distance = m - k_ * std::log(ea + eb);
    const double wa = ea / (ea + eb);
    h.gradient = wa * ha.gradient + (1.0 - wa) * hb.gradient;
    h.material = ha.distance <= hb.distance ? ha.material : hb.material;
    return h;
  }
  void eval_batch(const Mat& pts, Eigen::RowVectorXd* dist) const override {
    Eigen::RowVectorXd db;
    a_->eval_batch(pts, dist);
    b_->eval_batch(pts, &db);
    for (Eigen::Index j = 0; j < dist->size(); ++j) {
      const double m = std::fmin((*dist)(j), db(j));
      const double ea = std::exp(-((*dist)(j) - m) / k_);
      const double eb = std::exp(-(db(j) - m) / k_);
      (*dist)(j) = m - k_ * std::log(ea + eb);
    }
  }

 private:
  std::shared_ptr<SdfNode> a_, b_;
  double k_;
};

struct SceneMaterial {
  Rgb albedo{0.5, 0.5, 0.5};
  double roughness = 0.5;
};

// Analytic scene: density sigma(x) = sigma_max * logistic(-sdf(x)/w) plus
// piecewise material fields selected by the nearest primitive.
class AnalyticScene {
 public:
  AnalyticScene(std::string id, std::shared_ptr<SdfNode> root, std::vector<SceneMaterial> mats,
                Aabb bbox)
      : id_(std::move(id)), root_(std::move(root)), materials_(std::move(mats)), bbox_(bbox) {
    const double diag = bbox_.diagonal();
    shell_width_ = 0.02 * diag;
    sigma_max_ = 50.0 / diag;
  }

  const std::string& id() const { return id_; }
  const Aabb& bbox() const { return bbox_; }
  double sigma_max() const { return sigma_max_; }
  double shell_width() const { return shell_width_; }

  double sdf(const Vec3& p) const { return root_->eval(p).distance; }

  double density(const Vec3& p) const {
    if (!is_finite(p)) throw NervError("analytic_density: non-finite point");
    const double s = root_->eval(p).distance;
    return sigma_max_ / (1.0 + std::exp(s / shell_width_));
  }

  Eigen::RowVectorXd density_batch(const Mat& pts) const {
    Eigen::RowVectorXd dist;
    root_->eval_batch(pts, &dist);
    for (Eigen::Index j = 0; j < dist.size(); ++j)
      dist(j) = sigma_max_ / (1.0 + std::exp(dist(j) / shell_width_));
    return dist;
  }

  // Outward surface normal from the closed-form sdf gradient; equals
  // -grad(sigma)/|grad(sigma)| since the density profile decreases outward.
  Vec3 normal(const Vec3& p, bool* degenerate = nullptr) const {
    const SdfHit h = root_->eval(p);
    const double len = norm(h.gradient);
    if (len <= 1e-12) {
      if (degenerate) *degenerate = true;
      return {0.0, 0.0, 1.0};
    }
    if (degenerate) *degenerate = false;
    return h.gradient / len;
  }

  SceneMaterial material(const Vec3& p) const {
    const SdfHit h = root_->eval(p);
    return materials_[size_t(h.material)];
  }

  BrdfParams brdf_params(const Vec3& p) const {
    const SceneMaterial m = material(p);
    return {m.albedo, m.roughness, normal(p)};
  }

 private:
  std::string id_;
  std::shared_ptr<SdfNode> root_;
  std::vector<SceneMaterial> materials_;
  Aabb bbox_;
  double shell_width_ = 0.02;
  double sigma_max_ = 10.0;
};

inline double analytic_density(const AnalyticScene& s, const Vec3& x) { return s.density(x); }
inline Vec3 analytic_normal(const AnalyticScene& s, const Vec3& x) { return s.normal(x); }

// -----------------------------------------------------------------------------
// Scene registry. Desk scenes:
//  - "sphere":       single diffuse sphere, constant albedo (fit experiments)
//  - "sphere-plane": diffuse sphere resting on a glossy ground slab
//  - "two-box":      red and white boxes facing across a gap (color bleeding)
//  - "sphere-wall":  sphere beside a tall wall (interreflection oracle)
// -----------------------------------------------------------------------------

inline AnalyticScene make_scene(const std::string& id) {
  if (id == "sphere") {
    auto root = std::make_shared<SdfSphere>(Vec3{0, 0, 0}, 1.0, 0);
    return AnalyticScene(id, root, {{Rgb{0.6, 0.6, 0.6}, 0.8}},
                         Aabb{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}});
  }
  if (id == "sphere-plane") {
    auto sphere = std::make_shared<SdfSphere>(Vec3{0, 0, 0.15}, 0.55, 0);
    auto ground = std::make_shared<SdfBox>(Vec3{0, 0, -0.55}, Vec3{1.35, 1.35, 0.15}, 1);
    auto root = std::make_shared<SdfUnion>(sphere, ground);
    return AnalyticScene(id, root,
                         {{Rgb{0.75, 0.32, 0.24}, 0.75}, {Rgb{0.55, 0.58, 0.62}, 0.15}},
                         Aabb{{-1.5, -1.5, -0.9}, {1.5, 1.5, 0.9}});
  }
  if (id == "two-box") {
    auto a = std::make_shared<SdfBox>(Vec3{-0.45, 0, -0.1}, Vec3{0.3, 0.3, 0.5}, 0);
    auto b = std::make_shared<SdfBox>(Vec3{0.45, 0, -0.1}, Vec3{0.3, 0.3, 0.5}, 1);
    auto root = std::make_shared<SdfUnion>(a, b);
    return AnalyticScene(id, root, {{Rgb{0.80, 0.15, 0.10}, 0.85}, {Rgb{0.85, 0.85, 0.85}, 0.85}},
                         Aabb{{-1.2, -1.2, -0.9}, {1.2, 1.2, 0.9}});
  }
  if (id == "sphere-wall") {
    auto sphere = std::make_shared<SdfSphere>(Vec3{0.35, 0, 0}, 0.5, 0);
    auto wall = std::make_shared<SdfBox>(Vec3{-0.75, 0, 0}, Vec3{0.08, 0.9, 0.9}, 1);
    auto root = std::make_shared<SdfUnion>(sphere, wall);
    return AnalyticScene(id, root, {{Rgb{0.85, 0.55, 0.20}, 0.8}, {Rgb{0.85, 0.85, 0.85}, 0.8}},
                         Aabb{{-1.2, -1.2, -1.2}, {1.2, 1.2, 1.2}});
  }
  throw NervError("unknown scene id: " + id + " (valid: sphere, sphere-plane, two-box, sphere-wall)");
}

// -----------------------------------------------------------------------------
// Pinhole camera.
// -----------------------------------------------------------------------------

struct CameraPose {
  Vec3 position{0, -3, 0};
  Vec3 lookat{0, 0, 0};
  Vec3 up{0, 0, 1};
  double fov_deg = 40.0;  // vertical field of view
  int width = 64;
  int height = 64;

  void validate() const {
    if (!(fov_deg > 0.0 && fov_deg < 120.0)) throw NervError("camera: fov out of range");
    if (width <= 0 || height <= 0) throw NervError("camera: bad resolution");
    if (norm(cross(lookat - position, up)) < 1e-9) throw NervError("camera: up parallel to view");
  }

  // Marching direction (into the scene) through the center of pixel (ix, iy),
  // row 0 at the top of the image.
  Vec3 pixel_direction(int ix, int iy) const {
    const Vec3 fwd = normalize(lookat - position);
    const Vec3 right = normalize(cross(fwd, up));
    const Vec3 cam_up = cross(right, fwd);
    const double tan_half = std::tan(0.5 * fov_deg * kPi / 180.0);
    const double aspect = double(width) / double(height);
    const double px = (2.0 * (ix + 0.5) / width - 1.0) * tan_half * aspect;
    const double py = (1.0 - 2.0 * (iy + 0.5) / height) * tan_half;
    return normalize(fwd + px * right + py * cam_up);
  }
};

}  // namespace nerv
