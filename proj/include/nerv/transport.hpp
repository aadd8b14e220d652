// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Light transport: brute-force transmittance / expected-depth quadrature,
// emission-absorption compositing, direct shading against the environment
// grid and point lights, one-bounce indirect shading at the expected
// termination depth, and the full per-ray rendering procedure.

#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <numeric>
#include <vector>

#include "nerv/brdf.hpp"
#include "nerv/fields.hpp"
#include "nerv/lighting.hpp"
#include "nerv/scenes.hpp"
#include "nerv/tape.hpp"
#include "nerv/vec.hpp"

namespace nerv {

// Camera rays march along x(t) = c - t*wo, i.e. dir is the marching direction
// and -dir is the outgoing (toward camera) direction used in shading.
struct Ray {
  Vec3 origin;
  Vec3 dir;  // unit marching direction
  double t_near = 0.0;
  double t_far = 0.0;

  Vec3 at(double t) const { return origin + t * dir; }
};

struct RaySampleSet {
  std::vector<double> depths;          // t_j, stratified
  double spacing = 0.0;                // delta
  std::vector<double> densities;       // sigma_j
  std::vector<double> transmittances;  // V_j = exp(-sum_{s<j} sigma_s delta)
  std::vector<double> alphas;          // 1 - exp(-sigma_j delta)

  int size() const { return int(depths.size()); }
  double weight(int j) const { return transmittances[size_t(j)] * alphas[size_t(j)]; }
  double total_weight() const {
    double w = 0.0;
    for (int j = 0; j < size(); ++j) w += weight(j);
    return w;
  }
  double end_transmittance() const {
    if (depths.empty()) return 1.0;
    return transmittances.back() * std::exp(-densities.back() * spacing);
  }

  static RaySampleSet from_densities(std::vector<double> depths, double spacing,
                                     std::vector<double> densities) {
    RaySampleSet s;
    s.depths = std::move(depths);
    s.spacing = spacing;
    s.densities = std::move(densities);
    s.transmittances.resize(s.densities.size());
    s.alphas.resize(s.densities.size());
    double acc = 0.0;
    for (size_t j = 0; j < s.densities.size(); ++j) {
      s.transmittances[j] = std::exp(-acc);
      s.alphas[j] = 1.0 - std::exp(-s.densities[j] * spacing);
      acc += s.densities[j] * spacing;
    }
    return s;
  }
};

struct RadianceBreakdown {
  Rgb total{0, 0, 0};
  Rgb direct{0, 0, 0};
  Rgb indirect{0, 0, 0};
  double shadow_fraction = 1.0;  // occluded / unoccluded direct, in [0, 1]
};

struct QueryCounters {
  int64_t density_evals = 0;
  int64_t visibility_evals = 0;
  void merge(const QueryCounters& o) {
    density_evals += o.density_evals;
    visibility_evals += o.visibility_evals;
  }
};

using DensityFn = std::function<double(const Vec3&)>;

// -----------------------------------------------------------------------------
// Brute-force oracles (midpoint rule over the in-box segment).
// -----------------------------------------------------------------------------

inline double transmittance_brute(const DensityFn& sigma, const Aabb& box, const Vec3& x,
                                  const Vec3& omega, int n_steps,
                                  int64_t* eval_counter = nullptr) {
  if (n_steps < 2) throw NervError("transmittance_brute: n_steps < 2");
  double t0, t1;
  if (!box.intersect(x, omega, &t0, &t1) || t1 <= t0) return 1.0;
  const double h = (t1 - t0) / n_steps;
  double optical = 0.0;
  for (int i = 0; i < n_steps; ++i) {
    optical += sigma(x + (t0 + (i + 0.5) * h) * omega) * h;
  }
  if (eval_counter) *eval_counter += n_steps;
  return std::exp(-optical);
}

// Expected termination depth from x along omega; residual transmittance puts
// its mass at the segment end, so empty rays report the exit distance.
inline double expected_depth_brute(const DensityFn& sigma, const Aabb& box, const Vec3& x,
                                   const Vec3& omega, int n_steps,
                                   int64_t* eval_counter = nullptr) {
  if (n_steps < 2) throw NervError("expected_depth_brute: n_steps < 2");
  double t0, t1;
  if (!box.intersect(x, omega, &t0, &t1) || t1 <= t0) return 0.0;
  const double h = (t1 - t0) / n_steps;
  double trans = 1.0;
  double depth = 0.0;
  for (int i = 0; i < n_steps; ++i) {
    const double t_mid = t0 + (i + 0.5) * h;
    const double s = sigma(x + t_mid * omega);
    const double a = 1.0 - std::exp(-s * h);
    depth += trans * a * t_mid;
    trans *= 1.0 - a;
  }
  depth += trans * t1;
  if (eval_counter) *eval_counter += n_steps;
  return depth;
}

// Shared march computing transmittance and expected depth in one pass.
inline void march_vis_depth(const DensityFn& sigma, const Aabb& box, const Vec3& x,
                            const Vec3& omega, int n_steps, double* vis, double* depth,
                            int64_t* eval_counter = nullptr) {
  double t0, t1;
  if (!box.intersect(x, omega, &t0, &t1) || t1 <= t0) {
    *vis = 1.0;
    *depth = 0.0;
    return;
  }
  const double h = (t1 - t0) / n_steps;
  double trans = 1.0;
  double d = 0.0;
  for (int i = 0; i < n_steps; ++i) {
    const double t_mid = t0 + (i + 0.5) * h;
    const double a = 1.0 - std::exp(-sigma(x + t_mid * omega) * h);
    d += trans * a * t_mid;
    trans *= 1.0 - a;
  }
  *vis = trans;
  *depth = d + trans * t1;
  if (eval_counter) *eval_counter += n_steps;
}

// Batched march over a direction fan from one origin, computing transmittance
// and expected depth per direction with the scene's vectorized density.
// Matches march_vis_depth step for step.
inline void march_vis_depth_rows(const AnalyticScene& scene, const Vec3& x, const Mat& dirs,
                                 int n_steps, Eigen::RowVectorXd* v, Eigen::RowVectorXd* d,
                                 int64_t* eval_counter = nullptr) {
  const Eigen::Index k = dirs.cols();
  v->setOnes(k);
  d->setZero(k);
  Eigen::RowVectorXd t0(k), t1(k), h(k);
  std::vector<Eigen::Index> valid;
  for (Eigen::Index j = 0; j < k; ++j) {
    double a, b;
    if (scene.bbox().intersect(x, {dirs(0, j), dirs(1, j), dirs(2, j)}, &a, &b) && b > a) {
      t0(j) = a;
      t1(j) = b;
      h(j) = (b - a) / n_steps;
      valid.push_back(j);
    }
  }
  if (valid.empty()) return;
  Mat pts(3, Eigen::Index(valid.size()));
  Eigen::RowVectorXd trans = Eigen::RowVectorXd::Ones(Eigen::Index(valid.size()));
  Eigen::RowVectorXd depth = Eigen::RowVectorXd::Zero(Eigen::Index(valid.size()));
  for (int i = 0; i < n_steps; ++i) {
    for (size_t jj = 0; jj < valid.size(); ++jj) {
      const Eigen::Index j = valid[jj];
      const double t_mid = t0(j) + (i + 0.5) * h(j);
      pts(0, Eigen::Index(jj)) = x.x + t_mid * dirs(0, j);
      pts(1, Eigen::Index(jj)) = x.y + t_mid * dirs(1, j);
      pts(2, Eigen::Index(jj)) = x.z + t_mid * dirs(2, j);
    }
    const Eigen::RowVectorXd sig = scene.density_batch(pts);
    for (size_t jj = 0; jj < valid.size(); ++jj) {
      const Eigen::Index j = valid[jj];
      const double t_mid = t0(j) + (i + 0.5) * h(j);
      const double a = 1.0 - std::exp(-sig(Eigen::Index(jj)) * h(j));
      depth(Eigen::Index(jj)) += trans(Eigen::Index(jj)) * a * t_mid;
      trans(Eigen::Index(jj)) *= 1.0 - a;
    }
  }
  for (size_t jj = 0; jj < valid.size(); ++jj) {
    const Eigen::Index j = valid[jj];
    (*v)(j) = trans(Eigen::Index(jj));
    (*d)(j) = depth(Eigen::Index(jj)) + trans(Eigen::Index(jj)) * t1(j);
  }
  if (eval_counter) *eval_counter += int64_t(n_steps) * int64_t(valid.size());
}

// Quadrature compositing: sum_j V_j (1 - exp(-sigma_j delta)) L_j.
inline Rgb composite_quadrature(const RaySampleSet& samples, const std::vector<Rgb>& radiance) {
  if (radiance.size() != samples.densities.size())
    throw NervError("composite_quadrature: radiance count mismatch");
  Rgb out(0.0);
  for (int j = 0; j < samples.size(); ++j) out += samples.weight(j) * radiance[size_t(j)];
  return out;
}

// -----------------------------------------------------------------------------
// Plain (value-level) shading used by the reference renderer and unit tests.
// -----------------------------------------------------------------------------

using VisibilityFn = std::function<double(const Vec3&, const Vec3&)>;

inline Rgb shade_direct(const Vec3& x, const BrdfParams& params, const Vec3& wo,
                        const LightingCondition& light, const VisibilityFn& vis) {
  Rgb out(0.0);
  const Mat& dirs = light.env.directions();
  const auto& omega = light.env.solid_angles();
  for (int i = 0; i < light.env.cells(); ++i) {
    const Rgb e = light.env.at(i / light.env.width(), i % light.env.width());
    if (e.x == 0.0 && e.y == 0.0 && e.z == 0.0) continue;
    const Vec3 wi{dirs(0, i), dirs(1, i), dirs(2, i)};
    const Rgb r = eval_brdf(params, wi, wo);
    if (r.x == 0.0 && r.y == 0.0 && r.z == 0.0) continue;
    out += vis(x, wi) * omega(i) * (e * r);
  }
  for (const auto& pl : light.points) {
    const Vec3 to_light = pl.position - x;
    const double dist2 = norm2(to_light);
    const Vec3 wi = to_light / std::sqrt(dist2);
    const Rgb r = eval_brdf(params, wi, wo);
    if (r.x == 0.0 && r.y == 0.0 && r.z == 0.0) continue;
    out += vis(x, wi) * (pl.intensity * r) / dist2;
  }
  return out;
}

// Oracle or learned field bundle for the plain indirect path.
struct FieldFns {
  std::function<bool(const Vec3&, Vec3*)> normal;  // returns false when degenerate
  std::function<void(const Vec3&, Rgb*, double*)> material;
  VisibilityFn visibility;
  std::function<double(const Vec3&, const Vec3&)> depth_along;
  Aabb bbox;
};

// One-bounce reflected radiance at the expected termination point x_prime.
// Directions are sampled uniformly on the upper hemisphere (measure 2*pi/d);
// secondary points land at the expected depth along each direction and are
// shaded with direct lighting only.
inline Rgb shade_indirect(const Vec3& x_prime, const Vec3& wo, const LightingCondition& light,
                          const FieldFns& fields, int n_dirs, Rng* rng,
                          double escape_fraction = 0.98) {
  Vec3 n_prime;
  if (!fields.normal(x_prime, &n_prime)) return Rgb(0.0);
  Rgb albedo;
  double gamma;
  fields.material(x_prime, &albedo, &gamma);
  const BrdfParams prime_params{albedo, gamma, n_prime};

  Rgb sum(0.0);
  for (int k = 0; k < n_dirs; ++k) {
    const Vec3 wi = rng->uniform_hemisphere(n_prime);
    const Rgb r_prime = eval_brdf(prime_params, wi, wo);
    if (r_prime.x == 0.0 && r_prime.y == 0.0 && r_prime.z == 0.0) continue;
    double t0, t1;
    if (!fields.bbox.intersect(x_prime, wi, &t0, &t1)) continue;
    const double t2 = fields.depth_along(x_prime, wi);
    if (t2 >= escape_fraction * t1) continue;  // no secondary surface
    const Vec3 x2 = x_prime + t2 * wi;
    Vec3 n2;
    if (!fields.normal(x2, &n2)) continue;
    Rgb a2;
    double g2;
    fields.material(x2, &a2, &g2);
    const Rgb l2 = shade_direct(x2, {a2, g2, n2}, -wi, light, fields.visibility);
    sum += l2 * r_prime;
  }
  return (2.0 * kPi / n_dirs) * sum;
}

// -----------------------------------------------------------------------------
// Transport sources: where the renderer gets densities, shading data, and
// visibility. The model source records differentiable nodes for the shape and
// reflectance paths; visibility values are detached (the visibility field
// trains only through its consistency loss).
// -----------------------------------------------------------------------------

struct ShadeBatchNodes {
  int normals = -1;    // 3xS
  int albedo = -1;     // 3xS
  int roughness = -1;  // 1xS
  std::vector<bool> degenerate;
};

class TransportSource {
 public:
  virtual ~TransportSource() = default;
  virtual const Aabb& bbox() const = 0;
  virtual int density_row_node(Tape* t, const Mat& pts) = 0;
  virtual ShadeBatchNodes shade_batch(Tape* t, const Mat& pts) = 0;
  // Visibility and expected depth for one point over a direction batch;
  // detached values.
  virtual void visibility_rows(const Vec3& x, const Mat& dirs, Eigen::RowVectorXd* v,
                               Eigen::RowVectorXd* d) = 0;
  // Visibility toward a point light (light sources sit outside the volume).
  virtual double light_visibility(const Vec3& x, const Vec3& dir) = 0;

  QueryCounters counters;
};

class ModelSource : public TransportSource {
 public:
  explicit ModelSource(const NervModel* model) : model_(model) {}

  const Aabb& bbox() const override { return model_->bbox(); }

  int density_row_node(Tape* t, const Mat& pts) override {
    counters.density_evals += pts.cols();
    const Mat p = model_->normalized_batch(pts);
    const int enc = t->constant(Tape::encode_matrix(p, model_->pos_enc()));
    const TapeForward fwd = model_->shape_net().forward_tape(t, enc);
    return t->activation(Act::kSoftplus, t->slice_rows(fwd.out, 0, 1));
  }

  ShadeBatchNodes shade_batch(Tape* t, const Mat& pts) override {
    ShadeBatchNodes out;
    const Eigen::Index s = pts.cols();
    const Mat p = model_->normalized_batch(pts);
    const int p_node = t->constant(p);
    const int enc = t->posenc(p_node, model_->pos_enc());

    const TapeForward sfwd = model_->shape_net().forward_tape(t, enc);
    out.degenerate.resize(size_t(s));
    if (model_->config().mlp_normals) {
      out.normals = t->normalize3(t->slice_rows(sfwd.out, 1, 3), kDegenerateGradEps);
      const Mat mask = t->normalize_mask(out.normals);
      for (Eigen::Index j = 0; j < s; ++j) out.degenerate[size_t(j)] = mask(0, j) == 0.0;
    } else {
      const int genc = model_->shape_net().input_gradient_tape(t, sfwd, 0);
      const int gnorm = t->posenc_pullback(p_node, genc, model_->pos_enc());
      const Vec3 sc = model_->norm_scale();
      Mat scale(3, s);
      scale.row(0).setConstant(sc.x);
      scale.row(1).setConstant(sc.y);
      scale.row(2).setConstant(sc.z);
      const int gworld = t->hadamard_const(gnorm, scale);
      out.normals = t->neg_normalize3(gworld, kDegenerateGradEps);
      // Degeneracy contract is on |grad sigma| = softplus'(raw) |grad raw|.
      const Mat& raw = t->value(sfwd.out);
      const Mat& gw = t->value(gworld);
      for (Eigen::Index j = 0; j < s; ++j) {
        const double len = gw.col(j).norm() * act_prime(Act::kSoftplus, raw(0, j));
        out.degenerate[size_t(j)] = len <= kDegenerateGradEps;
      }
    }

    const TapeForward rfwd = model_->refl_net().forward_tape(t, enc);
    out.albedo = t->activation(Act::kSigmoid, t->slice_rows(rfwd.out, 0, 3));
    out.roughness = t->affine(t->activation(Act::kSigmoid, t->slice_rows(rfwd.out, 3, 1)),
                              1.0 - kRoughnessMin, kRoughnessMin);
    return out;
  }

  void visibility_rows(const Vec3& x, const Mat& dirs, Eigen::RowVectorXd* v,
                       Eigen::RowVectorXd* d) override {
    counters.visibility_evals += dirs.cols();
    Mat p(3, 1);
    p << x.x, x.y, x.z;
    const Mat f = model_->vis_features_batch(p);
    const Mat out = model_->vis_head_batch(f.col(0), dirs);
    *v = out.row(0);
    *d = out.row(1);
  }

  double light_visibility(const Vec3& x, const Vec3& dir) override {
    counters.visibility_evals += 1;
    return model_->visibility_query(x, dir).visibility;
  }

 protected:
  const NervModel* model_;
};

// Test-time tracing variant: point-light visibility via brute-force marching
// of the learned density field; environment visibility stays on the MLP.
class TraceModelSource final : public ModelSource {
 public:
  TraceModelSource(const NervModel* model, int march_steps)
      : ModelSource(model), march_steps_(march_steps) {}

  double light_visibility(const Vec3& x, const Vec3& dir) override {
    double t0, t1;
    if (!model_->bbox().intersect(x, dir, &t0, &t1) || t1 <= t0) return 1.0;
    const double h = (t1 - t0) / march_steps_;
    Mat pts(3, march_steps_);
    for (int i = 0; i < march_steps_; ++i) {
      const Vec3 q = x + (t0 + (i + 0.5) * h) * dir;
      pts(0, i) = q.x;
      pts(1, i) = q.y;
      pts(2, i) = q.z;
    }
    counters.density_evals += march_steps_;
    const Mat sig = model_->density_batch(pts);
    return std::exp(-sig.sum() * h);
  }

 private:
  int march_steps_ = 128;
};

// Analytic fields with brute-force visibility; used as the oracle substrate.
class AnalyticSource final : public TransportSource {
 public:
  AnalyticSource(const AnalyticScene* scene, int march_steps)
      : scene_(scene), march_steps_(march_steps) {}

  const Aabb& bbox() const override { return scene_->bbox(); }

  int density_row_node(Tape* t, const Mat& pts) override {
    counters.density_evals += pts.cols();
    return t->constant(scene_->density_batch(pts));
  }

  ShadeBatchNodes shade_batch(Tape* t, const Mat& pts) override {
    const Eigen::Index s = pts.cols();
    Mat n(3, s), a(3, s), g(1, s);
    ShadeBatchNodes out;
    out.degenerate.resize(size_t(s));
    for (Eigen::Index j = 0; j < s; ++j) {
      const Vec3 x{pts(0, j), pts(1, j), pts(2, j)};
      bool deg = false;
      const Vec3 nn = scene_->normal(x, &deg);
      out.degenerate[size_t(j)] = deg;
      n(0, j) = nn.x;
      n(1, j) = nn.y;
      n(2, j) = nn.z;
      const SceneMaterial m = scene_->material(x);
      a(0, j) = m.albedo.x;
      a(1, j) = m.albedo.y;
      a(2, j) = m.albedo.z;
      g(0, j) = m.roughness;
    }
    out.normals = t->constant(std::move(n));
    out.albedo = t->constant(std::move(a));
    out.roughness = t->constant(std::move(g));
    return out;
  }

  void visibility_rows(const Vec3& x, const Mat& dirs, Eigen::RowVectorXd* v,
                       Eigen::RowVectorXd* d) override {
    march_vis_depth_rows(*scene_, x, dirs, march_steps_, v, d, &counters.density_evals);
  }

  double light_visibility(const Vec3& x, const Vec3& dir) override {
    const DensityFn sigma = [this](const Vec3& q) { return scene_->density(q); };
    return transmittance_brute(sigma, scene_->bbox(), x, dir, march_steps_,
                               &counters.density_evals);
  }

 private:
  const AnalyticScene* scene_;
  int march_steps_;
};

// -----------------------------------------------------------------------------
// Per-ray rendering (paper procedure steps 1-4).
// -----------------------------------------------------------------------------

enum class VisMode { kNvf, kTrace };

struct RenderOptions {
  int n_samples = 256;
  int n_indirect = 128;
  bool indirect = true;
  VisMode vis_mode = VisMode::kNvf;
  // Shade samples in decreasing weight order until this fraction of the total
  // compositing weight is covered; negative disables the cutoff.
  double tail_cutoff = 1e-3;
  bool exact_counts = false;      // query every sample/direction, mask zeros
  bool want_shadow_fraction = false;
  double escape_fraction = 0.98;  // secondary depth >= frac * t_far escapes
  uint64_t seed = 0;
  uint64_t ray_id = 0;
  uint64_t iteration = 0;
  const std::vector<double>* injected_depths = nullptr;
};

struct RayRenderResult {
  RadianceBreakdown breakdown;
  RaySampleSet samples;
  double total_weight = 0.0;
  double t_prime = 0.0;
  double t_near = 0.0, t_far = 0.0;  // in-box segment of the rendered ray
  bool hit_box = false;
  // Tape nodes (3x1) for the training path; -1 when the ray missed the box.
  int direct_node = -1;
  int indirect_node = -1;
  int total_node = -1;
};

namespace detail {
inline constexpr uint64_t kStreamStratify = 101;
inline constexpr uint64_t kStreamHemisphere = 202;

// Per-sample direct radiance node: BRDF against the environment grid plus
// point lights, with detached visibility folded into the constant radiance.
inline int direct_radiance_node(Tape* t, TransportSource* src, const Vec3& x, int normal_node,
                                int albedo_node, int roughness_node, const Vec3& wo,
                                const LightingCondition& light, const RenderOptions& opt,
                                Rgb* unoccluded, bool skip_radiance) {
  const int n_env = light.env.is_black() ? 0 : light.env.cells();
  const int n_pts = int(light.points.size());
  if (n_env + n_pts == 0) return -1;

  Mat dirs(3, n_env + n_pts);
  Mat weights(3, n_env + n_pts);  // radiance * solid angle (or I/d^2), with V
  Mat weights_unocc;
  if (unoccluded) weights_unocc.resize(3, n_env + n_pts);

  if (n_env > 0) {
    Eigen::RowVectorXd v_row, d_row;
    src->visibility_rows(x, light.env.directions(), &v_row, &d_row);
    const Mat e = light.env.radiance_rows();
    for (int i = 0; i < n_env; ++i) {
      dirs.col(i) = light.env.directions().col(i);
      const double w = light.env.solid_angles()(i);
      weights.col(i) = e.col(i) * w * v_row(i);
      if (unoccluded) weights_unocc.col(i) = e.col(i) * w;
    }
  }
  for (int k = 0; k < n_pts; ++k) {
    const Vec3 to_light = light.points[size_t(k)].position - x;
    const double dist2 = norm2(to_light);
    const Vec3 wi = to_light / std::sqrt(dist2);
    const double vis = src->light_visibility(x, wi);
    const Rgb c = light.points[size_t(k)].intensity / dist2;
    const int i = n_env + k;
    dirs(0, i) = wi.x;
    dirs(1, i) = wi.y;
    dirs(2, i) = wi.z;
    weights(0, i) = c.x * vis;
    weights(1, i) = c.y * vis;
    weights(2, i) = c.z * vis;
    if (unoccluded) weights_unocc.col(i) = Eigen::Vector3d(c.x, c.y, c.z);
  }

  if (skip_radiance) return -1;

  BrdfBatchInputs in{normal_node, albedo_node, roughness_node};
  const int r = eval_brdf_tape(t, in, dirs, wo);
  const int lit = t->sum_cols(t->hadamard_const(r, weights));
  if (unoccluded) {
    const Mat& rv = t->value(r);
    Eigen::Vector3d u = rv.cwiseProduct(weights_unocc).rowwise().sum();
    *unoccluded = {u(0), u(1), u(2)};
  }
  return lit;
}
}  // namespace detail

inline RayRenderResult render_ray(TransportSource* src, Tape* tape, const Ray& ray_in,
                                  const LightingCondition& light, const RenderOptions& opt) {
  RayRenderResult res;
  Ray ray = ray_in;
  if (!src->bbox().intersect(ray.origin, ray.dir, &ray.t_near, &ray.t_far) ||
      ray.t_far - ray.t_near < 1e-9) {
    res.direct_node = tape->constant(Mat::Zero(3, 1));
    res.indirect_node = tape->constant(Mat::Zero(3, 1));
    res.total_node = tape->constant(Mat::Zero(3, 1));
    return res;
  }
  res.hit_box = true;
  res.t_near = ray.t_near;
  res.t_far = ray.t_far;
  const Vec3 wo = -ray.dir;
  const int n = opt.n_samples;
  const double delta = (ray.t_far - ray.t_near) / n;

  // 1) stratified depths
  std::vector<double> depths(static_cast<size_t>(n));
  if (opt.injected_depths) {
    depths = *opt.injected_depths;
    if (int(depths.size()) != n) throw NervError("render_ray: injected depth count mismatch");
  } else {
    Rng rng(seed_mix(opt.seed, opt.ray_id, opt.iteration, detail::kStreamStratify));
    for (int j = 0; j < n; ++j) depths[size_t(j)] = ray.t_near + (j + rng.uniform()) * delta;
  }
  Mat pts(3, n);
  for (int j = 0; j < n; ++j) {
    const Vec3 p = ray.at(depths[size_t(j)]);
    pts(0, j) = p.x;
    pts(1, j) = p.y;
    pts(2, j) = p.z;
  }

  // densities and compositing weights
  const int sig = src->density_row_node(tape, pts);
  const int tau = tape->affine(sig, delta, 0.0);
  const int trans = tape->exp(tape->affine(tape->cumsum_excl_row(tau), -1.0, 0.0));
  const int alpha = tape->affine(tape->exp(tape->affine(tau, -1.0, 0.0)), -1.0, 1.0);
  const int w = tape->hadamard(trans, alpha);

  // Discrete decisions (shaded subset, termination depth, escape tests) use
  // the plain sample-set math so they agree exactly with the reference
  // renderer; the tape nodes above carry the gradients.
  {
    const Mat sig_val = tape->value(sig);
    res.samples = RaySampleSet::from_densities(
        depths, delta, std::vector<double>(sig_val.data(), sig_val.data() + n));
  }
  const double sum_w = res.samples.total_weight();
  res.total_weight = sum_w;
  const double end_trans = res.samples.end_transmittance();

  // expected termination depth from the already-sampled densities
  double t_prime = end_trans * ray.t_far;
  for (int j = 0; j < n; ++j) t_prime += res.samples.weight(j) * depths[size_t(j)];
  res.t_prime = t_prime;

  auto weight_of = [&](int j) { return res.samples.weight(j); };

  // 2) choose the shaded subset by compositing weight
  std::vector<int> shaded;
  if (opt.exact_counts || opt.tail_cutoff < 0.0) {
    shaded.resize(static_cast<size_t>(n));
    std::iota(shaded.begin(), shaded.end(), 0);
  } else {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return weight_of(a) > weight_of(b); });
    double acc = 0.0;
    const double target = (1.0 - opt.tail_cutoff) * sum_w;
    for (int idx : order) {
      if (weight_of(idx) <= 0.0) break;
      shaded.push_back(idx);
      acc += weight_of(idx);
      if (acc >= target) break;
    }
    std::sort(shaded.begin(), shaded.end());
  }

  int direct_px = -1;
  double unocc_lum_num = 0.0, unocc_lum_den = 0.0;
  if (!shaded.empty() && !light.is_black()) {
    Mat spts(3, Eigen::Index(shaded.size()));
    for (size_t j = 0; j < shaded.size(); ++j) spts.col(Eigen::Index(j)) = pts.col(shaded[j]);
    const ShadeBatchNodes sb = src->shade_batch(tape, spts);

    int lit_cols = -1;
    std::vector<int> lit_idx;
    for (size_t j = 0; j < shaded.size(); ++j) {
      const Vec3 x{spts(0, Eigen::Index(j)), spts(1, Eigen::Index(j)), spts(2, Eigen::Index(j))};
      const bool degenerate = sb.degenerate[j];
      if (degenerate && !opt.exact_counts) continue;
      const int nn = tape->select_cols(sb.normals, {int(j)});
      const int aa = tape->select_cols(sb.albedo, {int(j)});
      const int gg = tape->select_cols(sb.roughness, {int(j)});
      Rgb unocc(0.0);
      const int lit = detail::direct_radiance_node(
          tape, src, x, nn, aa, gg, wo, light, opt,
          opt.want_shadow_fraction ? &unocc : nullptr, degenerate);
      if (lit < 0) continue;
      if (opt.want_shadow_fraction) {
        const Mat& lv = tape->value(lit);
        unocc_lum_num += weight_of(shaded[j]) * luminance({lv(0, 0), lv(1, 0), lv(2, 0)});
        unocc_lum_den += weight_of(shaded[j]) * luminance(unocc);
      }
      lit_cols = lit_cols < 0 ? lit : tape->concat_cols(lit_cols, lit);
      lit_idx.push_back(shaded[j]);
    }
    if (lit_cols >= 0) {
      const int padded = tape->pad_cols(lit_cols, n, lit_idx);
      direct_px = tape->sum_cols(tape->row_scale(padded, w));
    }
  }
  if (direct_px < 0) direct_px = tape->constant(Mat::Zero(3, 1));

  // 3) one-bounce indirect at x(t')
  int indirect_px = -1;
  if (opt.indirect && opt.n_indirect > 0 && !light.is_black()) {
    const Vec3 xp = ray.at(t_prime);
    Mat xp_m(3, 1);
    xp_m << xp.x, xp.y, xp.z;
    const ShadeBatchNodes sbp = src->shade_batch(tape, xp_m);
    if (!sbp.degenerate[0] || opt.exact_counts) {
      const Mat np_val = tape->value(sbp.normals);
      const Vec3 np{np_val(0, 0), np_val(1, 0), np_val(2, 0)};
      const Vec3 frame_n = sbp.degenerate[0] ? Vec3{0, 0, 1} : np;
      const int d = opt.n_indirect;
      Rng rng(seed_mix(opt.seed, opt.ray_id, opt.iteration, detail::kStreamHemisphere));
      Mat hemi(3, d);
      for (int k = 0; k < d; ++k) {
        const Vec3 h = rng.uniform_hemisphere(frame_n);
        hemi(0, k) = h.x;
        hemi(1, k) = h.y;
        hemi(2, k) = h.z;
      }
      Eigen::RowVectorXd v_row, d_row;
      src->visibility_rows(xp, hemi, &v_row, &d_row);

      // secondary points at the expected depth along each direction
      std::vector<int> kept;
      std::vector<bool> kept_escaped;
      Mat sec_pts(3, d);
      for (int k = 0; k < d; ++k) {
        const Vec3 hk{hemi(0, k), hemi(1, k), hemi(2, k)};
        double s0, s1;
        const bool hits = src->bbox().intersect(xp, hk, &s0, &s1) && s1 > 1e-9;
        const bool escaped = !hits || d_row(k) >= opt.escape_fraction * s1;
        if (escaped && !opt.exact_counts) continue;
        const Vec3 x2 = xp + d_row(k) * hk;
        sec_pts.col(Eigen::Index(kept.size())) = Eigen::Vector3d(x2.x, x2.y, x2.z);
        kept.push_back(k);
        kept_escaped.push_back(escaped);
      }
      if (!kept.empty()) {
        const Mat sec = sec_pts.leftCols(Eigen::Index(kept.size()));
        const ShadeBatchNodes sb2 = src->shade_batch(tape, sec);
        int sec_cols = -1;
        std::vector<int> sec_idx;
        for (size_t j = 0; j < kept.size(); ++j) {
          const int k = kept[j];
          const Vec3 x2{sec(0, Eigen::Index(j)), sec(1, Eigen::Index(j)),
                        sec(2, Eigen::Index(j))};
          const bool dead = sb2.degenerate[j] || kept_escaped[j];
          if (dead && !opt.exact_counts) continue;
          const int nn = tape->select_cols(sb2.normals, {int(j)});
          const int aa = tape->select_cols(sb2.albedo, {int(j)});
          const int gg = tape->select_cols(sb2.roughness, {int(j)});
          const Vec3 wo2{-hemi(0, k), -hemi(1, k), -hemi(2, k)};
          const int lit = detail::direct_radiance_node(tape, src, x2, nn, aa, gg, wo2, light,
                                                       opt, nullptr, dead);
          if (lit < 0) continue;
          sec_cols = sec_cols < 0 ? lit : tape->concat_cols(sec_cols, lit);
          sec_idx.push_back(k);
        }
        if (sec_cols >= 0 && !sbp.degenerate[0]) {
          const int sec_mat = tape->pad_cols(sec_cols, d, sec_idx);  // 3xd
          BrdfBatchInputs in{sbp.normals, sbp.albedo, sbp.roughness};
          const int r_prime = eval_brdf_tape(tape, in, hemi, wo);
          const int lint = tape->affine(tape->sum_cols(tape->hadamard(r_prime, sec_mat)),
                                        2.0 * kPi / d, 0.0);
          const int sum_w_node = tape->sum_all(w);
          indirect_px = tape->scalar_mul(sum_w_node, lint);
        }
      }
    }
  }
  if (indirect_px < 0) indirect_px = tape->constant(Mat::Zero(3, 1));

  res.direct_node = direct_px;
  res.indirect_node = indirect_px;
  res.total_node = tape->add(direct_px, indirect_px);

  const Mat& dv = tape->value(direct_px);
  const Mat& iv = tape->value(indirect_px);
  res.breakdown.direct = {dv(0, 0), dv(1, 0), dv(2, 0)};
  res.breakdown.indirect = {iv(0, 0), iv(1, 0), iv(2, 0)};
  res.breakdown.total = res.breakdown.direct + res.breakdown.indirect;
  res.breakdown.shadow_fraction =
      opt.want_shadow_fraction
          ? (unocc_lum_den > 1e-12 ? std::fmin(unocc_lum_num / unocc_lum_den, 1.0) : 1.0)
          : 1.0;
  return res;
}

// -----------------------------------------------------------------------------
// Closed-form query counts (complexity accounting per render mode).
// -----------------------------------------------------------------------------

struct QueryCounts {
  int64_t density_evals = 0;
  int64_t visibility_evals = 0;
};

// n: samples per ray, ell: light directions, m: brute march steps per light
// ray, d: indirect directions.
inline QueryCounts count_queries(int64_t n, int64_t ell, int64_t m, int64_t d, bool brute_vis,
                                 bool indirect) {
  QueryCounts c;
  if (!brute_vis) {
    c.density_evals = n;
    c.visibility_evals = n * ell + (indirect ? d + d * ell : 0);
  } else {
    c.density_evals = n + n * ell * m + (indirect ? n * d * m * (1 + ell * m) : 0);
    c.visibility_evals = 0;
  }
  return c;
}

}  // namespace nerv
