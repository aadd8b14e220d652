// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference renderer: the same transport math as render_ray evaluated with
// analytic fields and brute-force visibility everywhere, written as plain
// value-level code. Serves as the ground-truth generator and as the
// independent oracle that render_ray is cross-checked against.

#pragma once

#include "nerv/image.hpp"
#include "nerv/lighting.hpp"
#include "nerv/scenes.hpp"
#include "nerv/transport.hpp"

namespace nerv {

struct RenderQuality {
  int n_samples = 160;
  int n_light_steps = 96;
  int n_indirect = 48;
  double tail_cutoff = 1e-3;
  double escape_fraction = 0.98;
  bool indirect = true;
};

namespace detail {

// Direct radiance with per-direction visibility rows already computed.
inline Rgb shade_direct_rows(const BrdfParams& params, const Vec3& wo,
                             const LightingCondition& light, const Eigen::RowVectorXd& env_vis,
                             const std::vector<double>& point_vis, const std::vector<Vec3>& wi_pts,
                             const std::vector<double>& inv_dist2) {
  Rgb out(0.0);
  if (!light.env.is_black()) {
    const Mat& dirs = light.env.directions();
    for (int i = 0; i < light.env.cells(); ++i) {
      const Rgb e = light.env.at(i / light.env.width(), i % light.env.width());
      if (e.x == 0.0 && e.y == 0.0 && e.z == 0.0) continue;
      const Rgb r = eval_brdf(params, {dirs(0, i), dirs(1, i), dirs(2, i)}, wo);
      out += env_vis(i) * light.env.solid_angles()(i) * (e * r);
    }
  }
  for (size_t k = 0; k < light.points.size(); ++k) {
    const Rgb r = eval_brdf(params, wi_pts[k], wo);
    out += point_vis[k] * inv_dist2[k] * (light.points[k].intensity * r);
  }
  return out;
}

}  // namespace detail

struct ReferenceRayResult {
  RadianceBreakdown breakdown;
  RaySampleSet samples;
  double t_prime = 0.0;
  double total_weight = 0.0;
  bool hit_box = false;
};

inline ReferenceRayResult reference_render_ray(const AnalyticScene& scene, const Ray& ray_in,
                                               const LightingCondition& light,
                                               const RenderQuality& q, uint64_t seed,
                                               uint64_t ray_id,
                                               const std::vector<double>* injected_depths = nullptr,
                                               bool want_shadow = false) {
  ReferenceRayResult res;
  Ray ray = ray_in;
  if (!scene.bbox().intersect(ray.origin, ray.dir, &ray.t_near, &ray.t_far) ||
      ray.t_far - ray.t_near < 1e-9)
    return res;
  res.hit_box = true;
  const Vec3 wo = -ray.dir;
  const int n = q.n_samples;
  const double delta = (ray.t_far - ray.t_near) / n;

  std::vector<double> depths(static_cast<size_t>(n));
  if (injected_depths) {
    depths = *injected_depths;
  } else {
    Rng rng(seed_mix(seed, ray_id, 0, detail::kStreamStratify));
    for (int j = 0; j < n; ++j) depths[size_t(j)] = ray.t_near + (j + rng.uniform()) * delta;
  }

  Mat pts(3, n);
  for (int j = 0; j < n; ++j) {
    const Vec3 p = ray.at(depths[size_t(j)]);
    pts(0, j) = p.x;
    pts(1, j) = p.y;
    pts(2, j) = p.z;
  }
  const Eigen::RowVectorXd sig = scene.density_batch(pts);
  res.samples = RaySampleSet::from_densities(
      depths, delta, std::vector<double>(sig.data(), sig.data() + n));
  const double sum_w = res.samples.total_weight();
  res.total_weight = sum_w;
  const double end_trans = res.samples.end_transmittance();
  double t_prime = end_trans * ray.t_far;
  for (int j = 0; j < n; ++j) t_prime += res.samples.weight(j) * depths[size_t(j)];
  res.t_prime = t_prime;

  // shaded subset: decreasing weight until the tail cutoff is covered
  std::vector<int> shaded;
  if (q.tail_cutoff < 0.0) {
    shaded.resize(static_cast<size_t>(n));
    std::iota(shaded.begin(), shaded.end(), 0);
  } else {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return res.samples.weight(a) > res.samples.weight(b);
    });
    double acc = 0.0;
    const double target = (1.0 - q.tail_cutoff) * sum_w;
    for (int idx : order) {
      if (res.samples.weight(idx) <= 0.0) break;
      shaded.push_back(idx);
      acc += res.samples.weight(idx);
      if (acc >= target) break;
    }
    std::sort(shaded.begin(), shaded.end());
  }

  double shadow_num = 0.0, shadow_den = 0.0;
  std::vector<Rgb> radiance(static_cast<size_t>(n), Rgb(0.0));
  if (!light.is_black()) {
    for (int idx : shaded) {
      const Vec3 x = ray.at(depths[size_t(idx)]);
      bool degenerate = false;
      const Vec3 nn = scene.normal(x, &degenerate);
      if (degenerate) continue;
      const SceneMaterial m = scene.material(x);
      const BrdfParams params{m.albedo, m.roughness, nn};

      Eigen::RowVectorXd env_vis, env_depth;
      if (!light.env.is_black())
        march_vis_depth_rows(scene, x, light.env.directions(), q.n_light_steps, &env_vis,
                             &env_depth);
      std::vector<double> point_vis, inv_dist2;
      std::vector<Vec3> wi_pts;
      const DensityFn sigma_fn = [&](const Vec3& p) { return scene.density(p); };
      for (const auto& pl : light.points) {
        const Vec3 to_light = pl.position - x;
        const double dist2 = norm2(to_light);
        const Vec3 wi = to_light / std::sqrt(dist2);
        wi_pts.push_back(wi);
        inv_dist2.push_back(1.0 / dist2);
        point_vis.push_back(
            transmittance_brute(sigma_fn, scene.bbox(), x, wi, q.n_light_steps));
      }
      radiance[size_t(idx)] =
          detail::shade_direct_rows(params, wo, light, env_vis, point_vis, wi_pts, inv_dist2);
      if (want_shadow) {
        Eigen::RowVectorXd ones_env = Eigen::RowVectorXd::Ones(light.env.cells());
        std::vector<double> ones_pts(light.points.size(), 1.0);
        const Rgb unocc =
            detail::shade_direct_rows(params, wo, light, ones_env, ones_pts, wi_pts, inv_dist2);
        shadow_num += res.samples.weight(idx) * luminance(radiance[size_t(idx)]);
        shadow_den += res.samples.weight(idx) * luminance(unocc);
      }
    }
  }
  res.breakdown.direct = composite_quadrature(res.samples, radiance);

  // one-bounce indirect at the expected termination depth
  Rgb indirect(0.0);
  if (q.indirect && q.n_indirect > 0 && !light.is_black()) {
    const Vec3 xp = ray.at(t_prime);
    bool degenerate = false;
    const Vec3 np = scene.normal(xp, &degenerate);
    if (!degenerate) {
      const SceneMaterial mp = scene.material(xp);
      const BrdfParams prime_params{mp.albedo, mp.roughness, np};
      Rng rng(seed_mix(seed, ray_id, 0, detail::kStreamHemisphere));
      const int d = q.n_indirect;
      Mat hemi(3, d);
      for (int k = 0; k < d; ++k) {
        const Vec3 h = rng.uniform_hemisphere(np);
        hemi(0, k) = h.x;
        hemi(1, k) = h.y;
        hemi(2, k) = h.z;
      }
      Eigen::RowVectorXd hemi_vis, hemi_depth;
      march_vis_depth_rows(scene, xp, hemi, q.n_light_steps, &hemi_vis, &hemi_depth);

      Rgb acc(0.0);
      for (int k = 0; k < d; ++k) {
        const Vec3 hk{hemi(0, k), hemi(1, k), hemi(2, k)};
        const Rgb r_prime = eval_brdf(prime_params, hk, wo);
        if (r_prime.x == 0.0 && r_prime.y == 0.0 && r_prime.z == 0.0) continue;
        double s0, s1;
        if (!scene.bbox().intersect(xp, hk, &s0, &s1) || s1 <= 1e-9) continue;
        if (hemi_depth(k) >= q.escape_fraction * s1) continue;
        const Vec3 x2 = xp + hemi_depth(k) * hk;
        bool deg2 = false;
        const Vec3 n2 = scene.normal(x2, &deg2);
        if (deg2) continue;
        const SceneMaterial m2 = scene.material(x2);
        const BrdfParams params2{m2.albedo, m2.roughness, n2};
        const Vec3 wo2 = -hk;

        Eigen::RowVectorXd env_vis2, env_depth2;
        if (!light.env.is_black())
          march_vis_depth_rows(scene, x2, light.env.directions(), q.n_light_steps, &env_vis2,
                               &env_depth2);
        std::vector<double> point_vis2, inv_dist2_2;
        std::vector<Vec3> wi_pts2;
        const DensityFn sigma_fn = [&](const Vec3& p) { return scene.density(p); };
        for (const auto& pl : light.points) {
          const Vec3 to_light = pl.position - x2;
          const double dist2 = norm2(to_light);
          const Vec3 wi = to_light / std::sqrt(dist2);
          wi_pts2.push_back(wi);
          inv_dist2_2.push_back(1.0 / dist2);
          point_vis2.push_back(
              transmittance_brute(sigma_fn, scene.bbox(), x2, wi, q.n_light_steps));
        }
        const Rgb l2 = detail::shade_direct_rows(params2, wo2, light, env_vis2, point_vis2,
                                                 wi_pts2, inv_dist2_2);
        acc += l2 * r_prime;
      }
      indirect = sum_w * (2.0 * kPi / d) * acc;
    }
  }
  res.breakdown.indirect = indirect;
  res.breakdown.total = res.breakdown.direct + res.breakdown.indirect;
  res.breakdown.shadow_fraction =
      want_shadow ? (shadow_den > 1e-12 ? std::fmin(shadow_num / shadow_den, 1.0) : 1.0) : 1.0;
  return res;
}

struct ReferenceChannels {
  Image total;
  Image direct;
  Image indirect;
  std::vector<double> shadow;  // per pixel, [0, 1]
};

inline Image reference_render(const AnalyticScene& scene, const CameraPose& pose,
                              const LightingCondition& light, const RenderQuality& q,
                              uint64_t seed, ReferenceChannels* channels = nullptr) {
  pose.validate();
  Image img(pose.width, pose.height);
  if (channels) {
    channels->total = Image(pose.width, pose.height);
    channels->direct = Image(pose.width, pose.height);
    channels->indirect = Image(pose.width, pose.height);
    channels->shadow.assign(size_t(pose.width) * pose.height, 1.0);
  }
  for (int y = 0; y < pose.height; ++y) {
    for (int x = 0; x < pose.width; ++x) {
      const uint64_t ray_id = uint64_t(y) * uint64_t(pose.width) + uint64_t(x);
      const Ray ray{pose.position, pose.pixel_direction(x, y)};
      const auto res =
          reference_render_ray(scene, ray, light, q, seed, ray_id, nullptr, channels != nullptr);
      img.set_pixel(x, y, res.breakdown.total);
      if (channels) {
        channels->total.set_pixel(x, y, res.breakdown.total);
        channels->direct.set_pixel(x, y, res.breakdown.direct);
        channels->indirect.set_pixel(x, y, res.breakdown.indirect);
        channels->shadow[size_t(y) * pose.width + size_t(x)] = res.breakdown.shadow_fraction;
      }
    }
  }
  return img;
}

}  // namespace nerv
