// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "nerv/reference.hpp"
#include "test_util.hpp"

using namespace nerv;
using nerv_test::rel_err;
using nerv_test::rel_err_sym;

namespace {

RenderQuality fast_quality() {
  RenderQuality q;
  q.n_samples = 48;
  q.n_light_steps = 32;
  q.n_indirect = 8;
  return q;
}

CameraPose small_pose(const AnalyticScene& scene, int res = 12) {
  CameraPose pose;
  const double diag = scene.bbox().diagonal();
  pose.position = scene.bbox().center() + 1.5 * diag * normalize(Vec3{0.3, -1.0, 0.55});
  pose.lookat = scene.bbox().center();
  pose.width = res;
  pose.height = res;
  return pose;
}

}  // namespace

TEST_CASE("reference renderer basics") {
  const AnalyticScene scene = make_scene("sphere-plane");
  const CameraPose pose = small_pose(scene);

  SECTION("black lighting gives a black image") {
    LightingCondition none;
    const Image img = reference_render(scene, pose, none, fast_quality(), 1);
    for (double v : img.data) CHECK(v == 0.0);
  }

  SECTION("doubling intensity doubles every pixel exactly") {
    LightingCondition light;
    light.points.push_back({{2.5, -2.5, 3.5}, Rgb(20.0)});
    const Image a = reference_render(scene, pose, light, fast_quality(), 1);
    const Image b = reference_render(scene, pose, light.scaled(2.0), fast_quality(), 1);
    for (size_t i = 0; i < a.data.size(); ++i) CHECK(b.data[i] == 2.0 * a.data[i]);
  }

  SECTION("bitwise reproducible for a fixed seed") {
    LightingCondition light;
    light.points.push_back({{2.5, -2.5, 3.5}, Rgb(20.0)});
    const Image a = reference_render(scene, pose, light, fast_quality(), 9);
    const Image b = reference_render(scene, pose, light, fast_quality(), 9);
    CHECK(a.data == b.data);
  }
}

TEST_CASE("sdf batch evaluation agrees with the scalar path") {
  for (const char* id : {"sphere", "sphere-plane", "two-box", "sphere-wall"}) {
    const AnalyticScene scene = make_scene(id);
    Rng rng(7);
    Mat pts(3, 200);
    for (int j = 0; j < 200; ++j) {
      pts(0, j) = rng.uniform(scene.bbox().lo.x, scene.bbox().hi.x);
      pts(1, j) = rng.uniform(scene.bbox().lo.y, scene.bbox().hi.y);
      pts(2, j) = rng.uniform(scene.bbox().lo.z, scene.bbox().hi.z);
    }
    const Eigen::RowVectorXd batch = scene.density_batch(pts);
    for (int j = 0; j < 200; ++j) {
      const double scalar = scene.density({pts(0, j), pts(1, j), pts(2, j)});
      CHECK(rel_err_sym(batch(j), scalar, 1e-14) < 1e-13);
    }
  }
}

TEST_CASE("diffuse sphere brightness follows the cosine of the light angle") {
  // single very distant light so the inverse-square factor is constant
  auto sphere = std::make_shared<SdfSphere>(Vec3{0, 0, 0}, 1.0, 0);
  const AnalyticScene scene("diffuse-sphere", sphere, {{Rgb(0.9), 1.0}},
                            Aabb{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}});
  const Vec3 lpos{30.0, -30.0, 40.0};
  LightingCondition light;
  light.points.push_back({lpos, Rgb(norm2(lpos))});

  CameraPose pose;
  pose.position = {2.0, -4.0, 3.0};
  pose.lookat = {0, 0, 0};
  pose.width = 32;
  pose.height = 32;

  RenderQuality q = fast_quality();
  q.indirect = false;
  const Image img = reference_render(scene, pose, light, q, 3);

  // correlate pixel luminance with max(n . l, 0) over sphere hits
  std::vector<double> lum, ndl;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const Ray ray{pose.position, pose.pixel_direction(x, y)};
      // sphere-trace the analytic surface
      double t = 0.0;
      bool hit = false;
      for (int i = 0; i < 128; ++i) {
        const Vec3 p = ray.at(t);
        const double d = norm(p) - 1.0;
        if (d < 1e-4) {
          hit = norm(p) < 1.3;
          break;
        }
        t += d;
        if (t > 10.0) break;
      }
      if (!hit) continue;
      const Vec3 p = ray.at(t);
      const Vec3 n = normalize(p);
      const Vec3 l = normalize(lpos - p);
      lum.push_back(luminance(img.pixel(x, y)));
      ndl.push_back(std::fmax(dot(n, l), 0.0));
    }
  REQUIRE(lum.size() > 100);
  double mx = 0, my = 0;
  for (size_t i = 0; i < lum.size(); ++i) {
    mx += lum[i];
    my += ndl[i];
  }
  mx /= double(lum.size());
  my /= double(lum.size());
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < lum.size(); ++i) {
    sxy += (lum[i] - mx) * (ndl[i] - my);
    sxx += (lum[i] - mx) * (lum[i] - mx);
    syy += (ndl[i] - my) * (ndl[i] - my);
  }
  CHECK(sxy / std::sqrt(sxx * syy) >= 0.99);
}

TEST_CASE("halving sample counts moves pixels by about a percent") {
  const AnalyticScene scene = make_scene("sphere-plane");
  CameraPose pose = small_pose(scene, 12);
  LightingCondition light;
  light.env = EnvironmentGrid::constant(Rgb{0.08, 0.08, 0.08});
  light.points.push_back({{2.5, -2.5, 3.5}, Rgb(20.0)});

  RenderQuality full;  // default quality
  const Image base = reference_render(scene, pose, light, full, 5);

  auto median_rel = [&](const Image& other) {
    std::vector<double> errs;
    for (size_t i = 0; i < base.data.size(); ++i) {
      if (base.data[i] < 1e-4) continue;
      errs.push_back(std::fabs(other.data[i] - base.data[i]) / base.data[i]);
    }
    std::sort(errs.begin(), errs.end());
    return errs[errs.size() / 2];
  };

  RenderQuality half_samples = full;
  half_samples.n_samples /= 2;
  CHECK(median_rel(reference_render(scene, pose, light, half_samples, 5)) <= 0.01);

  RenderQuality half_march = full;
  half_march.n_light_steps /= 2;
  CHECK(median_rel(reference_render(scene, pose, light, half_march, 5)) <= 0.01);
}

TEST_CASE("render_ray with analytic fields matches the reference renderer") {
  const AnalyticScene scene = make_scene("sphere-plane");
  LightingCondition light;
  light.env = EnvironmentGrid::constant(Rgb{0.06, 0.06, 0.06});
  light.points.push_back({{2.0, -2.2, 3.2}, Rgb(18.0)});

  RenderQuality q = fast_quality();
  AnalyticSource src(&scene, q.n_light_steps);
  ParamBank bank;

  CameraPose pose = small_pose(scene, 6);
  double max_rel = 0.0;
  for (int y = 0; y < pose.height; ++y)
    for (int x = 0; x < pose.width; ++x) {
      const uint64_t ray_id = uint64_t(y) * uint64_t(pose.width) + uint64_t(x);
      const Ray ray{pose.position, pose.pixel_direction(x, y)};
      const auto ref = reference_render_ray(scene, ray, light, q, 42, ray_id);

      Tape tape(&bank);
      RenderOptions opt;
      opt.n_samples = q.n_samples;
      opt.n_indirect = q.n_indirect;
      opt.tail_cutoff = q.tail_cutoff;
      opt.escape_fraction = q.escape_fraction;
      opt.seed = 42;
      opt.ray_id = ray_id;
      const auto got = render_ray(&src, &tape, ray, light, opt);

      for (int c = 0; c < 3; ++c) {
        max_rel = std::fmax(max_rel, rel_err_sym(got.breakdown.total[c],
                                                 ref.breakdown.total[c], 1e-9));
        max_rel = std::fmax(max_rel, rel_err_sym(got.breakdown.indirect[c],
                                                 ref.breakdown.indirect[c], 1e-9));
      }
    }
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("one-bounce interreflection shows on the wall and matches a path oracle") {
  const AnalyticScene scene = make_scene("sphere-wall");
  LightingCondition light;
  light.points.push_back({{0.5, -0.8, 4.5}, Rgb(25.0)});

  // shaded point on the wall's inner face, across from the lit sphere side
  const Vec3 x_prime{-0.669, 0.0, 0.25};
  const Vec3 wo = normalize(Vec3{-1.0, 0.0, 0.4});

  const DensityFn sigma = [&](const Vec3& p) { return scene.density(p); };
  FieldFns fields;
  fields.bbox = scene.bbox();
  fields.normal = [&](const Vec3& p, Vec3* n) {
    bool deg = false;
    *n = scene.normal(p, &deg);
    return !deg;
  };
  fields.material = [&](const Vec3& p, Rgb* a, double* g) {
    const SceneMaterial m = scene.material(p);
    *a = m.albedo;
    *g = m.roughness;
  };
  fields.visibility = [&](const Vec3& p, const Vec3& d) {
    return transmittance_brute(sigma, scene.bbox(), p, d, 64);
  };
  fields.depth_along = [&](const Vec3& p, const Vec3& d) {
    return expected_depth_brute(sigma, scene.bbox(), p, d, 64);
  };

  Rng rng(77);
  const Rgb fast = shade_indirect(x_prime, wo, light, fields, 512, &rng);
  CHECK(luminance(fast) > 0.0);

  // brute-force one-bounce path reference: full volume integration along each
  // hemisphere direction instead of the hard-surface approximation
  Rng rng2(78);
  Vec3 n_prime;
  REQUIRE(fields.normal(x_prime, &n_prime));
  Rgb a_prime;
  double g_prime;
  fields.material(x_prime, &a_prime, &g_prime);
  const BrdfParams prime{a_prime, g_prime, n_prime};
  Rgb acc(0.0);
  const int n_paths = 100000;
  for (int k = 0; k < n_paths; ++k) {
    const Vec3 wi = rng2.uniform_hemisphere(n_prime);
    const Rgb r_prime = eval_brdf(prime, wi, wo);
    if (r_prime.x == 0 && r_prime.y == 0 && r_prime.z == 0) continue;
    double t0, t1;
    if (!scene.bbox().intersect(x_prime, wi, &t0, &t1)) continue;
    // march the secondary ray, shading each termination segment
    const int m = 48;
    const double h = (t1 - t0) / m;
    double trans = 1.0;
    Rgb seg(0.0);
    for (int i = 0; i < m; ++i) {
      const double t_mid = t0 + (i + 0.5) * h;
      const Vec3 p = x_prime + t_mid * wi;
      const double alpha = 1.0 - std::exp(-scene.density(p) * h);
      if (alpha > 1e-7 && trans > 1e-5) {
        bool deg = false;
        const Vec3 nn = scene.normal(p, &deg);
        if (!deg) {
          const SceneMaterial mm = scene.material(p);
          seg += trans * alpha *
                 shade_direct(p, {mm.albedo, mm.roughness, nn}, -wi, light, fields.visibility);
        }
      }
      trans *= 1.0 - alpha;
    }
    acc += seg * r_prime;
  }
  const Rgb oracle = (2.0 * kPi / n_paths) * acc;

  // hard-surface approximation against full volume integration: 10%
  CHECK(rel_err(luminance(fast), luminance(oracle)) <= 0.10);
}
