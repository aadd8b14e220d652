// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "nerv/fields.hpp"
#include "nerv/scenes.hpp"
#include "test_util.hpp"

using namespace nerv;
using nerv_test::rel_err;
using nerv_test::rel_err_sym;

TEST_CASE("analytic sphere scene") {
  const AnalyticScene scene = make_scene("sphere");

  SECTION("density profile") {
    // far outside: logistic tail
    CHECK(scene.density({2.0, 0.0, 0.0}) < 0.01 * scene.sigma_max());
    // on the surface: half maximum exactly
    CHECK(rel_err(scene.density({1.0, 0.0, 0.0}), 0.5 * scene.sigma_max()) < 1e-12);
    // deep inside: saturated
    CHECK(scene.density({0.0, 0.0, 0.0}) > 0.99 * scene.sigma_max());
    CHECK_THROWS_AS(scene.density({std::nan(""), 0, 0}), NervError);
  }

  SECTION("radial normal") {
    const Vec3 n = scene.normal({0.0, 0.0, 1.0});
    CHECK(rel_err(n.z, 1.0) < 1e-12);
    CHECK(std::fabs(n.x) < 1e-12);
    const Vec3 n2 = scene.normal({0.5, 0.5, 0.0});
    const Vec3 want = normalize(Vec3{1, 1, 0});
    CHECK(norm(n2 - want) < 1e-12);
  }
}

TEST_CASE("box sdf and composite scenes") {
  const AnalyticScene sp = make_scene("sphere-plane");
  // ground top surface sits at z = -0.40
  CHECK(std::fabs(sp.density({1.0, 1.0, -0.45}) - sp.sigma_max() /
                                                      (1.0 + std::exp(-0.05 / sp.shell_width()))) <
        1e-9);
  // material selection: sphere vs ground
  CHECK(sp.material({0.0, 0.0, 0.7}).roughness == 0.75);
  CHECK(sp.material({1.0, 1.0, -0.55}).roughness == 0.15);

  const AnalyticScene tb = make_scene("two-box");
  CHECK(tb.material({-0.45, 0, -0.1}).albedo.x == 0.80);
  CHECK(tb.material({0.45, 0, -0.1}).albedo.x == 0.85);
  // outward normal on the inner face of the left box points +x
  const Vec3 n = tb.normal({-0.149, 0.0, -0.1});
  CHECK(n.x > 0.99);

  CHECK_THROWS_AS(make_scene("nope"), NervError);
}

TEST_CASE("smooth union blends gradients continuously") {
  auto a = std::make_shared<SdfSphere>(Vec3{-0.4, 0, 0}, 0.5, 0);
  auto b = std::make_shared<SdfSphere>(Vec3{0.4, 0, 0}, 0.5, 1);
  SdfSmoothUnion su(a, b, 0.2);
  // midpoint between the spheres: symmetric, gradient x-component cancels
  const SdfHit h = su.eval({0.0, 0.3, 0.0});
  CHECK(std::fabs(h.gradient.x) < 1e-12);
  // smooth min is below the hard min
  SdfUnion hard(a, b);
  CHECK(h.distance <= hard.eval({0.0, 0.3, 0.0}).distance);
}

TEST_CASE("camera rays") {
  CameraPose pose;
  pose.position = {0, -3, 0};
  pose.lookat = {0, 0, 0};
  pose.width = 64;
  pose.height = 64;
  pose.validate();

  // center pixel looks straight down the view axis
  const Vec3 d = pose.pixel_direction(31, 31);
  CHECK(dot(d, normalize(Vec3{0, 1, 0})) > 0.999);
  // top row points upward in camera space
  CHECK(pose.pixel_direction(31, 0).z > d.z);

  CameraPose bad = pose;
  bad.fov_deg = 180.0;
  CHECK_THROWS_AS(bad.validate(), NervError);
}

TEST_CASE("untrained model field outputs") {
  ModelConfig cfg;
  cfg.shape_hidden = {16, 16};
  cfg.refl_hidden = {16, 16};
  cfg.vis_trunk_hidden = {16, 16};
  cfg.vis_head_hidden = {16};
  cfg.bbox = Aabb{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
  cfg.seed = 9;
  NervModel model(cfg);

  SECTION("zeroed shape net emits softplus(0) = ln 2") {
    for (int id : model.shape_param_ids()) model.bank().value(id).setZero();
    CHECK(rel_err(model.density_at({0.3, -0.2, 0.8}), std::log(2.0)) < 1e-12);
  }

  SECTION("zeroed reflectance net emits midpoint parameters") {
    for (int id : model.refl_param_ids()) model.bank().value(id).setZero();
    Mat p(3, 1);
    p << 0.1, 0.2, 0.3;
    Mat raw = model.refl_raw_batch(p);
    Rgb a;
    double g;
    model.brdf_raw_to_params(raw, 0, &a, &g);
    CHECK(a.x == 0.5);
    CHECK(a.y == 0.5);
    CHECK(g == kRoughnessMin + (1.0 - kRoughnessMin) * 0.5);
  }

  SECTION("ranges hold over random points") {
    Rng rng(3);
    const double diag = model.bbox_diag();
    for (int i = 0; i < 10000; ++i) {
      const Vec3 x{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
      CHECK(model.density_at(x) >= 0.0);
      const VisSample vs = model.visibility_query(x, rng.uniform_sphere());
      CHECK((vs.visibility >= 0.0 && vs.visibility <= 1.0));
      CHECK((vs.depth >= 0.0 && vs.depth <= diag));
      if (i % 50 == 0) {
        const BrdfParams bp = model.brdf_params_at(x);
        CHECK((bp.albedo.x >= 0.0 && bp.albedo.x <= 1.0));
        CHECK((bp.roughness >= kRoughnessMin && bp.roughness <= 1.0));
        CHECK(std::fabs(norm(bp.normal) - 1.0) < 1e-9);
      }
    }
  }

  SECTION("fields are deterministic given fixed weights") {
    NervModel again(cfg);
    const Vec3 x{0.4, 0.1, -0.2};
    CHECK(model.density_at(x) == again.density_at(x));
    CHECK(model.visibility_query(x, {0, 0, 1}).depth == again.visibility_query(x, {0, 0, 1}).depth);
  }
}

TEST_CASE("analytic normals match finite differences of the density") {
  ModelConfig cfg;
  cfg.shape_hidden = {16, 16};
  cfg.refl_hidden = {8};
  cfg.vis_trunk_hidden = {8};
  cfg.vis_head_hidden = {8};
  cfg.bbox = Aabb{{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};
  cfg.seed = 21;
  NervModel model(cfg);

  // ReLU layers make the density piecewise smooth; a finite-difference
  // stencil that straddles a kink measures the wrong one-sided slope, so
  // points where two step sizes disagree are skipped.
  auto fd_gradient = [&](const Vec3& x, double h) {
    Vec3 g;
    for (int axis = 0; axis < 3; ++axis) {
      Vec3 xp = x, xm = x;
      xp[axis] += h;
      xm[axis] -= h;
      g[axis] = (model.density_at(xp) - model.density_at(xm)) / (2.0 * h);
    }
    return g;
  };

  Rng rng(5);
  int checked = 0;
  while (checked < 25) {
    const Vec3 x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    bool deg = false;
    const Vec3 n = model.normal_at(x, &deg);
    if (deg) continue;
    const Vec3 g = fd_gradient(x, 1e-4);
    const Vec3 g_half = fd_gradient(x, 5e-5);
    if (norm(g) < 1e-6) continue;
    if (norm(g - g_half) / norm(g) > 1e-4) continue;  // kink inside the stencil
    const Vec3 n_fd = -1.0 / norm(g) * g;
    const double cos_angle = std::clamp(dot(n, n_fd), -1.0, 1.0);
    CHECK(std::acos(cos_angle) * 180.0 / kPi <= 0.5);
    CHECK(std::fabs(norm(n) - 1.0) < 1e-12);
    ++checked;
  }
}

TEST_CASE("mlp normal head wiring") {
  ModelConfig cfg;
  cfg.shape_hidden = {12};
  cfg.refl_hidden = {8};
  cfg.vis_trunk_hidden = {8};
  cfg.vis_head_hidden = {8};
  cfg.seed = 2;

  SECTION("disabled by default") {
    NervModel model(cfg);
    CHECK(model.shape_net().out_width() == 1);
    CHECK_THROWS_AS(model.mlp_normal_at({0, 0, 0}), NervError);
  }

  SECTION("enabled head emits unit normals") {
    cfg.mlp_normals = true;
    NervModel model(cfg);
    CHECK(model.shape_net().out_width() == 4);
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
      const Vec3 x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      bool deg = false;
      const Vec3 n = model.mlp_normal_at(x, &deg);
      if (!deg) CHECK(std::fabs(norm(n) - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("default architecture matches the reference configuration") {
  ModelConfig cfg;  // defaults
  NervModel model(cfg);

  const auto& sh = model.shape_net();
  REQUIRE(sh.hidden_widths().size() == 8);
  for (int w : sh.hidden_widths()) CHECK(w == 256);
  for (size_t i = 0; i + 1 < sh.layers().size(); ++i) CHECK(sh.layers()[i].act == Act::kRelu);
  CHECK(sh.in_width() == 51);

  const auto& re = model.refl_net();
  REQUIRE(re.hidden_widths().size() == 8);
  for (int w : re.hidden_widths()) CHECK(w == 256);
  CHECK(re.out_width() == 4);

  const auto& vt = model.vis_trunk_net();
  REQUIRE(vt.hidden_widths().size() == 8);
  for (int w : vt.hidden_widths()) CHECK(w == 256);
  CHECK(vt.out_width() == 8);

  const auto& vh = model.vis_head_net();
  REQUIRE(vh.hidden_widths().size() == 4);
  for (int w : vh.hidden_widths()) CHECK(w == 128);
  CHECK(vh.in_width() == 8 + 33);
  CHECK(vh.out_width() == 2);
}
