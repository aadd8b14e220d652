// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "nerv/checkpoint.hpp"
#include "nerv/dataset.hpp"
#include "nerv/image.hpp"
#include "nerv/image_io.hpp"
#include "test_util.hpp"

using namespace nerv;
using nerv_test::rel_err;

namespace {
std::string temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "nerv_test_io";
  std::filesystem::create_directories(dir);
  return dir.string();
}
}  // namespace

TEST_CASE("tone map") {
  CHECK(tone_map(0.0) == 0.0);
  CHECK(tone_map(1.0) == 0.5);
  CHECK_THROWS_AS(tone_map(-0.1), NervError);
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(0.0, 20.0);
    const double b = a + rng.uniform(1e-6, 5.0);
    CHECK(tone_map(a) < tone_map(b));
  }
}

TEST_CASE("psnr") {
  Image a(8, 8), b(8, 8);
  Rng rng(7);
  for (auto& v : a.data) v = rng.uniform(0.0, 3.0);

  SECTION("identical images hit the cap") { CHECK(psnr(a, a) == 99.0); }

  SECTION("constant 0.1 tonemapped difference gives 20 dB") {
    for (size_t i = 0; i < a.data.size(); ++i) {
      const double ta = 0.3;
      const double tb = 0.4;
      a.data[i] = ta / (1.0 - ta);  // inverse tone map
      b.data[i] = tb / (1.0 - tb);
    }
    CHECK(rel_err(psnr(a, b), 20.0) < 1e-9);
  }

  SECTION("matches an independent mse computation and is symmetric") {
    for (auto& v : b.data) v = rng.uniform(0.0, 3.0);
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
      const double d = a.data[i] / (1 + a.data[i]) - b.data[i] / (1 + b.data[i]);
      mse += d * d;
    }
    mse /= double(a.data.size());
    CHECK(rel_err(psnr(a, b), -10.0 * std::log10(mse)) < 1e-12);
    CHECK(psnr(a, b) == psnr(b, a));
  }

  SECTION("permutation applied to both images leaves psnr unchanged") {
    for (auto& v : b.data) v = rng.uniform(0.0, 3.0);
    Image ap = a, bp = b;
    // reverse pixel order in both
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        ap.set_pixel(x, y, a.pixel(7 - x, 7 - y));
        bp.set_pixel(x, y, b.pixel(7 - x, 7 - y));
      }
    CHECK(psnr(ap, bp) == psnr(a, b));
  }

  SECTION("dimension mismatch rejected") {
    Image c(4, 8);
    CHECK_THROWS_AS(psnr(a, c), NervError);
  }
}

TEST_CASE("ms-ssim") {
  SECTION("identical images give 1") {
    Image a(64, 64);
    Rng rng(11);
    for (auto& v : a.data) v = rng.uniform(0.0, 2.0);
    int scales = 0;
    CHECK(rel_err(ms_ssim(a, a, &scales), 1.0) < 1e-12);
    CHECK(scales == 3);  // 64 -> 32 -> 16
  }

  SECTION("constant images match the variance-free closed form (single scale)") {
    Image a(32, 32), b(32, 32);
    const double c1v = 0.3, c2v = 0.55;  // tonemapped values
    for (auto& v : a.data) v = c1v / (1 - c1v);
    for (auto& v : b.data) v = c2v / (1 - c2v);
    const double c1 = 0.01 * 0.01;
    const double want = (2 * c1v * c2v + c1) / (c1v * c1v + c2v * c2v + c1);
    CHECK(rel_err(ssim_single(a, b), want) < 1e-9);
  }

  SECTION("inverted high-contrast content scores below 0.5") {
    Image a(64, 64), b(64, 64);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double v = ((x / 8 + y / 8) % 2 == 0) ? 4.0 : 0.02;  // checker
        const double tv = v / (1 + v);
        a.set_pixel(x, y, Rgb(v));
        const double inv = (1.0 - tv) / tv;  // tonemapped complement
        b.set_pixel(x, y, Rgb(inv));
      }
    CHECK(ms_ssim(a, b) < 0.5);
  }

  SECTION("symmetry and translation stability") {
    Image a(64, 64), b(64, 64);
    Rng rng(13);
    // smooth content plus noise
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        const double base = 0.5 + 0.4 * std::sin(x * 0.2) * std::cos(y * 0.15);
        a.set_pixel(x, y, Rgb(base));
        b.set_pixel(x, y, Rgb(base + rng.uniform(-0.05, 0.05)));
      }
    CHECK(ms_ssim(a, b) == ms_ssim(b, a));
    Image as(64, 64), bs(64, 64);
    const int shift = 16;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        as.set_pixel(x, y, a.pixel((x + shift) % 64, y));
        bs.set_pixel(x, y, b.pixel((x + shift) % 64, y));
      }
    CHECK(std::fabs(ms_ssim(as, bs) - ms_ssim(a, b)) < 0.01);
  }

  SECTION("too small rejected") {
    Image a(8, 8), b(8, 8);
    CHECK_THROWS_AS(ms_ssim(a, b), NervError);
  }
}

TEST_CASE("pfm round trip") {
  const std::string path = temp_dir() + "/rt.pfm";
  Image img(5, 3);
  Rng rng(17);
  for (auto& v : img.data) v = double(float(rng.uniform(0.0, 10.0)));  // f32-representable
  write_pfm(img, path);
  const Image back = read_pfm(path);
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 3);
  for (size_t i = 0; i < img.data.size(); ++i) CHECK(back.data[i] == img.data[i]);

  SECTION("malformed header reports an offset") {
    const std::string bad = temp_dir() + "/bad.pfm";
    detail::write_file(bad, "PX\n2 2\n-1.0\n", 12);
    try {
      read_pfm(bad);
      FAIL("expected parse error");
    } catch (const NervError& e) {
      CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
  }

  SECTION("truncated pixels rejected") {
    const std::string bad = temp_dir() + "/trunc.pfm";
    detail::write_file(bad, "PF\n4 4\n-1.0\nxx", 14);
    CHECK_THROWS_AS(read_pfm(bad), NervError);
  }
}

TEST_CASE("png round trip") {
  const std::string path = temp_dir() + "/rt.png";
  Image img(9, 7);
  Rng rng(23);
  for (auto& v : img.data) v = rng.uniform(0.0, 4.0);
  write_png_preview(img, path);
  const Image back = read_png(path);
  REQUIRE(back.width == 9);
  REQUIRE(back.height == 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 9; ++x)
      for (int c = 0; c < 3; ++c) {
        const double want = srgb_encode(tone_map(img.at(x, y, c)));
        CHECK(std::fabs(back.at(x, y, c) - want) <= 0.5 / 255.0 + 1e-9);
      }
  CHECK_THROWS_AS(read_png(temp_dir() + "/missing.png"), NervError);
}

TEST_CASE("checkpoint round trip") {
  const std::string path = temp_dir() + "/ck.nerv";
  TrainConfig cfg = desk_profile();
  cfg.shape_hidden = {12, 12};
  cfg.refl_hidden = {10};
  cfg.vis_trunk_hidden = {10};
  cfg.vis_head_hidden = {8};
  cfg.seed = 5;
  const Aabb bbox{{-1, -1, -1}, {1, 1, 1}};
  NervModel model(cfg.model_config(bbox));
  AdamBundle adam = make_adam_bundle(model, cfg);
  save_checkpoint(path, model, cfg, 123, &adam);

  auto lc = load_checkpoint(path);
  CHECK(lc.step == 123);
  CHECK(lc.exact_resume);
  CHECK(lc.config.shape_hidden == cfg.shape_hidden);

  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(lc.model.density_at(x) == model.density_at(x));
  }

  SECTION("f32-only checkpoint restores approximately") {
    const std::string p32 = temp_dir() + "/ck32.nerv";
    save_checkpoint(p32, model, cfg, 7, &adam, /*include_resume=*/false);
    auto lc32 = load_checkpoint(p32);
    CHECK(!lc32.exact_resume);
    const Vec3 x{0.3, -0.4, 0.5};
    CHECK(rel_err(lc32.model.density_at(x), model.density_at(x)) < 1e-5);
  }

  SECTION("truncated checkpoint names the missing array") {
    const auto full = detail::read_file(path);
    const std::string bad = temp_dir() + "/bad.nerv";
    detail::write_file(bad, full.data(), full.size() / 2);
    try {
      load_checkpoint(bad);
      FAIL("expected error");
    } catch (const NervError& e) {
      CHECK(std::string(e.what()).find("missing array") != std::string::npos);
    }
  }
}

TEST_CASE("train config json") {
  TrainConfig c = desk_profile();
  c.normals_mode = "mlp";
  c.seed = 42;
  const Json j = to_json(c);
  const TrainConfig back = train_config_from_json(j);
  CHECK(back.normals_mode == "mlp");
  CHECK(back.batch_pixel_rays == c.batch_pixel_rays);
  CHECK(back.lr_start == c.lr_start);
  CHECK(to_json(back) == j);

  Json bad = j;
  bad["no_such_field"] = 1;
  CHECK_THROWS_AS(train_config_from_json(bad), NervError);
  Json badlr = j;
  badlr["lr_end"] = 1.0;  // above lr_start
  CHECK_THROWS_AS(train_config_from_json(badlr), NervError);
}

TEST_CASE("dataset generation and manifest round trip") {
  const std::string dir = temp_dir() + "/ds";
  std::filesystem::remove_all(dir);
  DatasetSpec spec;
  spec.scene = "sphere";
  spec.regime = "point";
  spec.n_train = 2;
  spec.n_test = 1;
  spec.width = 16;
  spec.height = 16;
  spec.seed = 77;
  spec.quality.n_samples = 32;
  spec.quality.n_light_steps = 24;
  spec.quality.n_indirect = 8;

  const Dataset ds = generate_dataset(spec, dir);
  CHECK(ds.images.size() == 3);
  CHECK(std::filesystem::exists(dir + "/train_000.pfm"));
  CHECK(std::filesystem::exists(dir + "/train_001.png"));
  CHECK(std::filesystem::exists(dir + "/test_000.pfm"));
  CHECK(std::filesystem::exists(dir + "/dataset.json"));

  SECTION("each point-regime entry has one upper-hemisphere light") {
    const AnalyticScene scene = make_scene("sphere");
    for (const auto& im : ds.images) {
      REQUIRE(im.lighting.points.size() == 1);
      CHECK(im.lighting.points[0].position.z > scene.bbox().center().z);
      CHECK(im.lighting.env.is_black());
    }
  }

  SECTION("manifest round trip is exact") {
    const Dataset back = load_dataset(dir);
    CHECK(manifest_json(back) == manifest_json(ds));
    // pixel round trip through PFM is float32-exact
    for (size_t i = 0; i < ds.images.size(); ++i)
      for (size_t k = 0; k < ds.images[i].pixels.data.size(); ++k)
        CHECK(back.images[i].pixels.data[k] == double(float(ds.images[i].pixels.data[k])));
  }

  SECTION("same seed reproduces dataset.json byte for byte") {
    const std::string dir2 = temp_dir() + "/ds2";
    std::filesystem::remove_all(dir2);
    generate_dataset(spec, dir2);
    const auto a = detail::read_file(dir + "/dataset.json");
    const auto b = detail::read_file(dir2 + "/dataset.json");
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size()) == 0);
  }

  SECTION("colorful regime keeps the fixed lights identical across images") {
    DatasetSpec cspec = spec;
    cspec.regime = "colorful+point";
    cspec.n_train = 3;
    cspec.n_test = 0;
    const std::string dir3 = temp_dir() + "/ds3";
    std::filesystem::remove_all(dir3);
    const Dataset cds = generate_dataset(cspec, dir3);
    REQUIRE(cds.images[0].lighting.points.size() == 9);  // 1 varying + 8 fixed
    for (size_t i = 1; i < cds.images.size(); ++i) {
      REQUIRE(cds.images[i].lighting.points.size() == 9);
      for (int k = 1; k < 9; ++k) {
        CHECK(norm(cds.images[i].lighting.points[size_t(k)].position -
                   cds.images[0].lighting.points[size_t(k)].position) == 0.0);
        CHECK(norm(cds.images[i].lighting.points[size_t(k)].intensity -
                   cds.images[0].lighting.points[size_t(k)].intensity) == 0.0);
      }
      // the varying light actually varies
      CHECK(norm(cds.images[i].lighting.points[0].position -
                 cds.images[0].lighting.points[0].position) > 0.0);
    }
  }

  SECTION("unknown regime rejected") {
    DatasetSpec bad = spec;
    bad.regime = "disco";
    CHECK_THROWS_AS(generate_dataset(bad, temp_dir() + "/never"), NervError);
  }
}
