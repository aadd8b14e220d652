// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Dataset generation and loading. Each image records its full pose and
// lighting condition in dataset.json; pixels are stored as PFM (HDR) with
// 8-bit PNG previews. Test images draw lighting and viewpoints from streams
// disjoint from the training ones.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nerv/config.hpp"
#include "nerv/image_io.hpp"
#include "nerv/lighting.hpp"
#include "nerv/reference.hpp"
#include "nerv/scenes.hpp"

namespace nerv {

struct DatasetSpec {
  std::string scene = "sphere-plane";
  std::string regime = "point";  // point | colorful+point | ambient+point
  int n_train = 16;
  int n_test = 8;
  int width = 64;
  int height = 64;
  uint64_t seed = 0;
  RenderQuality quality;

  void validate() const {
    if (regime != "point" && regime != "colorful+point" && regime != "ambient+point")
      throw NervError("dataset: unknown regime '" + regime +
                      "' (valid: point, colorful+point, ambient+point)");
    if (n_train <= 0 || n_test < 0 || width <= 0 || height <= 0)
      throw NervError("dataset: nonpositive count or resolution");
  }
};

// ---- JSON fragments shared with the CLI pose/lighting files ----

inline Json pose_to_json(const CameraPose& p) {
  return Json{{"pos", {p.position.x, p.position.y, p.position.z}},
              {"lookat", {p.lookat.x, p.lookat.y, p.lookat.z}},
              {"up", {p.up.x, p.up.y, p.up.z}},
              {"fov", p.fov_deg}};
}

inline CameraPose pose_from_json(const Json& j, int width, int height) {
  CameraPose p;
  const auto& pos = j.at("pos");
  p.position = {pos[0], pos[1], pos[2]};
  const auto& la = j.at("lookat");
  p.lookat = {la[0], la[1], la[2]};
  if (j.contains("up")) {
    const auto& up = j.at("up");
    p.up = {up[0], up[1], up[2]};
  }
  p.fov_deg = j.value("fov", 40.0);
  p.width = width;
  p.height = height;
  p.validate();
  return p;
}

inline Json lighting_to_json(const LightingCondition& light) {
  Json lights = Json::array();
  for (const auto& pl : light.points)
    lights.push_back({{"pos", {pl.position.x, pl.position.y, pl.position.z}},
                      {"rgb", {pl.intensity.x, pl.intensity.y, pl.intensity.z}}});
  Json env;
  env["width"] = light.env.width();
  env["height"] = light.env.height();
  // constant environments serialize compactly; general grids inline the cells
  bool constant = true;
  const Rgb first = light.env.at(0, 0);
  for (int r = 0; r < light.env.height() && constant; ++r)
    for (int c = 0; c < light.env.width(); ++c)
      if (norm(light.env.at(r, c) - first) != 0.0) {
        constant = false;
        break;
      }
  if (constant) {
    env["constant"] = {first.x, first.y, first.z};
  } else {
    Json cells = Json::array();
    for (int r = 0; r < light.env.height(); ++r)
      for (int c = 0; c < light.env.width(); ++c) {
        const Rgb v = light.env.at(r, c);
        cells.push_back(v.x);
        cells.push_back(v.y);
        cells.push_back(v.z);
      }
    env["cells"] = cells;
  }
  return Json{{"lights", lights}, {"env", env}};
}

inline LightingCondition lighting_from_json(const Json& j) {
  LightingCondition light;
  if (j.contains("env")) {
    const auto& env = j.at("env");
    const int w = env.value("width", 24);
    const int h = env.value("height", 12);
    if (env.contains("constant")) {
      const auto& c = env.at("constant");
      light.env = EnvironmentGrid::constant({c[0], c[1], c[2]}, h, w);
    } else if (env.contains("cells")) {
      light.env = EnvironmentGrid(h, w);
      const auto& cells = env.at("cells");
      if (int(cells.size()) != 3 * w * h) throw NervError("lighting: env cell count mismatch");
      int i = 0;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
          light.env.at(r, c) = {cells[size_t(i)], cells[size_t(i) + 1], cells[size_t(i) + 2]};
          i += 3;
        }
    } else {
      light.env = EnvironmentGrid(h, w);
    }
  }
  if (j.contains("lights"))
    for (const auto& pl : j.at("lights"))
      light.points.push_back(
          {{pl.at("pos")[0], pl.at("pos")[1], pl.at("pos")[2]},
           {pl.at("rgb")[0], pl.at("rgb")[1], pl.at("rgb")[2]}});
  return light;
}

// ---- random poses and lights ----

namespace detail {

inline CameraPose random_pose(const AnalyticScene& scene, int width, int height, Rng* rng) {
  const double diag = scene.bbox().diagonal();
  const Vec3 center = scene.bbox().center();
  const double azimuth = rng->uniform(0.0, 2.0 * kPi);
  const double elevation = rng->uniform(15.0, 55.0) * kPi / 180.0;
  const double radius = 1.5 * diag;
  CameraPose pose;
  pose.position = center + radius * Vec3{std::cos(azimuth) * std::cos(elevation),
                                         std::sin(azimuth) * std::cos(elevation),
                                         std::sin(elevation)};
  pose.lookat = center;
  pose.width = width;
  pose.height = height;
  return pose;
}

// White point light on the upper hemisphere at 4x the scene diagonal, with
// intensity normalized to unit peak irradiance at the scene center.
inline PointLight random_point_light(const AnalyticScene& scene, Rng* rng) {
  const double diag = scene.bbox().diagonal();
  const Vec3 center = scene.bbox().center();
  const double azimuth = rng->uniform(0.0, 2.0 * kPi);
  const double elevation = rng->uniform(20.0, 70.0) * kPi / 180.0;
  const double radius = 4.0 * diag;
  const Vec3 pos = center + radius * Vec3{std::cos(azimuth) * std::cos(elevation),
                                          std::sin(azimuth) * std::cos(elevation),
                                          std::sin(elevation)};
  return {pos, Rgb(radius * radius)};
}

inline std::vector<PointLight> fixed_colorful_lights(const AnalyticScene& scene, uint64_t seed) {
  Rng rng(seed_mix(seed, 0xc0105f01));
  std::vector<PointLight> lights;
  for (int i = 0; i < 8; ++i) {
    PointLight pl = random_point_light(scene, &rng);
    // saturated colors, dimmer than the roaming white light
    const double hue = rng.uniform(0.0, 3.0);
    Rgb c;
    if (hue < 1.0)
      c = {1.0, hue, 0.0};
    else if (hue < 2.0)
      c = {2.0 - hue, 1.0, hue - 1.0};
    else
      c = {hue - 2.0, 0.0, 1.0};
    pl.intensity = 0.35 * pl.intensity.x * c;
    lights.push_back(pl);
  }
  return lights;
}

inline LightingCondition lighting_for(const DatasetSpec& spec, const AnalyticScene& scene,
                                      Rng* rng) {
  LightingCondition light;
  light.points.push_back(random_point_light(scene, rng));
  if (spec.regime == "colorful+point") {
    const auto fixed = fixed_colorful_lights(scene, spec.seed);
    light.points.insert(light.points.end(), fixed.begin(), fixed.end());
  } else if (spec.regime == "ambient+point") {
    light.env = EnvironmentGrid::constant(Rgb{0.08, 0.08, 0.08});
  }
  return light;
}

}  // namespace detail

struct DatasetImage {
  std::string file;
  std::string split;  // train | test
  CameraPose pose;
  LightingCondition lighting;
  Image pixels;  // HDR
};

struct Dataset {
  DatasetSpec spec;
  std::vector<DatasetImage> images;

  std::vector<const DatasetImage*> split(const std::string& which) const {
    std::vector<const DatasetImage*> out;
    for (const auto& im : images)
      if (im.split == which) out.push_back(&im);
    return out;
  }
};

inline Json manifest_json(const Dataset& ds) {
  Json j;
  j["scene"] = ds.spec.scene;
  j["regime"] = ds.spec.regime;
  j["width"] = ds.spec.width;
  j["height"] = ds.spec.height;
  j["seed"] = ds.spec.seed;
  Json images = Json::array();
  Json train = Json::array(), test = Json::array();
  for (const auto& im : ds.images) {
    Json e;
    e["file"] = im.file;
    e["split"] = im.split;
    e["pose"] = pose_to_json(im.pose);
    const Json lj = lighting_to_json(im.lighting);
    e["lights"] = lj.at("lights");
    e["env"] = lj.at("env");
    images.push_back(e);
    (im.split == "train" ? train : test).push_back(im.file);
  }
  j["images"] = images;
  j["split"] = Json{{"train", train}, {"test", test}};
  return j;
}

// Renders and writes a dataset; aborts and removes partial output on failure.
inline Dataset generate_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  spec.validate();
  const AnalyticScene scene = make_scene(spec.scene);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Dataset ds;
  ds.spec = spec;
  std::vector<std::string> written;
  try {
    Rng pose_rng(seed_mix(spec.seed, 0x9051));
    Rng light_rng(seed_mix(spec.seed, 0x119487));
    Rng test_pose_rng(seed_mix(spec.seed, 0x7e57905e));
    Rng test_light_rng(seed_mix(spec.seed, 0x7e571194));

    const int total = spec.n_train + spec.n_test;
    for (int i = 0; i < total; ++i) {
      const bool is_test = i >= spec.n_train;
      DatasetImage im;
      im.split = is_test ? "test" : "train";
      char name[64];
      std::snprintf(name, sizeof name, "%s_%03d", im.split.c_str(),
                    is_test ? i - spec.n_train : i);
      im.file = std::string(name) + ".pfm";
      im.pose = detail::random_pose(scene, spec.width, spec.height,
                                    is_test ? &test_pose_rng : &pose_rng);
      im.lighting =
          detail::lighting_for(spec, scene, is_test ? &test_light_rng : &light_rng);
      im.pixels = reference_render(scene, im.pose, im.lighting, spec.quality,
                                   seed_mix(spec.seed, 0x1395, uint64_t(i)));
      const std::string pfm_path = out_dir + "/" + im.file;
      write_pfm(im.pixels, pfm_path);
      written.push_back(pfm_path);
      const std::string png_path = out_dir + "/" + std::string(name) + ".png";
      write_png_preview(im.pixels, png_path);
      written.push_back(png_path);
      ds.images.push_back(std::move(im));
    }
    const std::string manifest_path = out_dir + "/dataset.json";
    const std::string text = manifest_json(ds).dump(2) + "\n";
    detail::write_file(manifest_path, text.data(), text.size());
  } catch (...) {
    for (const auto& f : written) {
      std::error_code ec;
      fs::remove(f, ec);
    }
    throw;
  }
  return ds;
}

inline Dataset load_dataset(const std::string& dir) {
  const std::string manifest_path = dir + "/dataset.json";
  std::ifstream f(manifest_path);
  if (!f) throw NervError("missing dataset manifest '" + manifest_path + "'");
  Json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw NervError("unparsable dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  ds.spec.scene = j.at("scene").get<std::string>();
  ds.spec.regime = j.at("regime").get<std::string>();
  ds.spec.width = j.at("width").get<int>();
  ds.spec.height = j.at("height").get<int>();
  ds.spec.seed = j.value("seed", uint64_t(0));
  for (const auto& e : j.at("images")) {
    DatasetImage im;
    im.file = e.at("file").get<std::string>();
    im.split = e.at("split").get<std::string>();
    im.pose = pose_from_json(e.at("pose"), ds.spec.width, ds.spec.height);
    im.lighting = lighting_from_json(Json{{"lights", e.at("lights")}, {"env", e.at("env")}});
    im.pixels = read_pfm(dir + "/" + im.file);
    ds.images.push_back(std::move(im));
  }
  return ds;
}

}  // namespace nerv
