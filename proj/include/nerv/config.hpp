// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Training configuration. Defaults are the reference values (512 pixel rays,
// 256 supervision rays, 256 samples, 128 indirect directions, lambda 20,
// lr 1e-5 -> 1e-6, 8x256 trunks / 4x128 visibility head). The desk profile
// shrinks the networks and batch sizes to stay single-CPU tractable while
// exercising every code path.

#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "nerv/fields.hpp"

namespace nerv {

using Json = nlohmann::ordered_json;

struct TrainConfig {
  int batch_pixel_rays = 512;
  int batch_supervision_rays = 256;
  int n_samples = 256;
  int n_indirect = 128;
  double lambda = 20.0;
  double lr_start = 1e-5;
  double lr_end = 1e-6;
  int64_t total_steps = 1000000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::string normals_mode = "analytic";  // analytic | mlp
  bool indirect = true;
  double tail_cutoff = 1e-3;
  std::vector<int> shape_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> refl_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> vis_trunk_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> vis_head_hidden{128, 128, 128, 128};
  uint64_t seed = 0;
  int64_t checkpoint_every = 10000;
  int log_every = 50;

  void validate() const {
    if (batch_pixel_rays <= 0 || batch_supervision_rays < 0 || n_samples <= 0 ||
        n_indirect < 0 || lambda < 0.0 || total_steps <= 0)
      throw NervError("train config: nonpositive field");
    if (!(lr_start >= lr_end && lr_end > 0.0)) throw NervError("train config: bad lr range");
    if (normals_mode != "analytic" && normals_mode != "mlp")
      throw NervError("train config: normals_mode must be 'analytic' or 'mlp'");
  }

  ModelConfig model_config(const Aabb& bbox) const {
    ModelConfig m;
    m.shape_hidden = shape_hidden;
    m.refl_hidden = refl_hidden;
    m.vis_trunk_hidden = vis_trunk_hidden;
    m.vis_head_hidden = vis_head_hidden;
    m.mlp_normals = normals_mode == "mlp";
    m.bbox = bbox;
    m.seed = seed;
    return m;
  }
};

// Single-CPU profile; every knob remains overridable.
inline TrainConfig desk_profile() {
  TrainConfig c;
  c.batch_pixel_rays = 16;
  c.batch_supervision_rays = 16;
  c.n_samples = 48;
  c.n_indirect = 16;
  c.lr_start = 5e-4;
  c.lr_end = 5e-6;
  c.total_steps = 50000;
  c.shape_hidden = {64, 64, 64, 64};
  c.refl_hidden = {64, 64, 64, 64};
  c.vis_trunk_hidden = {64, 64, 64, 64};
  c.vis_head_hidden = {32, 32};
  c.checkpoint_every = 10000;
  return c;
}

inline Json to_json(const TrainConfig& c) {
  Json j;
  j["batch_pixel_rays"] = c.batch_pixel_rays;
  j["batch_supervision_rays"] = c.batch_supervision_rays;
  j["n_samples"] = c.n_samples;
  j["n_indirect"] = c.n_indirect;
  j["lambda"] = c.lambda;
  j["lr_start"] = c.lr_start;
  j["lr_end"] = c.lr_end;
  j["total_steps"] = c.total_steps;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["normals_mode"] = c.normals_mode;
  j["indirect"] = c.indirect;
  j["tail_cutoff"] = c.tail_cutoff;
  j["shape_hidden"] = c.shape_hidden;
  j["refl_hidden"] = c.refl_hidden;
  j["vis_trunk_hidden"] = c.vis_trunk_hidden;
  j["vis_head_hidden"] = c.vis_head_hidden;
  j["seed"] = c.seed;
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  return j;
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("batch_pixel_rays", c.batch_pixel_rays);
  get("batch_supervision_rays", c.batch_supervision_rays);
  get("n_samples", c.n_samples);
  get("n_indirect", c.n_indirect);
  get("lambda", c.lambda);
  get("lr_start", c.lr_start);
  get("lr_end", c.lr_end);
  get("total_steps", c.total_steps);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("adam_eps", c.adam_eps);
  get("normals_mode", c.normals_mode);
  get("indirect", c.indirect);
  get("tail_cutoff", c.tail_cutoff);
  get("shape_hidden", c.shape_hidden);
  get("refl_hidden", c.refl_hidden);
  get("vis_trunk_hidden", c.vis_trunk_hidden);
  get("vis_head_hidden", c.vis_head_hidden);
  get("seed", c.seed);
  get("checkpoint_every", c.checkpoint_every);
  get("log_every", c.log_every);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!to_json(TrainConfig{}).contains(key))
      throw NervError("train config: unknown field '" + key + "'");
  }
  c.validate();
  return c;
}

}  // namespace nerv
