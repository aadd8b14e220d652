// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// The three neural fields: shape (density), reflectance (BRDF parameters),
// and visibility (transmittance + expected termination depth along a
// direction). Surface normals come from the gradient of the shape field.

#pragma once

#include <vector>

#include "nerv/brdf.hpp"
#include "nerv/net.hpp"
#include "nerv/tape.hpp"
#include "nerv/vec.hpp"

namespace nerv {

inline constexpr double kDegenerateGradEps = 1e-8;

struct ModelConfig {
  std::vector<int> shape_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> refl_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> vis_trunk_hidden{256, 256, 256, 256, 256, 256, 256, 256};
  std::vector<int> vis_head_hidden{128, 128, 128, 128};
  int vis_feature_width = 8;
  int pos_frequencies = 8;  // max frequency 2^7
  int dir_frequencies = 5;  // max frequency 2^4
  bool mlp_normals = false;
  Aabb bbox;
  uint64_t seed = 0;
};

struct VisSample {
  double visibility = 1.0;  // in [0, 1]
  double depth = 0.0;       // in [0, bbox diagonal]
};

class NervModel {
 public:
  NervModel() = default;

  explicit NervModel(const ModelConfig& cfg) : cfg_(cfg) {
    pos_enc_ = PosEncSpec{cfg.pos_frequencies, true};
    dir_enc_ = PosEncSpec{cfg.dir_frequencies, true};
    Rng rng(seed_mix(cfg.seed, 0x6e657276ULL));
    const int pe = pos_enc_.encoded_width(3);
    const int de = dir_enc_.encoded_width(3);
    shape_ = DenseNetwork::create(&bank_, pe, cfg.shape_hidden, cfg.mlp_normals ? 4 : 1,
                                  Act::kRelu, Act::kIdentity, &rng);
    refl_ = DenseNetwork::create(&bank_, pe, cfg.refl_hidden, 4, Act::kRelu, Act::kIdentity, &rng);
    vis_trunk_ = DenseNetwork::create(&bank_, pe, cfg.vis_trunk_hidden, cfg.vis_feature_width,
                                      Act::kRelu, Act::kIdentity, &rng);
    vis_head_ = DenseNetwork::create(&bank_, cfg.vis_feature_width + de, cfg.vis_head_hidden, 2,
                                     Act::kRelu, Act::kIdentity, &rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParamBank& bank() { return bank_; }
  const ParamBank& bank() const { return bank_; }
  const DenseNetwork& shape_net() const { return shape_; }
  const DenseNetwork& refl_net() const { return refl_; }
  const DenseNetwork& vis_trunk_net() const { return vis_trunk_; }
  const DenseNetwork& vis_head_net() const { return vis_head_; }
  const PosEncSpec& pos_enc() const { return pos_enc_; }
  const PosEncSpec& dir_enc() const { return dir_enc_; }
  const Aabb& bbox() const { return cfg_.bbox; }
  double bbox_diag() const { return cfg_.bbox.diagonal(); }

  std::vector<int> shape_param_ids() const { return shape_.param_ids(); }
  std::vector<int> refl_param_ids() const { return refl_.param_ids(); }
  std::vector<int> vis_param_ids() const {
    auto ids = vis_trunk_.param_ids();
    auto head = vis_head_.param_ids();
    ids.insert(ids.end(), head.begin(), head.end());
    return ids;
  }

  // Maps world coordinates into [-1, 1]^3 for encoding; the componentwise
  // scale is folded back into gradients when computing normals.
  Vec3 normalized(const Vec3& x) const {
    const Vec3 c = cfg_.bbox.center();
    const Vec3 e = cfg_.bbox.extent();
    return {(x.x - c.x) * 2.0 / e.x, (x.y - c.y) * 2.0 / e.y, (x.z - c.z) * 2.0 / e.z};
  }
  Vec3 norm_scale() const {
    const Vec3 e = cfg_.bbox.extent();
    return {2.0 / e.x, 2.0 / e.y, 2.0 / e.z};
  }
  Mat normalized_batch(const Mat& world) const {
    const Vec3 c = cfg_.bbox.center();
    const Vec3 s = norm_scale();
    Mat out(3, world.cols());
    out.row(0) = (world.row(0).array() - c.x) * s.x;
    out.row(1) = (world.row(1).array() - c.y) * s.y;
    out.row(2) = (world.row(2).array() - c.z) * s.z;
    return out;
  }

  // ---- density ----
  Mat shape_raw_batch(const Mat& world) const {
    return shape_.forward_plain(bank_, Tape::encode_matrix(normalized_batch(world), pos_enc_));
  }
  Mat density_batch(const Mat& world) const {
    Mat raw = shape_raw_batch(world);
    return raw.row(0).unaryExpr([](double v) { return act_eval(Act::kSoftplus, v); });
  }
  double density_at(const Vec3& x) const {
    Mat p(3, 1);
    p << x.x, x.y, x.z;
    return density_batch(p)(0, 0);
  }

  // ---- analytic normals ----
  // n = -grad sigma / |grad sigma|. The softplus output activation is strictly
  // monotone, so normalizing the raw-output gradient gives the same direction
  // (and the same derivatives); the degeneracy test still uses |grad sigma|.
  void normal_batch(const Mat& world, Mat* normals, std::vector<bool>* degenerate) const {
    Mat raw, grad_enc;
    const Mat p = normalized_batch(world);
    shape_.value_and_input_grad(bank_, Tape::encode_matrix(p, pos_enc_), 0, &raw, &grad_enc);
    Mat grad = Mat::Zero(3, world.cols());
    grad_pullback(p, grad_enc, &grad);
    const Vec3 s = norm_scale();
    grad.row(0) *= s.x;
    grad.row(1) *= s.y;
    grad.row(2) *= s.z;
    normals->resize(3, world.cols());
    degenerate->assign(size_t(world.cols()), false);
    for (Eigen::Index j = 0; j < world.cols(); ++j) {
      const double len = grad.col(j).norm();
      const double sigma_scale = act_prime(Act::kSoftplus, raw(0, j));
      if (len * sigma_scale <= kDegenerateGradEps) {
        (*degenerate)[size_t(j)] = true;
        normals->col(j).setZero();
      } else {
        normals->col(j) = -grad.col(j) / len;
      }
    }
  }
  Vec3 normal_at(const Vec3& x, bool* degenerate = nullptr) const {
    Mat p(3, 1);
    p << x.x, x.y, x.z;
    Mat n;
    std::vector<bool> deg;
    normal_batch(p, &n, &deg);
    if (degenerate) *degenerate = deg[0];
    if (deg[0] && !degenerate) throw NervError("normal_at: degenerate gradient");
    return {n(0, 0), n(1, 0), n(2, 0)};
  }

  // ---- MLP-predicted normals (ablation head rows 1..3 of the shape net) ----
  void mlp_normal_batch(const Mat& world, Mat* normals, std::vector<bool>* degenerate) const {
    if (!cfg_.mlp_normals) throw NervError("mlp_normal_at: head disabled by config");
    Mat raw = shape_raw_batch(world);
    normals->resize(3, world.cols());
    degenerate->assign(size_t(world.cols()), false);
    for (Eigen::Index j = 0; j < world.cols(); ++j) {
      const Eigen::Vector3d v = raw.block(1, j, 3, 1);
      const double len = v.norm();
      if (len <= kDegenerateGradEps) {
        (*degenerate)[size_t(j)] = true;
        normals->col(j).setZero();
      } else {
        normals->col(j) = v / len;
      }
    }
  }
  Vec3 mlp_normal_at(const Vec3& x, bool* degenerate = nullptr) const {
    Mat p(3, 1);
    p << x.x, x.y, x.z;
    Mat n;
    std::vector<bool> deg;
    mlp_normal_batch(p, &n, &deg);
    if (degenerate) *degenerate = deg[0];
    return {n(0, 0), n(1, 0), n(2, 0)};
  }

  // ---- reflectance ----
  void brdf_raw_to_params(const Mat& raw, Eigen::Index col, Rgb* albedo, double* gamma) const {
    albedo->x = act_eval(Act::kSigmoid, raw(0, col));
    albedo->y = act_eval(Act::kSigmoid, raw(1, col));
    albedo->z = act_eval(Act::kSigmoid, raw(2, col));
    *gamma = kRoughnessMin + (1.0 - kRoughnessMin) * act_eval(Act::kSigmoid, raw(3, col));
  }
  Mat refl_raw_batch(const Mat& world) const {
    return refl_.forward_plain(bank_, Tape::encode_matrix(normalized_batch(world), pos_enc_));
  }
  BrdfParams brdf_params_at(const Vec3& x) const {
    Mat raw = refl_raw_batch([&] {
      Mat p(3, 1);
      p << x.x, x.y, x.z;
      return p;
    }());
    BrdfParams out;
    brdf_raw_to_params(raw, 0, &out.albedo, &out.roughness);
    bool deg = false;
    out.normal = cfg_.mlp_normals ? mlp_normal_at(x, &deg) : normal_at(x, &deg);
    return out;
  }

  // ---- visibility ----
  Mat vis_features_batch(const Mat& world) const {
    return vis_trunk_.forward_plain(bank_, Tape::encode_matrix(normalized_batch(world), pos_enc_));
  }
  // One position feature column against many directions.
  Mat vis_head_batch(const Eigen::VectorXd& feature, const Mat& dirs) const {
    Mat in(feature.size() + dir_enc_.encoded_width(3), dirs.cols());
    in.topRows(feature.size()) = feature.replicate(1, dirs.cols());
    in.bottomRows(dir_enc_.encoded_width(3)) = Tape::encode_matrix(dirs, dir_enc_);
    Mat raw = vis_head_.forward_plain(bank_, in);
    Mat out(2, dirs.cols());
    const double diag = bbox_diag();
    for (Eigen::Index j = 0; j < dirs.cols(); ++j) {
      out(0, j) = act_eval(Act::kSigmoid, raw(0, j));
      out(1, j) = diag * act_eval(Act::kSigmoid, raw(1, j));
    }
    return out;
  }
  VisSample visibility_query(const Vec3& x, const Vec3& dir) const {
    Mat p(3, 1);
    p << x.x, x.y, x.z;
    Mat d(3, 1);
    d << dir.x, dir.y, dir.z;
    Mat f = vis_features_batch(p);
    Mat out = vis_head_batch(f.col(0), d);
    return {out(0, 0), out(1, 0)};
  }

  // Pullback of an encoded-space gradient to normalized coordinates.
  void grad_pullback(const Mat& p_norm, const Mat& grad_enc, Mat* out) const {
    Tape::pullback_matrix(p_norm, grad_enc, pos_enc_, out);
  }

 private:
  ModelConfig cfg_;
  ParamBank bank_;
  DenseNetwork shape_, refl_, vis_trunk_, vis_head_;
  PosEncSpec pos_enc_, dir_enc_;
};

}  // namespace nerv
