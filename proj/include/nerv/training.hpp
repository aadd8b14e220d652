// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Optimization loop: pixel-ray batches rendered through the differentiable
// path, visibility/depth consistency supervision along auxiliary rays with
// stop-gradient targets, three Adam optimizers (one per field), exponential
// learning-rate decay, and checkpoint cadence.

#pragma once

#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "nerv/checkpoint.hpp"
#include "nerv/config.hpp"
#include "nerv/dataset.hpp"
#include "nerv/transport.hpp"

namespace nerv {

struct LossBreakdown {
  double photometric = 0.0;
  double visibility = 0.0;
  double depth = 0.0;
  double total = 0.0;
};

// Stop-gradient targets V_theta / D_theta at every sample in both directions
// along a ray, from prefix/suffix cumulative sums of sigma * delta. The bin
// behind each sample attenuates the -d direction; the bin at and beyond it
// attenuates +d, so the two directions multiply to the whole-ray value.
struct ConsistencyTargets {
  std::vector<double> v_plus, v_minus, d_plus, d_minus;
};

inline ConsistencyTargets consistency_targets(const RaySampleSet& s, double t_entry,
                                              double t_exit) {
  const int n = s.size();
  ConsistencyTargets out;
  out.v_plus.resize(static_cast<size_t>(n));
  out.v_minus.resize(static_cast<size_t>(n));
  out.d_plus.resize(static_cast<size_t>(n));
  out.d_minus.resize(static_cast<size_t>(n));

  std::vector<double> tau(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) tau[size_t(j)] = s.densities[size_t(j)] * s.spacing;

  double prefix = 0.0;
  double e_minus = t_entry;  // expected absolute termination depth looking back
  for (int j = 0; j < n; ++j) {
    out.v_minus[size_t(j)] = std::exp(-prefix);
    out.d_minus[size_t(j)] = s.depths[size_t(j)] - e_minus;
    const double alpha = 1.0 - std::exp(-tau[size_t(j)]);
    e_minus = alpha * s.depths[size_t(j)] + std::exp(-tau[size_t(j)]) * e_minus;
    prefix += tau[size_t(j)];
  }
  double suffix = 0.0;
  double e_plus = t_exit;
  for (int j = n - 1; j >= 0; --j) {
    suffix += tau[size_t(j)];
    const double alpha = 1.0 - std::exp(-tau[size_t(j)]);
    e_plus = alpha * s.depths[size_t(j)] + std::exp(-tau[size_t(j)]) * e_plus;
    out.v_plus[size_t(j)] = std::exp(-suffix);
    out.d_plus[size_t(j)] = e_plus - s.depths[size_t(j)];
  }
  return out;
}

namespace detail {

// Visibility-head predictions for all samples of one ray in one direction.
// Returns {v_row_node (1xn), d_row_node (1xn)}.
struct VisRowNodes {
  int v = -1, d = -1;
};

inline VisRowNodes vis_prediction_rows(Tape* t, const NervModel& model, int features_node,
                                       const Vec3& dir, int n) {
  Mat d_in(3, 1);
  d_in << dir.x, dir.y, dir.z;
  const Mat enc_dir = Tape::encode_matrix(d_in, model.dir_enc()).col(0).replicate(1, n);
  const int head_in = t->concat_rows(features_node, t->constant(enc_dir));
  const int raw = model.vis_head_net().forward_tape(t, head_in).out;
  VisRowNodes out;
  out.v = t->activation(Act::kSigmoid, t->slice_rows(raw, 0, 1));
  out.d = t->affine(t->activation(Act::kSigmoid, t->slice_rows(raw, 1, 1)), model.bbox_diag(),
                    0.0);
  return out;
}

inline int squared_error_row(Tape* t, int pred_row, const std::vector<double>& target,
                             double scale) {
  Mat tgt(1, Eigen::Index(target.size()));
  for (size_t i = 0; i < target.size(); ++i) tgt(0, Eigen::Index(i)) = -target[i] * scale;
  const int diff = t->add_const(t->affine(pred_row, scale, 0.0), tgt);
  return t->sum_all(t->hadamard(diff, diff));
}

}  // namespace detail

// Consistency loss nodes for one ray: (visibility_node, depth_node), both
// summed over samples and both directions. Targets are plain values
// (stop-gradient); predictions run through the visibility networks.
inline std::pair<int, int> consistency_loss_nodes(Tape* t, const NervModel& model,
                                                  const Ray& ray, const RaySampleSet& samples,
                                                  const ConsistencyTargets& targets) {
  const int n = samples.size();
  Mat pts(3, n);
  for (int j = 0; j < n; ++j) {
    const Vec3 p = ray.at(samples.depths[size_t(j)]);
    pts(0, j) = p.x;
    pts(1, j) = p.y;
    pts(2, j) = p.z;
  }
  const Mat enc = Tape::encode_matrix(model.normalized_batch(pts), model.pos_enc());
  const int features = model.vis_trunk_net().forward_tape(t, t->constant(enc)).out;

  const auto plus = detail::vis_prediction_rows(t, model, features, ray.dir, n);
  const auto minus = detail::vis_prediction_rows(t, model, features, -ray.dir, n);

  const double inv_diag = 1.0 / model.bbox_diag();
  const int vis_node =
      t->add(detail::squared_error_row(t, plus.v, targets.v_plus, 1.0),
             detail::squared_error_row(t, minus.v, targets.v_minus, 1.0));
  const int depth_node =
      t->add(detail::squared_error_row(t, plus.d, targets.d_plus, inv_diag),
             detail::squared_error_row(t, minus.d, targets.d_minus, inv_diag));
  return {vis_node, depth_node};
}

// ---- batching ----

struct PixelRaySample {
  Ray ray;
  Rgb target;
  const LightingCondition* lighting = nullptr;
  uint64_t ray_key = 0;
};

// Uniform over all (training image, pixel) pairs.
inline std::vector<PixelRaySample> sample_pixel_rays(const Dataset& ds, int count, Rng* rng) {
  const auto train = ds.split("train");
  if (train.empty()) throw NervError("sample_pixel_rays: dataset has no training images");
  std::vector<PixelRaySample> out;
  out.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    const uint32_t img = rng->below(uint32_t(train.size()));
    const DatasetImage& di = *train[img];
    const uint32_t px = rng->below(uint32_t(di.pose.width * di.pose.height));
    const int x = int(px) % di.pose.width;
    const int y = int(px) / di.pose.width;
    PixelRaySample s;
    s.ray = Ray{di.pose.position, di.pose.pixel_direction(x, y)};
    s.target = di.pixels.pixel(x, y);
    s.lighting = &di.lighting;
    s.ray_key = (uint64_t(img) << 32) | px;
    out.push_back(s);
  }
  return out;
}

struct SupervisionRay {
  Ray ray;
  double t_entry = 0.0, t_exit = 0.0;
};

// Random rays through the bounding box (rejection sampled).
inline std::vector<SupervisionRay> sample_supervision_rays(const Aabb& bbox, int count,
                                                           Rng* rng) {
  std::vector<SupervisionRay> out;
  const Vec3 center = bbox.center();
  const double radius = bbox.diagonal();
  while (int(out.size()) < count) {
    const Vec3 origin = center + radius * rng->uniform_sphere();
    const Vec3 toward{rng->uniform(bbox.lo.x, bbox.hi.x), rng->uniform(bbox.lo.y, bbox.hi.y),
                      rng->uniform(bbox.lo.z, bbox.hi.z)};
    const Vec3 dir = normalize(toward - origin);
    SupervisionRay s;
    s.ray = Ray{origin, dir};
    if (!bbox.intersect(origin, dir, &s.t_entry, &s.t_exit) || s.t_exit - s.t_entry < 1e-9)
      continue;  // rejected
    out.push_back(s);
  }
  return out;
}

// ---- loss over a batch ----

struct StepRng {
  uint64_t seed = 0;
  int64_t step = 0;
};

inline RaySampleSet stratified_model_samples(const NervModel& model, const Ray& ray,
                                             double t_entry, double t_exit, int n,
                                             uint64_t seed) {
  Rng rng(seed);
  const double delta = (t_exit - t_entry) / n;
  std::vector<double> depths(static_cast<size_t>(n));
  Mat pts(3, n);
  for (int j = 0; j < n; ++j) {
    depths[size_t(j)] = t_entry + (j + rng.uniform()) * delta;
    const Vec3 p = ray.at(depths[size_t(j)]);
    pts(0, j) = p.x;
    pts(1, j) = p.y;
    pts(2, j) = p.z;
  }
  const Mat sig = model.density_batch(pts);
  return RaySampleSet::from_densities(depths, delta,
                                      std::vector<double>(sig.data(), sig.data() + n));
}

// Renders the pixel batch differentiably, adds consistency terms over pixel
// and supervision rays, and accumulates gradients (ray order, deterministic).
inline LossBreakdown compute_loss(NervModel* model, const std::vector<PixelRaySample>& pixels,
                                  const std::vector<SupervisionRay>& supervision,
                                  const TrainConfig& cfg, int64_t step, GradBank* grads) {
  LossBreakdown out;
  grads->set_zero();

  RenderOptions opt;
  opt.n_samples = cfg.n_samples;
  opt.n_indirect = cfg.n_indirect;
  opt.indirect = cfg.indirect;
  opt.tail_cutoff = cfg.tail_cutoff;
  opt.seed = cfg.seed;
  opt.iteration = uint64_t(step);

  for (const auto& px : pixels) {
    Tape tape(&model->bank());
    ModelSource src(model);
    RenderOptions ropt = opt;
    ropt.ray_id = px.ray_key;
    const auto rr = render_ray(&src, &tape, px.ray, *px.lighting, ropt);

    // photometric: || tau(L~) - tau(L) ||^2
    Mat tgt(3, 1);
    tgt << -tone_map(std::fmax(px.target.x, 0.0)), -tone_map(std::fmax(px.target.y, 0.0)),
        -tone_map(std::fmax(px.target.z, 0.0));
    const int diff = tape.add_const(tape.tonemap(rr.total_node), tgt);
    const int photo = tape.sum_all(tape.hadamard(diff, diff));
    int loss_node = photo;

    int vis_node = -1, depth_node = -1;
    if (rr.hit_box && cfg.lambda > 0.0) {
      const auto targets = consistency_targets(rr.samples, rr.t_near, rr.t_far);
      const auto [vn, dn] = consistency_loss_nodes(&tape, *model, px.ray, rr.samples, targets);
      vis_node = vn;
      depth_node = dn;
      const int cons = tape.add(vis_node, depth_node);
      loss_node = tape.add(loss_node, tape.affine(cons, cfg.lambda, 0.0));
    }

    out.photometric += tape.value(photo)(0, 0);
    if (vis_node >= 0) {
      out.visibility += tape.value(vis_node)(0, 0);
      out.depth += tape.value(depth_node)(0, 0);
    }
    tape.backward_scalar(loss_node, grads);
  }

  for (size_t i = 0; i < supervision.size(); ++i) {
    const auto& sr = supervision[i];
    const RaySampleSet samples = stratified_model_samples(
        *model, sr.ray, sr.t_entry, sr.t_exit, cfg.n_samples,
        seed_mix(cfg.seed, 0x50b1, uint64_t(step), uint64_t(i)));
    const auto targets = consistency_targets(samples, sr.t_entry, sr.t_exit);
    Tape tape(&model->bank());
    const auto [vn, dn] = consistency_loss_nodes(&tape, *model, sr.ray, samples, targets);
    out.visibility += tape.value(vn)(0, 0);
    out.depth += tape.value(dn)(0, 0);
    const int cons = tape.affine(tape.add(vn, dn), cfg.lambda, 0.0);
    tape.backward_scalar(cons, grads);
  }

  out.total = out.photometric + cfg.lambda * (out.visibility + out.depth);
  return out;
}

// ---- trainer ----

class Trainer {
 public:
  Trainer(NervModel* model, const Dataset* dataset, const TrainConfig& cfg)
      : model_(model), dataset_(dataset), cfg_(cfg), adam_(make_adam_bundle(*model, cfg)),
        grads_(model->bank()) {}

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }
  AdamBundle& adam() { return adam_; }
  const LossBreakdown& last_loss() const { return last_loss_; }

  // One batch, one loss, one Adam update per field network.
  LossBreakdown train_step() {
    Rng batch_rng(seed_mix(cfg_.seed, 0xba7c4, uint64_t(step_)));
    const auto pixels = sample_pixel_rays(*dataset_, cfg_.batch_pixel_rays, &batch_rng);
    const auto supervision =
        sample_supervision_rays(model_->bbox(), cfg_.batch_supervision_rays, &batch_rng);

    LossBreakdown loss = compute_loss(model_, pixels, supervision, cfg_, step_, &grads_);

    const bool finite = std::isfinite(loss.total) && grads_.all_finite();
    if (!finite) {
      // reject the step, halve lr for a while, keep parameters unchanged
      lr_halved_until_ = step_ + 100;
      ++rejected_steps_;
      loss.total = std::numeric_limits<double>::quiet_NaN();
      ++step_;
      last_loss_ = loss;
      return loss;
    }

    double lr = lr_schedule(std::min(step_, cfg_.total_steps), cfg_.total_steps, cfg_.lr_start,
                            cfg_.lr_end);
    if (step_ < lr_halved_until_) lr *= 0.5;
    adam_.shape.step(&model_->bank(), grads_, lr);
    adam_.refl.step(&model_->bank(), grads_, lr);
    adam_.vis.step(&model_->bank(), grads_, lr);
    ++step_;
    last_loss_ = loss;
    last_lr_ = lr;
    return loss;
  }

  double last_lr() const { return last_lr_; }
  int64_t rejected_steps() const { return rejected_steps_; }

 private:
  NervModel* model_;
  const Dataset* dataset_;
  TrainConfig cfg_;
  AdamBundle adam_;
  GradBank grads_;
  int64_t step_ = 0;
  int64_t lr_halved_until_ = -1;
  int64_t rejected_steps_ = 0;
  LossBreakdown last_loss_;
  double last_lr_ = 0.0;
};

// Trains the visibility field alone against a frozen density (analytic or a
// frozen shape MLP), using only the consistency terms.
inline std::vector<double> fit_visibility_to_frozen_shape(
    NervModel* model, const std::function<Eigen::RowVectorXd(const Mat&)>& frozen_density,
    const TrainConfig& cfg, int64_t steps) {
  AdamState adam(model->bank(), model->vis_param_ids(), cfg.beta1, cfg.beta2, cfg.adam_eps);
  GradBank grads(model->bank());
  std::vector<double> losses;
  losses.reserve(size_t(steps));

  for (int64_t step = 0; step < steps; ++step) {
    Rng rng(seed_mix(cfg.seed, 0xf17, uint64_t(step)));
    const auto rays = sample_supervision_rays(model->bbox(), cfg.batch_supervision_rays, &rng);
    grads.set_zero();
    double loss_val = 0.0;
    for (size_t i = 0; i < rays.size(); ++i) {
      const auto& sr = rays[i];
      Rng jrng(seed_mix(cfg.seed, 0xf17a, uint64_t(step), uint64_t(i)));
      const double delta = (sr.t_exit - sr.t_entry) / cfg.n_samples;
      std::vector<double> depths(static_cast<size_t>(cfg.n_samples));
      Mat pts(3, cfg.n_samples);
      for (int j = 0; j < cfg.n_samples; ++j) {
        depths[size_t(j)] = sr.t_entry + (j + jrng.uniform()) * delta;
        const Vec3 p = sr.ray.at(depths[size_t(j)]);
        pts(0, j) = p.x;
        pts(1, j) = p.y;
        pts(2, j) = p.z;
      }
      const Eigen::RowVectorXd sig = frozen_density(pts);
      const auto samples = RaySampleSet::from_densities(
          depths, delta, std::vector<double>(sig.data(), sig.data() + cfg.n_samples));
      const auto targets = consistency_targets(samples, sr.t_entry, sr.t_exit);
      Tape tape(&model->bank());
      const auto [vn, dn] = consistency_loss_nodes(&tape, *model, sr.ray, samples, targets);
      const int total = tape.add(vn, dn);
      loss_val += tape.value(total)(0, 0);
      tape.backward_scalar(total, &grads);
    }
    const double lr =
        lr_schedule(std::min(step, cfg.total_steps), cfg.total_steps, cfg.lr_start, cfg.lr_end);
    adam.step(&model->bank(), grads, lr);
    losses.push_back(loss_val);
  }
  return losses;
}

}  // namespace nerv
