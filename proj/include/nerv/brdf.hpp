// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Microfacet reflectance with the Lambert cosine term folded in:
//   R = D*F*G / (4 (n.wo)) + (n.wi)(1-F)(a/pi)
// with GGX distribution D, Schlick Fresnel F (F0 = 0.04), and a Smith-style
// geometry term using k = gamma^4 / 2. Zero when either direction is
// backfacing.

#pragma once

#include "nerv/tape.hpp"
#include "nerv/vec.hpp"

namespace nerv {

inline constexpr double kFresnelF0 = 0.04;
inline constexpr double kRoughnessMin = 0.08;  // keeps D bounded during training

struct BrdfParams {
  Rgb albedo;        // per channel in [0, 1]
  double roughness;  // gamma in [kRoughnessMin, 1]
  Vec3 normal;       // unit
};

// GGX normal distribution, rho = gamma^2.
inline double ggx_D(double n_dot_h, double gamma) {
  const double rho = gamma * gamma;
  const double rho2 = rho * rho;
  const double d = n_dot_h * n_dot_h * (rho2 - 1.0) + 1.0;
  return rho2 / (kPi * d * d);
}

inline double fresnel_schlick(double i_dot_h) {
  const double c = std::fmin(std::fmax(i_dot_h, 0.0), 1.0);
  const double m = 1.0 - c;
  const double m2 = m * m;
  return kFresnelF0 + (1.0 - kFresnelF0) * m2 * m2 * m;
}

inline double smith_G(double n_dot_i, double n_dot_o, double gamma) {
  if (n_dot_i <= 0.0 || n_dot_o <= 0.0) return 0.0;
  const double g2 = gamma * gamma;
  const double k = g2 * g2 / 2.0;
  return (n_dot_o * n_dot_i) / ((n_dot_o * (1.0 - k) + k) * (n_dot_i * (1.0 - k) + k));
}

inline Rgb eval_brdf(const BrdfParams& p, const Vec3& wi, const Vec3& wo) {
  const double n_dot_i = dot(p.normal, wi);
  const double n_dot_o = dot(p.normal, wo);
  if (n_dot_i <= 0.0 || n_dot_o <= 0.0) return Rgb(0.0);

  const Vec3 h_raw = wi + wo;
  const double h_len = norm(h_raw);
  double spec = 0.0;
  double fres = kFresnelF0;
  if (h_len > 1e-12) {
    const Vec3 h = h_raw / h_len;
    fres = fresnel_schlick(dot(wi, h));
    spec = ggx_D(dot(p.normal, h), p.roughness) * fres * smith_G(n_dot_i, n_dot_o, p.roughness) /
           (4.0 * n_dot_o);
  }
  const double diff = n_dot_i * (1.0 - fres) / kPi;
  return Rgb(spec) + diff * p.albedo;
}

// -----------------------------------------------------------------------------
// Batched differentiable evaluation over a set of incoming directions with a
// fixed outgoing direction. Shading state (normal, albedo, roughness) are tape
// nodes; the direction set is constant. Backfacing directions are masked to
// zero with the mask treated as piecewise constant.
// -----------------------------------------------------------------------------

struct BrdfBatchInputs {
  int normal = -1;     // 3x1 node
  int albedo = -1;     // 3x1 node
  int roughness = -1;  // 1x1 node
};

// `wi` has one unit direction per column; returns a 3xN node of R values.
inline int eval_brdf_tape(Tape* t, const BrdfBatchInputs& in, const Mat& wi, const Vec3& wo) {
  const Eigen::Index n_dirs = wi.cols();

  // Constant per-direction precomputation: half vectors and Fresnel.
  Mat h(3, n_dirs);
  Mat fres_row(1, n_dirs);
  Mat h_valid(1, n_dirs);
  for (Eigen::Index j = 0; j < n_dirs; ++j) {
    const Vec3 d{wi(0, j), wi(1, j), wi(2, j)};
    const Vec3 hr = d + wo;
    const double len = norm(hr);
    if (len > 1e-12) {
      const Vec3 hh = hr / len;
      h(0, j) = hh.x;
      h(1, j) = hh.y;
      h(2, j) = hh.z;
      fres_row(0, j) = fresnel_schlick(dot(d, hh));
      h_valid(0, j) = 1.0;
    } else {
      h.col(j).setZero();
      fres_row(0, j) = kFresnelF0;
      h_valid(0, j) = 0.0;
    }
  }

  Mat wo_row(1, 3);
  wo_row << wo.x, wo.y, wo.z;

  const int mi = t->transpose(t->linear_const(wi.transpose(), in.normal));  // 1xN
  const int mo = t->linear_const(wo_row, in.normal);                        // 1x1
  const int ndh = t->transpose(t->linear_const(h.transpose(), in.normal));  // 1xN

  // Mask from recorded values; zero kills both lobes for backfacing dirs.
  // Values are copied out: node storage may reallocate as ops are appended.
  Mat mask(1, n_dirs);
  const Mat mi_val = t->value(mi);
  const double mo_val = t->value(mo)(0, 0);
  for (Eigen::Index j = 0; j < n_dirs; ++j)
    mask(0, j) = (mi_val(0, j) > 0.0 && mo_val > 0.0) ? 1.0 : 0.0;

  const int mic = t->clamp(mi, 0.0, 1.0);
  const int moc = t->clamp(mo, 1e-9, 1.0);

  const int rho = t->hadamard(in.roughness, in.roughness);
  const int rho2 = t->hadamard(rho, rho);
  const int ndh2 = t->hadamard(ndh, ndh);
  const int den = t->affine(t->scalar_mul(t->affine(rho2, 1.0, -1.0), ndh2), 1.0, 1.0);
  const int dist = t->scalar_mul(t->affine(rho2, 1.0 / kPi, 0.0),
                                 t->recip(t->hadamard(den, den)));  // D, 1xN

  const int k = t->affine(rho2, 0.5, 0.0);
  const int one_minus_k = t->affine(k, -1.0, 1.0);
  const int ki = t->scalar_add(k, t->scalar_mul(one_minus_k, mic));
  const int ko = t->scalar_add(k, t->scalar_mul(one_minus_k, moc));
  const int g_num = t->scalar_mul(mo, mic);  // mo*mi
  const int g_den = t->scalar_mul(ko, ki);
  const int geom = t->hadamard(g_num, t->recip(g_den));

  const int dfg = t->hadamard_const(t->hadamard(dist, geom), fres_row.cwiseProduct(h_valid));
  const int spec = t->scalar_mul(t->recip(t->affine(moc, 4.0, 0.0)), dfg);  // 1xN

  Mat one_minus_f = (1.0 - fres_row.array()).matrix();
  const int diff_row = t->hadamard_const(mic, one_minus_f);  // 1xN
  const int alb = t->bcast_cols(t->affine(in.albedo, 1.0 / kPi, 0.0), int(n_dirs));
  const int diffuse = t->row_scale(alb, diff_row);  // 3xN

  const int total = t->add(t->bcast_rows(spec, 3), diffuse);
  return t->hadamard_const(total, mask.replicate(3, 1));
}

}  // namespace nerv
