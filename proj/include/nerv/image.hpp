// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// HDR image container, tone mapping, PSNR and MS-SSIM. Metrics operate on
// tonemapped values in [0, 1) with peak 1.

#pragma once

#include <cstdint>
#include <vector>

#include "nerv/vec.hpp"

namespace nerv {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // row-major RGB

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(size_t(w) * size_t(h) * 3, 0.0) {}

  double& at(int x, int y, int c) { return data[3 * (size_t(y) * width + x) + size_t(c)]; }
  double at(int x, int y, int c) const { return data[3 * (size_t(y) * width + x) + size_t(c)]; }
  Rgb pixel(int x, int y) const { return {at(x, y, 0), at(x, y, 1), at(x, y, 2)}; }
  void set_pixel(int x, int y, const Rgb& v) {
    at(x, y, 0) = v.x;
    at(x, y, 1) = v.y;
    at(x, y, 2) = v.z;
  }
  bool valid() const {
    for (double v : data)
      if (!std::isfinite(v) || v < 0.0) return false;
    return true;
  }
};

// Range compression x / (1 + x); negative input is a contract violation.
inline double tone_map(double x) {
  if (x < 0.0) throw NervError("tone_map: negative input");
  return x / (1.0 + x);
}

inline Image tone_map(const Image& hdr) {
  Image out(hdr.width, hdr.height);
  for (size_t i = 0; i < hdr.data.size(); ++i) out.data[i] = tone_map(hdr.data[i]);
  return out;
}

inline double srgb_encode(double linear) {
  const double x = std::fmin(std::fmax(linear, 0.0), 1.0);
  return x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

inline constexpr double kPsnrCap = 99.0;

// PSNR over tonemapped values, peak 1; identical images report the cap.
inline double psnr(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw NervError("psnr: dimension mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double ta = tone_map(a.data[i]);
    const double tb = tone_map(b.data[i]);
    mse += (ta - tb) * (ta - tb);
  }
  mse /= double(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::fmin(-10.0 * std::log10(mse), kPsnrCap);
}

namespace detail {

// Single channel plane, tonemapped.
struct Plane {
  int w = 0, h = 0;
  std::vector<double> v;
  double at(int x, int y) const { return v[size_t(y) * w + size_t(x)]; }
};

inline Plane channel_plane(const Image& img, int c) {
  Plane p;
  p.w = img.width;
  p.h = img.height;
  p.v.resize(size_t(p.w) * p.h);
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x) p.v[size_t(y) * p.w + x] = tone_map(img.at(x, y, c));
  return p;
}

inline Plane downsample2(const Plane& p) {
  Plane o;
  o.w = p.w / 2;
  o.h = p.h / 2;
  o.v.resize(size_t(o.w) * o.h);
  for (int y = 0; y < o.h; ++y)
    for (int x = 0; x < o.w; ++x)
      o.v[size_t(y) * o.w + x] = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) +
                                         p.at(2 * x, 2 * y + 1) + p.at(2 * x + 1, 2 * y + 1));
  return o;
}

inline std::vector<double> gaussian_window(int radius, double sigma) {
  std::vector<double> w(size_t(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    w[size_t(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += w[size_t(i + radius)];
  }
  for (auto& x : w) x /= sum;
  return w;
}

// Gaussian-weighted local statistics, valid region only.
struct SsimStats {
  double mean_ssim = 0.0;
  double mean_cs = 0.0;
};

inline SsimStats ssim_plane(const Plane& a, const Plane& b, double c1, double c2) {
  const int radius = 5;  // 11-tap window
  static const std::vector<double> win = gaussian_window(radius, 1.5);
  const int w = a.w, h = a.h;
  if (w < 2 * radius + 1 || h < 2 * radius + 1) throw NervError("ms_ssim: plane too small");

  auto blur = [&](const std::vector<double>& src) {
    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
      for (int x = radius; x < w - radius; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += win[size_t(i + radius)] * src[size_t(y) * w + size_t(x + i)];
        tmp[size_t(y) * w + size_t(x)] = s;
      }
    for (int y = radius; y < h - radius; ++y)
      for (int x = radius; x < w - radius; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i)
          s += win[size_t(i + radius)] * tmp[size_t(y + i) * w + size_t(x)];
        out[size_t(y) * w + size_t(x)] = s;
      }
    return out;
  };

  std::vector<double> aa(a.v.size()), bb(a.v.size()), ab(a.v.size());
  for (size_t i = 0; i < a.v.size(); ++i) {
    aa[i] = a.v[i] * a.v[i];
    bb[i] = b.v[i] * b.v[i];
    ab[i] = a.v[i] * b.v[i];
  }
  const auto mu_a = blur(a.v), mu_b = blur(b.v);
  const auto m_aa = blur(aa), m_bb = blur(bb), m_ab = blur(ab);

  SsimStats st;
  int count = 0;
  for (int y = radius; y < h - radius; ++y)
    for (int x = radius; x < w - radius; ++x) {
      const size_t i = size_t(y) * w + size_t(x);
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = m_aa[i] - ma * ma;
      const double vb = m_bb[i] - mb * mb;
      const double cov = m_ab[i] - ma * mb;
      const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
      const double cs = (2.0 * cov + c2) / (va + vb + c2);
      st.mean_ssim += lum * cs;
      st.mean_cs += cs;
      ++count;
    }
  st.mean_ssim /= count;
  st.mean_cs /= count;
  return st;
}

}  // namespace detail

// Multi-scale SSIM over tonemapped channels (averaged), standard weights,
// 11-tap Gaussian window with sigma 1.5, C1=(0.01)^2, C2=(0.03)^2. Falls back
// to fewer scales on small images; scales_used reports the count.
inline double ms_ssim(const Image& a, const Image& b, int* scales_used = nullptr) {
  if (a.width != b.width || a.height != b.height) throw NervError("ms_ssim: dimension mismatch");
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  const int min_dim = std::min(a.width, a.height);
  int scales = 1;
  while (scales < 5 && (min_dim >> scales) >= 16) ++scales;
  if (min_dim < 11) throw NervError("ms_ssim: image too small for one scale");
  if (scales_used) *scales_used = scales;

  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kWeights[s];

  double result = 0.0;
  for (int c = 0; c < 3; ++c) {
    detail::Plane pa = detail::channel_plane(a, c);
    detail::Plane pb = detail::channel_plane(b, c);
    double acc = 1.0;
    for (int s = 0; s < scales; ++s) {
      const auto st = detail::ssim_plane(pa, pb, c1, c2);
      const double w = kWeights[s] / weight_sum;
      if (s + 1 == scales)
        acc *= std::pow(std::fmax(st.mean_ssim, 0.0), w);
      else
        acc *= std::pow(std::fmax(st.mean_cs, 0.0), w);
      if (s + 1 < scales) {
        pa = detail::downsample2(pa);
        pb = detail::downsample2(pb);
      }
    }
    result += acc;
  }
  return result / 3.0;
}

// Single-scale SSIM mean (window 11, sigma 1.5), used by tests as the
// reference for the variance-zero closed form.
inline double ssim_single(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw NervError("ssim: dimension mismatch");
  double out = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto st = detail::ssim_plane(detail::channel_plane(a, c), detail::channel_plane(b, c),
                                       0.01 * 0.01, 0.03 * 0.03);
    out += st.mean_ssim;
  }
  return out / 3.0;
}

}  // namespace nerv
