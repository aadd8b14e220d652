// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// PFM (HDR, float32 little-endian, scale -1.0, bottom-up rows) and PNG
// (8-bit RGB, zlib-compressed) readers and writers. PNG previews are
// tonemapped and sRGB-encoded.

#pragma once

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nerv/image.hpp"
#include "nerv/vec.hpp"

namespace nerv {

namespace detail {

inline void io_fail(const std::string& what, const std::string& path, size_t offset) {
  throw NervError(what + " in '" + path + "' at byte " + std::to_string(offset));
}

inline std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NervError("cannot open '" + path + "'");
  return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                              std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw NervError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(data), std::streamsize(size));
  if (!f) throw NervError("short write to '" + path + "'");
}

}  // namespace detail

// -----------------------------------------------------------------------------
// PFM
// -----------------------------------------------------------------------------

inline void write_pfm(const Image& img, const std::string& path) {
  std::string header = "PF\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                       "\n-1.0\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + img.data.size() * 4);
  // rows bottom-to-top
  for (int y = img.height - 1; y >= 0; --y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float v = float(img.at(x, y, c));
        uint8_t bytes[4];
        std::memcpy(bytes, &v, 4);
        out.insert(out.end(), bytes, bytes + 4);
      }
  detail::write_file(path, out.data(), out.size());
}

inline Image read_pfm(const std::string& path) {
  const std::vector<uint8_t> buf = detail::read_file(path);
  size_t pos = 0;
  auto token = [&]() {
    while (pos < buf.size() && std::isspace(buf[pos])) ++pos;
    const size_t start = pos;
    while (pos < buf.size() && !std::isspace(buf[pos])) ++pos;
    if (start == pos) detail::io_fail("PFM: missing header token", path, start);
    return std::string(buf.begin() + std::ptrdiff_t(start), buf.begin() + std::ptrdiff_t(pos));
  };
  if (token() != "PF") detail::io_fail("PFM: bad magic (expected 'PF')", path, 0);
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(token());
    h = std::stoi(token());
    scale = std::stod(token());
  } catch (const std::exception&) {
    detail::io_fail("PFM: unparsable header number", path, pos);
  }
  if (w <= 0 || h <= 0) detail::io_fail("PFM: nonpositive dimensions", path, pos);
  if (scale >= 0.0) detail::io_fail("PFM: big-endian scale unsupported", path, pos);
  ++pos;  // single whitespace after the scale
  const size_t need = size_t(w) * size_t(h) * 12;
  if (buf.size() - pos < need) detail::io_fail("PFM: truncated pixel data", path, buf.size());

  Image img(w, h);
  for (int y = h - 1; y >= 0; --y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        img.at(x, y, c) = double(v);
      }
  return img;
}

// -----------------------------------------------------------------------------
// PNG (8-bit RGB, filter 0, non-interlaced)
// -----------------------------------------------------------------------------

namespace detail {

inline void push_u32(std::vector<uint8_t>* v, uint32_t x) {
  v->push_back(uint8_t(x >> 24));
  v->push_back(uint8_t(x >> 16));
  v->push_back(uint8_t(x >> 8));
  v->push_back(uint8_t(x));
}

inline uint32_t get_u32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

inline void push_chunk(std::vector<uint8_t>* out, const char type[4],
                       const std::vector<uint8_t>& payload) {
  push_u32(out, uint32_t(payload.size()));
  const size_t crc_start = out->size();
  out->insert(out->end(), type, type + 4);
  out->insert(out->end(), payload.begin(), payload.end());
  const uint32_t crc =
      uint32_t(::crc32(0, out->data() + crc_start, uInt(out->size() - crc_start)));
  push_u32(out, crc);
}

}  // namespace detail

// Writes 8-bit RGB. Values are expected in [0, 1] (already display-encoded).
inline void write_png(const std::vector<uint8_t>& rgb8, int w, int h, const std::string& path) {
  if (int(rgb8.size()) != w * h * 3) throw NervError("write_png: size mismatch");
  std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

  std::vector<uint8_t> ihdr;
  detail::push_u32(&ihdr, uint32_t(w));
  detail::push_u32(&ihdr, uint32_t(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  detail::push_chunk(&out, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve(size_t(h) * (1 + size_t(w) * 3));
  for (int y = 0; y < h; ++y) {
    raw.push_back(0);  // filter type none
    raw.insert(raw.end(), rgb8.begin() + std::ptrdiff_t(size_t(y) * w * 3),
               rgb8.begin() + std::ptrdiff_t(size_t(y + 1) * w * 3));
  }
  uLongf comp_size = compressBound(uLong(raw.size()));
  std::vector<uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), uLong(raw.size()), 6) != Z_OK)
    throw NervError("write_png: deflate failed");
  comp.resize(comp_size);
  detail::push_chunk(&out, "IDAT", comp);
  detail::push_chunk(&out, "IEND", {});
  detail::write_file(path, out.data(), out.size());
}

// Tonemap + sRGB encode an HDR image into an 8-bit preview.
inline void write_png_preview(const Image& hdr, const std::string& path) {
  std::vector<uint8_t> rgb8(size_t(hdr.width) * hdr.height * 3);
  for (size_t i = 0; i < hdr.data.size(); ++i) {
    const double display = srgb_encode(tone_map(std::fmax(hdr.data[i], 0.0)));
    rgb8[i] = uint8_t(std::lround(display * 255.0));
  }
  write_png(rgb8, hdr.width, hdr.height, path);
}

// Writes a [0,1] scalar map with a grayscale preview.
inline void write_png_gray(const std::vector<double>& values, int w, int h,
                           const std::string& path) {
  std::vector<uint8_t> rgb8(size_t(w) * h * 3);
  for (size_t i = 0; i < values.size(); ++i) {
    const uint8_t v = uint8_t(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
    rgb8[3 * i] = rgb8[3 * i + 1] = rgb8[3 * i + 2] = v;
  }
  write_png(rgb8, w, h, path);
}

// Reads 8-bit RGB/RGBA non-interlaced PNG; returns values in [0, 1].
inline Image read_png(const std::string& path) {
  const std::vector<uint8_t> buf = detail::read_file(path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
    detail::io_fail("PNG: bad signature", path, 0);

  size_t pos = 8;
  int w = 0, h = 0, channels = 0;
  std::vector<uint8_t> idat;
  while (pos + 8 <= buf.size()) {
    const uint32_t len = detail::get_u32(buf.data() + pos);
    if (pos + 12 + len > buf.size()) detail::io_fail("PNG: truncated chunk", path, pos);
    const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
    const uint8_t* payload = buf.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      w = int(detail::get_u32(payload));
      h = int(detail::get_u32(payload + 4));
      const int depth = payload[8], color = payload[9], interlace = payload[12];
      if (depth != 8 || (color != 2 && color != 6) || interlace != 0)
        detail::io_fail("PNG: unsupported format (need 8-bit RGB/RGBA)", path, pos + 8);
      channels = color == 2 ? 3 : 4;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      break;
    }
    pos += 12 + len;
  }
  if (w <= 0 || h <= 0 || idat.empty()) detail::io_fail("PNG: missing image data", path, pos);

  const size_t stride = size_t(w) * size_t(channels);
  std::vector<uint8_t> raw(size_t(h) * (stride + 1));
  uLongf raw_size = uLongf(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), uLong(idat.size())) != Z_OK ||
      raw_size != raw.size())
    detail::io_fail("PNG: inflate failed", path, pos);

  // unfilter
  std::vector<uint8_t> px(size_t(h) * stride);
  const int bpp = channels;
  for (int y = 0; y < h; ++y) {
    const uint8_t filter = raw[size_t(y) * (stride + 1)];
    const uint8_t* src = raw.data() + size_t(y) * (stride + 1) + 1;
    uint8_t* dst = px.data() + size_t(y) * stride;
    const uint8_t* prev = y > 0 ? px.data() + size_t(y - 1) * stride : nullptr;
    for (size_t i = 0; i < stride; ++i) {
      const int a = i >= size_t(bpp) ? dst[i - size_t(bpp)] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= size_t(bpp)) ? prev[i - size_t(bpp)] : 0;
      int val = src[i];
      switch (filter) {
        case 0: break;
        case 1: val += a; break;
        case 2: val += b; break;
        case 3: val += (a + b) / 2; break;
        case 4: {
          const int p = a + b - c;
          const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
          val += (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
          break;
        }
        default: detail::io_fail("PNG: unknown filter", path, size_t(y) * (stride + 1));
      }
      dst[i] = uint8_t(val & 0xff);
    }
  }

  Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(x, y, c) = px[size_t(y) * stride + size_t(x) * size_t(bpp) + size_t(c)] / 255.0;
  return img;
}

}  // namespace nerv
