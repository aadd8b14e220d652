// Copyright (c) 2026 nerv authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: magic "NERV", u32 version, u32 header length, JSON
// header, then contiguous little-endian arrays in header order. Canonical
// parameter arrays are f32; an additional f64 "resume" group (parameters and
// Adam moments) makes mid-training resume bitwise exact.

#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nerv/adam.hpp"
#include "nerv/config.hpp"
#include "nerv/fields.hpp"
#include "nerv/image_io.hpp"

namespace nerv {

namespace detail {

struct ArrayMeta {
  std::string name;
  int64_t rows = 0;
  int64_t cols = 0;
  std::string dtype;  // "f32" | "f64"
};

inline void append_array_f32(std::vector<uint8_t>* out, const Mat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const float v = float(m(r, c));
      uint8_t b[4];
      std::memcpy(b, &v, 4);
      out->insert(out->end(), b, b + 4);
    }
}

inline void append_array_f64(std::vector<uint8_t>* out, const Mat& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double v = m(r, c);
      uint8_t b[8];
      std::memcpy(b, &v, 8);
      out->insert(out->end(), b, b + 8);
    }
}

inline Mat parse_array(const std::vector<uint8_t>& buf, size_t* pos, const ArrayMeta& meta) {
  const size_t elem = meta.dtype == "f64" ? 8 : 4;
  const size_t need = size_t(meta.rows) * size_t(meta.cols) * elem;
  if (*pos + need > buf.size())
    throw NervError("checkpoint: truncated payload, missing array '" + meta.name + "'");
  Mat m(meta.rows, meta.cols);
  size_t p = *pos;
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (meta.dtype == "f64") {
        double v;
        std::memcpy(&v, buf.data() + p, 8);
        m(r, c) = v;
        p += 8;
      } else {
        float v;
        std::memcpy(&v, buf.data() + p, 4);
        m(r, c) = double(v);
        p += 4;
      }
    }
  *pos = p;
  return m;
}

// Stable field/layer array naming.
inline std::vector<std::pair<std::string, int>> named_param_ids(const NervModel& model) {
  std::vector<std::pair<std::string, int>> out;
  auto add_net = [&](const std::string& prefix, const DenseNetwork& net) {
    for (size_t i = 0; i < net.layers().size(); ++i) {
      out.emplace_back(prefix + "/w" + std::to_string(i), net.layers()[i].w_id);
      out.emplace_back(prefix + "/b" + std::to_string(i), net.layers()[i].b_id);
    }
  };
  add_net("shape", model.shape_net());
  add_net("refl", model.refl_net());
  add_net("vis_trunk", model.vis_trunk_net());
  add_net("vis_head", model.vis_head_net());
  return out;
}

}  // namespace detail

struct AdamBundle {
  AdamState shape, refl, vis;
};

inline AdamBundle make_adam_bundle(const NervModel& model, const TrainConfig& cfg) {
  return {AdamState(model.bank(), model.shape_param_ids(), cfg.beta1, cfg.beta2, cfg.adam_eps),
          AdamState(model.bank(), model.refl_param_ids(), cfg.beta1, cfg.beta2, cfg.adam_eps),
          AdamState(model.bank(), model.vis_param_ids(), cfg.beta1, cfg.beta2, cfg.adam_eps)};
}

inline void save_checkpoint(const std::string& path, const NervModel& model,
                            const TrainConfig& cfg, int64_t step, const AdamBundle* adam,
                            bool include_resume = true) {
  const auto named = detail::named_param_ids(model);
  std::vector<detail::ArrayMeta> metas;
  std::vector<uint8_t> payload;

  auto push_named = [&](const std::string& name, const Mat& m, const char* dtype) {
    metas.push_back({name, m.rows(), m.cols(), dtype});
    if (std::string(dtype) == "f64")
      detail::append_array_f64(&payload, m);
    else
      detail::append_array_f32(&payload, m);
  };

  for (const auto& [name, id] : named) push_named(name, model.bank().value(id), "f32");
  if (include_resume) {
    for (const auto& [name, id] : named)
      push_named("resume/params/" + name, model.bank().value(id), "f64");
    if (adam) {
      auto push_adam = [&](const std::string& field, const AdamState& st) {
        for (size_t i = 0; i < st.param_ids().size(); ++i) {
          push_named("resume/adam_m/" + field + "/" + std::to_string(i), st.first_moment(i),
                     "f64");
          push_named("resume/adam_v/" + field + "/" + std::to_string(i), st.second_moment(i),
                     "f64");
        }
      };
      push_adam("shape", adam->shape);
      push_adam("refl", adam->refl);
      push_adam("vis", adam->vis);
    }
  }

  Json header;
  header["version"] = 1;
  header["step"] = step;
  header["train_config"] = to_json(cfg);
  const Aabb& bb = model.bbox();
  header["bbox"] = {{"lo", {bb.lo.x, bb.lo.y, bb.lo.z}}, {"hi", {bb.hi.x, bb.hi.y, bb.hi.z}}};
  if (adam) {
    header["adam_steps"] = {{"shape", adam->shape.step_count()},
                            {"refl", adam->refl.step_count()},
                            {"vis", adam->vis.step_count()}};
  }
  Json arrays = Json::array();
  for (const auto& m : metas)
    arrays.push_back(
        {{"name", m.name}, {"rows", m.rows}, {"cols", m.cols}, {"dtype", m.dtype}});
  header["arrays"] = arrays;
  const std::string header_str = header.dump();

  std::vector<uint8_t> out;
  out.insert(out.end(), {'N', 'E', 'R', 'V'});
  auto push_u32le = [&](uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
  };
  push_u32le(1);
  push_u32le(uint32_t(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());
  out.insert(out.end(), payload.begin(), payload.end());
  detail::write_file(path, out.data(), out.size());
}

struct LoadedCheckpoint {
  TrainConfig config;
  int64_t step = 0;
  NervModel model;
  AdamBundle adam;
  bool exact_resume = false;  // f64 state was present
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  const std::vector<uint8_t> buf = detail::read_file(path);
  if (buf.size() < 12 || std::memcmp(buf.data(), "NERV", 4) != 0)
    throw NervError("checkpoint: bad magic in '" + path + "'");
  auto u32le = [&](size_t at) {
    return uint32_t(buf[at]) | (uint32_t(buf[at + 1]) << 8) | (uint32_t(buf[at + 2]) << 16) |
           (uint32_t(buf[at + 3]) << 24);
  };
  const uint32_t version = u32le(4);
  if (version != 1) throw NervError("checkpoint: unsupported version");
  const uint32_t header_len = u32le(8);
  if (12 + size_t(header_len) > buf.size()) throw NervError("checkpoint: truncated header");
  Json header;
  try {
    header = Json::parse(buf.begin() + 12, buf.begin() + 12 + header_len);
  } catch (const std::exception& e) {
    throw NervError(std::string("checkpoint: unparsable header: ") + e.what());
  }

  LoadedCheckpoint lc;
  lc.config = train_config_from_json(header.at("train_config"));
  lc.step = header.at("step").get<int64_t>();
  Aabb bbox;
  const auto& bb = header.at("bbox");
  bbox.lo = {bb.at("lo")[0], bb.at("lo")[1], bb.at("lo")[2]};
  bbox.hi = {bb.at("hi")[0], bb.at("hi")[1], bb.at("hi")[2]};
  lc.model = NervModel(lc.config.model_config(bbox));

  // Parse payload in header order.
  std::vector<detail::ArrayMeta> metas;
  for (const auto& a : header.at("arrays"))
    metas.push_back({a.at("name").get<std::string>(), a.at("rows").get<int64_t>(),
                     a.at("cols").get<int64_t>(), a.at("dtype").get<std::string>()});
  size_t pos = 12 + header_len;
  std::vector<std::pair<detail::ArrayMeta, Mat>> arrays;
  for (const auto& m : metas) arrays.emplace_back(m, detail::parse_array(buf, &pos, m));

  auto find = [&](const std::string& name) -> const Mat* {
    for (const auto& [m, v] : arrays)
      if (m.name == name) return &v;
    return nullptr;
  };

  const auto named = detail::named_param_ids(lc.model);
  bool have_resume = true;
  for (const auto& [name, id] : named)
    if (!find("resume/params/" + name)) have_resume = false;
  for (const auto& [name, id] : named) {
    const Mat* src = have_resume ? find("resume/params/" + name) : find(name);
    if (!src) throw NervError("checkpoint: missing array '" + name + "'");
    Mat& dst = lc.model.bank().value(id);
    if (src->rows() != dst.rows() || src->cols() != dst.cols())
      throw NervError("checkpoint: shape mismatch for array '" + name + "'");
    dst = *src;
  }
  lc.exact_resume = have_resume;

  lc.adam = make_adam_bundle(lc.model, lc.config);
  if (header.contains("adam_steps")) {
    lc.adam.shape.set_step_count(header["adam_steps"]["shape"].get<int64_t>());
    lc.adam.refl.set_step_count(header["adam_steps"]["refl"].get<int64_t>());
    lc.adam.vis.set_step_count(header["adam_steps"]["vis"].get<int64_t>());
    auto load_adam = [&](const std::string& field, AdamState* st) {
      for (size_t i = 0; i < st->param_ids().size(); ++i) {
        const Mat* m = find("resume/adam_m/" + field + "/" + std::to_string(i));
        const Mat* v = find("resume/adam_v/" + field + "/" + std::to_string(i));
        if (m) st->first_moment(i) = *m;
        if (v) st->second_moment(i) = *v;
      }
    };
    load_adam("shape", &lc.adam.shape);
    load_adam("refl", &lc.adam.refl);
    load_adam("vis", &lc.adam.vis);
  }
  return lc;
}

}  // namespace nerv
