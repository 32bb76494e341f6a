// Copyright 2026 The EVA Coreset Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Reference backend: conv3x3-ReLU-maxpool2 x2 followed by a linear
// classifier, trained with momentum SGD and L2 weight decay. Single-threaded
// and fully deterministic for a fixed seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "eva/detail/endian.hpp"
#include "eva/detail/rng.hpp"
#include "eva/error.hpp"
#include "eva/train/backend.hpp"
#include "eva/train/config.hpp"

namespace eva::train {

struct CnnShape {
  ImageShape input;
  std::size_t c1 = 8;
  std::size_t c2 = 16;
  std::size_t n_classes = 2;

  [[nodiscard]] std::size_t h1() const { return input.height / 2; }
  [[nodiscard]] std::size_t w1() const { return input.width / 2; }
  [[nodiscard]] std::size_t h2() const { return h1() / 2; }
  [[nodiscard]] std::size_t w2() const { return w1() / 2; }
  [[nodiscard]] std::size_t flat() const { return c2 * h2() * w2(); }

  // Parameter block offsets: w1, b1, w2, b2, wf, bf.
  [[nodiscard]] std::size_t n_w1() const { return c1 * input.channels * 9; }
  [[nodiscard]] std::size_t n_w2() const { return c2 * c1 * 9; }
  [[nodiscard]] std::size_t n_wf() const { return n_classes * flat(); }
  [[nodiscard]] std::size_t off_b1() const { return n_w1(); }
  [[nodiscard]] std::size_t off_w2() const { return off_b1() + c1; }
  [[nodiscard]] std::size_t off_b2() const { return off_w2() + n_w2(); }
  [[nodiscard]] std::size_t off_wf() const { return off_b2() + c2; }
  [[nodiscard]] std::size_t off_bf() const { return off_wf() + n_wf(); }
  [[nodiscard]] std::size_t n_params() const { return off_bf() + n_classes; }

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"input", {input.height, input.width, input.channels}}, {"c1", c1}, {"c2", c2}, {"n_classes", n_classes}};
  }
};

namespace detail {

// out[o] += conv3x3(in) with zero padding 1; in is ci x h x w, out is co x h x w.
inline void conv3x3_forward(const float* in, std::size_t ci, std::size_t h, std::size_t w, const float* wt,
                            const float* bias, std::size_t co, float* out) {
  for (std::size_t o = 0; o < co; ++o) {
    float* op = out + o * h * w;
    std::fill(op, op + h * w, bias[o]);
    for (std::size_t i = 0; i < ci; ++i) {
      const float* ip = in + i * h * w;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const float k = wt[((o * ci + i) * 3 + ky) * 3 + kx];
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const float* row = ip + static_cast<std::size_t>(iy) * w;
            float* orow = op + y * w;
            for (std::size_t x = x0; x < x1; ++x) orow[x] += k * row[x + kx - 1];
          }
        }
      }
    }
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient.
inline void conv3x3_backward(const float* in, std::size_t ci, std::size_t h, std::size_t w, const float* wt,
                             std::size_t co, const float* dout, float* dwt, float* dbias, float* din) {
  if (din) std::fill(din, din + ci * h * w, 0.0F);
  for (std::size_t o = 0; o < co; ++o) {
    const float* dp = dout + o * h * w;
    float bsum = 0.0F;
    for (std::size_t p = 0; p < h * w; ++p) bsum += dp[p];
    dbias[o] += bsum;
    for (std::size_t i = 0; i < ci; ++i) {
      const float* ip = in + i * h * w;
      for (std::size_t ky = 0; ky < 3; ++ky) {
        for (std::size_t kx = 0; kx < 3; ++kx) {
          const std::size_t widx = ((o * ci + i) * 3 + ky) * 3 + kx;
          const float k = wt[widx];
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          float g = 0.0F;
          for (std::size_t y = 0; y < h; ++y) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            const std::size_t base = static_cast<std::size_t>(iy) * w;
            const float* row = ip + base;
            const float* drow = dp + y * w;
            for (std::size_t x = x0; x < x1; ++x) g += drow[x] * row[x + kx - 1];
            if (din) {
              float* dirow = din + i * h * w + base;
              for (std::size_t x = x0; x < x1; ++x) dirow[x + kx - 1] += k * drow[x];
            }
          }
          dwt[widx] += g;
        }
      }
    }
  }
}

// ReLU then 2x2 max pooling (floor); records the winning input offset.
inline void relu_pool_forward(const float* in, std::size_t c, std::size_t h, std::size_t w, float* out,
                              std::uint32_t* arg) {
  const std::size_t ho = h / 2;
  const std::size_t wo = w / 2;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x) {
        std::size_t best = ch * h * w + 2 * y * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ch * h * w + (2 * y + dy) * w + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + y) * wo + x;
        out[o] = std::max(in[best], 0.0F);
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

inline void relu_pool_backward(const float* pre, std::size_t n_out, const std::uint32_t* arg, const float* dout,
                               float* din, std::size_t n_in) {
  std::fill(din, din + n_in, 0.0F);
  for (std::size_t o = 0; o < n_out; ++o) {
    if (pre[arg[o]] > 0.0F) din[arg[o]] += dout[o];
  }
}

}  // namespace detail

class SmallCnn final : public Backend {
 public:
  SmallCnn(CnnShape shape, const TrainConfig& cfg)
      : shape_(shape),
        momentum_(cfg.momentum),
        weight_decay_(cfg.weight_decay),
        augment_(cfg.augment),
        params_(shape.n_params(), 0.0F),
        velocity_(shape.n_params(), 0.0F) {
    if (shape_.h2() == 0 || shape_.w2() == 0) throw ValidationError("small_cnn needs images of at least 4x4");
    if (shape_.n_classes < 2) throw ValidationError("small_cnn needs at least 2 classes");
    std::mt19937_64 rng(cfg.seed);
    auto init = [&](std::size_t off, std::size_t n, double fan_in, double gain) {
      const double sd = std::sqrt(gain / fan_in);
      for (std::size_t k = 0; k < n; ++k) params_[off + k] = static_cast<float>(sd * eva::detail::normal01(rng));
    };
    init(0, shape_.n_w1(), static_cast<double>(shape_.input.channels * 9), 2.0);
    init(shape_.off_w2(), shape_.n_w2(), static_cast<double>(shape_.c1 * 9), 2.0);
    init(shape_.off_wf(), shape_.n_wf(), static_cast<double>(shape_.flat()), 1.0);
  }

  [[nodiscard]] std::size_t n_classes() const override { return shape_.n_classes; }
  [[nodiscard]] const CnnShape& shape() const { return shape_; }
  [[nodiscard]] std::span<const float> parameters() const { return params_; }

  void train_step(const Split& data, std::span<const std::size_t> batch, double lr,
                  std::mt19937_64& rng) override {
    if (batch.empty()) return;
    std::vector<float> grad(params_.size(), 0.0F);
    Workspace ws(shape_);
    const float scale = 1.0F / static_cast<float>(batch.size());
    for (std::size_t idx : batch) {
      const bool flip = augment_ && (rng() & 1U);
      load_input(data, idx, flip, ws.x);
      forward(ws);
      // Softmax cross-entropy gradient, averaged over the batch.
      for (std::size_t j = 0; j < shape_.n_classes; ++j) {
        ws.dlogits[j] = (static_cast<float>(ws.prob[j]) - (j == data.labels[idx] ? 1.0F : 0.0F)) * scale;
      }
      backward(ws, grad);
    }
    const auto wd = static_cast<float>(weight_decay_);
    const auto mom = static_cast<float>(momentum_);
    const auto step = static_cast<float>(lr);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      const float g = grad[k] + wd * params_[k];
      velocity_[k] = mom * velocity_[k] + g;
      params_[k] -= step * velocity_[k];
    }
  }

  void predict_proba(const Split& data, std::span<float> out) const override {
    if (out.size() != data.size() * shape_.n_classes) throw ValidationError("probability buffer has wrong size");
    Workspace ws(shape_);
    for (std::size_t i = 0; i < data.size(); ++i) {
      load_input(data, i, false, ws.x);
      forward(ws);
      for (std::size_t j = 0; j < shape_.n_classes; ++j) out[i * shape_.n_classes + j] = static_cast<float>(ws.prob[j]);
    }
  }

  // Model artifact: "EVAM" | u32 version | u32 json_len | json | u64 n | n x f32.
  void save(const std::filesystem::path& path) const override {
    std::string buf("EVAM");
    eva::detail::put_le<std::uint32_t>(buf, 1);
    const std::string meta = nlohmann::json{{"model", "small_cnn"}, {"shape", shape_.to_json()}}.dump();
    eva::detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(meta.size()));
    buf += meta;
    eva::detail::put_le<std::uint64_t>(buf, params_.size());
    for (float p : params_) eva::detail::put_f32(buf, p);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
  }

  static std::unique_ptr<SmallCnn> load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model " + path.string());
    const std::vector<unsigned char> b{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    using eva::detail::get_le;
    if (b.size() < 12 || std::string(b.begin(), b.begin() + 4) != "EVAM") throw FormatError("not a model artifact");
    if (get_le<std::uint32_t>(b.data() + 4) != 1) throw FormatError("unsupported model artifact version");
    const auto len = get_le<std::uint32_t>(b.data() + 8);
    if (12 + len + 8 > b.size()) throw FormatError("truncated model artifact");
    const auto meta = nlohmann::json::parse(b.begin() + 12, b.begin() + 12 + len, nullptr, false);
    if (meta.is_discarded() || meta.value("model", "") != "small_cnn") throw FormatError("unknown model artifact");
    const auto& s = meta.at("shape");
    CnnShape shape{{s.at("input").at(0).get<std::uint32_t>(), s.at("input").at(1).get<std::uint32_t>(),
                    s.at("input").at(2).get<std::uint32_t>()},
                   s.at("c1").get<std::size_t>(), s.at("c2").get<std::size_t>(), s.at("n_classes").get<std::size_t>()};
    const auto n = get_le<std::uint64_t>(b.data() + 12 + len);
    if (n != shape.n_params() || b.size() != 12 + len + 8 + n * 4) throw FormatError("model artifact size mismatch");
    auto model = std::make_unique<SmallCnn>(shape, TrainConfig{});
    for (std::size_t k = 0; k < n; ++k) model->params_[k] = eva::detail::get_f32(b.data() + 12 + len + 8 + 4 * k);
    return model;
  }

 private:
  struct Workspace {
    explicit Workspace(const CnnShape& s)
        : x(s.input.pixels()),
          a1(s.c1 * s.input.height * s.input.width),
          p1(s.c1 * s.h1() * s.w1()),
          arg1(p1.size()),
          a2(s.c2 * s.h1() * s.w1()),
          p2(s.flat()),
          arg2(p2.size()),
          prob(s.n_classes),
          dlogits(s.n_classes),
          dp2(p2.size()),
          da2(a2.size()),
          dp1(p1.size()),
          da1(a1.size()) {}
    std::vector<float> x, a1, p1;
    std::vector<std::uint32_t> arg1;
    std::vector<float> a2, p2;
    std::vector<std::uint32_t> arg2;
    std::vector<double> prob;
    std::vector<float> dlogits, dp2, da2, dp1, da1;
  };

  // HWC uint8 -> CHW float in [-1, 1].
  void load_input(const Split& data, std::size_t idx, bool flip, std::vector<float>& x) const {
    const auto& in = shape_.input;
    const std::uint8_t* src = data.images.data() + idx * in.pixels();
    for (std::size_t y = 0; y < in.height; ++y) {
      for (std::size_t xx = 0; xx < in.width; ++xx) {
        const std::size_t sx = flip ? in.width - 1 - xx : xx;
        for (std::size_t c = 0; c < in.channels; ++c) {
          x[(c * in.height + y) * in.width + xx] =
              static_cast<float>(src[(y * in.width + sx) * in.channels + c]) / 127.5F - 1.0F;
        }
      }
    }
  }

  void forward(Workspace& ws) const {
    const auto& s = shape_;
    const float* p = params_.data();
    detail::conv3x3_forward(ws.x.data(), s.input.channels, s.input.height, s.input.width, p, p + s.off_b1(), s.c1,
                            ws.a1.data());
    detail::relu_pool_forward(ws.a1.data(), s.c1, s.input.height, s.input.width, ws.p1.data(), ws.arg1.data());
    detail::conv3x3_forward(ws.p1.data(), s.c1, s.h1(), s.w1(), p + s.off_w2(), p + s.off_b2(), s.c2, ws.a2.data());
    detail::relu_pool_forward(ws.a2.data(), s.c2, s.h1(), s.w1(), ws.p2.data(), ws.arg2.data());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.n_classes; ++j) {
      const float* wrow = p + s.off_wf() + j * s.flat();
      double z = p[s.off_bf() + j];
      for (std::size_t k = 0; k < s.flat(); ++k) z += static_cast<double>(wrow[k]) * ws.p2[k];
      ws.prob[j] = z;
      max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (auto& z : ws.prob) {
      z = std::exp(z - max_logit);
      sum += z;
    }
    for (auto& z : ws.prob) z /= sum;
  }

  void backward(Workspace& ws, std::vector<float>& grad) const {
    const auto& s = shape_;
    const float* p = params_.data();
    std::fill(ws.dp2.begin(), ws.dp2.end(), 0.0F);
    for (std::size_t j = 0; j < s.n_classes; ++j) {
      const float d = ws.dlogits[j];
      const float* wrow = p + s.off_wf() + j * s.flat();
      float* grow = grad.data() + s.off_wf() + j * s.flat();
      for (std::size_t k = 0; k < s.flat(); ++k) {
        grow[k] += d * ws.p2[k];
        ws.dp2[k] += d * wrow[k];
      }
      grad[s.off_bf() + j] += d;
    }
    detail::relu_pool_backward(ws.a2.data(), ws.p2.size(), ws.arg2.data(), ws.dp2.data(), ws.da2.data(),
                               ws.a2.size());
    detail::conv3x3_backward(ws.p1.data(), s.c1, s.h1(), s.w1(), p + s.off_w2(), s.c2, ws.da2.data(),
                             grad.data() + s.off_w2(), grad.data() + s.off_b2(), ws.dp1.data());
    detail::relu_pool_backward(ws.a1.data(), ws.p1.size(), ws.arg1.data(), ws.dp1.data(), ws.da1.data(),
                               ws.a1.size());
    detail::conv3x3_backward(ws.x.data(), s.input.channels, s.input.height, s.input.width, p, s.c1, ws.da1.data(),
                             grad.data(), grad.data() + s.off_b1(), nullptr);
  }

  CnnShape shape_;
  double momentum_;
  double weight_decay_;
  bool augment_;
  std::vector<float> params_;
  std::vector<float> velocity_;
};

}  // namespace eva::train
