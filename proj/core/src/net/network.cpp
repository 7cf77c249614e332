// __BEGIN_LICENSE__
//  Copyright (c) 2026, the satstereo authors.
//
//  Licensed under the Apache License, Version 2.0 (the "License"); you may
//  not use this file except in compliance with the License. You may obtain a
//  copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
//  Unless required by applicable law or agreed to in writing, software
//  distributed under the License is distributed on an "AS IS" BASIS,
//  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//  See the License for the specific language governing permissions and
//  limitations under the License.
// __END_LICENSE__

#include "satstereo/net/network.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace satstereo::net {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

const char* stack_name(std::size_t s) {
  static const char* names[] = {"fex_blockstack0", "fex_blockstack1", "fex_blockstack2", "fex_blockstack3"};
  return names[s];
}

void record(ShapeTrace* trace, const std::string& name, const Var<float>& v) {
  if (trace) trace->emplace_back(name, v->value.shape);
}

std::string hg(std::size_t k, const char* part) { return "hourglass" + std::to_string(k) + part; }

}  // namespace

void NetworkConfig::validate() const {
  require(base_channels >= 1, "NetworkConfig: base_channels must be positive");
  require(max_disparity >= 16 && max_disparity % 16 == 0,
          "NetworkConfig: max_disparity must be a positive multiple of 16 (D/4 divisible by 4)");
  require(hourglass_count >= 1, "NetworkConfig: hourglass_count must be positive");
  if (pooling == PoolingMode::spp) {
    require(!spp_pool_sizes.empty(), "NetworkConfig: spp_pool_sizes is empty");
    for (auto p : spp_pool_sizes) require(p >= 1, "NetworkConfig: pool size must be positive");
  } else {
    require(!crosshair_bands.empty(), "NetworkConfig: crosshair_bands is empty");
    for (auto b : crosshair_bands) require(b >= 1, "NetworkConfig: band size must be positive");
  }
}

void NetworkConfig::validate_input(std::size_t rows, std::size_t cols) const {
  validate();
  require(rows >= 16 && cols >= 16 && rows % 16 == 0 && cols % 16 == 0,
          "input dimensions must be positive multiples of 16");
  const std::size_t h4 = rows / 4, w4 = cols / 4;
  if (pooling == PoolingMode::spp) {
    for (auto p : spp_pool_sizes)
      require(p <= h4 && p <= w4, "pool size " + std::to_string(p) + " exceeds the feature map");
  } else {
    for (auto b : crosshair_bands)
      require(h4 % b == 0 && w4 % b == 0, "band size " + std::to_string(b) + " does not divide the feature map");
  }
  require(max_disparity / 4 <= w4, "max_disparity / 4 exceeds the feature width");
}

std::size_t NetworkConfig::pool_branch_count() const {
  return pooling == PoolingMode::spp ? spp_pool_sizes.size() : 2 * crosshair_bands.size();
}

std::size_t NetworkConfig::cost_channels() const {
  return cost_volume == CostVolumeMode::concat ? 2 * base_channels : base_channels;
}

void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"base_channels", c.base_channels},
                     {"max_disparity", c.max_disparity},
                     {"block_repeats", c.block_repeats},
                     {"spp_pool_sizes", c.spp_pool_sizes},
                     {"crosshair_bands", c.crosshair_bands},
                     {"pooling_mode", c.pooling == PoolingMode::spp ? "spp" : "crosshair"},
                     {"upsample_mode", c.upsample == Interp::linear ? "bilinear" : "cubic"},
                     {"hourglass_count", c.hourglass_count},
                     {"cost_volume", c.cost_volume == CostVolumeMode::concat ? "concat" : "difference"}};
}

void from_json(const nlohmann::json& j, NetworkConfig& c) {
  NetworkConfig d;
  d.base_channels = j.value("base_channels", d.base_channels);
  d.max_disparity = j.value("max_disparity", d.max_disparity);
  d.block_repeats = j.value("block_repeats", d.block_repeats);
  d.spp_pool_sizes = j.value("spp_pool_sizes", d.spp_pool_sizes);
  d.crosshair_bands = j.value("crosshair_bands", d.crosshair_bands);
  d.hourglass_count = j.value("hourglass_count", d.hourglass_count);
  const auto pm = j.value("pooling_mode", std::string("spp"));
  require(pm == "spp" || pm == "crosshair", "pooling_mode must be spp or crosshair");
  d.pooling = pm == "spp" ? PoolingMode::spp : PoolingMode::crosshair;
  const auto um = j.value("upsample_mode", std::string("bilinear"));
  require(um == "bilinear" || um == "cubic", "upsample_mode must be bilinear or cubic");
  d.upsample = um == "bilinear" ? Interp::linear : Interp::cubic;
  const auto cv = j.value("cost_volume", std::string("concat"));
  require(cv == "concat" || cv == "difference", "cost_volume must be concat or difference");
  d.cost_volume = cv == "concat" ? CostVolumeMode::concat : CostVolumeMode::difference;
  d.validate();
  c = std::move(d);
}

ShapeTrace propagate_shapes(const NetworkConfig& cfg, std::size_t rows, std::size_t cols) {
  cfg.validate_input(rows, cols);
  const std::size_t b = cfg.base_channels, h2 = rows / 2, w2 = cols / 2, h4 = rows / 4, w4 = cols / 4;
  const std::size_t d4 = cfg.max_disparity / 4;
  ShapeTrace t;
  t.emplace_back("input", Shape{1, 1, rows, cols});
  for (const char* n : {"fex_initial_a", "fex_initial_b", "fex_initial_c"}) t.emplace_back(n, Shape{1, b, h2, w2});
  t.emplace_back(stack_name(0), Shape{1, b, h2, w2});
  t.emplace_back(stack_name(1), Shape{1, 2 * b, h4, w4});
  t.emplace_back(stack_name(2), Shape{1, 4 * b, h4, w4});
  t.emplace_back(stack_name(3), Shape{1, 4 * b, h4, w4});
  const std::size_t branches = cfg.pool_branch_count();
  for (std::size_t k = 0; k < branches; ++k) t.emplace_back("fex_pool" + std::to_string(k), Shape{1, b, h4, w4});
  t.emplace_back("fex_concat", Shape{1, 6 * b + branches * b, h4, w4});
  t.emplace_back("fex_lastconv_a", Shape{1, 4 * b, h4, w4});
  t.emplace_back("fex_lastconv_b", Shape{1, b, h4, w4});
  t.emplace_back("cost_volume", Shape{1, cfg.cost_channels(), d4, h4, w4});
  t.emplace_back("prehourglass", Shape{1, b, d4, h4, w4});
  const Shape eighth{1, 2 * b, d4 / 2, h4 / 2, w4 / 2}, sixteenth{1, 2 * b, d4 / 4, h4 / 4, w4 / 4};
  for (std::size_t k = 0; k < cfg.hourglass_count; ++k) {
    t.emplace_back(hg(k, "_conv_a"), eighth);
    t.emplace_back(hg(k, "_conv_b"), eighth);
    t.emplace_back(hg(k, "_conv_c"), sixteenth);
    t.emplace_back(hg(k, "_conv_d"), sixteenth);
    t.emplace_back(hg(k, "_deconv_e"), eighth);
    t.emplace_back(hg(k, "_deconv_f"), Shape{1, b, d4, h4, w4});
    t.emplace_back(hg(k, ""), Shape{1, b, d4, h4, w4});
    t.emplace_back("classifier" + std::to_string(k), Shape{1, d4, h4, w4});
  }
  for (std::size_t k = 0; k < cfg.hourglass_count; ++k) {
    t.emplace_back("upsample" + std::to_string(k), Shape{1, cfg.max_disparity, rows, cols});
    t.emplace_back("disparity" + std::to_string(k), Shape{1, rows, cols});
  }
  return t;
}

Var<float> ParameterStore::add(const std::string& name, Tensor<float> init) {
  require(!contains(name), "duplicate parameter " + name);
  index_[name] = entries_.size();
  entries_.emplace_back(name, leaf(std::move(init), true));
  return entries_.back().second;
}

const Var<float>& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter " + name);
  return entries_[it->second].second;
}

std::vector<Var<float>> ParameterStore::vars() const {
  std::vector<Var<float>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.second);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.second->grad = Tensor<float>();
}

StereoNet::StereoNet(NetworkConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t b = cfg_.base_channels;
  add_conv2d("fex.initial_a", 1, b, 3, true, rng);
  add_conv2d("fex.initial_b", b, b, 3, true, rng);
  add_conv2d("fex.initial_c", b, b, 3, true, rng);
  const std::array<std::size_t, 4> width{b, 2 * b, 4 * b, 4 * b};
  const std::array<int, 4> strides{1, 2, 1, 1};
  std::size_t in = b;
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t i = 0; i < std::max<std::size_t>(cfg_.block_repeats[s], 1); ++i) {
      const std::string p = "fex.stack" + std::to_string(s) + ".block" + std::to_string(i);
      add_conv2d(p + ".conv1", i == 0 ? in : width[s], width[s], 3, true, rng);
      add_conv2d(p + ".conv2", width[s], width[s], 3, true, rng);
      if (i == 0 && (strides[s] != 1 || in != width[s])) add_conv2d(p + ".down", in, width[s], 1, true, rng);
    }
    in = width[s];
  }
  for (std::size_t k = 0; k < cfg_.pool_branch_count(); ++k) add_conv2d("fex.pool" + std::to_string(k), 4 * b, b, 3, true, rng);
  add_conv2d("fex.lastconv_a", 6 * b + cfg_.pool_branch_count() * b, 4 * b, 3, true, rng);
  add_conv2d("fex.lastconv_b", 4 * b, b, 1, true, rng);

  add_conv3d("dres0.conv1", cfg_.cost_channels(), b, false, rng);
  add_conv3d("dres0.conv2", b, b, false, rng);
  add_conv3d("dres1.conv1", b, b, false, rng);
  add_conv3d("dres1.conv2", b, b, false, rng);
  for (std::size_t k = 0; k < cfg_.hourglass_count; ++k) {
    const std::string p = "hourglass" + std::to_string(k);
    add_conv3d(p + ".conv1", b, 2 * b, false, rng);
    add_conv3d(p + ".conv2", 2 * b, 2 * b, false, rng);
    add_conv3d(p + ".conv3", 2 * b, 2 * b, false, rng);
    add_conv3d(p + ".conv4", 2 * b, 2 * b, false, rng);
    add_conv3d(p + ".deconv5", 2 * b, 2 * b, true, rng);
    add_conv3d(p + ".deconv6", 2 * b, b, true, rng);
    const std::string c = "classifier" + std::to_string(k);
    add_conv3d(c + ".conv1", b, b, false, rng);
    // Small final layer keeps the initial softmax soft; large costs saturate it
    // and the regression collapses onto a constant disparity.
    add_conv3d(c + ".conv2", b, 1, false, rng, 0.01f);
  }
}

void StereoNet::add_conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, bool bias,
                           std::mt19937_64& rng, float gain) {
  Tensor<float> w(Shape{out, in, k, k});
  std::normal_distribution<float> nd(0.0f, std::sqrt(2.0f / static_cast<float>(in * k * k)));
  for (auto& v : w.data) v = gain * nd(rng);
  params_.add(name + ".w", std::move(w));
  if (bias) params_.add(name + ".b", Tensor<float>(Shape{out}));
}

void StereoNet::add_conv3d(const std::string& name, std::size_t in, std::size_t out, bool transpose,
                           std::mt19937_64& rng, float gain) {
  Tensor<float> w(transpose ? Shape{in, out, 3, 3, 3} : Shape{out, in, 3, 3, 3});
  std::normal_distribution<float> nd(0.0f, std::sqrt(2.0f / static_cast<float>(in * 27)));
  for (auto& v : w.data) v = gain * nd(rng);
  params_.add(name + ".w", std::move(w));
  params_.add(name + ".b", Tensor<float>(Shape{out}));
}

Var<float> StereoNet::conv2(const std::string& name, const Var<float>& x, int stride, int pad, int dilation) const {
  const auto bn = name + ".b";
  return conv2d(x, params_.get(name + ".w"), params_.contains(bn) ? params_.get(bn) : Var<float>{}, stride, pad,
                dilation);
}

Var<float> StereoNet::conv3(const std::string& name, const Var<float>& x, int stride) const {
  return conv3d(x, params_.get(name + ".w"), params_.get(name + ".b"), stride, 1);
}

Var<float> StereoNet::deconv3(const std::string& name, const Var<float>& x) const {
  return conv_transpose3d(x, params_.get(name + ".w"), params_.get(name + ".b"), 2, 1, 1);
}

Var<float> StereoNet::block_stack(std::size_t stack, const Var<float>& x, int stride, int dilation) const {
  Var<float> out = x;
  for (std::size_t i = 0; i < std::max<std::size_t>(cfg_.block_repeats[stack], 1); ++i) {
    const std::string p = "fex.stack" + std::to_string(stack) + ".block" + std::to_string(i);
    const int s = i == 0 ? stride : 1;
    auto y = relu(conv2(p + ".conv1", out, s, dilation, dilation));
    y = conv2(p + ".conv2", y, 1, dilation, dilation);
    const auto shortcut = params_.contains(p + ".down.w") ? conv2(p + ".down", out, s, 0, 1) : out;
    out = add(y, shortcut);
  }
  return out;
}

Var<float> StereoNet::extract_features(const Var<float>& img, ShapeTrace* trace) const {
  require(img->value.rank() == 4 && img->value.dim(1) == 1, "extract_features: expects (N,1,H,W)");
  record(trace, "input", img);
  auto x = relu(conv2("fex.initial_a", img, 2, 1, 1));
  record(trace, "fex_initial_a", x);
  x = relu(conv2("fex.initial_b", x, 1, 1, 1));
  record(trace, "fex_initial_b", x);
  x = relu(conv2("fex.initial_c", x, 1, 1, 1));
  record(trace, "fex_initial_c", x);
  x = block_stack(0, x, 1, 1);
  record(trace, stack_name(0), x);
  const auto s1 = block_stack(1, x, 2, 1);
  record(trace, stack_name(1), s1);
  x = block_stack(2, s1, 1, 1);
  record(trace, stack_name(2), x);
  const auto s3 = block_stack(3, x, 1, 2);
  record(trace, stack_name(3), s3);
  std::vector<Var<float>> parts{s1, s3};
  for (auto& br : pool_branches(s3, trace)) parts.push_back(std::move(br));
  x = concat(parts, 1);
  record(trace, "fex_concat", x);
  x = relu(conv2("fex.lastconv_a", x, 1, 1, 1));
  record(trace, "fex_lastconv_a", x);
  x = conv2("fex.lastconv_b", x, 1, 0, 1);
  record(trace, "fex_lastconv_b", x);
  return x;
}

std::vector<Var<float>> StereoNet::pool_branches(const Var<float>& feat, ShapeTrace* trace) const {
  const std::size_t h = feat->value.dim(2), w = feat->value.dim(3);
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  if (cfg_.pooling == PoolingMode::spp) {
    for (auto p : cfg_.spp_pool_sizes) {
      require(p <= h && p <= w, "pool size " + std::to_string(p) + " exceeds the feature map");
      windows.emplace_back(p, p);
    }
  } else {
    for (auto b : cfg_.crosshair_bands) {
      require(h % b == 0 && w % b == 0, "band size " + std::to_string(b) + " does not divide the feature map");
      windows.emplace_back(b, w);
      windows.emplace_back(h, b);
    }
  }
  std::vector<Var<float>> out;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    auto x = avg_pool2d(feat, windows[k].first, windows[k].second);
    x = relu(conv2("fex.pool" + std::to_string(k), x, 1, 1, 1));
    x = resize_axis(resize_axis(x, 2, h, cfg_.upsample), 3, w, cfg_.upsample);
    record(trace, "fex_pool" + std::to_string(k), x);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Var<float>> StereoNet::regularize(const Var<float>& volume, ShapeTrace* trace) const {
  require(volume->value.rank() == 5, "regularize: expects (N,C,D,H,W)");
  for (std::size_t a = 2; a < 5; ++a)
    require(volume->value.dim(a) % 4 == 0, "regularize: volume extents must be divisible by 4");
  auto c0 = relu(conv3("dres0.conv1", volume, 1));
  c0 = relu(conv3("dres0.conv2", c0, 1));
  auto c1 = relu(conv3("dres1.conv1", c0, 1));
  const auto cost0 = add(conv3("dres1.conv2", c1, 1), c0);
  record(trace, "prehourglass", cost0);

  std::vector<Var<float>> costs;
  Var<float> x = cost0, pre0, post_prev, prev_cost;
  for (std::size_t k = 0; k < cfg_.hourglass_count; ++k) {
    const std::string p = "hourglass" + std::to_string(k);
    auto a = relu(conv3(p + ".conv1", x, 2));
    record(trace, hg(k, "_conv_a"), a);
    auto pre = conv3(p + ".conv2", a, 1);
    pre = relu(post_prev ? add(pre, post_prev) : pre);
    record(trace, hg(k, "_conv_b"), pre);
    auto c = relu(conv3(p + ".conv3", pre, 2));
    record(trace, hg(k, "_conv_c"), c);
    c = relu(conv3(p + ".conv4", c, 1));
    record(trace, hg(k, "_conv_d"), c);
    auto post = deconv3(p + ".deconv5", c);
    post = relu(add(post, k == 0 ? pre : pre0));
    record(trace, hg(k, "_deconv_e"), post);
    auto out = deconv3(p + ".deconv6", post);
    record(trace, hg(k, "_deconv_f"), out);
    out = add(out, cost0);
    record(trace, hg(k, ""), out);
    if (k == 0) pre0 = pre;
    post_prev = post;
    x = out;

    const std::string cl = "classifier" + std::to_string(k);
    auto cost = conv3(cl + ".conv2", relu(conv3(cl + ".conv1", out, 1)), 1);
    if (prev_cost) cost = add(cost, prev_cost);
    prev_cost = cost;
    const auto& s = cost->value.shape;
    auto squeezed = reshape(cost, Shape{s[0], s[2], s[3], s[4]});
    record(trace, cl, squeezed);
    costs.push_back(std::move(squeezed));
  }
  return costs;
}

Var<float> StereoNet::regress(const Var<float>& cost, std::size_t rows, std::size_t cols, ShapeTrace* trace,
                              std::size_t index) const {
  auto up = resize_axis(cost, 1, cfg_.max_disparity, cfg_.upsample);
  up = resize_axis(up, 2, rows, cfg_.upsample);
  up = resize_axis(up, 3, cols, cfg_.upsample);
  record(trace, "upsample" + std::to_string(index), up);
  auto disp = soft_argmin(up);
  record(trace, "disparity" + std::to_string(index), disp);
  return disp;
}

NetOutput StereoNet::forward(const Var<float>& left, const Var<float>& right, ShapeTrace* trace) const {
  require(left->value.shape == right->value.shape, "forward: left and right shapes differ");
  const std::size_t rows = left->value.dim(2), cols = left->value.dim(3);
  cfg_.validate_input(rows, cols);
  const auto fl = extract_features(left, trace);
  const auto fr = extract_features(right, nullptr);
  NetOutput out;
  const std::size_t d4 = cfg_.max_disparity / 4;
  out.cost_volume = cfg_.cost_volume == CostVolumeMode::concat ? cost_volume(fl, fr, d4)
                                                                : difference_cost_volume(fl, fr, d4);
  record(trace, "cost_volume", out.cost_volume);
  out.costs = regularize(out.cost_volume, trace);
  for (std::size_t k = 0; k < out.costs.size(); ++k) out.disparities.push_back(regress(out.costs[k], rows, cols, trace, k));
  return out;
}

}  // namespace satstereo::net
