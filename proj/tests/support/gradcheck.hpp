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

#pragma once

// Central finite-difference gradient checks for the differentiable
// primitives, shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "satstereo/net/ops.hpp"

namespace satstereo::testing {

using net::Shape;
using net::Tensor;
using net::Var;

struct GradCase {
  std::string name;
  std::vector<Tensor<double>> inputs;
  std::function<Var<double>(const std::vector<Var<double>>&)> fn;
};

struct GradReport {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

// Scalar <R, x> with fixed random R, so every output element contributes.
inline Var<double> project(const Var<double>& x, const std::vector<double>& r) {
  double s = 0;
  for (std::size_t i = 0; i < r.size(); ++i) s += r[i] * x->value.data[i];
  auto n = std::make_shared<net::Node<double>>();
  n->value = Tensor<double>(Shape{1}, std::vector<double>{s});
  if (x->requires_grad && net::grad_enabled()) {
    n->requires_grad = true;
    n->parents = {x};
    n->backward_fn = [x, r](net::Node<double>& node) {
      auto& g = x->grad_buffer().data;
      for (std::size_t i = 0; i < r.size(); ++i) g[i] += r[i] * node.grad.data[0];
    };
  }
  return n;
}

inline GradReport run_grad_check(const GradCase& c, std::uint32_t seed, std::size_t max_probes = 48,
                                 double step = 1e-6) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Var<double>> leaves;
  for (const auto& t : c.inputs) leaves.push_back(net::leaf(t, true));
  const auto out = c.fn(leaves);
  std::vector<double> r(out->value.size());
  for (auto& v : r) v = u(rng);
  net::backward(project(out, r));

  auto eval = [&](const std::vector<Tensor<double>>& ins) {
    net::NoGradGuard guard;
    std::vector<Var<double>> vs;
    for (const auto& t : ins) vs.push_back(net::leaf(t, false));
    return project(c.fn(vs), r)->value.data[0];
  };

  GradReport rep{c.name, 0.0, 0};
  auto perturbed = c.inputs;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const std::size_t n = c.inputs[k].size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n > max_probes) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_probes);
    }
    const auto& grad = leaves[k]->grad;
    double diff2 = 0, a2 = 0, n2 = 0;
    for (auto i : idx) {
      const double orig = c.inputs[k].data[i];
      perturbed[k].data[i] = orig + step;
      const double fp = eval(perturbed);
      perturbed[k].data[i] = orig - step;
      const double fm = eval(perturbed);
      perturbed[k].data[i] = orig;
      const double num = (fp - fm) / (2 * step);
      const double ana = grad.size() == n ? grad.data[i] : 0.0;
      diff2 += (num - ana) * (num - ana);
      a2 += ana * ana;
      n2 += num * num;
      ++rep.probes;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-6});
    rep.max_rel_error = std::max(rep.max_rel_error, std::sqrt(diff2) / denom);
  }
  return rep;
}

// Random tensors with entries bounded away from zero, so that ReLU kinks
// are never straddled by the finite-difference step.
inline Tensor<double> random_tensor(std::mt19937& rng, Shape s, double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution sign(0.5);
  Tensor<double> t(std::move(s));
  for (auto& v : t.data) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

inline std::size_t pick(std::mt19937& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// One randomized case per primitive configuration; at least 20 in total.
inline std::vector<GradCase> primitive_grad_cases(std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<GradCase> cases;
  using V = std::vector<Var<double>>;

  for (int i = 0; i < 4; ++i) {
    const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), o = pick(rng, 1, 3), k = (i % 2) ? 3 : 1;
    const int stride = 1 + i / 2, dil = (i == 3) ? 2 : 1, pad = static_cast<int>(k / 2) * dil;
    const std::size_t h = pick(rng, 5, 8), w = pick(rng, 5, 8);
    const bool bias = i != 1;
    std::vector<Tensor<double>> in{random_tensor(rng, {n, c, h, w}), random_tensor(rng, {o, c, k, k})};
    if (bias) in.push_back(random_tensor(rng, {o}));
    cases.push_back({"conv2d#" + std::to_string(i), in, [=](const V& v) {
                       return net::conv2d(v[0], v[1], bias ? v[2] : Var<double>{}, stride, pad, dil);
                     }});
  }
  for (int i = 0; i < 3; ++i) {
    const std::size_t c = pick(rng, 1, 2), o = pick(rng, 1, 2);
    const int stride = i == 2 ? 2 : 1;
    const std::size_t d = pick(rng, 3, 5), h = pick(rng, 3, 5), w = pick(rng, 3, 5);
    cases.push_back({"conv3d#" + std::to_string(i),
                     {random_tensor(rng, {1, c, d, h, w}), random_tensor(rng, {o, c, 3, 3, 3}), random_tensor(rng, {o})},
                     [=](const V& v) { return net::conv3d(v[0], v[1], v[2], stride, 1); }});
  }
  for (int i = 0; i < 2; ++i) {
    const std::size_t ci = pick(rng, 1, 2), co = pick(rng, 1, 2);
    const std::size_t d = pick(rng, 1, 3), h = pick(rng, 2, 3), w = pick(rng, 2, 3);
    cases.push_back({"conv_transpose3d#" + std::to_string(i),
                     {random_tensor(rng, {1, ci, d, h, w}), random_tensor(rng, {ci, co, 3, 3, 3}), random_tensor(rng, {co})},
                     [](const V& v) { return net::conv_transpose3d(v[0], v[1], v[2], 2, 1, 1); }});
  }
  for (int i = 0; i < 2; ++i) {
    const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 6), pick(rng, 2, 6)};
    cases.push_back({"relu#" + std::to_string(i), {random_tensor(rng, s)}, [](const V& v) { return net::relu(v[0]); }});
  }
  {
    const Shape s{1, pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)};
    cases.push_back({"add", {random_tensor(rng, s), random_tensor(rng, s)},
                     [](const V& v) { return net::add(v[0], v[1]); }});
  }
  for (std::size_t axis : {1u, 2u}) {
    Shape a{2, 2, 3, 4}, b = a;
    b[axis] = pick(rng, 1, 3);
    cases.push_back({"concat#axis" + std::to_string(axis), {random_tensor(rng, a), random_tensor(rng, b)},
                     [axis](const V& v) { return net::concat<double>({v[0], v[1]}, axis); }});
  }
  for (int i = 0; i < 2; ++i) {
    const std::size_t kh = pick(rng, 1, 3), kw = pick(rng, 2, 3);
    const Shape s{1, pick(rng, 1, 2), kh * pick(rng, 1, 3) + static_cast<std::size_t>(i), kw * pick(rng, 1, 3)};
    cases.push_back({"avg_pool2d#" + std::to_string(i), {random_tensor(rng, s)},
                     [kh, kw](const V& v) { return net::avg_pool2d(v[0], kh, kw); }});
  }
  for (auto mode : {net::Interp::linear, net::Interp::cubic}) {
    for (int i = 0; i < 2; ++i) {
      const std::size_t axis = pick(rng, 1, 3);
      Shape s{1, pick(rng, 1, 3), pick(rng, 2, 5), pick(rng, 2, 5)};
      const std::size_t out = i == 0 ? s[axis] * 2 + 1 : std::max<std::size_t>(1, s[axis] / 2);
      const std::string tag = mode == net::Interp::linear ? "linear" : "cubic";
      cases.push_back({"resize_" + tag + "#" + std::to_string(i), {random_tensor(rng, s)},
                       [axis, out, mode](const V& v) { return net::resize_axis(v[0], axis, out, mode); }});
    }
  }
  cases.push_back({"reshape", {random_tensor(rng, {2, 3, 4})},
                   [](const V& v) { return net::reshape(v[0], Shape{4, 6}); }});
  for (int i = 0; i < 2; ++i) {
    const std::size_t w = pick(rng, 3, 6);
    const Shape s{pick(rng, 1, 2), pick(rng, 1, 3), pick(rng, 2, 4), w};
    const std::size_t levels = pick(rng, 1, w);
    cases.push_back({"cost_volume#" + std::to_string(i), {random_tensor(rng, s), random_tensor(rng, s)},
                     [levels](const V& v) { return net::cost_volume(v[0], v[1], levels); }});
  }
  {
    const Shape s{1, 2, 3, 5};
    cases.push_back({"difference_cost_volume", {random_tensor(rng, s), random_tensor(rng, s)},
                     [](const V& v) { return net::difference_cost_volume(v[0], v[1], 4); }});
  }
  for (std::size_t axis : {1u, 3u}) {
    const Shape s{2, pick(rng, 2, 5), pick(rng, 1, 3), pick(rng, 2, 4)};
    cases.push_back({"softmax#axis" + std::to_string(axis), {random_tensor(rng, s, 0.05, 3.0)},
                     [axis](const V& v) { return net::softmax(v[0], axis); }});
  }
  for (int i = 0; i < 2; ++i) {
    const Shape s{pick(rng, 1, 2), pick(rng, 2, 8), pick(rng, 1, 3), pick(rng, 1, 4)};
    cases.push_back({"soft_argmin#" + std::to_string(i), {random_tensor(rng, s, 0.05, 3.0)},
                     [](const V& v) { return net::soft_argmin(v[0]); }});
  }
  for (int i = 0; i < 2; ++i) {
    const Shape s{1, pick(rng, 3, 6), pick(rng, 3, 6)};
    auto pred = random_tensor(rng, s);
    Tensor<double> target(s);
    std::vector<std::uint8_t> mask(pred.size());
    std::uniform_real_distribution<double> small(0.05, 0.9), large(1.1, 3.0);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double e = (k % 2) ? small(rng) : large(rng);
      target.data[k] = pred.data[k] + ((k % 3) ? e : -e);
      mask[k] = (k % 5) != 4;
    }
    cases.push_back({"smooth_l1#" + std::to_string(i), {pred},
                     [target, mask](const V& v) { return net::smooth_l1(v[0], target, mask, 1.0); }});
  }
  cases.push_back({"weighted_sum", {random_tensor(rng, {1}), random_tensor(rng, {1}), random_tensor(rng, {1})},
                   [](const V& v) { return net::weighted_sum<double>({v[0], v[1], v[2]}, {0.5, 0.7, 1.0}); }});
  return cases;
}

}  // namespace satstereo::testing
