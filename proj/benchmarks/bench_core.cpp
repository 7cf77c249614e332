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

// Microbenchmarks for the hot loops: 3D convolution, SGM and GT densification.

#include <random>

#include <benchmark/benchmark.h>

#include "satstereo/gt/ground_truth.hpp"
#include "satstereo/net/ops.hpp"
#include "satstereo/sgm/sgm.hpp"

namespace {

using namespace satstereo;

template <class T>
net::Var<T> random_var(net::Shape s, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<T> n(0, 1);
  net::Tensor<T> t(std::move(s));
  for (auto& v : t.data) v = n(rng);
  return net::leaf(std::move(t));
}

void BM_Conv3dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto x = random_var<float>({1, c, 16, 16, 32}, 1);
  const auto w = random_var<float>({c, c, 3, 3, 3}, 2);
  const auto b = random_var<float>({c}, 3);
  net::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net::conv3d(x, w, b)->value.data.data());
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * 27 * 16 * 16 * 32));
}
BENCHMARK(BM_Conv3dForward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

ImageF random_image(std::size_t rows, std::size_t cols, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 255.0f);
  ImageF img(rows, cols);
  for (auto& v : img.pixels()) v = u(rng);
  return img;
}

void BM_SgmDisparity(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto left = random_image(n, n, 4);
  auto right = random_image(n, n, 5);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c + 6 < n; ++c) right(r, c) = left(r, c + 6);
  sgm::SgmParams p;
  p.max_disparity = 64;
  for (auto _ : state) benchmark::DoNotOptimize(sgm::sgm_disparity(left, right, p));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_SgmDisparity)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Densify(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937 rng(6);
  std::bernoulli_distribution keep(0.3);
  std::uniform_real_distribution<float> d(0.0f, 40.0f);
  SparseDisparity sp(n, n);
  for (std::size_t i = 0; i < sp.values.size(); ++i)
    if (keep(rng)) {
      sp.values.data()[i] = d(rng);
      sp.valid.data()[i] = 1;
    }
  for (auto _ : state) benchmark::DoNotOptimize(gt::densify_disparity(sp));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Densify)->Arg(256)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
