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

#include <cstdint>
#include <vector>

#include "satstereo/net/tensor.hpp"

namespace satstereo::net {

enum class Interp { linear, cubic };

/// x (N,C,H,W), w (O,C,k,k), b (O) or null -> (N,O,Ho,Wo).
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1, int pad = 0, int dilation = 1);

/// x (N,C,D,H,W), w (O,C,k,k,k), b (O) or null.
template <class T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1, int pad = 1);

/// Adjoint of conv3d. w (Ci,Co,k,k,k); output extent (n-1)s - 2p + k + output_padding.
template <class T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 2, int pad = 1,
                        int output_padding = 1);

template <class T>
Var<T> relu(const Var<T>& x);

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b);

/// Concatenation along `axis`; all other extents must agree.
template <class T>
Var<T> concat(const std::vector<Var<T>>& xs, std::size_t axis = 1);

/// Non-overlapping (kh x kw) mean over the last two axes of (N,C,H,W);
/// trailing rows/columns that do not fill a window are dropped.
template <class T>
Var<T> avg_pool2d(const Var<T>& x, std::size_t kh, std::size_t kw);

/// Resamples one axis to `out_len` samples (half-pixel centers, edge clamp;
/// cubic uses the Keys kernel with a = -0.75).
template <class T>
Var<T> resize_axis(const Var<T>& x, std::size_t axis, std::size_t out_len, Interp mode);

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape);

/// l, r (N,F,H,W) -> (N,2F,levels,H,W); level d pairs l(x) with r(x - d),
/// zero where x - d < 0.
template <class T>
Var<T> cost_volume(const Var<T>& left, const Var<T>& right, std::size_t levels);

/// l, r (N,F,H,W) -> (N,F,levels,H,W): l(x) - r(x - d), with r = 0 where
/// x - d < 0.
template <class T>
Var<T> difference_cost_volume(const Var<T>& left, const Var<T>& right, std::size_t levels);

template <class T>
Var<T> softmax(const Var<T>& x, std::size_t axis);

/// x (N,D,H,W) -> (N,H,W): sum_d d * softmax(-x)_d.
template <class T>
Var<T> soft_argmin(const Var<T>& x);

/// Mean over mask != 0 of 0.5 e^2 / delta (|e| < delta) or |e| - 0.5 delta.
/// Throws InvalidArgument when the mask is empty.
template <class T>
Var<T> smooth_l1(const Var<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask, T delta = T(1));

/// sum_i weights[i] * scalars[i].
template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& scalars, const std::vector<T>& weights);

}  // namespace satstereo::net
