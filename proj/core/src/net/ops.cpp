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

#include "satstereo/net/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>

#include <Eigen/Core>

namespace satstereo::net {

namespace {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Map = Eigen::Map<MatR<T>>;
template <class T>
using CMap = Eigen::Map<const MatR<T>>;

template <class T>
Var<T> make_result(Tensor<T> value, std::initializer_list<Var<T>> inputs, std::function<void(Node<T>&)> fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (!grad_enabled()) return n;
  for (const auto& i : inputs) {
    if (i && i->requires_grad) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const auto& i : inputs) {
      if (i) n->parents.push_back(i);
    }
    n->backward_fn = std::move(fn);
  }
  return n;
}

template <class T>
bool wants_grad(const Var<T>& v) {
  return v && v->requires_grad;
}

void require(bool ok, const char* msg) {
  if (!ok) throw InvalidArgument(msg);
}

// Spatial geometry of one convolution over (C, D, H, W) -> (Do, Ho, Wo).
struct ConvDims {
  std::size_t c = 0, d = 0, h = 0, w = 0;
  std::size_t od = 0, oh = 0, ow = 0;
  int kd = 1, kh = 1, kw = 1;
  int sd = 1, sh = 1, sw = 1;
  int pd = 0, ph = 0, pw = 0;
  int dd = 1, dh = 1, dw = 1;

  std::size_t k() const { return c * static_cast<std::size_t>(kd * kh * kw); }
  std::size_t p() const { return od * oh * ow; }
  std::size_t in_size() const { return c * d * h * w; }

  static long out_extent(std::size_t n, int k, int s, int p, int dil) {
    return (static_cast<long>(n) + 2 * p - dil * (k - 1) - 1) / s + 1;
  }
  void set_output() {
    const long a = out_extent(d, kd, sd, pd, dd), b = out_extent(h, kh, sh, ph, dh), e = out_extent(w, kw, sw, pw, dw);
    require(a > 0 && b > 0 && e > 0, "conv: kernel larger than padded input");
    od = static_cast<std::size_t>(a);
    oh = static_cast<std::size_t>(b);
    ow = static_cast<std::size_t>(e);
  }
};

template <class T>
void im2col(const T* x, const ConvDims& g, T* cols) {
  const std::size_t p = g.p();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* xc = x + c * g.d * g.h * g.w;
    for (int kz = 0; kz < g.kd; ++kz)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx, ++row) {
          T* out = cols + row * p;
          for (std::size_t oz = 0; oz < g.od; ++oz) {
            const long iz = static_cast<long>(oz) * g.sd - g.pd + kz * g.dd;
            const bool zin = iz >= 0 && iz < static_cast<long>(g.d);
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy) * g.sh - g.ph + ky * g.dh;
              const bool yin = zin && iy >= 0 && iy < static_cast<long>(g.h);
              const T* xr = yin ? xc + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w : nullptr;
              for (std::size_t ox = 0; ox < g.ow; ++ox) {
                const long ix = static_cast<long>(ox) * g.sw - g.pw + kx * g.dw;
                *out++ = (yin && ix >= 0 && ix < static_cast<long>(g.w)) ? xr[ix] : T(0);
              }
            }
          }
        }
  }
}

template <class T>
void col2im(const T* cols, const ConvDims& g, T* x) {
  const std::size_t p = g.p();
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    T* xc = x + c * g.d * g.h * g.w;
    for (int kz = 0; kz < g.kd; ++kz)
      for (int ky = 0; ky < g.kh; ++ky)
        for (int kx = 0; kx < g.kw; ++kx, ++row) {
          const T* in = cols + row * p;
          for (std::size_t oz = 0; oz < g.od; ++oz) {
            const long iz = static_cast<long>(oz) * g.sd - g.pd + kz * g.dd;
            const bool zin = iz >= 0 && iz < static_cast<long>(g.d);
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const long iy = static_cast<long>(oy) * g.sh - g.ph + ky * g.dh;
              const bool yin = zin && iy >= 0 && iy < static_cast<long>(g.h);
              T* xr = yin ? xc + (static_cast<std::size_t>(iz) * g.h + static_cast<std::size_t>(iy)) * g.w : nullptr;
              for (std::size_t ox = 0; ox < g.ow; ++ox, ++in) {
                const long ix = static_cast<long>(ox) * g.sw - g.pw + kx * g.dw;
                if (yin && ix >= 0 && ix < static_cast<long>(g.w)) xr[ix] += *in;
              }
            }
          }
        }
  }
}

// Shared forward/backward for 2D and 3D convolutions (2D uses d = kd = 1).
template <class T>
Var<T> conv_impl(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvDims& g, std::size_t batch,
                 std::size_t out_channels, Shape out_shape) {
  const std::size_t k = g.k(), p = g.p();
  require(w->value.size() == out_channels * k, "conv: weight shape mismatch");
  require(!b || b->value.size() == out_channels, "conv: bias shape mismatch");
  Tensor<T> out(std::move(out_shape));
  std::vector<T> cols(k * p);
  CMap<T> wm(w->value.data.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(k));
  for (std::size_t n = 0; n < batch; ++n) {
    im2col(x->value.data.data() + n * g.in_size(), g, cols.data());
    Map<T> om(out.data.data() + n * out_channels * p, static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(p));
    om.noalias() = wm * CMap<T>(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
    if (b) {
      for (std::size_t o = 0; o < out_channels; ++o) om.row(static_cast<Eigen::Index>(o)).array() += b->value.data[o];
    }
  }
  return make_result<T>(std::move(out), {x, w, b}, [x, w, b, g, batch, out_channels, k, p](Node<T>& node) {
    std::vector<T> cols(k * p), dcols;
    CMap<T> wm(w->value.data.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(k));
    for (std::size_t n = 0; n < batch; ++n) {
      CMap<T> dout(node.grad.data.data() + n * out_channels * p, static_cast<Eigen::Index>(out_channels),
                   static_cast<Eigen::Index>(p));
      if (wants_grad(w)) {
        im2col(x->value.data.data() + n * g.in_size(), g, cols.data());
        Map<T>(w->grad_buffer().data.data(), static_cast<Eigen::Index>(out_channels), static_cast<Eigen::Index>(k))
            .noalias() += dout * CMap<T>(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)).transpose();
      }
      if (wants_grad(b)) {
        auto& gb = b->grad_buffer().data;
        for (std::size_t o = 0; o < out_channels; ++o) gb[o] += dout.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (wants_grad(x)) {
        dcols.resize(k * p);
        Map<T>(dcols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p)).noalias() = wm.transpose() * dout;
        col2im(dcols.data(), g, x->grad_buffer().data.data() + n * g.in_size());
      }
    }
  });
}

// Separable resampling weights for one axis.
template <class T>
std::vector<std::vector<std::pair<std::size_t, T>>> resize_taps(std::size_t in, std::size_t out, Interp mode) {
  std::vector<std::vector<std::pair<std::size_t, T>>> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  const long last = static_cast<long>(in) - 1;
  auto clampi = [&](long i) { return static_cast<std::size_t>(std::clamp(i, 0L, last)); };
  for (std::size_t i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (mode == Interp::linear) {
      src = std::max(src, 0.0);
      const long i0 = static_cast<long>(std::floor(src));
      const double l = src - static_cast<double>(i0);
      taps[i] = {{clampi(i0), static_cast<T>(1.0 - l)}, {clampi(i0 + 1), static_cast<T>(l)}};
    } else {
      constexpr double a = -0.75;
      auto near = [](double t) { return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0; };
      auto far = [](double t) { return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a; };
      const long i0 = static_cast<long>(std::floor(src));
      const double t = src - static_cast<double>(i0);
      taps[i] = {{clampi(i0 - 1), static_cast<T>(far(t + 1.0))},
                 {clampi(i0), static_cast<T>(near(t))},
                 {clampi(i0 + 1), static_cast<T>(near(1.0 - t))},
                 {clampi(i0 + 2), static_cast<T>(far(2.0 - t))}};
    }
  }
  return taps;
}

// (outer, n, inner) view of a shape around `axis`.
struct AxisView {
  std::size_t outer = 1, n = 1, inner = 1;
  AxisView(const Shape& s, std::size_t axis) {
    require(axis < s.size(), "axis out of range");
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    n = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  }
};

}  // namespace

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad, int dilation) {
  require(x->value.rank() == 4 && w->value.rank() == 4, "conv2d: expects (N,C,H,W) input and (O,C,k,k) weight");
  require(w->value.dim(1) == x->value.dim(1), "conv2d: channel mismatch");
  require(stride >= 1 && dilation >= 1 && pad >= 0, "conv2d: bad geometry");
  ConvDims g;
  g.c = x->value.dim(1);
  g.h = x->value.dim(2);
  g.w = x->value.dim(3);
  g.d = 1;
  g.kh = static_cast<int>(w->value.dim(2));
  g.kw = static_cast<int>(w->value.dim(3));
  g.sh = g.sw = stride;
  g.ph = g.pw = pad;
  g.dh = g.dw = dilation;
  g.set_output();
  const std::size_t o = w->value.dim(0), n = x->value.dim(0);
  return conv_impl(x, w, b, g, n, o, Shape{n, o, g.oh, g.ow});
}

template <class T>
Var<T> conv3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
  require(x->value.rank() == 5 && w->value.rank() == 5, "conv3d: expects (N,C,D,H,W) input and (O,C,k,k,k) weight");
  require(w->value.dim(1) == x->value.dim(1), "conv3d: channel mismatch");
  require(stride >= 1 && pad >= 0, "conv3d: bad geometry");
  ConvDims g;
  g.c = x->value.dim(1);
  g.d = x->value.dim(2);
  g.h = x->value.dim(3);
  g.w = x->value.dim(4);
  g.kd = static_cast<int>(w->value.dim(2));
  g.kh = static_cast<int>(w->value.dim(3));
  g.kw = static_cast<int>(w->value.dim(4));
  g.sd = g.sh = g.sw = stride;
  g.pd = g.ph = g.pw = pad;
  g.set_output();
  const std::size_t o = w->value.dim(0), n = x->value.dim(0);
  return conv_impl(x, w, b, g, n, o, Shape{n, o, g.od, g.oh, g.ow});
}

template <class T>
Var<T> conv_transpose3d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad, int output_padding) {
  require(x->value.rank() == 5 && w->value.rank() == 5, "conv_transpose3d: expects rank-5 input and weight");
  require(w->value.dim(0) == x->value.dim(1), "conv_transpose3d: channel mismatch");
  require(stride >= 1 && pad >= 0 && output_padding >= 0 && output_padding < stride,
          "conv_transpose3d: bad geometry");
  const std::size_t n = x->value.dim(0), ci = x->value.dim(1), co = w->value.dim(1);
  const int k = static_cast<int>(w->value.dim(2));
  require(w->value.dim(3) == static_cast<std::size_t>(k) && w->value.dim(4) == static_cast<std::size_t>(k),
          "conv_transpose3d: cubic kernels only");
  auto up = [&](std::size_t e) {
    const long v = (static_cast<long>(e) - 1) * stride - 2 * pad + k + output_padding;
    require(v > 0, "conv_transpose3d: empty output");
    return static_cast<std::size_t>(v);
  };
  // The equivalent forward convolution maps the output back onto the input.
  ConvDims g;
  g.c = co;
  g.d = up(x->value.dim(2));
  g.h = up(x->value.dim(3));
  g.w = up(x->value.dim(4));
  g.kd = g.kh = g.kw = k;
  g.sd = g.sh = g.sw = stride;
  g.pd = g.ph = g.pw = pad;
  g.set_output();
  require(g.od == x->value.dim(2) && g.oh == x->value.dim(3) && g.ow == x->value.dim(4),
          "conv_transpose3d: inconsistent geometry");
  require(!b || b->value.size() == co, "conv_transpose3d: bias shape mismatch");
  const std::size_t kk = g.k(), p = g.p(), out_sp = g.d * g.h * g.w;
  Tensor<T> out(Shape{n, co, g.d, g.h, g.w});
  std::vector<T> cols(kk * p);
  CMap<T> wm(w->value.data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(kk));
  for (std::size_t i = 0; i < n; ++i) {
    Map<T>(cols.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p)).noalias() =
        wm.transpose() * CMap<T>(x->value.data.data() + i * ci * p, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(p));
    T* o = out.data.data() + i * co * out_sp;
    col2im(cols.data(), g, o);
    if (b) {
      for (std::size_t c = 0; c < co; ++c)
        for (std::size_t s = 0; s < out_sp; ++s) o[c * out_sp + s] += b->value.data[c];
    }
  }
  return make_result<T>(std::move(out), {x, w, b}, [x, w, b, g, n, ci, co, kk, p, out_sp](Node<T>& node) {
    std::vector<T> cols(kk * p);
    CMap<T> wm(w->value.data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(kk));
    for (std::size_t i = 0; i < n; ++i) {
      const T* dout = node.grad.data.data() + i * co * out_sp;
      im2col(dout, g, cols.data());
      CMap<T> cm(cols.data(), static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(p));
      if (wants_grad(x)) {
        Map<T>(x->grad_buffer().data.data() + i * ci * p, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(p))
            .noalias() += wm * cm;
      }
      if (wants_grad(w)) {
        Map<T>(w->grad_buffer().data.data(), static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(kk)).noalias() +=
            CMap<T>(x->value.data.data() + i * ci * p, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(p)) *
            cm.transpose();
      }
      if (wants_grad(b)) {
        auto& gb = b->grad_buffer().data;
        for (std::size_t c = 0; c < co; ++c) {
          T s = 0;
          for (std::size_t j = 0; j < out_sp; ++j) s += dout[c * out_sp + j];
          gb[c] += s;
        }
      }
    }
  });
}

template <class T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out(x->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(x->value.data[i], T(0));
  return make_result<T>(std::move(out), {x}, [x](Node<T>& node) {
    auto& g = x->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x->value.data[i] > T(0)) g[i] += node.grad.data[i];
    }
  });
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require(a->value.shape == b->value.shape, "add: shape mismatch");
  Tensor<T> out(a->value.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = a->value.data[i] + b->value.data[i];
  return make_result<T>(std::move(out), {a, b}, [a, b](Node<T>& node) {
    for (const auto& v : {a, b}) {
      if (!v->requires_grad) continue;
      auto& g = v->grad_buffer().data;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad.data[i];
    }
  });
}

template <class T>
Var<T> concat(const std::vector<Var<T>>& xs, std::size_t axis) {
  require(!xs.empty(), "concat: no inputs");
  Shape shape = xs.front()->value.shape;
  require(axis < shape.size(), "concat: axis out of range");
  shape[axis] = 0;
  for (const auto& x : xs) {
    Shape s = x->value.shape;
    require(s.size() == shape.size(), "concat: rank mismatch");
    shape[axis] += s[axis];
    s[axis] = shape[axis];
    for (std::size_t i = 0; i < s.size(); ++i) require(i == axis || s[i] == shape[i], "concat: extent mismatch");
  }
  const AxisView ov(shape, axis);
  Tensor<T> out(shape);
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  for (const auto& x : xs) {
    const AxisView v(x->value.shape, axis);
    offsets.push_back(offset);
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(x->value.data.data() + o * v.n * v.inner, v.n * v.inner,
                  out.data.data() + (o * ov.n + offset) * ov.inner);
    offset += v.n;
  }
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(out);
  if (grad_enabled() && std::any_of(xs.begin(), xs.end(), [](const Var<T>& x) { return x->requires_grad; })) {
    n->requires_grad = true;
    n->parents = xs;
    n->backward_fn = [xs, offsets, ov, axis](Node<T>& node) {
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (!xs[k]->requires_grad) continue;
        const AxisView v(xs[k]->value.shape, axis);
        auto& g = xs[k]->grad_buffer().data;
        for (std::size_t o = 0; o < v.outer; ++o) {
          const T* src = node.grad.data.data() + (o * ov.n + offsets[k]) * ov.inner;
          T* dst = g.data() + o * v.n * v.inner;
          for (std::size_t i = 0; i < v.n * v.inner; ++i) dst[i] += src[i];
        }
      }
    };
  }
  return n;
}

template <class T>
Var<T> avg_pool2d(const Var<T>& x, std::size_t kh, std::size_t kw) {
  require(x->value.rank() == 4, "avg_pool2d: expects (N,C,H,W)");
  require(kh >= 1 && kw >= 1, "avg_pool2d: empty window");
  const std::size_t nc = x->value.dim(0) * x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
  require(kh <= h && kw <= w, "avg_pool2d: window larger than input");
  const std::size_t oh = h / kh, ow = w / kw;
  const T inv = T(1) / static_cast<T>(kh * kw);
  Tensor<T> out(Shape{x->value.dim(0), x->value.dim(1), oh, ow});
  for (std::size_t c = 0; c < nc; ++c)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T s = 0;
        for (std::size_t y = oy * kh; y < (oy + 1) * kh; ++y)
          for (std::size_t xx = ox * kw; xx < (ox + 1) * kw; ++xx) s += x->value.data[(c * h + y) * w + xx];
        out.data[(c * oh + oy) * ow + ox] = s * inv;
      }
  return make_result<T>(std::move(out), {x}, [x, nc, h, w, oh, ow, kh, kw, inv](Node<T>& node) {
    auto& g = x->grad_buffer().data;
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = node.grad.data[(c * oh + oy) * ow + ox] * inv;
          for (std::size_t y = oy * kh; y < (oy + 1) * kh; ++y)
            for (std::size_t xx = ox * kw; xx < (ox + 1) * kw; ++xx) g[(c * h + y) * w + xx] += d;
        }
  });
}

template <class T>
Var<T> resize_axis(const Var<T>& x, std::size_t axis, std::size_t out_len, Interp mode) {
  require(out_len >= 1, "resize_axis: empty output");
  const AxisView v(x->value.shape, axis);
  Shape shape = x->value.shape;
  shape[axis] = out_len;
  const auto taps = resize_taps<T>(v.n, out_len, mode);
  Tensor<T> out(shape);
  for (std::size_t o = 0; o < v.outer; ++o) {
    const T* src = x->value.data.data() + o * v.n * v.inner;
    T* dst = out.data.data() + o * out_len * v.inner;
    for (std::size_t i = 0; i < out_len; ++i)
      for (const auto& [k, wt] : taps[i])
        for (std::size_t j = 0; j < v.inner; ++j) dst[i * v.inner + j] += wt * src[k * v.inner + j];
  }
  return make_result<T>(std::move(out), {x}, [x, v, taps, out_len](Node<T>& node) {
    auto& g = x->grad_buffer().data;
    for (std::size_t o = 0; o < v.outer; ++o) {
      const T* src = node.grad.data.data() + o * out_len * v.inner;
      T* dst = g.data() + o * v.n * v.inner;
      for (std::size_t i = 0; i < out_len; ++i)
        for (const auto& [k, wt] : taps[i])
          for (std::size_t j = 0; j < v.inner; ++j) dst[k * v.inner + j] += wt * src[i * v.inner + j];
    }
  });
}

template <class T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  require(numel(shape) == x->value.size(), "reshape: element count mismatch");
  Tensor<T> out(std::move(shape), x->value.data);
  return make_result<T>(std::move(out), {x}, [x](Node<T>& node) {
    auto& g = x->grad_buffer().data;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad.data[i];
  });
}

template <class T>
Var<T> cost_volume(const Var<T>& left, const Var<T>& right, std::size_t levels) {
  require(left->value.rank() == 4 && left->value.shape == right->value.shape, "cost_volume: feature shapes differ");
  const std::size_t n = left->value.dim(0), f = left->value.dim(1), h = left->value.dim(2), w = left->value.dim(3);
  require(levels >= 1 && levels <= w, "cost_volume: disparity levels exceed feature width");
  const std::size_t hw = h * w;
  Tensor<T> out(Shape{n, 2 * f, levels, h, w});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c) {
      const T* l = left->value.data.data() + (b * f + c) * hw;
      const T* r = right->value.data.data() + (b * f + c) * hw;
      for (std::size_t d = 0; d < levels; ++d) {
        T* ol = out.data.data() + ((b * 2 * f + c) * levels + d) * hw;
        T* orr = out.data.data() + ((b * 2 * f + f + c) * levels + d) * hw;
        std::copy_n(l, hw, ol);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = d; x < w; ++x) orr[y * w + x] = r[y * w + x - d];
      }
    }
  return make_result<T>(std::move(out), {left, right}, [left, right, n, f, h, w, levels, hw](Node<T>& node) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < f; ++c)
        for (std::size_t d = 0; d < levels; ++d) {
          const T* gl = node.grad.data.data() + ((b * 2 * f + c) * levels + d) * hw;
          const T* gr = node.grad.data.data() + ((b * 2 * f + f + c) * levels + d) * hw;
          if (left->requires_grad) {
            T* dl = left->grad_buffer().data.data() + (b * f + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) dl[i] += gl[i];
          }
          if (right->requires_grad) {
            T* dr = right->grad_buffer().data.data() + (b * f + c) * hw;
            for (std::size_t y = 0; y < h; ++y)
              for (std::size_t x = d; x < w; ++x) dr[y * w + x - d] += gr[y * w + x];
          }
        }
  });
}

template <class T>
Var<T> difference_cost_volume(const Var<T>& left, const Var<T>& right, std::size_t levels) {
  require(left->value.rank() == 4 && left->value.shape == right->value.shape, "cost_volume: feature shapes differ");
  const std::size_t n = left->value.dim(0), f = left->value.dim(1), h = left->value.dim(2), w = left->value.dim(3);
  require(levels >= 1 && levels <= w, "cost_volume: disparity levels exceed feature width");
  const std::size_t hw = h * w;
  Tensor<T> out(Shape{n, f, levels, h, w});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < f; ++c) {
      const T* l = left->value.data.data() + (b * f + c) * hw;
      const T* r = right->value.data.data() + (b * f + c) * hw;
      for (std::size_t d = 0; d < levels; ++d) {
        T* o = out.data.data() + ((b * f + c) * levels + d) * hw;
        std::copy_n(l, hw, o);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = d; x < w; ++x) o[y * w + x] -= r[y * w + x - d];
      }
    }
  return make_result<T>(std::move(out), {left, right}, [left, right, n, f, h, w, levels, hw](Node<T>& node) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t c = 0; c < f; ++c)
        for (std::size_t d = 0; d < levels; ++d) {
          const T* g = node.grad.data.data() + ((b * f + c) * levels + d) * hw;
          if (left->requires_grad) {
            T* dl = left->grad_buffer().data.data() + (b * f + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) dl[i] += g[i];
          }
          if (right->requires_grad) {
            T* dr = right->grad_buffer().data.data() + (b * f + c) * hw;
            for (std::size_t y = 0; y < h; ++y)
              for (std::size_t x = d; x < w; ++x) dr[y * w + x - d] -= g[y * w + x];
          }
        }
  });
}

template <class T>
Var<T> softmax(const Var<T>& x, std::size_t axis) {
  const AxisView v(x->value.shape, axis);
  Tensor<T> out(x->value.shape);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t j = 0; j < v.inner; ++j) {
      const T* src = x->value.data.data() + o * v.n * v.inner + j;
      T* dst = out.data.data() + o * v.n * v.inner + j;
      T m = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < v.n; ++k) m = std::max(m, src[k * v.inner]);
      T s = 0;
      for (std::size_t k = 0; k < v.n; ++k) s += dst[k * v.inner] = std::exp(src[k * v.inner] - m);
      for (std::size_t k = 0; k < v.n; ++k) dst[k * v.inner] /= s;
    }
  auto res = make_result<T>(std::move(out), {x}, nullptr);
  if (res->requires_grad) {
    res->backward_fn = [x, v](Node<T>& node) {
      auto& g = x->grad_buffer().data;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t j = 0; j < v.inner; ++j) {
          const std::size_t base = o * v.n * v.inner + j;
          T dot = 0;
          for (std::size_t k = 0; k < v.n; ++k) dot += node.grad.data[base + k * v.inner] * node.value.data[base + k * v.inner];
          for (std::size_t k = 0; k < v.n; ++k) {
            const std::size_t i = base + k * v.inner;
            g[i] += node.value.data[i] * (node.grad.data[i] - dot);
          }
        }
    };
  }
  return res;
}

template <class T>
Var<T> soft_argmin(const Var<T>& x) {
  require(x->value.rank() == 4, "soft_argmin: expects (N,D,H,W)");
  const std::size_t n = x->value.dim(0), nd = x->value.dim(1), hw = x->value.dim(2) * x->value.dim(3);
  require(nd >= 1, "soft_argmin: empty disparity axis");
  Tensor<T> out(Shape{n, x->value.dim(2), x->value.dim(3)});
  // Keep the probabilities for the backward pass.
  auto prob = std::make_shared<std::vector<T>>(x->value.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      const T* c = x->value.data.data() + b * nd * hw + i;
      T* p = prob->data() + b * nd * hw + i;
      T m = std::numeric_limits<T>::infinity();
      for (std::size_t d = 0; d < nd; ++d) m = std::min(m, c[d * hw]);
      T s = 0;
      for (std::size_t d = 0; d < nd; ++d) s += p[d * hw] = std::exp(m - c[d * hw]);
      // Normalizing once at the end keeps uniform costs exact: (D-1)/2.
      T num = 0;
      for (std::size_t d = 0; d < nd; ++d) {
        num += static_cast<T>(d) * p[d * hw];
        p[d * hw] /= s;
      }
      out.data[b * hw + i] = num / s;
    }
  return make_result<T>(std::move(out), {x}, [x, prob, n, nd, hw](Node<T>& node) {
    auto& g = x->grad_buffer().data;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < hw; ++i) {
        const T e = node.value.data[b * hw + i], go = node.grad.data[b * hw + i];
        for (std::size_t d = 0; d < nd; ++d) {
          const std::size_t k = b * nd * hw + d * hw + i;
          g[k] -= go * (*prob)[k] * (static_cast<T>(d) - e);
        }
      }
  });
}

template <class T>
Var<T> smooth_l1(const Var<T>& pred, const Tensor<T>& target, const std::vector<std::uint8_t>& mask, T delta) {
  require(target.size() == pred->value.size() && mask.size() == pred->value.size(), "smooth_l1: size mismatch");
  require(delta > T(0), "smooth_l1: delta must be positive");
  std::size_t count = 0;
  T sum = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++count;
    const T e = std::abs(pred->value.data[i] - target.data[i]);
    sum += e < delta ? T(0.5) * e * e / delta : e - T(0.5) * delta;
  }
  require(count > 0, "smooth_l1: no valid pixels");
  Tensor<T> out(Shape{1}, std::vector<T>{sum / static_cast<T>(count)});
  return make_result<T>(std::move(out), {pred}, [pred, target, mask, delta, count](Node<T>& node) {
    auto& g = pred->grad_buffer().data;
    const T scale = node.grad.data[0] / static_cast<T>(count);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const T e = pred->value.data[i] - target.data[i];
      g[i] += scale * (std::abs(e) < delta ? e / delta : (e > 0 ? T(1) : T(-1)));
    }
  });
}

template <class T>
Var<T> weighted_sum(const std::vector<Var<T>>& scalars, const std::vector<T>& weights) {
  require(!scalars.empty() && scalars.size() == weights.size(), "weighted_sum: size mismatch");
  T s = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require(scalars[i]->value.size() == 1, "weighted_sum: inputs must be scalars");
    s += weights[i] * scalars[i]->value.data[0];
  }
  auto n = std::make_shared<Node<T>>();
  n->value = Tensor<T>(Shape{1}, std::vector<T>{s});
  if (grad_enabled() && std::any_of(scalars.begin(), scalars.end(), [](const Var<T>& x) { return x->requires_grad; })) {
    n->requires_grad = true;
    n->parents = scalars;
    n->backward_fn = [scalars, weights](Node<T>& node) {
      for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i]->requires_grad) scalars[i]->grad_buffer().data[0] += weights[i] * node.grad.data[0];
      }
    };
  }
  return n;
}

#define SATSTEREO_INSTANTIATE(T)                                                                          \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);                    \
  template Var<T> conv3d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                         \
  template Var<T> conv_transpose3d(const Var<T>&, const Var<T>&, const Var<T>&, int, int, int);          \
  template Var<T> relu(const Var<T>&);                                                                   \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                     \
  template Var<T> concat(const std::vector<Var<T>>&, std::size_t);                                       \
  template Var<T> avg_pool2d(const Var<T>&, std::size_t, std::size_t);                                   \
  template Var<T> resize_axis(const Var<T>&, std::size_t, std::size_t, Interp);                          \
  template Var<T> reshape(const Var<T>&, Shape);                                                         \
  template Var<T> cost_volume(const Var<T>&, const Var<T>&, std::size_t);                                \
  template Var<T> difference_cost_volume(const Var<T>&, const Var<T>&, std::size_t);                     \
  template Var<T> softmax(const Var<T>&, std::size_t);                                                   \
  template Var<T> soft_argmin(const Var<T>&);                                                            \
  template Var<T> smooth_l1(const Var<T>&, const Tensor<T>&, const std::vector<std::uint8_t>&, T);       \
  template Var<T> weighted_sum(const std::vector<Var<T>>&, const std::vector<T>&);

SATSTEREO_INSTANTIATE(float)
SATSTEREO_INSTANTIATE(double)

#undef SATSTEREO_INSTANTIATE

}  // namespace satstereo::net
