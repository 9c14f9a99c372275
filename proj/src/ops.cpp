#include "sglens/ops.hpp"

#include <algorithm>
#include <cmath>

#include "sglens/error.hpp"
#include "sglens/kernels.hpp"

namespace sglens {

namespace {

bool is_trailing_suffix(const Shape& full, const Shape& suffix) {
  if (suffix.size() > full.size()) return false;
  return std::equal(suffix.rbegin(), suffix.rend(), full.rbegin());
}

template <typename T>
std::vector<T> transposed(std::span<const T> a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = a[i * cols + j];
  return out;
}

template <typename T, typename Fwd, typename Bwd>
BasicTensor<T> unary(const BasicTensor<T>& x, Fwd fwd, Bwd dfdx) {
  BasicTensor<T> out(x.shape());
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    auto yi = out.impl_ptr();
    detail::attach_backward(out, [xi, yi = yi.get(), dfdx](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdx(xi->data[i], yi->data[i]);
    });
  }
  return out;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= 0) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

void require_rank(const Shape& shape, std::size_t rank, const char* what) {
  if (shape.size() != rank)
    throw ShapeError(std::string(what) + " expects a rank-" + std::to_string(rank) +
                     " tensor, got " + shape_str(shape));
}

// Half-pixel-centred interpolation taps for doubling one axis.
struct Taps {
  std::size_t i0, i1;
  double w0, w1;
};

std::vector<Taps> bilinear_taps(std::size_t in_size) {
  std::vector<Taps> taps(2 * in_size);
  for (std::size_t o = 0; o < 2 * in_size; ++o) {
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    const auto i0 = std::min(static_cast<std::size_t>(src), in_size - 1);
    const std::size_t i1 = std::min(i0 + 1, in_size - 1);
    const double frac = src - static_cast<double>(i0);
    taps[o] = Taps{i0, i1, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const bool same = a.shape() == b.shape();
  if (!same && b.numel() != 1 && !is_trailing_suffix(a.shape(), b.shape()))
    throw ShapeError("shape mismatch: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  BasicTensor<T> out(a.shape());
  auto as = a.data();
  auto bs = b.data();
  auto ys = out.mutable_data();
  const std::size_t nb = bs.size();
  for (std::size_t i = 0; i < as.size(); ++i) {
    const T av = as[i], bv = bs[i % nb];
    switch (op) {
      case BinaryOp::kAdd: ys[i] = av + bv; break;
      case BinaryOp::kSub: ys[i] = av - bv; break;
      case BinaryOp::kMul: ys[i] = av * bv; break;
      case BinaryOp::kDiv: ys[i] = av / bv; break;
    }
  }
  if (detail::should_record<T>({&a, &b})) {
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    detail::attach_backward(out, [op, ai, bi](std::span<const T> g) {
      auto ga = detail::grad_sink(ai);
      auto gb = detail::grad_sink(bi);
      const auto& av = ai->data;
      const auto& bv = bi->data;
      const std::size_t nb = bv.size();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t j = i % nb;
        switch (op) {
          case BinaryOp::kAdd:
            if (!ga.empty()) ga[i] += g[i];
            if (!gb.empty()) gb[j] += g[i];
            break;
          case BinaryOp::kSub:
            if (!ga.empty()) ga[i] += g[i];
            if (!gb.empty()) gb[j] -= g[i];
            break;
          case BinaryOp::kMul:
            if (!ga.empty()) ga[i] += g[i] * bv[j];
            if (!gb.empty()) gb[j] += g[i] * av[i];
            break;
          case BinaryOp::kDiv:
            if (!ga.empty()) ga[i] += g[i] / bv[j];
            if (!gb.empty()) gb[j] -= g[i] * av[i] / (bv[j] * bv[j]);
            break;
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, double b) {
  const T s = static_cast<T>(b);
  switch (op) {
    case BinaryOp::kAdd:
      return unary(a, [s](T x) { return x + s; }, [](T, T) { return T{1}; });
    case BinaryOp::kSub:
      return unary(a, [s](T x) { return x - s; }, [](T, T) { return T{1}; });
    case BinaryOp::kMul:
      return unary(a, [s](T x) { return x * s; }, [s](T, T) { return s; });
    case BinaryOp::kDiv:
      return unary(a, [s](T x) { return x / s; }, [s](T, T) { return T{1} / s; });
  }
  throw std::logic_error("unknown binary op");
}

template <typename T>
BasicTensor<T> neg(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return -v; }, [](T, T) { return T{-1}; });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return v * v; }, [](T v, T) { return T{2} * v; });
}

template <typename T>
BasicTensor<T> sqrt(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T{0.5} / y; });
}

template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T{1} / v; });
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return stable_sigmoid(v); }, [](T, T y) { return y * (T{1} - y); });
}

template <typename T>
BasicTensor<T> log_sigmoid(const BasicTensor<T>& x) {
  return unary(
      x, [](T v) { return std::min(v, T{0}) - std::log1p(std::exp(-std::abs(v))); },
      [](T v, T) { return stable_sigmoid(-v); });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0))
    throw ValidationError("leaky_relu slope must lie in (0,1), got " + std::to_string(slope));
  const T s = static_cast<T>(slope);
  return unary(x, [s](T v) { return v > 0 ? v : s * v; }, [s](T v, T) { return v > 0 ? T{1} : s; });
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_rank(a.shape(), 2, "matmul");
  require_rank(b.shape(), 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  BasicTensor<T> out(Shape{m, n});
  kernels::parallel::gemm<T>(false, m, n, k, a.data(), b.data(), out.mutable_data(), false);
  if (detail::should_record<T>({&a, &b})) {
    auto ai = a.impl_ptr();
    auto bi = b.impl_ptr();
    detail::attach_backward(out, [ai, bi, m, n, k](std::span<const T> g) {
      if (auto ga = detail::grad_sink(ai); !ga.empty()) {
        const auto bt = transposed<T>(bi->data, k, n);
        kernels::parallel::gemm<T>(false, m, k, n, g, bt, ga, true);
      }
      if (auto gb = detail::grad_sink(bi); !gb.empty())
        kernels::parallel::gemm<T>(true, k, n, m, ai->data, g, gb, true);
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  require_rank(a.shape(), 2, "transpose");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  BasicTensor<T> out(Shape{cols, rows}, transposed<T>(a.data(), rows, cols));
  if (detail::should_record<T>({&a})) {
    auto ai = a.impl_ptr();
    detail::attach_backward(out, [ai, rows, cols](std::span<const T> g) {
      auto ga = detail::grad_sink(ai);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) ga[i * cols + j] += g[j * rows + i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> slice_columns(const BasicTensor<T>& a, std::size_t begin, std::size_t count) {
  require_rank(a.shape(), 2, "slice_columns");
  const std::size_t rows = a.dim(0), cols = a.dim(1);
  if (count == 0 || begin + count > cols)
    throw ShapeError("slice_columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") out of range for " + shape_str(a.shape()));
  BasicTensor<T> out(Shape{rows, count});
  auto as = a.data();
  auto ys = out.mutable_data();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < count; ++j) ys[i * count + j] = as[i * cols + begin + j];
  if (detail::should_record<T>({&a})) {
    auto ai = a.impl_ptr();
    detail::attach_backward(out, [ai, rows, cols, begin, count](std::span<const T> g) {
      auto ga = detail::grad_sink(ai);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < count; ++j) ga[i * cols + begin + j] += g[i * count + j];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  BasicTensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    detail::attach_backward(out, [xi](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t pad) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(w.shape(), 4, "conv2d weight");
  if (w.dim(1) != x.dim(1))
    throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) + ", weight " +
                     shape_str(w.shape()));
  if (bias.defined() && bias.numel() != w.dim(0))
    throw ShapeError("conv2d bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(w.dim(0)) + " output channels");
  if (stride == 0) throw ShapeError("conv2d stride must be positive");
  kernels::ConvGeometry geo;
  geo.batch = x.dim(0);
  geo.in_channels = x.dim(1);
  geo.height = x.dim(2);
  geo.width = x.dim(3);
  geo.out_channels = w.dim(0);
  geo.kernel_h = w.dim(2);
  geo.kernel_w = w.dim(3);
  geo.stride = stride;
  geo.pad = pad;
  if (geo.height + 2 * pad < geo.kernel_h || geo.width + 2 * pad < geo.kernel_w)
    throw ShapeError("conv2d kernel larger than padded input " + shape_str(x.shape()));
  BasicTensor<T> out(Shape{geo.batch, geo.out_channels, geo.out_h(), geo.out_w()});
  std::span<const T> bias_span = bias.defined() ? bias.data() : std::span<const T>{};
  kernels::parallel::conv2d_forward<T>(geo, x.data(), w.data(), bias_span, out.mutable_data());
  if (detail::should_record<T>({&x, &w, &bias})) {
    auto xi = x.impl_ptr();
    auto wi = w.impl_ptr();
    auto bi = bias.defined() ? bias.impl_ptr() : nullptr;
    detail::attach_backward(out, [xi, wi, bi, geo](std::span<const T> g) {
      if (auto gx = detail::grad_sink(xi); !gx.empty())
        kernels::parallel::conv2d_backward_input<T>(geo, wi->data, g, gx);
      auto gw = detail::grad_sink(wi);
      auto gb = detail::grad_sink(bi);
      if (!gw.empty()) {
        kernels::parallel::conv2d_backward_weight<T>(geo, xi->data, g, gw, gb);
      } else if (!gb.empty()) {
        const std::size_t pixels = geo.out_pixels();
        for (std::size_t n = 0; n < geo.batch; ++n)
          for (std::size_t o = 0; o < geo.out_channels; ++o)
            for (std::size_t p = 0; p < pixels; ++p)
              gb[o] += g[(n * geo.out_channels + o) * pixels + p];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& x, std::size_t factor, UpsampleMode mode) {
  if (factor != 2) throw ShapeError("upsample supports factor 2 only, got " + std::to_string(factor));
  require_rank(x.shape(), 4, "upsample");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  BasicTensor<T> out(Shape{x.dim(0), x.dim(1), oh, ow});
  auto xs = x.data();
  auto ys = out.mutable_data();
  const auto ty = bilinear_taps(h);
  const auto tx = bilinear_taps(w);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xs.data() + p * h * w;
    T* dst = ys.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        if (mode == UpsampleMode::kNearest) {
          dst[oy * ow + ox] = src[(oy / 2) * w + ox / 2];
        } else {
          const Taps& a = ty[oy];
          const Taps& b = tx[ox];
          dst[oy * ow + ox] = static_cast<T>(
              a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
              a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]));
        }
      }
    }
  }
  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    detail::attach_backward(out, [xi, planes, h, w, mode, ty, tx](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      const std::size_t oh = 2 * h, ow = 2 * w;
      for (std::size_t p = 0; p < planes; ++p) {
        T* dst = gx.data() + p * h * w;
        const T* src = g.data() + p * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const T gv = src[oy * ow + ox];
            if (mode == UpsampleMode::kNearest) {
              dst[(oy / 2) * w + ox / 2] += gv;
            } else {
              const Taps& a = ty[oy];
              const Taps& b = tx[ox];
              dst[a.i0 * w + b.i0] += static_cast<T>(a.w0 * b.w0 * gv);
              dst[a.i0 * w + b.i1] += static_cast<T>(a.w0 * b.w1 * gv);
              dst[a.i1 * w + b.i0] += static_cast<T>(a.w1 * b.w0 * gv);
              dst[a.i1 * w + b.i1] += static_cast<T>(a.w1 * b.w1 * gv);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& x) {
  require_rank(x.shape(), 4, "avg_pool2");
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("avg_pool2 needs even spatial dimensions, got " + shape_str(x.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  BasicTensor<T> out(Shape{x.dim(0), x.dim(1), oh, ow});
  auto xs = x.data();
  auto ys = out.mutable_data();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xs.data() + p * h * w;
    T* dst = ys.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox)
        dst[oy * ow + ox] = T{0.25} * (src[2 * oy * w + 2 * ox] + src[2 * oy * w + 2 * ox + 1] +
                                       src[(2 * oy + 1) * w + 2 * ox] +
                                       src[(2 * oy + 1) * w + 2 * ox + 1]);
  }
  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    detail::attach_backward(out, [xi, planes, h, w](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      const std::size_t oh = h / 2, ow = w / 2;
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t xx = 0; xx < w; ++xx)
            gx[p * h * w + y * w + xx] += T{0.25} * g[p * oh * ow + (y / 2) * ow + xx / 2];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& x, std::vector<std::size_t> axes) {
  const Shape& shape = x.shape();
  if (axes.empty())
    for (std::size_t a = 0; a < shape.size(); ++a) axes.push_back(a);
  std::vector<bool> reduced(shape.size(), false);
  for (std::size_t a : axes) {
    if (a >= shape.size())
      throw ShapeError("reduce axis " + std::to_string(a) + " out of range for " + shape_str(shape));
    if (reduced[a]) throw ShapeError("reduce axis " + std::to_string(a) + " listed twice");
    reduced[a] = true;
  }
  Shape out_shape;
  std::size_t count = 1;
  for (std::size_t a = 0; a < shape.size(); ++a) {
    if (reduced[a]) count *= shape[a];
    else out_shape.push_back(shape[a]);
  }
  if (count == 0) throw ShapeError("empty reduction set");
  if (out_shape.empty()) out_shape.push_back(1);

  // Map every input element to its output slot.
  const std::size_t n = x.numel();
  std::vector<std::size_t> slot(n);
  {
    std::vector<std::size_t> idx(shape.size(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t o = 0;
      for (std::size_t a = 0; a < shape.size(); ++a)
        if (!reduced[a]) o = o * shape[a] + idx[a];
      slot[i] = o;
      for (std::size_t a = shape.size(); a-- > 0;) {
        if (++idx[a] < shape[a]) break;
        idx[a] = 0;
      }
    }
  }

  BasicTensor<T> out(out_shape);
  auto xs = x.data();
  auto ys = out.mutable_data();
  std::vector<T> means(ys.size(), T{0});
  for (std::size_t i = 0; i < n; ++i) means[slot[i]] += xs[i];
  for (auto& m : means) m /= static_cast<T>(count);
  if (op == ReduceOp::kSum) {
    for (std::size_t i = 0; i < n; ++i) ys[slot[i]] += xs[i];
  } else if (op == ReduceOp::kMean) {
    std::copy(means.begin(), means.end(), ys.begin());
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const T d = xs[i] - means[slot[i]];
      ys[slot[i]] += d * d;
    }
    for (auto& v : ys) v = std::sqrt(v / static_cast<T>(count));
  }

  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    auto yi = out.impl_ptr();
    detail::attach_backward(out, [op, xi, yi = yi.get(), slot = std::move(slot), means = std::move(means),
                                  count](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      const T inv = T{1} / static_cast<T>(count);
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const std::size_t o = slot[i];
        switch (op) {
          case ReduceOp::kSum: gx[i] += g[o]; break;
          case ReduceOp::kMean: gx[i] += g[o] * inv; break;
          case ReduceOp::kStd: {
            const T sd = yi->data[o];
            if (sd > 0) gx[i] += g[o] * (xi->data[i] - means[o]) * inv / sd;
            break;
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& s) {
  require_rank(x.shape(), 4, "channel_scale input");
  const std::size_t batch = x.dim(0), channels = x.dim(1), pixels = x.dim(2) * x.dim(3);
  if (s.shape() != Shape{batch, channels})
    throw ShapeError("channel_scale expects scales " + shape_str(Shape{batch, channels}) + ", got " +
                     shape_str(s.shape()));
  BasicTensor<T> out(x.shape());
  auto xs = x.data();
  auto ss = s.data();
  auto ys = out.mutable_data();
  for (std::size_t nc = 0; nc < batch * channels; ++nc)
    for (std::size_t p = 0; p < pixels; ++p) ys[nc * pixels + p] = xs[nc * pixels + p] * ss[nc];
  if (detail::should_record<T>({&x, &s})) {
    auto xi = x.impl_ptr();
    auto si = s.impl_ptr();
    detail::attach_backward(out, [xi, si, pixels](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      auto gs = detail::grad_sink(si);
      for (std::size_t nc = 0; nc < si->data.size(); ++nc) {
        for (std::size_t p = 0; p < pixels; ++p) {
          const std::size_t i = nc * pixels + p;
          if (!gx.empty()) gx[i] += g[i] * si->data[nc];
          if (!gs.empty()) gs[nc] += g[i] * xi->data[i];
        }
      }
    });
  }
  return out;
}

#define SGLENS_INSTANTIATE(T)                                                                       \
  template BasicTensor<T> elementwise<T>(BinaryOp, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> elementwise<T>(BinaryOp, const BasicTensor<T>&, double);                 \
  template BasicTensor<T> neg<T>(const BasicTensor<T>&);                                           \
  template BasicTensor<T> square<T>(const BasicTensor<T>&);                                        \
  template BasicTensor<T> sqrt<T>(const BasicTensor<T>&);                                          \
  template BasicTensor<T> exp<T>(const BasicTensor<T>&);                                           \
  template BasicTensor<T> log<T>(const BasicTensor<T>&);                                           \
  template BasicTensor<T> sigmoid<T>(const BasicTensor<T>&);                                       \
  template BasicTensor<T> log_sigmoid<T>(const BasicTensor<T>&);                                   \
  template BasicTensor<T> leaky_relu<T>(const BasicTensor<T>&, double);                            \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template BasicTensor<T> transpose<T>(const BasicTensor<T>&);                                     \
  template BasicTensor<T> reshape<T>(const BasicTensor<T>&, Shape);                                \
  template BasicTensor<T> slice_columns<T>(const BasicTensor<T>&, std::size_t, std::size_t);       \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                    const BasicTensor<T>&, std::size_t, std::size_t);              \
  template BasicTensor<T> upsample<T>(const BasicTensor<T>&, std::size_t, UpsampleMode);           \
  template BasicTensor<T> avg_pool2<T>(const BasicTensor<T>&);                                     \
  template BasicTensor<T> reduce<T>(ReduceOp, const BasicTensor<T>&, std::vector<std::size_t>);    \
  template BasicTensor<T> channel_scale<T>(const BasicTensor<T>&, const BasicTensor<T>&);

SGLENS_INSTANTIATE(float)
SGLENS_INSTANTIATE(double)
#undef SGLENS_INSTANTIATE

}  // namespace sglens
