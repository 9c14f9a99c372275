#include "sglens/layers.hpp"

#include <cmath>

#include "sglens/error.hpp"

namespace sglens {

namespace {

void require_nchw(const Shape& s, const char* what) {
  if (s.size() != 4) throw ShapeError(std::string(what) + " expects [N,C,H,W], got " + shape_str(s));
}

}  // namespace

template <typename T>
BasicTensor<T> adain(const BasicTensor<T>& x, const BasicTensor<T>& y_s, const BasicTensor<T>& y_b,
                     double eps) {
  require_nchw(x.shape(), "adain");
  const std::size_t planes = x.dim(0) * x.dim(1), pixels = x.dim(2) * x.dim(3);
  const Shape style_shape{x.dim(0), x.dim(1)};
  if (y_s.shape() != style_shape || y_b.shape() != style_shape)
    throw ShapeError("adain styles must be " + shape_str(style_shape) + ", got " +
                     shape_str(y_s.shape()) + " and " + shape_str(y_b.shape()));
  BasicTensor<T> out(x.shape());
  auto xs = x.data();
  auto ys = out.mutable_data();
  std::vector<T> xhat(xs.size());
  std::vector<T> inv_sigma(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xs.data() + p * pixels;
    double mu = 0;
    for (std::size_t i = 0; i < pixels; ++i) mu += src[i];
    mu /= static_cast<double>(pixels);
    double var = 0;
    for (std::size_t i = 0; i < pixels; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(pixels);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_sigma[p] = static_cast<T>(inv);
    const T scale = y_s[p], shift = y_b[p];
    for (std::size_t i = 0; i < pixels; ++i) {
      const T h = static_cast<T>((src[i] - mu) * inv);
      xhat[p * pixels + i] = h;
      ys[p * pixels + i] = scale * h + shift;
    }
  }
  if (detail::should_record<T>({&x, &y_s, &y_b})) {
    auto xi = x.impl_ptr();
    auto si = y_s.impl_ptr();
    auto bi = y_b.impl_ptr();
    detail::attach_backward(out, [xi, si, bi, planes, pixels, xhat = std::move(xhat),
                                  inv_sigma = std::move(inv_sigma)](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      auto gs = detail::grad_sink(si);
      auto gb = detail::grad_sink(bi);
      for (std::size_t p = 0; p < planes; ++p) {
        const T* gp = g.data() + p * pixels;
        const T* hp = xhat.data() + p * pixels;
        double sum_g = 0, sum_gh = 0;
        for (std::size_t i = 0; i < pixels; ++i) {
          sum_g += gp[i];
          sum_gh += gp[i] * hp[i];
        }
        if (!gs.empty()) gs[p] += static_cast<T>(sum_gh);
        if (!gb.empty()) gb[p] += static_cast<T>(sum_g);
        if (gx.empty()) continue;
        const double scale = si->data[p];
        const double mean_d = scale * sum_g / static_cast<double>(pixels);
        const double mean_dh = scale * sum_gh / static_cast<double>(pixels);
        for (std::size_t i = 0; i < pixels; ++i) {
          const double d = scale * gp[i];
          gx[p * pixels + i] += static_cast<T>(inv_sigma[p] * (d - mean_d - hp[i] * mean_dh));
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> pixel_norm(const BasicTensor<T>& z, double eps) {
  if (z.rank() != 2) throw ShapeError("pixel_norm expects [N,D], got " + shape_str(z.shape()));
  const std::size_t rows = z.dim(0), d = z.dim(1);
  BasicTensor<T> out(z.shape());
  auto zs = z.data();
  auto ys = out.mutable_data();
  std::vector<T> inv_rms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ms = 0;
    for (std::size_t j = 0; j < d; ++j) ms += static_cast<double>(zs[r * d + j]) * zs[r * d + j];
    const double inv = 1.0 / std::sqrt(ms / static_cast<double>(d) + eps);
    inv_rms[r] = static_cast<T>(inv);
    for (std::size_t j = 0; j < d; ++j) ys[r * d + j] = static_cast<T>(zs[r * d + j] * inv);
  }
  if (detail::should_record<T>({&z})) {
    auto zi = z.impl_ptr();
    detail::attach_backward(out, [zi, rows, d, inv_rms = std::move(inv_rms)](std::span<const T> g) {
      auto gz = detail::grad_sink(zi);
      const auto& zs = zi->data;
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += static_cast<double>(g[r * d + j]) * zs[r * d + j];
        const double inv = inv_rms[r];
        const double k = dot * inv * inv * inv / static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j)
          gz[r * d + j] += static_cast<T>(g[r * d + j] * inv - zs[r * d + j] * k);
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> minibatch_stddev(const BasicTensor<T>& x, std::size_t group_size) {
  require_nchw(x.shape(), "minibatch_stddev");
  const std::size_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t group = std::min(std::max<std::size_t>(group_size, 1), batch);
  if (batch % group != 0)
    throw ShapeError("minibatch_stddev: batch " + std::to_string(batch) +
                     " is not divisible by group size " + std::to_string(group));
  const std::size_t locs = channels * hw;
  const std::size_t groups = batch / group;
  BasicTensor<T> out(Shape{batch, channels + 1, x.dim(2), x.dim(3)});
  auto xs = x.data();
  auto ys = out.mutable_data();
  std::vector<T> mean(groups * locs), sd(groups * locs);
  for (std::size_t k = 0; k < groups; ++k) {
    double acc = 0;
    for (std::size_t l = 0; l < locs; ++l) {
      double mu = 0;
      for (std::size_t m = 0; m < group; ++m) mu += xs[(k * group + m) * locs + l];
      mu /= static_cast<double>(group);
      double var = 0;
      for (std::size_t m = 0; m < group; ++m) {
        const double dv = xs[(k * group + m) * locs + l] - mu;
        var += dv * dv;
      }
      const double s = std::sqrt(var / static_cast<double>(group));
      mean[k * locs + l] = static_cast<T>(mu);
      sd[k * locs + l] = static_cast<T>(s);
      acc += s;
    }
    const T stat = static_cast<T>(acc / static_cast<double>(locs));
    for (std::size_t m = 0; m < group; ++m) {
      const std::size_t n = k * group + m;
      std::copy_n(xs.data() + n * locs, locs, ys.data() + n * (locs + hw));
      std::fill_n(ys.data() + n * (locs + hw) + locs, hw, stat);
    }
  }
  if (detail::should_record<T>({&x})) {
    auto xi = x.impl_ptr();
    detail::attach_backward(out, [xi, group, groups, locs, hw, mean = std::move(mean),
                                  sd = std::move(sd)](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      const auto& xs = xi->data;
      for (std::size_t k = 0; k < groups; ++k) {
        double g_stat = 0;
        for (std::size_t m = 0; m < group; ++m) {
          const std::size_t n = k * group + m;
          for (std::size_t l = 0; l < locs; ++l) gx[n * locs + l] += g[n * (locs + hw) + l];
          for (std::size_t p = 0; p < hw; ++p) g_stat += g[n * (locs + hw) + locs + p];
        }
        const double coef = g_stat / (static_cast<double>(locs) * static_cast<double>(group));
        for (std::size_t l = 0; l < locs; ++l) {
          const double s = sd[k * locs + l];
          if (s <= 0) continue;
          for (std::size_t m = 0; m < group; ++m) {
            const std::size_t i = (k * group + m) * locs + l;
            gx[i] += static_cast<T>(coef * (xs[i] - mean[k * locs + l]) / s);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add_scaled_noise(const BasicTensor<T>& x, const BasicTensor<T>& strength,
                                const BasicTensor<T>& noise) {
  require_nchw(x.shape(), "add_scaled_noise");
  const std::size_t batch = x.dim(0), channels = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (strength.numel() != channels)
    throw ShapeError("noise strength " + shape_str(strength.shape()) + " does not match " +
                     std::to_string(channels) + " channels");
  if (noise.shape() != Shape{batch, 1, x.dim(2), x.dim(3)})
    throw ShapeError("noise must be [N,1,H,W] matching " + shape_str(x.shape()) + ", got " +
                     shape_str(noise.shape()));
  BasicTensor<T> out(x.shape());
  auto xs = x.data();
  auto ss = strength.data();
  auto ns = noise.data();
  auto ys = out.mutable_data();
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t p = 0; p < hw; ++p) {
        const std::size_t i = (n * channels + c) * hw + p;
        ys[i] = xs[i] + ss[c] * ns[n * hw + p];
      }
  if (detail::should_record<T>({&x, &strength})) {
    auto xi = x.impl_ptr();
    auto si = strength.impl_ptr();
    auto ni = noise.impl_ptr();
    detail::attach_backward(out, [xi, si, ni, batch, channels, hw](std::span<const T> g) {
      auto gx = detail::grad_sink(xi);
      auto gs = detail::grad_sink(si);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t p = 0; p < hw; ++p) {
            const std::size_t i = (n * channels + c) * hw + p;
            if (!gx.empty()) gx[i] += g[i];
            if (!gs.empty()) gs[c] += g[i] * ni->data[n * hw + p];
          }
    });
  }
  return out;
}

EqualizedParam::EqualizedParam(Shape shape, std::size_t fan_in, double gain, Rng& rng)
    : raw(Tensor::randn(std::move(shape), rng)), fan_in(fan_in), gain(gain) {
  if (fan_in == 0) throw ConfigError("equalized parameter needs fan_in >= 1");
  raw.set_requires_grad(true);
}

double EqualizedParam::multiplier() const {
  return runtime_scaling ? std::sqrt(gain / static_cast<double>(fan_in)) : 1.0;
}

void EqualizedParam::bake() {
  const auto m = static_cast<float>(multiplier());
  for (auto& v : raw.mutable_data()) v *= m;
  runtime_scaling = false;
}

Tensor equalized_scale(const EqualizedParam& p) {
  const double m = p.multiplier();
  if (m == 1.0) return p.raw;
  return p.raw * m;
}

EqualizedLinear::EqualizedLinear(std::size_t in, std::size_t out, double gain, double bias_init,
                                 Rng& rng)
    : weight_(Shape{out, in}, in, gain, rng), bias_(Shape{out}, static_cast<float>(bias_init)) {
  bias_.set_requires_grad(true);
}

Tensor EqualizedLinear::forward(const Tensor& x) const {
  return matmul(x, transpose(equalized_scale(weight_))) + bias_;
}

void EqualizedLinear::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + "weight_orig", weight_.raw, true});
  out.push_back({prefix + "bias", bias_, false});
}

EqualizedConv2d::EqualizedConv2d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng,
                                 double gain)
    : weight_(Shape{out, in, kernel, kernel}, in * kernel * kernel, gain, rng),
      bias_(Shape{out}),
      pad_(kernel / 2) {
  bias_.set_requires_grad(true);
}

Tensor EqualizedConv2d::forward(const Tensor& x) const {
  return conv2d(x, equalized_scale(weight_), bias_, 1, pad_);
}

void EqualizedConv2d::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + "bias", bias_, false});
  out.push_back({prefix + "weight_orig", weight_.raw, true});
}

StyleAffine::StyleAffine(std::size_t latent_size, std::size_t channels, bool with_shift, Rng& rng)
    : weight_(Shape{(with_shift ? 2 : 1) * channels, latent_size}, latent_size, 1.0, rng),
      bias_(Shape{(with_shift ? 2 : 1) * channels}),
      channels_(channels),
      with_shift_(with_shift) {
  auto b = bias_.mutable_data();
  for (std::size_t c = 0; c < channels; ++c) b[c] = 1.0f;
  bias_.set_requires_grad(true);
}

std::pair<Tensor, Tensor> StyleAffine::styles(const Tensor& w) const {
  const Tensor y = matmul(w, transpose(equalized_scale(weight_))) + bias_;
  if (!with_shift_) return {y, Tensor{}};
  return {slice_columns(y, 0, channels_), slice_columns(y, channels_, channels_)};
}

void StyleAffine::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + "bias", bias_, false});
  out.push_back({prefix + "weight_orig", weight_.raw, true});
}

NoiseInjector::NoiseInjector(std::size_t channels) : strength_(Shape{channels}) {
  strength_.set_requires_grad(true);
}

Tensor NoiseInjector::sample(std::size_t batch, std::size_t height, std::size_t width,
                             std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn(Shape{batch, 1, height, width}, rng);
}

Tensor NoiseInjector::forward(const Tensor& x, std::uint64_t seed) const {
  return add_scaled_noise(x, strength_, sample(x.dim(0), x.dim(2), x.dim(3), seed));
}

void NoiseInjector::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  out.push_back({prefix + "noise_strength", strength_, false});
}

#define SGLENS_INSTANTIATE(T)                                                                     \
  template BasicTensor<T> adain<T>(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                   const BasicTensor<T>&, double);                               \
  template BasicTensor<T> pixel_norm<T>(const BasicTensor<T>&, double);                          \
  template BasicTensor<T> minibatch_stddev<T>(const BasicTensor<T>&, std::size_t);               \
  template BasicTensor<T> add_scaled_noise<T>(const BasicTensor<T>&, const BasicTensor<T>&,      \
                                              const BasicTensor<T>&);

SGLENS_INSTANTIATE(float)
SGLENS_INSTANTIATE(double)
#undef SGLENS_INSTANTIATE

}  // namespace sglens
