#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sglens/ops.hpp"
#include "sglens/rng.hpp"
#include "sglens/tensor.hpp"

namespace sglens {

inline constexpr double kNormEpsilon = 1e-8;

// Adaptive instance normalization: per sample and channel,
//   y_s * (x - mean) / sqrt(var + eps) + y_b
// with population variance over H x W. x[N,C,H,W]; y_s, y_b [N,C].
template <typename T>
BasicTensor<T> adain(const BasicTensor<T>& x, const BasicTensor<T>& y_s, const BasicTensor<T>& y_b,
                     double eps = kNormEpsilon);

// z / sqrt(mean(z^2) + eps) per row of z[N,D].
template <typename T>
BasicTensor<T> pixel_norm(const BasicTensor<T>& z, double eps = kNormEpsilon);

// Appends one feature map holding, for each group of `group_size`
// consecutive samples, the mean over (C,H,W) of the per-location population
// standard deviation across the group. The group size is clamped to N.
template <typename T>
BasicTensor<T> minibatch_stddev(const BasicTensor<T>& x, std::size_t group_size);

// x[N,C,H,W] + strength[c] * noise[n,0,h,w]. The noise tensor is a constant.
template <typename T>
BasicTensor<T> add_scaled_noise(const BasicTensor<T>& x, const BasicTensor<T>& strength,
                                const BasicTensor<T>& noise);

// A trainable weight stored as N(0,1) `raw` values and scaled at every
// forward pass by sqrt(gain / fan_in). The scaled value is never written back.
struct EqualizedParam {
  Tensor raw;
  std::size_t fan_in = 1;
  double gain = 2.0;
  // Cleared once the multiplier has been folded into `raw` (bake()).
  bool runtime_scaling = true;

  EqualizedParam() = default;
  EqualizedParam(Shape shape, std::size_t fan_in, double gain, Rng& rng);

  double multiplier() const;
  // Multiplies `raw` by the runtime multiplier and disables runtime scaling.
  void bake();
};

// raw * sqrt(gain / fan_in), traced. `raw` itself is unchanged.
Tensor equalized_scale(const EqualizedParam& p);

// Named reference to a trainable tensor, in checkpoint key order.
struct NamedParam {
  std::string key;
  Tensor tensor;
  // Raw equalized weights (keys ending in "weight_orig") are prunable;
  // biases, noise strengths and the constant input are not.
  bool prunable = false;
};

class EqualizedLinear {
 public:
  EqualizedLinear() = default;
  EqualizedLinear(std::size_t in, std::size_t out, double gain, double bias_init, Rng& rng);

  // x[N,in] -> [N,out]
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  std::vector<EqualizedParam*> equalized() { return {&weight_}; }

  EqualizedParam& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  EqualizedParam weight_;
  Tensor bias_;
};

class EqualizedConv2d {
 public:
  EqualizedConv2d() = default;
  EqualizedConv2d(std::size_t in, std::size_t out, std::size_t kernel, Rng& rng, double gain = 2.0);

  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  std::vector<EqualizedParam*> equalized() { return {&weight_}; }

  EqualizedParam& weight() { return weight_; }
  Tensor& bias() { return bias_; }

 private:
  EqualizedParam weight_;
  Tensor bias_;
  std::size_t pad_ = 0;
};

// The learned affine map "A" from a w vector to per-channel styles. With
// `with_shift` it yields (y_s, y_b) for AdaIN (2C outputs); without it only
// channel scales (C outputs). The y_s bias starts at 1, y_b at 0.
class StyleAffine {
 public:
  StyleAffine() = default;
  StyleAffine(std::size_t latent_size, std::size_t channels, bool with_shift, Rng& rng);

  // w[N,latent] -> (y_s[N,C], y_b[N,C]); y_b is undefined without shift.
  std::pair<Tensor, Tensor> styles(const Tensor& w) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  std::vector<EqualizedParam*> equalized() { return {&weight_}; }

  EqualizedParam& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  std::size_t channels() const { return channels_; }

 private:
  EqualizedParam weight_;
  Tensor bias_;
  std::size_t channels_ = 0;
  bool with_shift_ = true;
};

// Adds one seeded N(0,1) noise image per sample, shared across channels and
// scaled by a learned per-channel strength (initially 0).
class NoiseInjector {
 public:
  NoiseInjector() = default;
  explicit NoiseInjector(std::size_t channels);

  Tensor forward(const Tensor& x, std::uint64_t seed) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);

  Tensor& strength() { return strength_; }

  // Noise of shape [N,1,H,W] drawn from `seed`.
  static Tensor sample(std::size_t batch, std::size_t height, std::size_t width, std::uint64_t seed);

 private:
  Tensor strength_;
};

}  // namespace sglens
