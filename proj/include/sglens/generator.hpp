#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sglens/layers.hpp"

namespace sglens {

struct GeneratorConfig {
  std::size_t latent_size = 512;
  std::size_t n_layers = 8;
  std::size_t img_channels = 3;
  std::size_t min_res = 4;
  std::size_t blocks = 5;
  std::size_t max_res = 128;
  // blocks + 1 widths: the constant input, then each block's output.
  // Empty selects the default taper min(256, 4096 / resolution).
  std::vector<std::size_t> channels;
  double leaky_slope = 0.2;
  double truncation_psi = 1.0;
  // Style layers below this index are truncated; -1 means all of them.
  int truncation_cutoff = -1;
  double w_avg_decay = 0.995;

  // Throws ConfigError. Enforces
  //   max_res <= min_res * 2^blocks  and  max_res >= (min_res - 1) * 2^blocks
  // and, because every block doubles the resolution, max_res == min_res * 2^blocks.
  void validate() const;
  std::size_t num_style_layers() const { return 2 * blocks; }
  std::vector<std::size_t> channel_widths() const;

  // 128x128, five blocks, 512-wide latents with an 8-layer mapping network.
  static GeneratorConfig reference();
  // 16x16, two blocks, small widths: trains on one CPU core in minutes.
  static GeneratorConfig desk();
};

// Per-layer w vectors. layers[l] is [N, latent_size]; there are two styled
// convolutions per block, so num_layers() == 2 * blocks.
struct WBatch {
  std::vector<Tensor> layers;

  std::size_t num_layers() const { return layers.size(); }
  std::size_t batch() const { return layers.empty() ? 0 : layers.front().dim(0); }
  // [N, num_layers, latent_size]
  Tensor stacked() const;

  static WBatch broadcast(const Tensor& w, std::size_t num_layers);
};

// Layers [0, crossover) from `first`, [crossover, end) from `second`.
WBatch style_mix(const WBatch& first, const WBatch& second, std::size_t crossover);

// w_avg + psi * (w - w_avg) on layers below `cutoff` (-1: all layers).
WBatch truncate(const WBatch& w, const Tensor& w_avg, double psi, int cutoff = -1);

class MappingNetwork {
 public:
  MappingNetwork() = default;
  MappingNetwork(std::size_t latent_size, std::size_t n_layers, double slope, Rng& rng);

  // pixel_norm, then n_layers x (equalized linear, leaky ReLU).
  Tensor forward(const Tensor& z) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  std::vector<EqualizedParam*> equalized();

 private:
  std::vector<EqualizedLinear> layers_;
  std::size_t latent_size_ = 0;
  double slope_ = 0.2;
};

// One synthesis block: nearest-upsample + 3x3 conv, noise, AdaIN, activation,
// 3x3 conv, noise, AdaIN, activation, then a styled 1x1 conv to image
// channels. The incoming skip image is bilinearly upsampled and added.
class GBlock {
 public:
  GBlock() = default;
  GBlock(std::size_t in_channels, std::size_t out_channels, std::size_t latent_size,
         std::size_t img_channels, Rng& rng);

  std::pair<Tensor, Tensor> forward(const Tensor& features, std::span<const Tensor> styles,
                                    std::uint64_t noise_seed, const Tensor& skip_image,
                                    double slope) const;
  void collect(const std::string& prefix, std::vector<NamedParam>& out);
  std::vector<EqualizedParam*> equalized();

  NoiseInjector& noise() { return noise_; }
  NoiseInjector& noise2() { return noise2_; }

 private:
  EqualizedConv2d upconv_;
  StyleAffine upconv_style_;
  EqualizedConv2d conv_;
  StyleAffine conv_style_;
  NoiseInjector noise_;
  NoiseInjector noise2_;
  EqualizedConv2d to_channels_;
  StyleAffine to_channels_style_;
};

class Generator {
 public:
  explicit Generator(GeneratorConfig config, std::uint64_t init_seed = 0);
  Generator(Generator&&) = default;
  Generator& operator=(Generator&&) = default;
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  const GeneratorConfig& config() const { return config_; }

  // f: Z -> W. z[N, latent_size] -> w[N, latent_size].
  Tensor map_latent(const Tensor& z) const;
  WBatch map_to_styles(const Tensor& z) const;

  // Runs block `index`; the first block consumes the constant input.
  std::pair<Tensor, Tensor> g_block(std::size_t index, const Tensor& features,
                                    std::span<const Tensor> styles, std::uint64_t noise_seed,
                                    const Tensor& skip_image) const;

  // Image from per-layer styles; noise derives from `noise_seed` only.
  Tensor synthesize(const WBatch& w, std::uint64_t noise_seed) const;
  // z -> map -> truncate(psi, config cutoff) -> synthesize.
  Tensor generate(const Tensor& z, std::uint64_t noise_seed, double psi) const;
  Tensor generate(const Tensor& z, std::uint64_t noise_seed) const {
    return generate(z, noise_seed, config_.truncation_psi);
  }

  const Tensor& w_avg() const { return w_avg_; }
  Tensor& w_avg() { return w_avg_; }
  // Moves w_avg toward the batch mean of mapped w with the configured decay.
  void update_w_avg(const Tensor& w);

  std::vector<NamedParam> named_parameters();
  // Non-trainable state saved alongside the parameters (w_avg).
  std::vector<NamedParam> named_buffers();
  std::vector<EqualizedParam*> equalized_params();
  std::size_t parameter_count();

  // Folds every runtime multiplier into its raw weights.
  void bake_equalized_scales();
  Generator clone() const;

 private:
  GeneratorConfig config_;
  MappingNetwork mapping_;
  Tensor const_input_;
  std::vector<GBlock> blocks_;
  Tensor w_avg_;
};

// stable <- decay * stable + (1 - decay) * live for every trainable tensor.
// Also copies w_avg. Throws ConfigError on architecture mismatch.
void ema_update(Generator& stable, Generator& live, double decay);

}  // namespace sglens
