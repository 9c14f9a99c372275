#include "sglens/generator.hpp"

#include <algorithm>
#include <string>

#include "sglens/error.hpp"

namespace sglens {

void GeneratorConfig::validate() const {
  if (latent_size == 0 || n_layers == 0 || img_channels == 0 || min_res == 0 || blocks == 0)
    throw ConfigError("generator sizes must be positive");
  if (blocks > 16) throw ConfigError("at most 16 blocks are supported");
  const std::size_t scale = std::size_t{1} << blocks;
  if (!(max_res <= min_res * scale && max_res >= (min_res - 1) * scale))
    throw ConfigError("resolution assertion failed: need (min_res-1)*2^blocks <= max_res <= "
                      "min_res*2^blocks, got min_res=" + std::to_string(min_res) +
                      " blocks=" + std::to_string(blocks) + " max_res=" + std::to_string(max_res));
  if (max_res != min_res * scale)
    throw ConfigError("every block doubles the resolution, so max_res must equal min_res*2^blocks = " +
                      std::to_string(min_res * scale));
  if (!channels.empty() && channels.size() != blocks + 1)
    throw ConfigError("channels needs blocks+1 = " + std::to_string(blocks + 1) + " entries, got " +
                      std::to_string(channels.size()));
  for (std::size_t c : channels)
    if (c == 0) throw ConfigError("channel widths must be positive");
  if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in (0,1)");
  if (!(truncation_psi >= 0.0 && truncation_psi <= 1.0))
    throw ConfigError("truncation_psi must lie in [0,1]");
  if (truncation_cutoff < -1 || truncation_cutoff > static_cast<int>(num_style_layers()))
    throw ConfigError("truncation_cutoff must be -1 or within [0, 2*blocks]");
  if (!(w_avg_decay >= 0.0 && w_avg_decay <= 1.0)) throw ConfigError("w_avg_decay must lie in [0,1]");
}

std::vector<std::size_t> GeneratorConfig::channel_widths() const {
  if (!channels.empty()) return channels;
  std::vector<std::size_t> widths;
  for (std::size_t b = 0; b <= blocks; ++b) {
    const std::size_t res = min_res << b;
    widths.push_back(std::max<std::size_t>(1, std::min<std::size_t>(256, 4096 / res)));
  }
  return widths;
}

GeneratorConfig GeneratorConfig::reference() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::desk() {
  GeneratorConfig c;
  c.latent_size = 64;
  c.n_layers = 8;
  c.min_res = 4;
  c.blocks = 2;
  c.max_res = 16;
  c.channels = {32, 32, 16};
  return c;
}

Tensor WBatch::stacked() const {
  if (layers.empty()) throw ShapeError("empty WBatch");
  const std::size_t n = batch(), l = layers.size(), d = layers.front().dim(1);
  Tensor out(Shape{n, l, d});
  auto dst = out.mutable_data();
  for (std::size_t k = 0; k < l; ++k) {
    auto src = layers[k].data();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(src.data() + i * d, d, dst.data() + (i * l + k) * d);
  }
  return out;
}

WBatch WBatch::broadcast(const Tensor& w, std::size_t num_layers) {
  if (w.rank() != 2) throw ShapeError("w must be [N,D], got " + shape_str(w.shape()));
  return WBatch{std::vector<Tensor>(num_layers, w)};
}

WBatch style_mix(const WBatch& first, const WBatch& second, std::size_t crossover) {
  if (first.num_layers() != second.num_layers())
    throw ShapeError("style_mix: layer counts differ (" + std::to_string(first.num_layers()) +
                     " vs " + std::to_string(second.num_layers()) + ")");
  if (crossover > first.num_layers())
    throw ValidationError("style_mix: crossover " + std::to_string(crossover) +
                          " outside [0, " + std::to_string(first.num_layers()) + "]");
  if (first.batch() != second.batch()) throw ShapeError("style_mix: batch sizes differ");
  WBatch out;
  for (std::size_t l = 0; l < first.num_layers(); ++l)
    out.layers.push_back(l < crossover ? first.layers[l] : second.layers[l]);
  return out;
}

WBatch truncate(const WBatch& w, const Tensor& w_avg, double psi, int cutoff) {
  if (!(psi >= 0.0 && psi <= 1.0))
    throw ValidationError("truncation psi must lie in [0,1], got " + std::to_string(psi));
  const std::size_t limit =
      cutoff < 0 ? w.num_layers() : std::min<std::size_t>(static_cast<std::size_t>(cutoff), w.num_layers());
  if (psi == 1.0 || limit == 0) return w;
  WBatch out;
  for (std::size_t l = 0; l < w.num_layers(); ++l) {
    if (l < limit) out.layers.push_back((w.layers[l] - w_avg) * psi + w_avg);
    else out.layers.push_back(w.layers[l]);
  }
  return out;
}

MappingNetwork::MappingNetwork(std::size_t latent_size, std::size_t n_layers, double slope, Rng& rng)
    : latent_size_(latent_size), slope_(slope) {
  for (std::size_t i = 0; i < n_layers; ++i)
    layers_.emplace_back(latent_size, latent_size, 2.0, 0.0, rng);
}

Tensor MappingNetwork::forward(const Tensor& z) const {
  if (z.rank() != 2 || z.dim(1) != latent_size_)
    throw ShapeError("latent batch must be [N," + std::to_string(latent_size_) + "], got " +
                     shape_str(z.shape()));
  Tensor x = pixel_norm(z);
  for (const auto& layer : layers_) x = leaky_relu(layer.forward(x), slope_);
  return x;
}

void MappingNetwork::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i].collect(prefix + std::to_string(i) + ".", out);
}

std::vector<EqualizedParam*> MappingNetwork::equalized() {
  std::vector<EqualizedParam*> out;
  for (auto& l : layers_) out.push_back(&l.weight());
  return out;
}

GBlock::GBlock(std::size_t in_channels, std::size_t out_channels, std::size_t latent_size,
               std::size_t img_channels, Rng& rng)
    : upconv_(in_channels, out_channels, 3, rng),
      upconv_style_(latent_size, out_channels, true, rng),
      conv_(out_channels, out_channels, 3, rng),
      conv_style_(latent_size, out_channels, true, rng),
      noise_(out_channels),
      noise2_(out_channels),
      to_channels_(out_channels, img_channels, 1, rng, 1.0),
      to_channels_style_(latent_size, out_channels, false, rng) {}

std::pair<Tensor, Tensor> GBlock::forward(const Tensor& features, std::span<const Tensor> styles,
                                          std::uint64_t noise_seed, const Tensor& skip_image,
                                          double slope) const {
  if (styles.size() != 2)
    throw ShapeError("a synthesis block takes 2 style vectors, got " + std::to_string(styles.size()));
  Tensor x = upconv_.forward(upsample(features, 2, UpsampleMode::kNearest));
  x = noise_.forward(x, derive_seed(noise_seed, {0}));
  auto [s1, b1] = upconv_style_.styles(styles[0]);
  x = leaky_relu(adain(x, s1, b1), slope);

  x = conv_.forward(x);
  x = noise2_.forward(x, derive_seed(noise_seed, {1}));
  auto [s2, b2] = conv_style_.styles(styles[1]);
  x = leaky_relu(adain(x, s2, b2), slope);

  auto [s3, unused] = to_channels_style_.styles(styles[1]);
  Tensor image = to_channels_.forward(channel_scale(x, s3));
  if (skip_image.defined()) image = image + upsample(skip_image, 2, UpsampleMode::kBilinear);
  return {x, image};
}

void GBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) {
  upconv_.collect(prefix + "upconv.", out);
  upconv_style_.collect(prefix + "upconv.style.", out);
  conv_.collect(prefix + "conv.", out);
  conv_style_.collect(prefix + "conv.style.", out);
  noise_.collect(prefix + "noise.", out);
  noise2_.collect(prefix + "noise2.", out);
  to_channels_.collect(prefix + "to_channels.", out);
  to_channels_style_.collect(prefix + "to_channels.style.", out);
}

std::vector<EqualizedParam*> GBlock::equalized() {
  return {&upconv_.weight(), &upconv_style_.weight(), &conv_.weight(),
          &conv_style_.weight(), &to_channels_.weight(), &to_channels_style_.weight()};
}

Generator::Generator(GeneratorConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(init_seed);
  const auto widths = config_.channel_widths();
  mapping_ = MappingNetwork(config_.latent_size, config_.n_layers, config_.leaky_slope, rng);
  const_input_ = Tensor::ones(Shape{1, widths[0], config_.min_res, config_.min_res});
  const_input_.set_requires_grad(true);
  for (std::size_t b = 0; b < config_.blocks; ++b)
    blocks_.emplace_back(widths[b], widths[b + 1], config_.latent_size, config_.img_channels, rng);
  w_avg_ = Tensor::zeros(Shape{config_.latent_size});
}

Tensor Generator::map_latent(const Tensor& z) const { return mapping_.forward(z); }

WBatch Generator::map_to_styles(const Tensor& z) const {
  return WBatch::broadcast(map_latent(z), config_.num_style_layers());
}

std::pair<Tensor, Tensor> Generator::g_block(std::size_t index, const Tensor& features,
                                             std::span<const Tensor> styles,
                                             std::uint64_t noise_seed,
                                             const Tensor& skip_image) const {
  if (index >= blocks_.size())
    throw ShapeError("block index " + std::to_string(index) + " out of range");
  return blocks_[index].forward(features, styles, derive_seed(noise_seed, {index}), skip_image,
                                config_.leaky_slope);
}

Tensor Generator::synthesize(const WBatch& w, std::uint64_t noise_seed) const {
  if (w.num_layers() != config_.num_style_layers())
    throw ShapeError("expected " + std::to_string(config_.num_style_layers()) +
                     " style layers, got " + std::to_string(w.num_layers()));
  const std::size_t n = w.batch();
  for (const auto& layer : w.layers)
    if (layer.rank() != 2 || layer.dim(0) != n || layer.dim(1) != config_.latent_size)
      throw ShapeError("style layer must be [" + std::to_string(n) + "," +
                       std::to_string(config_.latent_size) + "], got " + shape_str(layer.shape()));
  // Broadcast the constant over the batch; the sum keeps it differentiable.
  const Shape cshape = const_input_.shape();
  Tensor features = Tensor::zeros(Shape{n, cshape[1], cshape[2], cshape[3]}) + reshape(const_input_, Shape{cshape[1], cshape[2], cshape[3]});
  Tensor image;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    std::span<const Tensor> styles(w.layers.data() + 2 * b, 2);
    std::tie(features, image) = g_block(b, features, styles, noise_seed, image);
  }
  return image;
}

Tensor Generator::generate(const Tensor& z, std::uint64_t noise_seed, double psi) const {
  WBatch w = map_to_styles(z);
  w = truncate(w, w_avg_, psi, config_.truncation_cutoff);
  return synthesize(w, noise_seed);
}

void Generator::update_w_avg(const Tensor& w) {
  const std::size_t n = w.dim(0), d = w.dim(1);
  auto avg = w_avg_.mutable_data();
  auto ws = w.data();
  const double decay = config_.w_avg_decay;
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0;
    for (std::size_t i = 0; i < n; ++i) m += ws[i * d + j];
    m /= static_cast<double>(n);
    avg[j] = static_cast<float>(decay * avg[j] + (1.0 - decay) * m);
  }
}

std::vector<NamedParam> Generator::named_parameters() {
  std::vector<NamedParam> out;
  mapping_.collect("Src_Net.mapping.", out);
  out.push_back({"Src_Net.const", const_input_, false});
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    blocks_[b].collect("Src_Net." + std::to_string(b) + ".", out);
  return out;
}

std::vector<NamedParam> Generator::named_buffers() { return {{"Src_Net.w_avg", w_avg_, false}}; }

std::vector<EqualizedParam*> Generator::equalized_params() {
  auto out = mapping_.equalized();
  for (auto& b : blocks_) {
    auto more = b.equalized();
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

std::size_t Generator::parameter_count() {
  std::size_t total = 0;
  for (const auto& p : named_parameters()) total += p.tensor.numel();
  return total;
}

void Generator::bake_equalized_scales() {
  for (auto* p : equalized_params()) p->bake();
}

Generator Generator::clone() const {
  Generator copy(config_, 0);
  auto& self = const_cast<Generator&>(*this);
  auto src = self.named_parameters();
  auto dst = copy.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].tensor.data();
    std::copy(from.begin(), from.end(), dst[i].tensor.mutable_data().begin());
  }
  auto src_eq = self.equalized_params();
  auto dst_eq = copy.equalized_params();
  for (std::size_t i = 0; i < src_eq.size(); ++i) dst_eq[i]->runtime_scaling = src_eq[i]->runtime_scaling;
  std::copy(w_avg_.data().begin(), w_avg_.data().end(), copy.w_avg_.mutable_data().begin());
  return copy;
}

void ema_update(Generator& stable, Generator& live, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0))
    throw ValidationError("ema decay must lie in [0,1], got " + std::to_string(decay));
  auto s = stable.named_parameters();
  auto l = live.named_parameters();
  if (s.size() != l.size()) throw ConfigError("ema_update: generator architectures differ");
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i].key != l[i].key || s[i].tensor.shape() != l[i].tensor.shape())
      throw ConfigError("ema_update: parameter " + s[i].key + " does not match " + l[i].key);
  const float keep = static_cast<float>(decay), take = static_cast<float>(1.0 - decay);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto dst = s[i].tensor.mutable_data();
    auto src = l[i].tensor.data();
    if (decay == 0.0) {
      std::copy(src.begin(), src.end(), dst.begin());
    } else if (decay != 1.0) {
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = keep * dst[j] + take * src[j];
    }
  }
  auto avg_src = live.w_avg().data();
  std::copy(avg_src.begin(), avg_src.end(), stable.w_avg().mutable_data().begin());
}

}  // namespace sglens
