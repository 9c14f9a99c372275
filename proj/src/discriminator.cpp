#include "sglens/discriminator.hpp"

#include <string>

#include "sglens/error.hpp"

namespace sglens {

Discriminator::Discriminator(const GeneratorConfig& config, std::size_t group_size,
                             std::uint64_t init_seed)
    : config_(config), group_size_(group_size) {
  config_.validate();
  if (group_size_ == 0) throw ConfigError("group_size must be positive");
  Rng rng(derive_seed(init_seed, {0xD15C}));
  const auto widths = config_.channel_widths();
  const std::size_t top = config_.blocks;
  from_rgb_ = EqualizedConv2d(config_.img_channels, widths[top], 1, rng);
  for (std::size_t i = top; i-- > 0;)
    blocks_.push_back(Block{EqualizedConv2d(widths[i + 1], widths[i + 1], 3, rng),
                            EqualizedConv2d(widths[i + 1], widths[i], 3, rng)});
  final_conv_ = EqualizedConv2d(widths[0] + 1, widths[0], 3, rng);
  fc_ = EqualizedLinear(widths[0] * config_.min_res * config_.min_res, widths[0], 2.0, 0.0, rng);
  out_ = EqualizedLinear(widths[0], 1, 1.0, 0.0, rng);
}

Tensor Discriminator::get_score(const Tensor& images) const {
  const Shape want{images.rank() == 4 ? images.dim(0) : 0, config_.img_channels, config_.max_res,
                   config_.max_res};
  if (images.rank() != 4 || images.shape() != want)
    throw ShapeError("discriminator expects [N," + std::to_string(config_.img_channels) + "," +
                     std::to_string(config_.max_res) + "," + std::to_string(config_.max_res) +
                     "], got " + shape_str(images.shape()));
  const double slope = config_.leaky_slope;
  Tensor x = leaky_relu(from_rgb_.forward(images), slope);
  for (const auto& block : blocks_) {
    x = leaky_relu(block.conv1.forward(x), slope);
    x = leaky_relu(block.conv2.forward(x), slope);
    x = avg_pool2(x);
  }
  x = minibatch_stddev(x, group_size_);
  x = leaky_relu(final_conv_.forward(x), slope);
  x = reshape(x, Shape{x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
  x = leaky_relu(fc_.forward(x), slope);
  return out_.forward(x);
}

std::vector<NamedParam> Discriminator::named_parameters() {
  std::vector<NamedParam> out;
  from_rgb_.collect("from_rgb.", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].conv1.collect("blocks." + std::to_string(i) + ".conv1.", out);
    blocks_[i].conv2.collect("blocks." + std::to_string(i) + ".conv2.", out);
  }
  final_conv_.collect("final_conv.", out);
  fc_.collect("fc.", out);
  out_.collect("out.", out);
  return out;
}

std::size_t Discriminator::parameter_count() {
  std::size_t total = 0;
  for (const auto& p : named_parameters()) total += p.tensor.numel();
  return total;
}

Tensor probability(const Tensor& logits) { return sigmoid(logits); }

}  // namespace sglens
