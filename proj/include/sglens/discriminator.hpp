#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sglens/generator.hpp"
#include "sglens/layers.hpp"

namespace sglens {

// Mirror of the generator's resolution ladder. from_rgb (1x1) at max_res,
// then per block two 3x3 convs with leaky ReLU and a 2x2 average pool, down
// to min_res; there a minibatch-stddev map is appended before a final 3x3
// conv, a dense layer and a 1-unit equalized linear output.
class Discriminator {
 public:
  explicit Discriminator(const GeneratorConfig& config, std::size_t group_size = 8,
                         std::uint64_t init_seed = 0);
  Discriminator(Discriminator&&) = default;
  Discriminator& operator=(Discriminator&&) = default;
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  // images[N, img_channels, max_res, max_res] -> logits [N,1].
  Tensor get_score(const Tensor& images) const;

  std::vector<NamedParam> named_parameters();
  std::size_t parameter_count();
  std::size_t group_size() const { return group_size_; }
  const GeneratorConfig& config() const { return config_; }

 private:
  struct Block {
    EqualizedConv2d conv1;
    EqualizedConv2d conv2;
  };
  GeneratorConfig config_;
  std::size_t group_size_;
  EqualizedConv2d from_rgb_;
  std::vector<Block> blocks_;
  EqualizedConv2d final_conv_;
  EqualizedLinear fc_;
  EqualizedLinear out_;
};

// Elementwise sigmoid of logits: the probability that an image is real.
Tensor probability(const Tensor& logits);

}  // namespace sglens
