#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sglens/image_io.hpp"
#include "sglens/tensor.hpp"

namespace sglens {

// Source of training images. batch() returns normalized [n,3,R,R] tensors and
// is a pure function of (first, n).
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::size_t resolution() const = 0;
  virtual Tensor batch(std::size_t first, std::size_t n) const = 0;
};

// Procedural stand-in for a face dataset: two-tone background, a skin-toned
// ellipse, two dark eyes and a mouth, with geometry and palette jittered per
// index. Infinite and deterministic.
class SyntheticFaceDataset final : public ImageSource {
 public:
  SyntheticFaceDataset(std::size_t resolution, std::uint64_t seed);

  std::size_t resolution() const override { return resolution_; }
  // [3,R,R] with values in [0,1].
  std::vector<float> image(std::size_t index) const;
  Tensor batch(std::size_t first, std::size_t n) const override;

 private:
  std::size_t resolution_;
  std::uint64_t seed_;
};

// PNG files from a directory in name order, resized so the shorter side is R
// (bilinear) and center-cropped to RxR. Indices wrap around.
class ImageFolderDataset final : public ImageSource {
 public:
  ImageFolderDataset(const std::filesystem::path& dir, std::size_t resolution);

  std::size_t resolution() const override { return resolution_; }
  std::size_t size() const { return images_.size(); }
  Tensor batch(std::size_t first, std::size_t n) const override;

 private:
  std::size_t resolution_;
  std::vector<std::vector<float>> images_;
};

// Shorter side to `resolution`, then center crop. Returns [3,R,R] in [0,1].
std::vector<float> resize_and_crop(const Rgb8Image& image, std::size_t resolution);

}  // namespace sglens
