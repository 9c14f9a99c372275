#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sglens/tensor.hpp"

namespace sglens {

// Per-channel RGB statistics used to normalize training images.
inline constexpr std::array<double, 3> kImageMean{0.485, 0.456, 0.406};
inline constexpr std::array<double, 3> kImageStd{0.229, 0.224, 0.225};

// (x - mean) / std per channel. x is [3,H,W] or [N,3,H,W] with values in [0,1].
Tensor normalize_image(const Tensor& x);
// x * std + mean per channel, clamped to [0,1].
Tensor denormalize_image(const Tensor& x);

struct Rgb8Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
};

// Denormalize, clamp and round a normalized [3,H,W] image to 8-bit RGB.
// Throws ValidationError on non-finite pixels.
Rgb8Image quantize_image(const Tensor& image);

// Tiles a normalized [N,3,H,W] batch into one RGB image, `columns` per row
// (0: ceil(sqrt(N))), separated by a 1-pixel white gutter.
Rgb8Image image_grid(const Tensor& images, std::size_t columns = 0);

// Deterministic PNG (8-bit RGB, no interlace, fixed zlib level).
std::vector<std::uint8_t> encode_png(const Rgb8Image& image);
// encode_png(quantize_image(image)) for a normalized [3,H,W] tensor.
std::vector<std::uint8_t> encode_png(const Tensor& image);

// Reads any 8-bit PNG into RGB (alpha dropped, gray expanded). Throws IoError.
Rgb8Image decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace sglens
