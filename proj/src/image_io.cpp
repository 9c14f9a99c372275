#include "sglens/image_io.hpp"

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sglens/error.hpp"

namespace sglens {

namespace {

void require_rgb(const Tensor& x, const char* what) {
  const bool ok = (x.rank() == 3 && x.dim(0) == 3) || (x.rank() == 4 && x.dim(1) == 3);
  if (!ok) throw ShapeError(std::string(what) + " expects [3,H,W] or [N,3,H,W], got " + shape_str(x.shape()));
}

template <typename Fn>
Tensor per_channel(const Tensor& x, Fn fn) {
  const std::size_t plane = x.dim(x.rank() - 1) * x.dim(x.rank() - 2);
  Tensor out(x.shape());
  auto src = x.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i], (i / plane) % 3);
  return out;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep out, png_size_t length) {
  auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (state->offset + length > state->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, state->bytes.data() + state->offset, length);
  state->offset += length;
}

}  // namespace

Tensor normalize_image(const Tensor& x) {
  require_rgb(x, "normalize_image");
  return per_channel(x, [](float v, std::size_t c) {
    return static_cast<float>((static_cast<double>(v) - kImageMean[c]) / kImageStd[c]);
  });
}

Tensor denormalize_image(const Tensor& x) {
  require_rgb(x, "denormalize_image");
  return per_channel(x, [](float v, std::size_t c) {
    const double u = static_cast<double>(v) * kImageStd[c] + kImageMean[c];
    return static_cast<float>(std::clamp(u, 0.0, 1.0));
  });
}

Rgb8Image quantize_image(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw ShapeError("expected a [3,H,W] image, got " + shape_str(image.shape()));
  for (float v : image.data())
    if (!std::isfinite(v)) throw ValidationError("image contains non-finite pixels");
  const Tensor rgb = denormalize_image(image);
  Rgb8Image out{image.dim(2), image.dim(1), {}};
  out.pixels.resize(out.width * out.height * 3);
  const std::size_t plane = out.width * out.height;
  auto src = rgb.data();
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      out.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(src[c * plane + p] * 255.0f));
  return out;
}

Rgb8Image image_grid(const Tensor& images, std::size_t columns) {
  if (images.rank() != 4 || images.dim(1) != 3)
    throw ShapeError("image_grid expects [N,3,H,W], got " + shape_str(images.shape()));
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  if (columns == 0) columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + columns - 1) / columns;
  Rgb8Image grid;
  grid.width = columns * w + (columns - 1);
  grid.height = rows * h + (rows - 1);
  grid.pixels.assign(grid.width * grid.height * 3, 255);
  const std::size_t sample = 3 * h * w;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> one(images.data().begin() + i * sample, images.data().begin() + (i + 1) * sample);
    const Rgb8Image tile = quantize_image(Tensor(Shape{3, h, w}, std::move(one)));
    const std::size_t ox = (i % columns) * (w + 1), oy = (i / columns) * (h + 1);
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(tile.pixels.data() + y * w * 3, w * 3,
                  grid.pixels.data() + ((oy + y) * grid.width + ox) * 3);
  }
  return grid;
}

std::vector<std::uint8_t> encode_png(const Rgb8Image& image) {
  if (image.width == 0 || image.height == 0 || image.pixels.size() != image.width * image.height * 3)
    throw ValidationError("encode_png: pixel buffer does not match image size");
  std::vector<std::uint8_t> out{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit, truecolour, deflate, no filter/interlace
  put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = image.width * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), image.pixels.begin() + y * stride, image.pixels.begin() + (y + 1) * stride);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("zlib compression failed");
  packed.resize(packed_size);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

std::vector<std::uint8_t> encode_png(const Tensor& image) { return encode_png(quantize_image(image)); }

Rgb8Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw IoError("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw IoError("libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  Rgb8Image out;
  PngReadState state{bytes, 0};
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("malformed PNG data");
  }
  png_set_read_fn(png, &state, png_read_from_span);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  out.width = png_get_image_width(png, info);
  out.height = png_get_image_height(png, info);
  out.pixels.resize(out.width * out.height * 3);
  rows.resize(out.height);
  for (std::size_t y = 0; y < out.height; ++y) rows[y] = out.pixels.data() + y * out.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace sglens
