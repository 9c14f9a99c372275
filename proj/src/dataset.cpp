#include "sglens/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "sglens/error.hpp"
#include "sglens/rng.hpp"

namespace sglens {

namespace {

using Rgb = std::array<double, 3>;

struct Ellipse {
  double cx, cy, rx, ry;
  bool contains(double x, double y) const {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
  }
};

Rgb jitter(const Rgb& base, Rng& rng, double amount) {
  Rgb out;
  for (std::size_t c = 0; c < 3; ++c) out[c] = std::clamp(base[c] + rng.uniform(-amount, amount), 0.0, 1.0);
  return out;
}

constexpr std::array<Rgb, 4> kSkin{{{0.94, 0.80, 0.69}, {0.82, 0.62, 0.48}, {0.62, 0.44, 0.32}, {0.42, 0.28, 0.20}}};

Tensor stack_normalized(const std::vector<std::vector<float>>& images, std::size_t r) {
  const std::size_t sample = 3 * r * r;
  std::vector<float> all;
  all.reserve(images.size() * sample);
  for (const auto& im : images) all.insert(all.end(), im.begin(), im.end());
  return normalize_image(Tensor(Shape{images.size(), 3, r, r}, std::move(all)));
}

}  // namespace

SyntheticFaceDataset::SyntheticFaceDataset(std::size_t resolution, std::uint64_t seed)
    : resolution_(resolution), seed_(seed) {
  if (resolution < 4) throw ConfigError("synthetic dataset resolution must be at least 4");
}

std::vector<float> SyntheticFaceDataset::image(std::size_t index) const {
  Rng rng(derive_seed(seed_, {index}));
  const double r = static_cast<double>(resolution_);
  const Rgb top{rng.uniform(), rng.uniform(), rng.uniform()};
  const Rgb bottom = jitter(top, rng, 0.35);
  const Rgb skin = jitter(kSkin[static_cast<std::size_t>(rng.uniform() * 4.0) % 4], rng, 0.05);
  const Rgb eye_col = jitter({0.12, 0.10, 0.10}, rng, 0.06);
  const Rgb mouth_col = jitter({0.65, 0.22, 0.24}, rng, 0.08);

  const Ellipse face{r * rng.uniform(0.46, 0.54), r * rng.uniform(0.48, 0.56), r * rng.uniform(0.27, 0.33),
                     r * rng.uniform(0.34, 0.41)};
  const double eye_dx = r * rng.uniform(0.10, 0.14), eye_y = face.cy - r * rng.uniform(0.08, 0.13);
  const double eye_rx = r * rng.uniform(0.05, 0.07), eye_ry = r * rng.uniform(0.03, 0.05);
  const Ellipse left{face.cx - eye_dx, eye_y, eye_rx, eye_ry};
  const Ellipse right{face.cx + eye_dx, eye_y, eye_rx, eye_ry};
  const Ellipse mouth{face.cx, face.cy + r * rng.uniform(0.16, 0.22), r * rng.uniform(0.08, 0.12),
                      r * rng.uniform(0.02, 0.04)};

  constexpr int kSub = 4;
  const std::size_t plane = resolution_ * resolution_;
  std::vector<float> out(3 * plane);
  for (std::size_t y = 0; y < resolution_; ++y) {
    for (std::size_t x = 0; x < resolution_; ++x) {
      Rgb acc{0, 0, 0};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub, py = y + (sy + 0.5) / kSub;
          const double t = py / r;
          Rgb c;
          for (std::size_t k = 0; k < 3; ++k) c[k] = top[k] * (1 - t) + bottom[k] * t;
          if (face.contains(px, py)) c = skin;
          if (left.contains(px, py) || right.contains(px, py)) c = eye_col;
          if (mouth.contains(px, py)) c = mouth_col;
          for (std::size_t k = 0; k < 3; ++k) acc[k] += c[k];
        }
      }
      for (std::size_t k = 0; k < 3; ++k)
        out[k * plane + y * resolution_ + x] = static_cast<float>(acc[k] / (kSub * kSub));
    }
  }
  return out;
}

Tensor SyntheticFaceDataset::batch(std::size_t first, std::size_t n) const {
  std::vector<std::vector<float>> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) images.push_back(image(first + i));
  return stack_normalized(images, resolution_);
}

std::vector<float> resize_and_crop(const Rgb8Image& image, std::size_t resolution) {
  if (image.width == 0 || image.height == 0) throw IoError("empty image");
  const double scale = static_cast<double>(resolution) / static_cast<double>(std::min(image.width, image.height));
  const double new_w = image.width * scale, new_h = image.height * scale;
  const double off_x = (new_w - resolution) / 2.0, off_y = (new_h - resolution) / 2.0;
  const std::size_t plane = resolution * resolution;
  std::vector<float> out(3 * plane);
  auto px = [&](long x, long y, std::size_t c) {
    x = std::clamp<long>(x, 0, static_cast<long>(image.width) - 1);
    y = std::clamp<long>(y, 0, static_cast<long>(image.height) - 1);
    return image.pixels[(static_cast<std::size_t>(y) * image.width + static_cast<std::size_t>(x)) * 3 + c] / 255.0;
  };
  for (std::size_t y = 0; y < resolution; ++y) {
    for (std::size_t x = 0; x < resolution; ++x) {
      const double sx = (x + off_x + 0.5) / scale - 0.5, sy = (y + off_y + 0.5) / scale - 0.5;
      const long x0 = static_cast<long>(std::floor(sx)), y0 = static_cast<long>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * px(x0, y0, c) + fx * px(x0 + 1, y0, c)) +
                         fy * ((1 - fx) * px(x0, y0 + 1, c) + fx * px(x0 + 1, y0 + 1, c));
        out[c * plane + y * resolution + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

ImageFolderDataset::ImageFolderDataset(const std::filesystem::path& dir, std::size_t resolution)
    : resolution_(resolution) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (entry.is_regular_file() && ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no PNG images in " + dir.string());
  for (const auto& f : files) images_.push_back(resize_and_crop(decode_png(read_file(f)), resolution));
}

Tensor ImageFolderDataset::batch(std::size_t first, std::size_t n) const {
  std::vector<std::vector<float>> picked;
  picked.reserve(n);
  for (std::size_t i = 0; i < n; ++i) picked.push_back(images_[(first + i) % images_.size()]);
  return stack_normalized(picked, resolution_);
}

}  // namespace sglens
