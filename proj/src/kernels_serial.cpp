#include "sglens/kernels.hpp"

#include <algorithm>
#include <vector>

namespace sglens::kernels::serial {

template <typename T>
void gemm(bool transpose_a, std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
          std::span<const T> b, std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    for (std::size_t p = 0; p < k; ++p) {
      const T av = transpose_a ? a[p * m + i] : a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> image, std::span<T> col) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = image.data() + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++r) {
        T* dst = col.data() + r * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && iy < static_cast<long>(g.height) && ix >= 0 &&
                                ix < static_cast<long>(g.width);
            dst[oy * ow + ox] = inside ? plane[iy * static_cast<long>(g.width) + ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void im2row(const ConvGeometry& g, std::span<const T> image, std::span<T> row) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const std::size_t patch = g.patch_size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = image.data() + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++r) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && iy < static_cast<long>(g.height) && ix >= 0 &&
                                ix < static_cast<long>(g.width);
            row[(oy * ow + ox) * patch + r] =
                inside ? plane[iy * static_cast<long>(g.width) + ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, std::span<const T> col, std::span<T> image) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    T* plane = image.data() + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++r) {
        const T* src = col.data() + r * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
            plane[iy * static_cast<long>(g.width) + ix] += src[oy * ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  std::vector<T> col(patch * pixels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col<T>(g, x.subspan(n * g.in_sample_size(), g.in_sample_size()), col);
    std::span<T> yn = y.subspan(n * g.out_sample_size(), g.out_sample_size());
    gemm<T>(false, g.out_channels, pixels, patch, w, col, yn, false);
    if (!bias.empty()) {
      for (std::size_t o = 0; o < g.out_channels; ++o)
        for (std::size_t p = 0; p < pixels; ++p) yn[o * pixels + p] += bias[o];
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> dy,
                           std::span<T> dx) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  std::vector<T> dcol(patch * pixels);
  for (std::size_t n = 0; n < g.batch; ++n) {
    gemm<T>(true, patch, pixels, g.out_channels, w,
            dy.subspan(n * g.out_sample_size(), g.out_sample_size()), dcol, false);
    col2im_add<T>(g, dcol, dx.subspan(n * g.in_sample_size(), g.in_sample_size()));
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> dbias) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  std::vector<T> row(pixels * patch);
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2row<T>(g, x.subspan(n * g.in_sample_size(), g.in_sample_size()), row);
    std::span<const T> dyn = dy.subspan(n * g.out_sample_size(), g.out_sample_size());
    gemm<T>(false, g.out_channels, patch, pixels, dyn, row, dw, true);
    if (!dbias.empty()) {
      for (std::size_t o = 0; o < g.out_channels; ++o)
        for (std::size_t p = 0; p < pixels; ++p) dbias[o] += dyn[o * pixels + p];
    }
  }
}

#define SGLENS_INSTANTIATE(T)                                                                    \
  template void gemm<T>(bool, std::size_t, std::size_t, std::size_t, std::span<const T>,         \
                        std::span<const T>, std::span<T>, bool);                                 \
  template void im2col<T>(const ConvGeometry&, std::span<const T>, std::span<T>);                \
  template void im2row<T>(const ConvGeometry&, std::span<const T>, std::span<T>);                \
  template void col2im_add<T>(const ConvGeometry&, std::span<const T>, std::span<T>);            \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,   \
                                  std::span<const T>, std::span<T>);                             \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,                \
                                         std::span<const T>, std::span<T>);                      \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,               \
                                          std::span<const T>, std::span<T>, std::span<T>);

SGLENS_INSTANTIATE(float)
SGLENS_INSTANTIATE(double)
#undef SGLENS_INSTANTIATE

}  // namespace sglens::kernels::serial
