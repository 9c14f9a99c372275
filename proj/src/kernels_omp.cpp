#include "sglens/kernels.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sglens::kernels::parallel {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void gemm(bool transpose_a, std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
          std::span<const T> b, std::span<T> c, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (long i = 0; i < rows; ++i) {
    T* crow = c.data() + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) crow[j] = T{0};
    for (std::size_t p = 0; p < k; ++p) {
      const T av = transpose_a ? a[p * m + i] : a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<T> col(patch * pixels);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      serial::im2col<T>(g, x.subspan(n * g.in_sample_size(), g.in_sample_size()), col);
      std::span<T> yn = y.subspan(n * g.out_sample_size(), g.out_sample_size());
      serial::gemm<T>(false, g.out_channels, pixels, patch, w, col, yn, false);
      if (!bias.empty()) {
        for (std::size_t o = 0; o < g.out_channels; ++o)
          for (std::size_t p = 0; p < pixels; ++p) yn[o * pixels + p] += bias[o];
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> dy,
                           std::span<T> dx) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  const long batch = static_cast<long>(g.batch);
#pragma omp parallel
  {
    std::vector<T> dcol(patch * pixels);
#pragma omp for schedule(static)
    for (long n = 0; n < batch; ++n) {
      serial::gemm<T>(true, patch, pixels, g.out_channels, w,
                      dy.subspan(n * g.out_sample_size(), g.out_sample_size()), dcol, false);
      serial::col2im_add<T>(g, dcol, dx.subspan(n * g.in_sample_size(), g.in_sample_size()));
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> dbias) {
  const std::size_t patch = g.patch_size(), pixels = g.out_pixels();
  const long batch = static_cast<long>(g.batch);
  std::vector<T> rows(g.batch * pixels * patch);
#pragma omp parallel for schedule(static)
  for (long n = 0; n < batch; ++n) {
    serial::im2row<T>(g, x.subspan(n * g.in_sample_size(), g.in_sample_size()),
                      std::span<T>(rows).subspan(n * pixels * patch, pixels * patch));
  }
  // Split over output channels; each channel accumulates samples in order.
  const long channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (long o = 0; o < channels; ++o) {
    T* dwrow = dw.data() + o * patch;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* dyrow = dy.data() + n * g.out_sample_size() + o * pixels;
      const T* row = rows.data() + n * pixels * patch;
      for (std::size_t p = 0; p < pixels; ++p) {
        const T av = dyrow[p];
        const T* src = row + p * patch;
        for (std::size_t j = 0; j < patch; ++j) dwrow[j] += av * src[j];
      }
      if (!dbias.empty())
        for (std::size_t p = 0; p < pixels; ++p) dbias[o] += dyrow[p];
    }
  }
}

#define SGLENS_INSTANTIATE(T)                                                                    \
  template void gemm<T>(bool, std::size_t, std::size_t, std::size_t, std::span<const T>,         \
                        std::span<const T>, std::span<T>, bool);                                 \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,   \
                                  std::span<const T>, std::span<T>);                             \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,                \
                                         std::span<const T>, std::span<T>);                      \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,               \
                                          std::span<const T>, std::span<T>, std::span<T>);

SGLENS_INSTANTIATE(float)
SGLENS_INSTANTIATE(double)
#undef SGLENS_INSTANTIATE

}  // namespace sglens::kernels::parallel
