#pragma once

// Dense compute kernels. Each kernel exists twice: a straightforward serial
// reference under `serial::` and an OpenMP version under `parallel::`. Both
// accumulate every output element in the same order, so their results are
// bit-identical; tests/test_kernels.cpp holds them to that.

#include <cstddef>
#include <span>

namespace sglens::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_h() const { return (height + 2 * pad - kernel_h) / stride + 1; }
  std::size_t out_w() const { return (width + 2 * pad - kernel_w) / stride + 1; }
  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
  std::size_t out_pixels() const { return out_h() * out_w(); }
  std::size_t in_sample_size() const { return in_channels * height * width; }
  std::size_t out_sample_size() const { return out_channels * out_pixels(); }
};

// C[m x n] (+)= op(A) * B, row-major. op(A) is A[m x k] or, with
// transpose_a, the transpose of a stored A[k x m].
template <typename T>
using GemmFn = void (*)(bool transpose_a, std::size_t m, std::size_t n, std::size_t k,
                        std::span<const T> a, std::span<const T> b, std::span<T> c,
                        bool accumulate);

namespace serial {

template <typename T>
void gemm(bool transpose_a, std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
          std::span<const T> b, std::span<T> c, bool accumulate);

// One sample: col[patch_size x out_pixels].
template <typename T>
void im2col(const ConvGeometry& g, std::span<const T> image, std::span<T> col);

// Transposed patch matrix: row[out_pixels x patch_size].
template <typename T>
void im2row(const ConvGeometry& g, std::span<const T> image, std::span<T> row);

// Scatter-add of a patch matrix back into one sample's image.
template <typename T>
void col2im_add(const ConvGeometry& g, std::span<const T> col, std::span<T> image);

// y[N,O,oh,ow] = x (*) w + bias. bias may be empty.
template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y);

// dx += conv-transpose(dy, w).
template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> dy,
                           std::span<T> dx);

// dw += dy (*) x, dbias += sum(dy). dbias may be empty.
template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> dbias);

}  // namespace serial

namespace parallel {

template <typename T>
void gemm(bool transpose_a, std::size_t m, std::size_t n, std::size_t k, std::span<const T> a,
          std::span<const T> b, std::span<T> c, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> bias, std::span<T> y);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> dy,
                           std::span<T> dx);

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> dy,
                            std::span<T> dw, std::span<T> dbias);

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace parallel

}  // namespace sglens::kernels
