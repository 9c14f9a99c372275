#pragma once

// Differentiable tensor operations. All functions are defined for float and
// double tensors; every one registers its local gradient rule when traced.

#include <cstddef>
#include <vector>

#include "sglens/tensor.hpp"

namespace sglens {

enum class BinaryOp { kAdd, kSub, kMul, kDiv };
enum class ReduceOp { kSum, kMean, kStd };
enum class UpsampleMode { kNearest, kBilinear };

// `b` must have a's shape, a single element, or a's trailing dimensions.
template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> elementwise(BinaryOp op, const BasicTensor<T>& a, double b);

template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(BinaryOp::kAdd, a, b);
}
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(BinaryOp::kSub, a, b);
}
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(BinaryOp::kMul, a, b);
}
template <typename T>
BasicTensor<T> operator/(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(BinaryOp::kDiv, a, b);
}
template <typename T>
BasicTensor<T> operator+(const BasicTensor<T>& a, double b) {
  return elementwise(BinaryOp::kAdd, a, b);
}
template <typename T>
BasicTensor<T> operator-(const BasicTensor<T>& a, double b) {
  return elementwise(BinaryOp::kSub, a, b);
}
template <typename T>
BasicTensor<T> operator*(const BasicTensor<T>& a, double b) {
  return elementwise(BinaryOp::kMul, a, b);
}
template <typename T>
BasicTensor<T> operator/(const BasicTensor<T>& a, double b) {
  return elementwise(BinaryOp::kDiv, a, b);
}

template <typename T>
BasicTensor<T> neg(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sqrt(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> exp(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);
// log(sigmoid(x)) without overflow for large |x|.
template <typename T>
BasicTensor<T> log_sigmoid(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x, double slope);

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a);
// Columns [begin, begin + count) of a[m,n].
template <typename T>
BasicTensor<T> slice_columns(const BasicTensor<T>& a, std::size_t begin, std::size_t count);
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

// Cross-correlation. x[N,C,H,W], w[O,C,kh,kw], bias[O] or undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t pad);

// x[N,C,H,W] -> [N,C,2H,2W]. Bilinear sampling is half-pixel centred with
// edge clamping, which preserves the mean.
template <typename T>
BasicTensor<T> upsample(const BasicTensor<T>& x, std::size_t factor, UpsampleMode mode);

// 2x2 average pooling, x[N,C,H,W] with even H and W.
template <typename T>
BasicTensor<T> avg_pool2(const BasicTensor<T>& x);

// Reduction over `axes`, which are removed from the result. Standard
// deviation uses the population divisor n. An empty axis list reduces all.
template <typename T>
BasicTensor<T> reduce(ReduceOp op, const BasicTensor<T>& x, std::vector<std::size_t> axes = {});

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  return reduce(ReduceOp::kSum, x);
}
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  return reduce(ReduceOp::kMean, x);
}

// x[N,C,H,W] * s[N,C], broadcast over H and W.
template <typename T>
BasicTensor<T> channel_scale(const BasicTensor<T>& x, const BasicTensor<T>& s);

}  // namespace sglens
