#include <cstring>
#include <vector>

#include "doctest.h"
#include "sglens/kernels.hpp"
#include "sglens/rng.hpp"

using namespace sglens;
using namespace sglens::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  std::vector<float> v(n);
  Rng rng(seed);
  rng.fill_normal<float>(v);
  return v;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

// direct 7-loop cross-correlation
std::vector<double> naive_conv(const ConvGeometry& g, const std::vector<float>& x, const std::vector<float>& w,
                               const std::vector<float>& b) {
  std::vector<double> y(g.batch * g.out_sample_size(), 0.0);
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < g.out_h(); ++oy)
        for (std::size_t ox = 0; ox < g.out_w(); ++ox) {
          double acc = b.empty() ? 0.0 : b[o];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky)
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(g.height) || ix >= static_cast<long>(g.width))
                  continue;
                acc += static_cast<double>(x[((n * g.in_channels + c) * g.height + iy) * g.width + ix]) *
                       w[((o * g.in_channels + c) * g.kernel_h + ky) * g.kernel_w + kx];
              }
          y[((n * g.out_channels + o) * g.out_h() + oy) * g.out_w() + ox] = acc;
        }
  return y;
}

const std::vector<ConvGeometry> kGeometries{
    {2, 3, 5, 5, 4, 3, 3, 1, 1},
    {1, 2, 8, 6, 3, 1, 1, 1, 0},
    {3, 4, 6, 6, 2, 2, 2, 2, 0},
    {2, 1, 7, 7, 5, 3, 3, 2, 1},
};

}  // namespace

TEST_CASE("gemm matches a naive triple loop") {
  const std::size_t m = 5, n = 7, k = 4;
  const auto a = noise(m * k, 1), b = noise(k * n, 2);
  std::vector<float> c(m * n);
  serial::gemm<float>(false, m, n, k, a, b, c, false);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += static_cast<double>(a[i * k + p]) * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-5));
    }

  // transpose_a reads A stored as [k x m]
  std::vector<float> at(k * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) at[p * m + i] = a[i * k + p];
  std::vector<float> ct(m * n);
  serial::gemm<float>(true, m, n, k, at, b, ct, false);
  CHECK(bit_equal(c, ct));

  std::vector<float> acc(c);
  serial::gemm<float>(false, m, n, k, a, b, acc, true);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(acc[i] == doctest::Approx(2 * c[i]));
}

TEST_CASE("parallel gemm is bit-identical to serial") {
  for (bool ta : {false, true}) {
    for (bool accumulate : {false, true}) {
      const std::size_t m = 37, n = 29, k = 53;
      const auto a = noise(m * k, 3), b = noise(k * n, 4);
      auto cs = noise(m * n, 5), cp = cs;
      serial::gemm<float>(ta, m, n, k, a, b, cs, accumulate);
      parallel::gemm<float>(ta, m, n, k, a, b, cp, accumulate);
      CHECK(bit_equal(cs, cp));
    }
  }
}

TEST_CASE("conv2d forward matches direct convolution") {
  for (const auto& g : kGeometries) {
    const auto x = noise(g.batch * g.in_sample_size(), 10), w = noise(g.out_channels * g.patch_size(), 11),
               b = noise(g.out_channels, 12);
    std::vector<float> y(g.batch * g.out_sample_size());
    serial::conv2d_forward<float>(g, x, w, b, y);
    const auto ref = naive_conv(g, x, w, b);
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-4));
  }
}

TEST_CASE("conv2d backward is the adjoint of forward") {
  // <conv(x), dy> == <x, dx(dy)> == <w, dw(dy)>
  for (const auto& g : kGeometries) {
    const auto x = noise(g.batch * g.in_sample_size(), 20), w = noise(g.out_channels * g.patch_size(), 21),
               dy = noise(g.batch * g.out_sample_size(), 22);
    std::vector<float> y(dy.size()), dx(x.size(), 0.0f), dw(w.size(), 0.0f);
    serial::conv2d_forward<float>(g, x, w, {}, y);
    serial::conv2d_backward_input<float>(g, w, dy, dx);
    serial::conv2d_backward_weight<float>(g, x, dy, dw, {});
    double lhs = 0, via_x = 0, via_w = 0;
    for (std::size_t i = 0; i < y.size(); ++i) lhs += static_cast<double>(y[i]) * dy[i];
    for (std::size_t i = 0; i < x.size(); ++i) via_x += static_cast<double>(x[i]) * dx[i];
    for (std::size_t i = 0; i < w.size(); ++i) via_w += static_cast<double>(w[i]) * dw[i];
    CHECK(via_x == doctest::Approx(lhs).epsilon(1e-4));
    CHECK(via_w == doctest::Approx(lhs).epsilon(1e-4));
  }
}

TEST_CASE("parallel conv kernels are bit-identical to serial") {
  for (const auto& g : kGeometries) {
    const auto x = noise(g.batch * g.in_sample_size(), 30), w = noise(g.out_channels * g.patch_size(), 31),
               b = noise(g.out_channels, 32), dy = noise(g.batch * g.out_sample_size(), 33);
    std::vector<float> ys(dy.size()), yp(dy.size());
    serial::conv2d_forward<float>(g, x, w, b, ys);
    parallel::conv2d_forward<float>(g, x, w, b, yp);
    CHECK(bit_equal(ys, yp));

    std::vector<float> dxs(x.size(), 0.5f), dxp(x.size(), 0.5f);
    serial::conv2d_backward_input<float>(g, w, dy, dxs);
    parallel::conv2d_backward_input<float>(g, w, dy, dxp);
    CHECK(bit_equal(dxs, dxp));

    std::vector<float> dws(w.size(), 0.0f), dwp(w.size(), 0.0f), dbs(b.size(), 0.0f), dbp(b.size(), 0.0f);
    serial::conv2d_backward_weight<float>(g, x, dy, dws, dbs);
    parallel::conv2d_backward_weight<float>(g, x, dy, dwp, dbp);
    CHECK(bit_equal(dws, dwp));
    CHECK(bit_equal(dbs, dbp));
  }
}

TEST_CASE("im2row is the transpose of im2col") {
  const ConvGeometry g{1, 2, 5, 4, 1, 3, 3, 1, 1};
  const auto x = noise(g.in_sample_size(), 40);
  std::vector<float> col(g.patch_size() * g.out_pixels()), row(col.size());
  serial::im2col<float>(g, x, col);
  serial::im2row<float>(g, x, row);
  for (std::size_t p = 0; p < g.patch_size(); ++p)
    for (std::size_t q = 0; q < g.out_pixels(); ++q) CHECK(col[p * g.out_pixels() + q] == row[q * g.patch_size() + p]);
}

TEST_CASE("parallel kernels report at least one thread") { CHECK(parallel::max_threads() >= 1); }
