#include <cmath>

#include "doctest.h"
#include "sglens/error.hpp"
#include "support/gradcheck.hpp"

using namespace sglens;
using namespace sglens::testing;

TEST_CASE("every differentiable op matches central differences") {
  for (auto& c : gradient_suite()) {
    CAPTURE(c.name);
    const auto r = gradcheck(c.f, c.inputs);
    CAPTURE(r.worst);
    CHECK(r.max_rel_err <= 1e-4);
  }
}

TEST_CASE("elementwise shape rules") {
  const Tensor a = Tensor::ones({2, 3});
  CHECK_THROWS_AS(a + Tensor::ones({2}), ShapeError);
  CHECK_THROWS_AS(a + Tensor::ones({3, 2}), ShapeError);
  CHECK((a + Tensor::ones({3})).shape() == Shape{2, 3});
  CHECK((a * Tensor::full({1}, 4.0f))[5] == 4.0f);
}

TEST_CASE("matmul and conv shape errors") {
  CHECK_THROWS_AS(matmul(Tensor::ones({2, 3}), Tensor::ones({2, 3})), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor::ones({1, 2, 4, 4}), Tensor::ones({1, 3, 3, 3}), Tensor(), 1, 1), ShapeError);
  CHECK_THROWS_AS(slice_columns(Tensor::ones({2, 3}), 2, 2), ShapeError);
}

TEST_CASE("leaky relu slope bounds") {
  CHECK_THROWS_AS(leaky_relu(Tensor::ones({2}), 0.0), ValidationError);
  CHECK_THROWS_AS(leaky_relu(Tensor::ones({2}), 1.0), ValidationError);
  const Tensor y = leaky_relu(Tensor(Shape{2}, std::vector<float>{-1.0f, 2.0f}), 0.2);
  CHECK(y[0] == doctest::Approx(-0.2));
  CHECK(y[1] == 2.0f);
}

TEST_CASE("upsampling") {
  CHECK_THROWS_AS(upsample(Tensor::ones({1, 1, 2, 2}), 3, UpsampleMode::kNearest), ShapeError);
  const Tensor x(Shape{1, 1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor n = upsample(x, 2, UpsampleMode::kNearest);
  CHECK(n.shape() == Shape{1, 1, 4, 4});
  CHECK(n[0] == 1.0f);
  CHECK(n[1] == 1.0f);
  CHECK(n[15] == 4.0f);
  const Tensor b = upsample(x, 2, UpsampleMode::kBilinear);
  // half-pixel centres: first output sample sits a quarter pixel inside the edge
  CHECK(b[0] == doctest::Approx(1.0));
  CHECK(b[1] == doctest::Approx(1.25));
  CHECK(mean(b).item() == doctest::Approx(mean(x).item()));
}

TEST_CASE("average pooling") {
  const Tensor x(Shape{1, 1, 2, 4}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor y = avg_pool2(x);
  CHECK(y.shape() == Shape{1, 1, 1, 2});
  CHECK(y[0] == 3.5f);
  CHECK(y[1] == 5.5f);
  CHECK_THROWS_AS(avg_pool2(Tensor::ones({1, 1, 3, 3})), ShapeError);
}

TEST_CASE("population std and its zero-variance gradient") {
  const Tensor64 x(Shape{4}, std::vector<double>{1, 2, 3, 4});
  CHECK(reduce(ReduceOp::kStd, x).item() == doctest::Approx(std::sqrt(1.25)));
  Tensor64 c = Tensor64::full({5}, 3.0);
  c.set_requires_grad(true);
  Tape tape;
  Tape::Scope scope(tape);
  const Tensor64 s = reduce(ReduceOp::kStd, c);
  CHECK(s.item() == 0.0);
  backward(s);
  for (double g : c.grad()) CHECK(g == 0.0);
}

TEST_CASE("log_sigmoid is finite at extreme logits") {
  const Tensor x(Shape{2}, std::vector<float>{-1000.0f, 1000.0f});
  const Tensor y = log_sigmoid(x);
  CHECK(y[0] == doctest::Approx(-1000.0));
  CHECK(y[1] == 0.0f);
}

TEST_CASE("reduce over axes keeps the others") {
  const Tensor64 x = uniform64({2, 3, 4}, 1);
  const Tensor64 r = reduce(ReduceOp::kSum, x, {0, 2});
  CHECK(r.shape() == Shape{3});
  double expect = 0;
  for (std::size_t a = 0; a < 2; ++a)
    for (std::size_t c = 0; c < 4; ++c) expect += x[a * 12 + 1 * 4 + c];
  CHECK(r[1] == doctest::Approx(expect));
}
