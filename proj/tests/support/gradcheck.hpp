#pragma once

// Central finite differences against the tape, in double precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sglens/layers.hpp"
#include "sglens/ops.hpp"
#include "sglens/tensor.hpp"
#include "sglens/training.hpp"

namespace sglens::testing {

using ScalarFn = std::function<Tensor64(const std::vector<Tensor64>&)>;

struct GradCheck {
  double max_rel_err = 0;
  std::string worst;  // "input i, element j"
};

// rel = |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline GradCheck gradcheck(const ScalarFn& f, std::vector<Tensor64> inputs, double h = 1e-4,
                           double floor = 1e-3) {
  for (auto& x : inputs) x.set_requires_grad(true).zero_grad();
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    backward(f(inputs));
    for (auto& x : inputs) analytic.emplace_back(x.grad().begin(), x.grad().end());
  }
  GradCheck out;
  NoGradScope no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto data = inputs[i].mutable_data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      data[j] = saved + h;
      const double up = f(inputs).item();
      data[j] = saved - h;
      const double down = f(inputs).item();
      data[j] = saved;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic[i][j];
      const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
      if (rel > out.max_rel_err) {
        out.max_rel_err = rel;
        out.worst = "input " + std::to_string(i) + ", element " + std::to_string(j);
      }
    }
  }
  return out;
}

// Uniform in [lo, hi].
inline Tensor64 uniform64(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0) {
  Rng rng(seed);
  return Tensor64::uniform(std::move(shape), rng, lo, hi);
}

// |v| in [gap, 2] with random sign, for kinks and divisors.
inline Tensor64 away_from_zero(Shape shape, std::uint64_t seed, double gap = 0.1) {
  Tensor64 t = uniform64(std::move(shape), seed, gap, 2.0);
  Rng sign(seed ^ 0x5167);
  for (auto& v : t.mutable_data())
    if (sign.uniform() < 0.5) v = -v;
  return t;
}

// Contracts an op's output with fixed random weights so every output element
// receives a distinct upstream gradient.
inline Tensor64 contract(const Tensor64& y, std::uint64_t seed) {
  const Tensor64 r = uniform64(y.shape(), seed, -1.0, 1.0);
  return sum(y * r);
}

struct GradCase {
  std::string name;
  ScalarFn f;
  std::vector<Tensor64> inputs;
};

inline std::vector<GradCase> gradient_suite() {
  std::vector<GradCase> c;
  auto unary = [&](std::string name, std::function<Tensor64(const Tensor64&)> op, Tensor64 x) {
    c.push_back({std::move(name), [op](const std::vector<Tensor64>& in) { return contract(op(in[0]), 99); },
                 {std::move(x)}});
  };
  auto binary = [&](std::string name, BinaryOp op, Tensor64 a, Tensor64 b) {
    c.push_back({std::move(name),
                 [op](const std::vector<Tensor64>& in) { return contract(elementwise(op, in[0], in[1]), 98); },
                 {std::move(a), std::move(b)}});
  };

  const Shape s{2, 3, 4};
  for (auto [label, op] : {std::pair{"add", BinaryOp::kAdd}, std::pair{"sub", BinaryOp::kSub},
                           std::pair{"mul", BinaryOp::kMul}, std::pair{"div", BinaryOp::kDiv}}) {
    const std::string n = label;
    binary(n + " same shape", op, uniform64(s, 1), away_from_zero(s, 2, 0.5));
    binary(n + " single element", op, uniform64(s, 3), away_from_zero({1}, 4, 0.5));
    binary(n + " trailing dims", op, uniform64(s, 5), away_from_zero({3, 4}, 6, 0.5));
  }
  unary("add scalar", [](const Tensor64& x) { return x + 1.5; }, uniform64(s, 7));
  unary("mul scalar", [](const Tensor64& x) { return x * -2.5; }, uniform64(s, 8));
  unary("div scalar", [](const Tensor64& x) { return x / 3.0; }, uniform64(s, 9));
  unary("neg", [](const Tensor64& x) { return neg(x); }, uniform64(s, 10));
  unary("square", [](const Tensor64& x) { return square(x); }, uniform64(s, 11));
  unary("sqrt", [](const Tensor64& x) { return sqrt(x); }, uniform64(s, 12, 0.5, 2.0));
  unary("exp", [](const Tensor64& x) { return exp(x); }, uniform64(s, 13));
  unary("log", [](const Tensor64& x) { return log(x); }, uniform64(s, 14, 0.5, 2.0));
  unary("sigmoid", [](const Tensor64& x) { return sigmoid(x); }, uniform64(s, 15, -4.0, 4.0));
  unary("log_sigmoid", [](const Tensor64& x) { return log_sigmoid(x); }, uniform64(s, 16, -4.0, 4.0));
  unary("leaky_relu", [](const Tensor64& x) { return leaky_relu(x, 0.2); }, away_from_zero(s, 17));
  c.push_back({"matmul",
               [](const std::vector<Tensor64>& in) { return contract(matmul(in[0], in[1]), 97); },
               {uniform64({3, 4}, 18), uniform64({4, 5}, 19)}});
  unary("transpose", [](const Tensor64& x) { return transpose(x); }, uniform64({3, 5}, 20));
  unary("slice_columns", [](const Tensor64& x) { return slice_columns(x, 1, 3); }, uniform64({3, 5}, 21));
  unary("reshape", [](const Tensor64& x) { return reshape(x, {4, 6}); }, uniform64(s, 22));
  c.push_back({"conv2d 3x3 pad 1 with bias",
               [](const std::vector<Tensor64>& in) { return contract(conv2d(in[0], in[1], in[2], 1, 1), 96); },
               {uniform64({2, 2, 5, 5}, 23), uniform64({3, 2, 3, 3}, 24), uniform64({3}, 25)}});
  c.push_back({"conv2d stride 2 no bias",
               [](const std::vector<Tensor64>& in) {
                 return contract(conv2d(in[0], in[1], Tensor64(), 2, 0), 95);
               },
               {uniform64({2, 2, 6, 6}, 26), uniform64({2, 2, 2, 2}, 27)}});
  c.push_back({"conv2d 1x1",
               [](const std::vector<Tensor64>& in) { return contract(conv2d(in[0], in[1], in[2], 1, 0), 94); },
               {uniform64({2, 3, 4, 4}, 28), uniform64({2, 3, 1, 1}, 29), uniform64({2}, 30)}});
  unary("upsample nearest", [](const Tensor64& x) { return upsample(x, 2, UpsampleMode::kNearest); },
        uniform64({2, 2, 3, 3}, 31));
  unary("upsample bilinear", [](const Tensor64& x) { return upsample(x, 2, UpsampleMode::kBilinear); },
        uniform64({2, 2, 3, 3}, 32));
  unary("avg_pool2", [](const Tensor64& x) { return avg_pool2(x); }, uniform64({2, 2, 4, 4}, 33));
  unary("reduce sum axis 1", [](const Tensor64& x) { return reduce(ReduceOp::kSum, x, {1}); }, uniform64(s, 34));
  unary("reduce mean axes 0,2", [](const Tensor64& x) { return reduce(ReduceOp::kMean, x, {0, 2}); },
        uniform64(s, 35));
  unary("reduce std axes 2", [](const Tensor64& x) { return reduce(ReduceOp::kStd, x, {2}); }, uniform64(s, 36));
  unary("reduce std all", [](const Tensor64& x) { return reduce(ReduceOp::kStd, x); }, uniform64(s, 37));
  c.push_back({"channel_scale",
               [](const std::vector<Tensor64>& in) { return contract(channel_scale(in[0], in[1]), 93); },
               {uniform64({2, 3, 2, 2}, 38), uniform64({2, 3}, 39)}});
  c.push_back({"adain",
               [](const std::vector<Tensor64>& in) { return contract(adain(in[0], in[1], in[2]), 92); },
               {uniform64({2, 3, 3, 3}, 40), uniform64({2, 3}, 41), uniform64({2, 3}, 42)}});
  unary("pixel_norm", [](const Tensor64& x) { return pixel_norm(x); }, uniform64({3, 6}, 43));
  unary("minibatch_stddev", [](const Tensor64& x) { return minibatch_stddev(x, 2); }, uniform64({4, 2, 3, 3}, 44));
  c.push_back({"add_scaled_noise",
               [](const std::vector<Tensor64>& in) {
                 return contract(add_scaled_noise(in[0], in[1], uniform64({2, 1, 3, 3}, 45)), 91);
               },
               {uniform64({2, 3, 3, 3}, 46), uniform64({3}, 47)}});
  c.push_back({"d_loss", [](const std::vector<Tensor64>& in) { return d_loss(in[0], in[1]); },
               {uniform64({2, 1}, 48, -4.0, 4.0), uniform64({2, 1}, 49, -4.0, 4.0)}});
  c.push_back({"g_loss minimax",
               [](const std::vector<Tensor64>& in) { return g_loss(in[0], GLossVariant::kMinimax); },
               {uniform64({2, 1}, 50, -4.0, 4.0)}});
  c.push_back({"g_loss non_saturating",
               [](const std::vector<Tensor64>& in) { return g_loss(in[0], GLossVariant::kNonSaturating); },
               {uniform64({2, 1}, 51, -4.0, 4.0)}});
  c.push_back({"composite sigmoid(leaky_relu(matmul))",
               [](const std::vector<Tensor64>& in) {
                 return sum(sigmoid(leaky_relu(matmul(in[0], in[1]), 0.2)) * 3.0);
               },
               {uniform64({3, 4}, 52), uniform64({4, 2}, 53)}});
  return c;
}

}  // namespace sglens::testing
