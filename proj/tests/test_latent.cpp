#include <cmath>

#include "doctest.h"
#include "sglens/error.hpp"
#include "sglens/latent_lab.hpp"

using namespace sglens;

namespace {

GeneratorConfig tiny() {
  GeneratorConfig c = GeneratorConfig::desk();
  c.latent_size = 16;
  c.n_layers = 2;
  c.blocks = 1;
  c.max_res = 8;
  c.channels = {8, 8};
  return c;
}

bool same(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

}  // namespace

TEST_CASE("latent sampling") {
  const LatentBatch a = sample_latents(32, 64, 7), b = sample_latents(32, 64, 7);
  CHECK(same(a.z(), b.z()));
  CHECK(a.z().shape() == Shape{32, 64});
  CHECK(a.seed() == 7);
  CHECK_FALSE(same(a.z(), sample_latents(32, 64, 8).z()));
  const LatentBatch big = sample_latents(512, 64, 1);
  const Tensor z = big.z();
  double mean = 0, sq = 0;
  for (float v : z.data()) {
    mean += v;
    sq += v * v;
  }
  mean /= static_cast<double>(z.numel());
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(sq / static_cast<double>(z.numel()) - 1.0) < 0.03);
  CHECK_THROWS_AS(sample_latents(0, 64, 1), ValidationError);
}

TEST_CASE("whole-vector scaling") {
  const LatentBatch a = sample_latents(4, 16, 3);
  CHECK(same(scale_latent(a, 1.0).z(), a.z()));
  const Tensor zero = scale_latent(a, 0.0).z();
  for (float v : zero.data()) CHECK(v == 0.0f);
  const Tensor twice = scale_latent(a, 2.0).z();
  const Tensor z = a.z();
  for (std::size_t i = 0; i < z.numel(); ++i) CHECK(twice[i] == 2.0f * z[i]);
  CHECK_THROWS_AS(scale_latent(a, NAN), ValidationError);
  CHECK(kDefaultScaleFactors.size() == 9);
  CHECK(latent_scale_name(0.05) == "latent_scale_0.05.png");
  CHECK(perturb_name(3, 10) == "perturb_dim3_delta10.png");
  CHECK(perturb_name(3, -2.5) == "perturb_dim3_delta-2.5.png");
}

TEST_CASE("single-dimension perturbation") {
  const LatentBatch a = sample_latents(5, 16, 4);
  const Tensor before = a.z();
  const Tensor after = perturb(a, Perturbation{{{3, 10.0}}, 1.0}).z();
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t d = 0; d < 16; ++d) {
      const std::size_t i = n * 16 + d;
      if (d == 3)
        CHECK(after[i] == doctest::Approx(before[i] + 10.0).epsilon(1e-6));
      else
        CHECK(after[i] == before[i]);
    }
}

TEST_CASE("plus then minus delta is exact") {
  const LatentBatch a = sample_latents(8, 16, 9);
  for (double delta : {0.1, 1.0 / 3.0, 7.77, 10.0}) {
    const LatentBatch up = perturb(a, Perturbation{{{2, delta}, {11, -delta}}, 1.0});
    const LatentBatch back = perturb(up, Perturbation{{{2, -delta}, {11, delta}}, 1.0});
    CHECK(same(back.z(), a.z()));
  }
}

TEST_CASE("perturbation validation") {
  const DeltaBounds bounds;
  CHECK_NOTHROW(Perturbation{{{0, 10.0}}, 1.0}.validate(16, bounds));
  CHECK_THROWS_AS(Perturbation({{{0, 10.5}}, 1.0}).validate(16, bounds), ValidationError);
  CHECK_THROWS_AS(Perturbation({{{16, 1.0}}, 1.0}).validate(16, bounds), ValidationError);
  CHECK_THROWS_AS(Perturbation({{{1, 1.0}, {1, 2.0}}, 1.0}).validate(16, bounds), ValidationError);
  CHECK_THROWS_AS(Perturbation({{{1, NAN}}, 1.0}).validate(16, bounds), ValidationError);
  CHECK_THROWS_AS(Perturbation({{}, INFINITY}).validate(16, bounds), ValidationError);
  DeltaBounds open;
  open.unbounded = true;
  CHECK_NOTHROW(Perturbation{{{0, 250.0}}, 1.0}.validate(16, open));
  CHECK(Perturbation{}.empty());
  CHECK_FALSE(Perturbation({{}, 2.0}).empty());
  const LatentBatch a = sample_latents(2, 16, 1);
  CHECK_THROWS_AS(perturb(a, Perturbation{{{0, 50.0}}, 1.0}), ValidationError);
}

TEST_CASE("w-space edit") {
  Rng rng(2);
  const Tensor w = Tensor::randn({3, 16}, rng);
  const Tensor e = perturb_w(w, Perturbation{{{5, -2.0}}, 0.5});
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t d = 0; d < 16; ++d) {
      const double want = 0.5 * w[n * 16 + d] + (d == 5 ? -2.0 : 0.0);
      CHECK(e[n * 16 + d] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("l2 distances") {
  const Tensor a = Tensor::zeros({2, 1, 2, 2});
  Tensor b = Tensor::zeros({2, 1, 2, 2});
  b.mutable_data()[4] = 3.0f;
  b.mutable_data()[5] = 4.0f;
  const auto d = l2_distances(a, b);
  REQUIRE(d.size() == 2);
  CHECK(d[0] == 0.0);
  CHECK(d[1] == doctest::Approx(5.0));
  CHECK_THROWS_AS(l2_distances(a, Tensor::zeros({2, 1, 2, 3})), ShapeError);
}

TEST_CASE("compare_pair") {
  const Generator g(tiny(), 5);
  const LatentBatch base = sample_latents(3, 16, 2);
  const ComparePair same_pair = compare_pair(g, base, Perturbation{}, 9);
  CHECK(same(same_pair.before, same_pair.after));
  for (double v : same_pair.distances) CHECK(v == 0.0);

  const ComparePair moved = compare_pair(g, base, Perturbation{{{0, 5.0}}, 1.0}, 9);
  CHECK(same(moved.before, same_pair.before));
  for (double v : moved.distances) CHECK(v > 0.0);

  CompareOptions wopts;
  wopts.w_space = true;
  const ComparePair wmoved = compare_pair(g, base, Perturbation{{{0, 5.0}}, 1.0}, 9, wopts);
  CHECK(same(wmoved.before, same_pair.before));
  CHECK_FALSE(same(wmoved.after, moved.after));
}
