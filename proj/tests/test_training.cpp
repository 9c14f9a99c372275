#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sglens/error.hpp"
#include "sglens/training.hpp"
#include "support/gradcheck.hpp"
#include "support/temp_dir.hpp"

using namespace sglens;

namespace {

GeneratorConfig small() {
  GeneratorConfig c = GeneratorConfig::desk();
  c.latent_size = 16;
  c.n_layers = 2;
  c.blocks = 1;
  c.max_res = 8;
  c.channels = {8, 8};
  return c;
}

TrainParams quick(std::size_t iters) {
  TrainParams p = TrainParams::desk();
  p.max_iter = iters;
  p.batch_size = 4;
  p.group_size = 4;
  p.checkpoint_every = 2;
  p.histogram_every = 2;
  p.seed = 5;
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("normalization constants") {
  const Tensor mean_img = [] {
    std::vector<float> v(3 * 4);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 4; ++i) v[c * 4 + i] = static_cast<float>(kImageMean[c]);
    return Tensor(Shape{3, 2, 2}, v);
  }();
  const Tensor centred = normalize_image(mean_img);
  for (float v : centred.data()) CHECK(std::fabs(v) < 1e-6);

  Tensor px = Tensor::zeros({3, 1, 1});
  px.mutable_data()[0] = 0.714f;
  CHECK(normalize_image(px)[0] == doctest::Approx(1.0).epsilon(1e-6));

  Rng rng(1);
  const Tensor x = Tensor::uniform({2, 3, 4, 4}, rng, 0.0, 1.0);
  const Tensor back = denormalize_image(normalize_image(x));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::fabs(back[i] - x[i]) <= 1e-6);
  CHECK_THROWS_AS(normalize_image(Tensor::ones({4, 2, 2})), ShapeError);
  CHECK(denormalize_image(Tensor::full({3, 1, 1}, 100.0f))[0] == 1.0f);
}

TEST_CASE("adversarial losses") {
  const Tensor zero = Tensor::zeros({4, 1});
  CHECK(d_loss(zero, zero).item() == doctest::Approx(2 * std::log(2.0)));
  CHECK(g_loss(zero, GLossVariant::kMinimax).item() == doctest::Approx(std::log(0.5)));
  CHECK(g_loss(zero, GLossVariant::kNonSaturating).item() == doctest::Approx(std::log(2.0)));
  const double perfect = d_loss(Tensor::full({4, 1}, 40.0f), Tensor::full({4, 1}, -40.0f)).item();
  CHECK(perfect >= 0.0);
  CHECK(perfect < 1e-10);
  const double saturated = g_loss(Tensor::full({4, 1}, 40.0f), GLossVariant::kNonSaturating).item();
  CHECK(saturated >= 0.0);
  CHECK(saturated < 1e-10);
  CHECK_THROWS_AS(parse_g_loss("wasserstein"), ValidationError);
}

TEST_CASE("both generator losses push fake logits upward") {
  for (auto v : {GLossVariant::kMinimax, GLossVariant::kNonSaturating}) {
    Tensor64 logits = testing::uniform64({6, 1}, 2, -3.0, 3.0);
    logits.set_requires_grad(true);
    Tape tape;
    Tape::Scope scope(tape);
    backward(g_loss(logits, v));
    for (double g : logits.grad()) CHECK(g < 0.0);
  }
}

TEST_CASE("loss gradients match finite differences") {
  for (auto& c : testing::gradient_suite()) {
    if (c.name.find("loss") == std::string::npos) continue;
    CAPTURE(c.name);
    CHECK(testing::gradcheck(c.f, c.inputs).max_rel_err <= 1e-4);
  }
}

TEST_CASE("histogram") {
  const std::vector<double> one{0.3, 0.3, 0.3};
  const Histogram h1 = histogram(one, 1);
  CHECK(h1.counts == std::vector<std::size_t>{3});
  const std::vector<double> two{0.1, 0.9};
  CHECK(histogram(two, 2, std::pair{0.0, 1.0}).counts == std::vector<std::size_t>{1, 1});
  Rng rng(3);
  std::vector<double> many(1000);
  for (auto& v : many) v = rng.normal();
  const Histogram h = histogram(many, 20);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(total == many.size());
  CHECK(h.edges.size() == 21);
  CHECK_THROWS_AS(histogram(std::vector<double>{}, 3), ValidationError);
  CHECK_THROWS_AS(histogram(two, 0), ValidationError);
}

TEST_CASE("first Adam step ignores gradient scale") {
  auto first_step = [](double k) {
    Tensor w = Tensor::zeros({5});
    w.set_requires_grad(true);
    auto g = w.mutable_grad();
    const float raw[] = {0.3f, -1.2f, 1e-3f, 4.0f, -0.05f};
    for (std::size_t i = 0; i < 5; ++i) g[i] = static_cast<float>(raw[i] * k);
    Adam opt({{"w", w, false}}, AdamParams{});
    opt.step();
    return std::vector<double>(w.data().begin(), w.data().end());
  };
  const auto a = first_step(1.0), b = first_step(1000.0);
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  CHECK(std::fabs(dot / std::sqrt(na * nb) - 1.0) <= 1e-6);
}

TEST_CASE("train params validation") {
  TrainParams p = TrainParams::desk();
  CHECK(p.batch_size == 16);
  CHECK(TrainParams{}.batch_size == 80);
  p.max_iter = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("synthetic dataset") {
  SyntheticFaceDataset data(16, 4);
  const auto a = data.image(7), b = data.image(7), c = data.image(8);
  CHECK(a == b);
  CHECK(a != c);
  for (float v : a) CHECK((v >= 0.0f && v <= 1.0f));
  const Tensor batch = data.batch(3, 5);
  CHECK(batch.shape() == Shape{5, 3, 16, 16});
}

TEST_CASE("training is deterministic and resumable") {
  const sglens::testing::TempDir tmp;
  SyntheticFaceDataset data(8, 1);
  TrainOptions opts;
  opts.record_wall_time = false;

  opts.out_dir = tmp.path() / "a";
  const auto run_a = train(small(), quick(4), data, opts);
  opts.out_dir = tmp.path() / "b";
  train(small(), quick(4), data, opts);
  const std::string csv = slurp(run_a.metrics_path);
  CHECK(csv == slurp(tmp.path() / "b" / "metrics.csv"));
  CHECK(csv.rfind(kMetricsHeader, 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(std::filesystem::exists(tmp.path() / "a" / "hist_2.csv"));
  CHECK(std::filesystem::exists(tmp.path() / "a" / "checkpoint_2.sgln"));

  SUBCASE("resume with no further iterations keeps every tensor") {
    opts.out_dir = tmp.path() / "c";
    opts.resume_from = run_a.checkpoint_path;
    const auto again = train(small(), quick(4), data, opts);
    CHECK(again.metrics.empty());
    CHECK(load_checkpoint(again.checkpoint_path) == load_checkpoint(run_a.checkpoint_path));
  }
  SUBCASE("resume continues where the checkpoint stopped") {
    opts.out_dir = tmp.path() / "d";
    opts.resume_from = tmp.path() / "a" / "checkpoint_2.sgln";
    const auto resumed = train(small(), quick(4), data, opts);
    REQUIRE(resumed.metrics.size() == 2);
    CHECK(resumed.metrics.front().iter == 2);
    CHECK(load_checkpoint(resumed.checkpoint_path) == load_checkpoint(run_a.checkpoint_path));
  }
  SUBCASE("resume into a different architecture") {
    GeneratorConfig other = small();
    other.channels = {8, 4};
    opts.out_dir = tmp.path() / "e";
    opts.resume_from = run_a.checkpoint_path;
    CHECK_THROWS_AS(train(other, quick(4), data, opts), ConfigError);
  }
}

TEST_CASE("trainer rejects a dataset of the wrong resolution") {
  SyntheticFaceDataset data(16, 1);
  CHECK_THROWS_AS(Trainer(small(), quick(1), data), ConfigError);
}
