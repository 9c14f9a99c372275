#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "sglens/error.hpp"
#include "sglens/pruning.hpp"
#include "support/temp_dir.hpp"

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

Tensor latents(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor::randn({n, d}, rng);
}

bool same(const Tensor& a, const Tensor& b) {
  return std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

}  // namespace

TEST_CASE("prune_tensor hand example") {
  Tensor t(Shape{3}, std::vector<float>{0.2f, -0.5f, 0.05f});
  const PruneMask m = prune_tensor(t, 0.1);
  CHECK(t[0] == 0.2f);
  CHECK(t[1] == -0.5f);
  CHECK(t[2] == 0.0f);
  CHECK(m.kept() == 2);
  CHECK(m.entries.front().keep == std::vector<std::uint8_t>{1, 1, 0});
}

TEST_CASE("threshold edge is kept") {
  Tensor t(Shape{2}, std::vector<float>{0.5f, -0.5f});
  prune_tensor(t, 0.5);
  CHECK(count_nonzero(t.data()) == 2);
}

TEST_CASE("invalid thresholds") {
  Tensor t = Tensor::ones({4});
  CHECK_THROWS_AS(prune_tensor(t, -0.1), ValidationError);
  CHECK_THROWS_AS(prune_tensor(t, std::nan("")), ValidationError);
  CHECK_THROWS_AS(prune_tensor(t, INFINITY), ValidationError);
}

TEST_CASE("pruning is idempotent and monotone") {
  Rng rng(11);
  const Tensor base = Tensor::randn({4096}, rng);
  std::size_t previous = base.numel();
  for (double t : {0.0, 0.1, 0.3, 0.7, 1.5, 3.0}) {
    Tensor once = base.clone();
    prune_tensor(once, t);
    Tensor twice = once.clone();
    prune_tensor(twice, t);
    CHECK(same(once, twice));
    const std::size_t kept = count_nonzero(once.data());
    CHECK(kept <= previous);
    previous = kept;
  }
  Tensor all = base.clone();
  prune_tensor(all, 1e9);
  CHECK(count_nonzero(all.data()) == 0);
}

TEST_CASE("gaussian weights follow the tail law") {
  Rng rng(2024);
  const Tensor base = Tensor::randn({400000}, rng);
  for (double t : {0.25, 0.5, 1.0}) {
    Tensor w = base.clone();
    prune_tensor(w, t);
    const double frac = static_cast<double>(count_nonzero(w.data())) / static_cast<double>(w.numel());
    CAPTURE(t);
    CHECK(std::fabs(frac - std::erfc(t / std::sqrt(2.0))) < 0.005);
  }
}

TEST_CASE("prune_tensors counts across tensors") {
  std::vector<Tensor> ts{Tensor(Shape{2}, std::vector<float>{1.0f, 0.01f}),
                         Tensor(Shape{3}, std::vector<float>{-2.0f, 0.0f, 0.5f})};
  CHECK(prune_tensors(ts, 0.4) == 3);
}

TEST_CASE("generator pruning touches only weight_orig tensors") {
  Generator g(tiny(), 3);
  const std::size_t total = prunable_count(g);
  CHECK(count_nonzero(g) == total);
  std::vector<std::vector<float>> before;
  for (auto& p : g.named_parameters())
    if (!p.prunable) before.emplace_back(p.tensor.data().begin(), p.tensor.data().end());

  const PruneMask m = prune_generator(g, 0.8);
  CHECK(m.kept() == count_nonzero(g));
  CHECK(count_nonzero(g) < total);
  std::size_t i = 0;
  for (auto& p : g.named_parameters())
    if (!p.prunable) CHECK(std::vector<float>(p.tensor.data().begin(), p.tensor.data().end()) == before[i++]);
}

TEST_CASE("per-layer scope scales by tensor spread") {
  Generator g(tiny(), 3);
  Generator h = g.clone();
  prune_generator(g, 0.5, PruneScope::kPerLayer);
  std::size_t kept = 0;
  for (auto& p : h.named_parameters()) {
    if (!p.prunable) continue;
    const TensorStats s = tensor_stats(p.key, p.tensor.data());
    kept += prune_tensor(p.tensor, 0.5 * s.std).kept();
  }
  CHECK(count_nonzero(g) == kept);
}

TEST_CASE("weight statistics") {
  const std::vector<float> v{1.0f, -1.0f, 0.0f, 2.0f};
  const TensorStats s = tensor_stats("x", v);
  CHECK(s.min == -1.0);
  CHECK(s.max == 2.0);
  CHECK(s.mean == doctest::Approx(0.5));
  CHECK(s.std == doctest::Approx(std::sqrt(1.25)));
  CHECK(s.nonzero == 3);
  Generator g(tiny(), 1);
  const WeightStats ws = weight_stats(g);
  std::size_t sum = 0;
  for (const auto& r : ws.rows) sum += r.count;
  CHECK(ws.aggregate.key == "total");
  CHECK(ws.aggregate.count == sum);
  CHECK(sum == prunable_count(g));
}

TEST_CASE("threshold grid") {
  const auto grid = threshold_grid(0.0, 1.0, 0.001);
  REQUIRE(grid.size() == 1001);
  CHECK(grid.front() == 0.0);
  CHECK(grid[250] == doctest::Approx(0.25));
  CHECK(grid.back() == doctest::Approx(1.0));
  CHECK(threshold_grid(0.5, 0.5, 0.1).size() == 1);
  CHECK(sweep_image_name(0.25) == "sweep_t0.250.png");
}

TEST_CASE("sweep report") {
  Generator g(tiny(), 4);
  Discriminator d(tiny(), 4, 5);
  const Tensor z = latents(4, 16, 6);
  const sglens::testing::TempDir tmp;
  SweepOptions opts;
  opts.end = 2.0;
  opts.step = 0.25;
  opts.image_every = 4;
  opts.image_dir = tmp.path();
  std::size_t seen = 0;
  const PruneReport report = sweep(g, d, z, opts, [&](const PruneReportRow&) { ++seen; });
  REQUIRE(report.rows.size() == 9);
  CHECK(seen == 9);
  CHECK(report.rows.front().nonzero_count == prunable_count(g));
  for (std::size_t i = 1; i < report.rows.size(); ++i)
    CHECK(report.rows[i].nonzero_count <= report.rows[i - 1].nonzero_count);
  CHECK(count_nonzero(g) == prunable_count(g));

  NoGradScope ng;
  const Tensor probs = probability(d.get_score(g.generate(z, opts.noise_seed, 1.0)));
  double mean = 0;
  for (float v : probs.data()) mean += v;
  CHECK(report.rows.front().mean_d_score == doctest::Approx(mean / 4).epsilon(1e-6));

  CHECK(report.rows[0].image == "sweep_t0.000.png");
  CHECK(report.rows[1].image.empty());
  CHECK(report.rows[4].image == "sweep_t1.000.png");
  CHECK(std::filesystem::exists(tmp.path() / "sweep_t2.000.png"));
  const std::string csv = report.csv();
  CHECK(csv.rfind("threshold,nonzero_count,mean_d_score\n0.000,", 0) == 0);
}

TEST_CASE("in-place sweep leaves the model pruned") {
  Generator g(tiny(), 4);
  Discriminator d(tiny(), 4, 5);
  SweepOptions opts;
  opts.start = 0.5;
  opts.end = 0.5;
  opts.in_place = true;
  const auto report = sweep(g, d, latents(4, 16, 6), opts);
  CHECK(count_nonzero(g) == report.rows.back().nonzero_count);
  CHECK(count_nonzero(g) < prunable_count(g));
}
