#include "sglens/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sglens/error.hpp"
#include "sglens/image_io.hpp"

namespace sglens {

namespace {

void check_threshold(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw ValidationError("prune threshold must be finite and >= 0");
}

std::vector<NamedParam> prunable(Generator& g) {
  std::vector<NamedParam> out;
  for (auto& p : g.named_parameters())
    if (p.prunable) out.push_back(p);
  return out;
}

double population_std(std::span<const float> v) {
  double mean = 0;
  for (float x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0;
  for (float x : v) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(v.size()));
}

}  // namespace

std::size_t PruneMask::kept() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += static_cast<std::size_t>(std::count(e.keep.begin(), e.keep.end(), 1));
  return n;
}

PruneMask prune_tensor(Tensor& t, double threshold) {
  check_threshold(threshold);
  PruneMask mask;
  mask.threshold = threshold;
  PruneMask::Entry e{"", t.shape(), std::vector<std::uint8_t>(t.numel())};
  auto w = t.mutable_data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool keep = std::fabs(static_cast<double>(w[i])) >= threshold;
    e.keep[i] = keep ? 1 : 0;
    if (!keep) w[i] = 0.0f;
  }
  mask.entries.push_back(std::move(e));
  return mask;
}

std::size_t prune_tensors(std::span<Tensor> tensors, double threshold) {
  check_threshold(threshold);
  std::size_t kept = 0;
  for (auto& t : tensors) {
    prune_tensor(t, threshold);
    kept += count_nonzero(t.data());
  }
  return kept;
}

PruneMask prune_generator(Generator& g, double threshold, PruneScope scope) {
  check_threshold(threshold);
  PruneMask mask;
  mask.threshold = threshold;
  for (auto& p : prunable(g)) {
    const double t = scope == PruneScope::kGlobal ? threshold : threshold * population_std(p.tensor.data());
    auto one = prune_tensor(p.tensor, t);
    one.entries.front().key = p.key;
    mask.entries.push_back(std::move(one.entries.front()));
  }
  return mask;
}

std::size_t count_nonzero(std::span<const float> values) {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](float v) { return v != 0.0f; }));
}

std::size_t count_nonzero(Generator& g) {
  std::size_t n = 0;
  for (const auto& p : prunable(g)) n += count_nonzero(p.tensor.data());
  return n;
}

std::size_t prunable_count(Generator& g) {
  std::size_t n = 0;
  for (const auto& p : prunable(g)) n += p.tensor.numel();
  return n;
}

TensorStats tensor_stats(const std::string& key, std::span<const float> values) {
  TensorStats s;
  s.key = key;
  s.count = values.size();
  if (values.empty()) return s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  double sum = 0;
  for (float v : values) {
    s.min = std::min<double>(s.min, v);
    s.max = std::max<double>(s.max, v);
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.count);
  double var = 0;
  for (float v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(s.count));
  s.nonzero = count_nonzero(values);
  return s;
}

WeightStats weight_stats(Generator& g) {
  WeightStats out;
  std::vector<float> all;
  for (const auto& p : prunable(g)) {
    out.rows.push_back(tensor_stats(p.key, p.tensor.data()));
    all.insert(all.end(), p.tensor.data().begin(), p.tensor.data().end());
  }
  out.aggregate = tensor_stats("total", all);
  return out;
}

std::string PruneReport::csv() const {
  std::string out = "threshold,nonzero_count,mean_d_score\n";
  for (const auto& r : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.3f,%zu,%.9g\n", r.threshold, r.nonzero_count, r.mean_d_score);
    out += buf;
  }
  return out;
}

std::vector<double> threshold_grid(double start, double end, double step) {
  if (!(step > 0) || !std::isfinite(start) || !std::isfinite(end) || start < 0 || end < start)
    throw ValidationError("threshold grid needs 0 <= start <= end and step > 0");
  const auto n = static_cast<std::size_t>(std::llround((end - start) / step));
  std::vector<double> grid;
  grid.reserve(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid.push_back(start + static_cast<double>(i) * step);
  return grid;
}

std::string sweep_image_name(double threshold) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sweep_t%.3f.png", threshold);
  return buf;
}

PruneReport sweep(Generator& g, const Discriminator& d, const Tensor& fixed_latents, const SweepOptions& options,
                  const std::function<void(const PruneReportRow&)>& on_row) {
  if (!fixed_latents.defined() || fixed_latents.rank() != 2 || fixed_latents.dim(0) == 0)
    throw ValidationError("sweep needs a non-empty latent batch");
  if (options.image_every == 0) throw ValidationError("image_every must be positive");
  const auto grid = threshold_grid(options.start, options.end, options.step);
  std::optional<Generator> copy;
  if (!options.in_place) copy.emplace(g.clone());
  Generator& target = options.in_place ? g : *copy;

  NoGradScope no_grad;
  PruneReport report;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    PruneReportRow row;
    row.threshold = grid[i];
    prune_generator(target, grid[i], options.scope);
    row.nonzero_count = count_nonzero(target);
    const Tensor images = target.generate(fixed_latents, options.noise_seed, 1.0);
    const Tensor p = probability(d.get_score(images));
    double s = 0;
    for (float v : p.data()) s += v;
    row.mean_d_score = s / static_cast<double>(p.numel());
    if (options.image_dir && i % options.image_every == 0) {
      row.image = sweep_image_name(grid[i]);
      write_file_atomic(*options.image_dir / row.image, encode_png(image_grid(images)));
    }
    if (on_row) on_row(row);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace sglens
