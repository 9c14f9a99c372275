#include "sglens/latent_lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "sglens/error.hpp"

namespace sglens {

namespace {

void check_factor(double f) {
  if (!std::isfinite(f)) throw ValidationError("scale factor must be finite");
}

// value * scale + offset, skipping the arithmetic that would be exact anyway
// so identity edits stay bit-exact (including -0.0)
Tensor apply(const Tensor& x, double scale, const std::vector<double>& offsets) {
  if (scale == 1.0 && std::all_of(offsets.begin(), offsets.end(), [](double o) { return o == 0.0; })) return x;
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<float> out(x.data().begin(), x.data().end());
  const float s = static_cast<float>(scale);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      float& v = out[i * d + j];
      if (scale != 1.0) v *= s;
      if (offsets[j] != 0.0) v += static_cast<float>(offsets[j]);
    }
  }
  return Tensor(x.shape(), std::move(out));
}

}  // namespace

LatentBatch::LatentBatch(Tensor base, std::uint64_t seed) : base_(std::move(base)), seed_(seed) {
  if (!base_.defined() || base_.rank() != 2) throw ShapeError("latent batch must be [N, latent_size]");
  offsets_.assign(base_.dim(1), 0.0);
}

Tensor LatentBatch::z() const { return apply(base_, scale_, offsets_); }

LatentBatch LatentBatch::scaled(double factor) const {
  LatentBatch out = *this;
  out.scale_ *= factor;
  if (factor != 1.0)
    for (auto& o : out.offsets_) o *= factor;
  return out;
}

LatentBatch LatentBatch::shifted(const std::vector<std::pair<std::size_t, double>>& deltas) const {
  LatentBatch out = *this;
  for (const auto& [dim, delta] : deltas) out.offsets_.at(dim) += delta;
  return out;
}

LatentBatch sample_latents(std::size_t n, std::size_t latent_size, std::uint64_t seed) {
  if (n == 0) throw ValidationError("sample_latents needs n >= 1");
  if (latent_size == 0) throw ValidationError("latent_size must be positive");
  Rng rng(derive_seed(seed, {0x1A7E}));
  return LatentBatch(Tensor::randn({n, latent_size}, rng), seed);
}

LatentBatch scale_latent(const LatentBatch& batch, double factor) {
  check_factor(factor);
  return batch.scaled(factor);
}

void Perturbation::validate(std::size_t latent_size, const DeltaBounds& bounds) const {
  check_factor(scale);
  std::set<std::size_t> seen;
  for (const auto& [dim, delta] : deltas) {
    if (dim >= latent_size)
      throw ValidationError("dimension " + std::to_string(dim) + " is outside [0, " + std::to_string(latent_size) +
                            ")");
    if (!seen.insert(dim).second) throw ValidationError("dimension " + std::to_string(dim) + " listed twice");
    if (!std::isfinite(delta)) throw ValidationError("delta must be finite");
    if (!bounds.unbounded && (delta < bounds.min || delta > bounds.max)) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "delta %g on dimension %zu is outside [%g, %g]", delta, dim, bounds.min,
                    bounds.max);
      throw ValidationError(buf);
    }
  }
}

LatentBatch perturb(const LatentBatch& batch, const Perturbation& p, const DeltaBounds& bounds) {
  p.validate(batch.latent_size(), bounds);
  return batch.scaled(p.scale).shifted(p.deltas);
}

Tensor perturb_w(const Tensor& w, const Perturbation& p, const DeltaBounds& bounds) {
  if (w.rank() != 2) throw ShapeError("w must be [N, latent_size]");
  p.validate(w.dim(1), bounds);
  std::vector<double> offsets(w.dim(1), 0.0);
  for (const auto& [dim, delta] : p.deltas) offsets[dim] = delta;
  return apply(w, p.scale, offsets);
}

std::vector<double> l2_distances(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape() || a.rank() == 0) throw ShapeError("l2_distances needs equal shapes");
  const std::size_t n = a.dim(0), per = a.numel() / n;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < per; ++j) {
      const double d = static_cast<double>(a[i * per + j]) - b[i * per + j];
      s += d * d;
    }
    out[i] = std::sqrt(s);
  }
  return out;
}

ComparePair compare_pair(const Generator& g, const LatentBatch& base, const Perturbation& p,
                         std::uint64_t noise_seed, const CompareOptions& options) {
  if (!(options.psi >= 0.0 && options.psi <= 1.0)) throw ValidationError("truncation psi must lie in [0,1]");
  NoGradScope no_grad;
  const auto& cfg = g.config();
  const std::size_t layers = cfg.num_style_layers();
  auto render = [&](const Tensor& w) {
    return g.synthesize(truncate(WBatch::broadcast(w, layers), g.w_avg(), options.psi, cfg.truncation_cutoff),
                        noise_seed);
  };
  ComparePair out;
  if (options.w_space) {
    const Tensor w = g.map_latent(base.z());
    out.before = render(w);
    out.after = render(perturb_w(w, p, options.bounds));
  } else {
    out.before = render(g.map_latent(base.z()));
    out.after = render(g.map_latent(perturb(base, p, options.bounds).z()));
  }
  out.distances = l2_distances(out.before, out.after);
  return out;
}

std::string latent_scale_name(double factor) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "latent_scale_%g.png", factor);
  return buf;
}

std::string perturb_name(std::size_t dim, double delta) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "perturb_dim%zu_delta%g.png", dim, delta);
  return buf;
}

}  // namespace sglens
