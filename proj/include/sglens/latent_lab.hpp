#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sglens/generator.hpp"

namespace sglens {

// A batch of latents kept as (base draw, scale, per-dimension offsets) so that
// edits compose without re-rounding the base: z = scale * base + offset.
class LatentBatch {
 public:
  LatentBatch() = default;
  LatentBatch(Tensor base, std::uint64_t seed);

  std::size_t size() const { return base_.dim(0); }
  std::size_t latent_size() const { return base_.dim(1); }
  std::uint64_t seed() const { return seed_; }
  double scale() const { return scale_; }
  const std::vector<double>& offsets() const { return offsets_; }

  // Materialized [N, latent_size].
  Tensor z() const;

  LatentBatch scaled(double factor) const;
  LatentBatch shifted(const std::vector<std::pair<std::size_t, double>>& deltas) const;

 private:
  Tensor base_;
  std::uint64_t seed_ = 0;
  double scale_ = 1.0;
  std::vector<double> offsets_;
};

// z ~ N(0, I) from the seeded stream. Throws ValidationError for n == 0.
LatentBatch sample_latents(std::size_t n, std::size_t latent_size, std::uint64_t seed);

// z' = factor * z. Throws ValidationError for non-finite factors.
LatentBatch scale_latent(const LatentBatch& batch, double factor);

struct DeltaBounds {
  double min = -10.0;
  double max = 10.0;
  bool unbounded = false;
};

struct Perturbation {
  std::vector<std::pair<std::size_t, double>> deltas;  // (dimension, delta)
  double scale = 1.0;

  bool empty() const { return deltas.empty() && scale == 1.0; }
  // Throws ValidationError on out-of-range or repeated dimensions, non-finite
  // values, or deltas outside the bounds.
  void validate(std::size_t latent_size, const DeltaBounds& bounds = {}) const;
};

// z'[., d] = scale * z[., d] + delta_d for listed d; other dims scaled only.
LatentBatch perturb(const LatentBatch& batch, const Perturbation& p, const DeltaBounds& bounds = {});
// Same edit applied to w[N, latent_size].
Tensor perturb_w(const Tensor& w, const Perturbation& p, const DeltaBounds& bounds = {});

struct ComparePair {
  Tensor before;
  Tensor after;
  std::vector<double> distances;  // per-image L2 over normalized pixels
};

struct CompareOptions {
  double psi = 1.0;
  // Apply the edit to w after mapping rather than to z.
  bool w_space = false;
  DeltaBounds bounds;
};

// Both batches share `noise_seed`, so only the latent edit changes pixels.
ComparePair compare_pair(const Generator& g, const LatentBatch& base, const Perturbation& p,
                         std::uint64_t noise_seed, const CompareOptions& options = {});

std::vector<double> l2_distances(const Tensor& a, const Tensor& b);

// File names for latent study grids: latent_scale_0.05.png, perturb_dim3_delta10.png
std::string latent_scale_name(double factor);
std::string perturb_name(std::size_t dim, double delta);

// The nine whole-vector scaling factors of the latent study.
inline const std::vector<double> kDefaultScaleFactors{0.05, 0.10, 0.25, 0.5, 1.0, 1.5, 2.5, 5.0, 10.0};

}  // namespace sglens
