#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sglens/discriminator.hpp"
#include "sglens/generator.hpp"

namespace sglens {

enum class PruneScope {
  kGlobal,    // one threshold for every prunable tensor
  kPerLayer,  // threshold * std(tensor) per tensor
};

struct PruneMask {
  double threshold = 0;
  struct Entry {
    std::string key;
    Shape shape;
    std::vector<std::uint8_t> keep;  // 1 where |w| >= threshold
  };
  std::vector<Entry> entries;

  std::size_t kept() const;
};

// Zeroes entries with |w| < threshold and returns the mask that was applied.
// Throws ValidationError for a negative or non-finite threshold.
PruneMask prune_tensor(Tensor& t, double threshold);
// Kept (nonzero after pruning) count over all tensors.
std::size_t prune_tensors(std::span<Tensor> tensors, double threshold);

// Prunes every "weight_orig" tensor of `g` in place. Biases, noise strengths,
// the constant input and w_avg are left alone.
PruneMask prune_generator(Generator& g, double threshold, PruneScope scope = PruneScope::kGlobal);

std::size_t count_nonzero(std::span<const float> values);
// Over the prunable tensors only.
std::size_t count_nonzero(Generator& g);
std::size_t prunable_count(Generator& g);

struct TensorStats {
  std::string key;
  double min = 0;
  double max = 0;
  double mean = 0;
  double std = 0;  // population
  std::size_t count = 0;
  std::size_t nonzero = 0;
};
TensorStats tensor_stats(const std::string& key, std::span<const float> values);

struct WeightStats {
  std::vector<TensorStats> rows;
  TensorStats aggregate;  // key "total"
};
// Per prunable tensor, plus an aggregate over all of them.
WeightStats weight_stats(Generator& g);

struct SweepOptions {
  double start = 0.0;
  double end = 1.0;
  double step = 0.001;
  std::size_t image_every = 20;
  std::uint64_t noise_seed = 0;
  PruneScope scope = PruneScope::kGlobal;
  // Prune `g` itself instead of a private copy.
  bool in_place = false;
  // Image grids are written here when set.
  std::optional<std::filesystem::path> image_dir;
};

struct PruneReportRow {
  double threshold = 0;
  std::size_t nonzero_count = 0;
  double mean_d_score = 0;
  std::string image;  // grid file name, empty when none was emitted
};

struct PruneReport {
  std::vector<PruneReportRow> rows;
  std::string csv() const;  // header threshold,nonzero_count,mean_d_score
};

// Threshold i * step for i = 0 .. round((end - start) / step), offset by start.
std::vector<double> threshold_grid(double start, double end, double step);

// `sweep_t0.250.png` for 0.25
std::string sweep_image_name(double threshold);

// Cumulative pruning over the grid. For each threshold: prune, count, generate
// from the fixed latents, record the mean discriminator probability.
PruneReport sweep(Generator& g, const Discriminator& d, const Tensor& fixed_latents, const SweepOptions& options,
                  const std::function<void(const PruneReportRow&)>& on_row = {});

}  // namespace sglens
