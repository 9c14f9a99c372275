#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sglens/checkpoint.hpp"
#include "sglens/dataset.hpp"
#include "sglens/discriminator.hpp"
#include "sglens/generator.hpp"

namespace sglens {

enum class GLossVariant { kMinimax, kNonSaturating };

// "minimax" | "non_saturating"; throws ValidationError otherwise.
GLossVariant parse_g_loss(const std::string& name);
std::string to_string(GLossVariant v);

// -mean(log sigmoid(real)) - mean(log(1 - sigmoid(fake)))
template <typename T>
BasicTensor<T> d_loss(const BasicTensor<T>& real_logits, const BasicTensor<T>& fake_logits);

// minimax: mean(log(1 - sigmoid(fake)));  non_saturating: -mean(log sigmoid(fake))
template <typename T>
BasicTensor<T> g_loss(const BasicTensor<T>& fake_logits, GLossVariant variant);

struct AdamParams {
  double lr = 2e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<NamedParam> params, AdamParams hp);

  // Applies one update from the accumulated gradients; does not clear them.
  void step();
  void zero_grad();
  std::size_t steps() const { return steps_; }
  const AdamParams& params() const { return hp_; }

  void store(Checkpoint& ckpt, const std::string& prefix) const;
  void load(const Checkpoint& ckpt, const std::string& prefix);

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  AdamParams hp_;
  std::size_t steps_ = 0;
};

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

// Uniform bins over `range`, or over [min,max] of the values when absent.
// Values outside the range are clamped into the end bins. Throws
// ValidationError on empty input or bins == 0.
Histogram histogram(std::span<const double> values, std::size_t bins,
                    std::optional<std::pair<double, double>> range = std::nullopt);

struct TrainParams {
  std::size_t max_iter = 2000;
  std::size_t batch_size = 80;
  AdamParams adam_g;
  AdamParams adam_d;
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 500;
  std::size_t histogram_every = 500;
  std::size_t histogram_bins = 20;
  std::size_t group_size = 8;
  GLossVariant loss = GLossVariant::kNonSaturating;

  // Throws ConfigError.
  void validate() const;
  static TrainParams desk();
};

struct StepMetrics {
  std::size_t iter = 0;
  double d_loss = 0;
  double g_loss = 0;
  double d_real_mean = 0;
  double d_fake_mean = 0;
  double seconds = 0;
  std::vector<double> real_probs;
  std::vector<double> fake_probs;
};

// Owns the live generator, its averaged copy, the discriminator and both
// optimizers. Each step() draws everything it needs from (seed, iteration).
class Trainer {
 public:
  Trainer(const GeneratorConfig& config, const TrainParams& params, const ImageSource& data);

  // Restores every tensor and the iteration counter. Throws ConfigError when
  // the checkpoint's architecture differs.
  void resume(const Checkpoint& ckpt);
  StepMetrics step();
  Checkpoint checkpoint();

  std::size_t iteration() const { return iteration_; }
  Generator& generator() { return g_; }
  Generator& averaged() { return g_copy_; }
  Discriminator& discriminator() { return d_; }

 private:
  GeneratorConfig config_;
  TrainParams params_;
  const ImageSource& data_;
  Generator g_;
  Generator g_copy_;
  Discriminator d_;
  Adam opt_g_;
  Adam opt_d_;
  std::size_t iteration_ = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  // When false the seconds column is written as 0, making metrics.csv a pure
  // function of the seed.
  bool record_wall_time = true;
  std::function<void(const StepMetrics&)> on_step;
};

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::filesystem::path metrics_path;
  std::vector<StepMetrics> metrics;
};

inline constexpr const char* kMetricsHeader = "iter,d_loss,g_loss,d_real_mean,d_fake_mean,seconds";

// Runs until params.max_iter iterations in total have been trained, writing
// metrics.csv, hist_{iter}.csv snapshots, checkpoint_{iter}.sgln and a final
// checkpoint.sgln under out_dir.
TrainResult train(const GeneratorConfig& config, const TrainParams& params, const ImageSource& data,
                  const TrainOptions& options);

}  // namespace sglens
