#include "sglens/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sglens/error.hpp"
#include "sglens/image_io.hpp"

namespace sglens {

GLossVariant parse_g_loss(const std::string& name) {
  if (name == "minimax") return GLossVariant::kMinimax;
  if (name == "non_saturating") return GLossVariant::kNonSaturating;
  throw ValidationError("unknown generator loss variant '" + name + "'");
}

std::string to_string(GLossVariant v) { return v == GLossVariant::kMinimax ? "minimax" : "non_saturating"; }

template <typename T>
BasicTensor<T> d_loss(const BasicTensor<T>& real_logits, const BasicTensor<T>& fake_logits) {
  // log(1 - sigmoid(x)) == log_sigmoid(-x)
  return neg(mean(log_sigmoid(real_logits))) - mean(log_sigmoid(neg(fake_logits)));
}

template <typename T>
BasicTensor<T> g_loss(const BasicTensor<T>& fake_logits, GLossVariant variant) {
  switch (variant) {
    case GLossVariant::kMinimax:
      return mean(log_sigmoid(neg(fake_logits)));
    case GLossVariant::kNonSaturating:
      return neg(mean(log_sigmoid(fake_logits)));
  }
  throw ValidationError("unknown generator loss variant");
}

template Tensor d_loss(const Tensor&, const Tensor&);
template Tensor64 d_loss(const Tensor64&, const Tensor64&);
template Tensor g_loss(const Tensor&, GLossVariant);
template Tensor64 g_loss(const Tensor64&, GLossVariant);

Adam::Adam(std::vector<NamedParam> params, AdamParams hp) : params_(std::move(params)), hp_(hp) {
  if (!(hp.lr > 0) || !(hp.beta1 >= 0 && hp.beta1 < 1) || !(hp.beta2 >= 0 && hp.beta2 < 1) || !(hp.eps > 0))
    throw ConfigError("invalid Adam hyperparameters");
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0f);
    v_.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(hp_.beta1, t), c2 = 1.0 - std::pow(hp_.beta2, t);
  const float b1 = static_cast<float>(hp_.beta1), b2 = static_cast<float>(hp_.beta2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor p = params_[i].tensor;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const double mhat = m[j] / c1, vhat = v[j] / c2;
      w[j] -= static_cast<float>(hp_.lr * mhat / (std::sqrt(vhat) + hp_.eps));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::store(Checkpoint& ckpt, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ckpt.add(prefix + params_[i].key + ".m", Tensor(params_[i].tensor.shape(), m_[i]));
    ckpt.add(prefix + params_[i].key + ".v", Tensor(params_[i].tensor.shape(), v_[i]));
  }
  ckpt.add(prefix + "steps", Tensor64::scalar(static_cast<double>(steps_)));
}

void Adam::load(const Checkpoint& ckpt, const std::string& prefix) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Tensor m = ckpt.tensor(prefix + params_[i].key + ".m");
    const Tensor v = ckpt.tensor(prefix + params_[i].key + ".v");
    if (m.shape() != params_[i].tensor.shape() || v.shape() != params_[i].tensor.shape())
      throw ConfigError("optimizer state for " + params_[i].key + " has the wrong shape");
    m_[i].assign(m.data().begin(), m.data().end());
    v_[i].assign(v.data().begin(), v.data().end());
  }
  const auto* e = ckpt.find(prefix + "steps");
  if (e == nullptr || e->count() != 1) throw ConfigError("checkpoint lacks " + prefix + "steps");
  steps_ = static_cast<std::size_t>(e->dtype == DType::kF64 ? e->f64[0] : e->f32[0]);
}

Histogram histogram(std::span<const double> values, std::size_t bins,
                    std::optional<std::pair<double, double>> range) {
  if (values.empty()) throw ValidationError("histogram of an empty sequence");
  if (bins == 0) throw ValidationError("histogram needs at least one bin");
  double lo, hi;
  if (range) {
    std::tie(lo, hi) = *range;
  } else {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  if (!(hi >= lo)) throw ValidationError("histogram range is empty");
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / bins);
  const double width = hi - lo;
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0) {
      const double pos = (v - lo) / width * static_cast<double>(bins);
      b = pos <= 0 ? 0 : std::min(bins - 1, static_cast<std::size_t>(pos));
    }
    ++h.counts[b];
  }
  return h;
}

void TrainParams::validate() const {
  if (max_iter == 0 || batch_size == 0 || checkpoint_every == 0 || histogram_every == 0 ||
      histogram_bins == 0 || group_size == 0)
    throw ConfigError("training counts must be positive");
  if (!(ema_decay >= 0 && ema_decay <= 1)) throw ConfigError("ema decay must lie in [0,1]");
  for (const auto* a : {&adam_g, &adam_d})
    if (!(a->lr > 0) || !(a->beta1 >= 0 && a->beta1 < 1) || !(a->beta2 >= 0 && a->beta2 < 1) || !(a->eps > 0))
      throw ConfigError("invalid Adam hyperparameters");
}

TrainParams TrainParams::desk() {
  TrainParams p;
  p.batch_size = 16;
  return p;
}

namespace {

void require_finite(double v, const char* what, std::size_t iter) {
  if (!std::isfinite(v))
    throw TrainingError(std::string(what) + " became non-finite at iteration " + std::to_string(iter));
}

std::vector<double> probabilities(const Tensor& logits) {
  const Tensor p = probability(logits);
  return {p.data().begin(), p.data().end()};
}

double average(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void require_same_config(const GeneratorConfig& a, const GeneratorConfig& b) {
  if (a.latent_size != b.latent_size || a.n_layers != b.n_layers || a.img_channels != b.img_channels ||
      a.min_res != b.min_res || a.blocks != b.blocks || a.max_res != b.max_res ||
      a.channel_widths() != b.channel_widths())
    throw ConfigError("checkpoint architecture does not match the training configuration");
}

std::string format_row(const StepMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.6f\n", m.iter, m.d_loss, m.g_loss, m.d_real_mean,
                m.d_fake_mean, m.seconds);
  return buf;
}

}  // namespace

Trainer::Trainer(const GeneratorConfig& config, const TrainParams& params, const ImageSource& data)
    : config_(config),
      params_(params),
      data_(data),
      g_(config, derive_seed(params.seed, {0x6E})),
      g_copy_(g_.clone()),
      d_(config, params.group_size, derive_seed(params.seed, {0xD1})),
      opt_g_(g_.named_parameters(), params.adam_g),
      opt_d_(d_.named_parameters(), params.adam_d) {
  params.validate();
  if (data.resolution() != config.max_res)
    throw ConfigError("dataset resolution " + std::to_string(data.resolution()) + " differs from max_res " +
                      std::to_string(config.max_res));
}

void Trainer::resume(const Checkpoint& ckpt) {
  require_same_config(config_, config_from_checkpoint(ckpt));
  load_generator(ckpt, g_, "G.");
  load_generator(ckpt, g_copy_, "G_copy.");
  load_discriminator(ckpt, d_, "D.");
  opt_g_.load(ckpt, "opt.G.");
  opt_d_.load(ckpt, "opt.D.");
  const auto* e = ckpt.find("train.iteration");
  if (e == nullptr || e->count() != 1) throw ConfigError("checkpoint lacks train.iteration");
  iteration_ = static_cast<std::size_t>(e->dtype == DType::kF64 ? e->f64[0] : e->f32[0]);
}

StepMetrics Trainer::step() {
  const std::size_t it = iteration_;
  const std::size_t n = params_.batch_size;
  const std::size_t latent = config_.latent_size;
  StepMetrics m;
  m.iter = it;

  const Tensor real = data_.batch(it * n, n);

  // discriminator step on a detached fake batch
  {
    Rng rng(derive_seed(params_.seed, {it, 0}));
    const Tensor z = Tensor::randn({n, latent}, rng);
    Tensor fake;
    {
      NoGradScope no_grad;
      fake = g_.synthesize(g_.map_to_styles(z), derive_seed(params_.seed, {it, 1}));
    }
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor real_logits = d_.get_score(real);
    const Tensor fake_logits = d_.get_score(fake);
    const Tensor loss = d_loss(real_logits, fake_logits);
    m.d_loss = loss.item();
    require_finite(m.d_loss, "discriminator loss", it);
    opt_d_.zero_grad();
    backward(loss);
    opt_d_.step();
    opt_d_.zero_grad();
    m.real_probs = probabilities(real_logits.detach());
    m.fake_probs = probabilities(fake_logits.detach());
  }

  // generator step through the updated discriminator
  Tensor w_seen;
  {
    Rng rng(derive_seed(params_.seed, {it, 2}));
    const Tensor z = Tensor::randn({n, latent}, rng);
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor w = g_.map_latent(z);
    const Tensor fake =
        g_.synthesize(WBatch::broadcast(w, config_.num_style_layers()), derive_seed(params_.seed, {it, 3}));
    const Tensor loss = g_loss(d_.get_score(fake), params_.loss);
    m.g_loss = loss.item();
    require_finite(m.g_loss, "generator loss", it);
    opt_g_.zero_grad();
    backward(loss);
    opt_g_.step();
    opt_g_.zero_grad();
    opt_d_.zero_grad();
    w_seen = w.detach();
  }

  g_.update_w_avg(w_seen);
  ema_update(g_copy_, g_, params_.ema_decay);
  m.d_real_mean = average(m.real_probs);
  m.d_fake_mean = average(m.fake_probs);
  ++iteration_;
  return m;
}

Checkpoint Trainer::checkpoint() {
  Checkpoint ckpt;
  store_config(ckpt, config_);
  ckpt.add(kGroupSizeKey, Tensor64::scalar(static_cast<double>(params_.group_size)));
  ckpt.add("train.iteration", Tensor64::scalar(static_cast<double>(iteration_)));
  store_generator(ckpt, g_, "G.");
  store_generator(ckpt, g_copy_, "G_copy.");
  store_discriminator(ckpt, d_, "D.");
  opt_g_.store(ckpt, "opt.G.");
  opt_d_.store(ckpt, "opt.D.");
  return ckpt;
}

TrainResult train(const GeneratorConfig& config, const TrainParams& params, const ImageSource& data,
                  const TrainOptions& options) {
  config.validate();
  params.validate();
  Trainer trainer(config, params, data);
  if (options.resume_from) trainer.resume(load_checkpoint(*options.resume_from));

  const auto& dir = options.out_dir;
  std::filesystem::create_directories(dir);
  TrainResult result;
  result.metrics_path = dir / "metrics.csv";
  result.checkpoint_path = dir / "checkpoint.sgln";

  // a resumed run appends to the existing log
  const bool append = options.resume_from && std::filesystem::exists(result.metrics_path);
  std::ofstream csv(result.metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!csv) throw IoError("cannot write " + result.metrics_path.string());
  if (!append) csv << kMetricsHeader << '\n';

  using Clock = std::chrono::steady_clock;
  while (trainer.iteration() < params.max_iter) {
    const auto start = Clock::now();
    StepMetrics m = trainer.step();
    m.seconds = options.record_wall_time ? std::chrono::duration<double>(Clock::now() - start).count() : 0.0;
    csv << format_row(m);
    const std::size_t done = trainer.iteration();
    if (done % params.histogram_every == 0 || done == params.max_iter) {
      const Histogram hr = histogram(m.real_probs, params.histogram_bins, std::pair{0.0, 1.0});
      const Histogram hf = histogram(m.fake_probs, params.histogram_bins, std::pair{0.0, 1.0});
      std::string text = "edge_lo,edge_hi,d_real_count,d_fake_count\n";
      for (std::size_t b = 0; b < hr.counts.size(); ++b) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%.6g,%.6g,%zu,%zu\n", hr.edges[b], hr.edges[b + 1], hr.counts[b],
                      hf.counts[b]);
        text += buf;
      }
      write_text_atomic(dir / ("hist_" + std::to_string(done) + ".csv"), text);
    }
    if (done % params.checkpoint_every == 0 && done != params.max_iter)
      save_checkpoint(trainer.checkpoint(), dir / ("checkpoint_" + std::to_string(done) + ".sgln"));
    if (options.on_step) options.on_step(m);
    m.real_probs.clear();
    m.fake_probs.clear();
    result.metrics.push_back(std::move(m));
  }
  csv.close();
  if (!csv) throw IoError("failed writing " + result.metrics_path.string());
  save_checkpoint(trainer.checkpoint(), result.checkpoint_path);
  return result;
}

}  // namespace sglens
