#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sglens/checkpoint.hpp"
#include "sglens/config.hpp"
#include "sglens/dataset.hpp"
#include "sglens/error.hpp"
#include "sglens/image_io.hpp"
#include "sglens/latent_lab.hpp"
#include "sglens/pruning.hpp"
#include "sglens/service.hpp"
#include "sglens/training.hpp"

namespace sglens {

namespace {

namespace fs = std::filesystem;

struct ModelArgs {
  std::string config;
  std::string checkpoint;
  std::uint64_t init_seed = 0;
};

struct LoadedModel {
  Generator generator;
  std::optional<Discriminator> discriminator;
};

std::string default_out() {
  const char* home = std::getenv("STYLEGAN_LENS_HOME");
  return home != nullptr && *home != '\0' ? home : ".";
}

void add_model_flags(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--config", m.config, "run configuration (JSON)");
  cmd->add_option("--checkpoint", m.checkpoint, "model checkpoint (.sgln)");
  cmd->add_option("--init-seed", m.init_seed, "initialisation seed when no checkpoint is given");
}

RunConfig run_config(const ModelArgs& m) {
  return m.config.empty() ? preset_config("desk") : load_run_config(m.config);
}

LoadedModel load_model(const ModelArgs& m, std::ostream& err) {
  if (m.checkpoint.empty()) {
    const RunConfig rc = run_config(m);
    err << "no --checkpoint given; using a freshly initialised model (init seed " << m.init_seed << ")\n";
    return {Generator(rc.generator, m.init_seed), Discriminator(rc.generator, rc.train.group_size, m.init_seed)};
  }
  const Checkpoint ckpt = load_checkpoint(m.checkpoint);
  LoadedModel out{generator_from_checkpoint(ckpt), discriminator_from_checkpoint(ckpt)};
  if (!m.config.empty()) {
    const auto want = load_run_config(m.config).generator;
    const auto& have = out.generator.config();
    if (want.latent_size != have.latent_size || want.blocks != have.blocks || want.max_res != have.max_res ||
        want.channel_widths() != have.channel_widths() || want.n_layers != have.n_layers)
      throw ConfigError("checkpoint " + m.checkpoint + " does not match config " + m.config);
  }
  return out;
}

void write_png(const fs::path& path, const Rgb8Image& image) { write_file_atomic(path, encode_png(image)); }

Tensor sample(const Tensor& batch, std::size_t i) {
  const std::size_t per = batch.numel() / batch.dim(0);
  std::vector<float> v(batch.data().begin() + i * per, batch.data().begin() + (i + 1) * per);
  return Tensor(Shape{batch.dim(1), batch.dim(2), batch.dim(3)}, std::move(v));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"sglens: style-based generator toolkit"};
  app.require_subcommand(1);
  std::string out_dir = default_out();

  // train
  auto* train_cmd = app.add_subcommand("train", "adversarial training on synthetic faces or a PNG folder");
  ModelArgs train_model;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> max_iter, batch_size;
  std::string dataset_dir, resume, g_loss_name;
  bool no_wall_time = false;
  train_cmd->add_option("--config", train_model.config, "run configuration (JSON)");
  train_cmd->add_option("--checkpoint,--resume", resume, "training checkpoint to resume from");
  train_cmd->add_option("--seed", train_seed, "training seed (overrides the config)");
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--max-iter", max_iter, "total iterations");
  train_cmd->add_option("--batch-size", batch_size, "batch size");
  train_cmd->add_option("--g-loss", g_loss_name, "minimax or non_saturating");
  train_cmd->add_option("--dataset", dataset_dir, "directory of PNG images (default: synthetic faces)");
  train_cmd->add_flag("--no-wall-time", no_wall_time, "write 0 in the seconds column");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "sample images");
  ModelArgs gen_model;
  std::uint64_t gen_seed = 0;
  std::size_t gen_count = 32;
  std::optional<double> gen_psi;
  add_model_flags(gen_cmd, gen_model);
  gen_cmd->add_option("--seed", gen_seed, "latent and noise seed");
  gen_cmd->add_option("--count", gen_count, "number of images")->check(CLI::Range(1, 4096));
  gen_cmd->add_option("--psi", gen_psi, "truncation psi in [0,1]");
  gen_cmd->add_option("--out", out_dir, "output directory");

  // prune-sweep
  auto* sweep_cmd = app.add_subcommand("prune-sweep", "magnitude-pruning threshold sweep");
  ModelArgs sweep_model;
  SweepOptions sweep_opts;
  std::uint64_t sweep_seed = 0;
  std::size_t sweep_count = 32;
  bool per_layer = false;
  add_model_flags(sweep_cmd, sweep_model);
  sweep_cmd->add_option("--seed", sweep_seed, "seed of the fixed latents and noise");
  sweep_cmd->add_option("--count", sweep_count, "fixed latents")->check(CLI::Range(1, 4096));
  sweep_cmd->add_option("--start", sweep_opts.start, "first threshold");
  sweep_cmd->add_option("--end", sweep_opts.end, "last threshold");
  sweep_cmd->add_option("--step", sweep_opts.step, "threshold step");
  sweep_cmd->add_option("--image-every", sweep_opts.image_every, "image grid every k thresholds");
  sweep_cmd->add_flag("--per-layer", per_layer, "threshold scaled by each tensor's std");
  sweep_cmd->add_flag("--in-place", sweep_opts.in_place, "prune the loaded model and save it as pruned.sgln");
  sweep_cmd->add_option("--out", out_dir, "output directory");

  // latent-scale
  auto* scale_cmd = app.add_subcommand("latent-scale", "whole-vector latent scaling grids");
  ModelArgs scale_model;
  std::uint64_t scale_seed = 0;
  std::size_t scale_count = 32;
  std::vector<double> factors = kDefaultScaleFactors;
  add_model_flags(scale_cmd, scale_model);
  scale_cmd->add_option("--seed", scale_seed, "latent and noise seed");
  scale_cmd->add_option("--count", scale_count, "latents")->check(CLI::Range(1, 4096));
  scale_cmd->add_option("--factors", factors, "comma-separated factors")->delimiter(',');
  scale_cmd->add_option("--out", out_dir, "output directory");

  // latent-perturb
  auto* pert_cmd = app.add_subcommand("latent-perturb", "per-dimension latent deltas, before/after grids");
  ModelArgs pert_model;
  std::uint64_t pert_seed = 0;
  std::size_t pert_count = 32;
  std::vector<std::size_t> dims;
  std::vector<double> deltas;
  double pert_scale = 1.0;
  bool unbounded = false, w_space = false;
  std::optional<double> pert_psi;
  add_model_flags(pert_cmd, pert_model);
  pert_cmd->add_option("--seed", pert_seed, "latent and noise seed");
  pert_cmd->add_option("--count", pert_count, "latents")->check(CLI::Range(1, 4096));
  pert_cmd->add_option("--dim", dims, "dimension (repeatable, comma-separated)")->delimiter(',');
  pert_cmd->add_option("--delta", deltas, "delta per --dim (repeatable, comma-separated)")->delimiter(',');
  pert_cmd->add_option("--scale", pert_scale, "global scale factor");
  pert_cmd->add_option("--psi", pert_psi, "truncation psi in [0,1]");
  pert_cmd->add_flag("--unbounded", unbounded, "allow deltas outside [-10, 10]");
  pert_cmd->add_flag("--w-space", w_space, "apply the edit after the mapping network");
  pert_cmd->add_option("--out", out_dir, "output directory");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "checkpoint key table and weight statistics");
  ModelArgs stats_model;
  add_model_flags(stats_cmd, stats_model);

  // remap-keys
  auto* remap_cmd = app.add_subcommand("remap-keys", "rewrite checkpoint key suffixes");
  std::string remap_in, remap_out;
  std::vector<std::string> rule_text{"weight_orig=weight"};
  bool inverse = false;
  remap_cmd->add_option("--checkpoint", remap_in, "input checkpoint")->required();
  remap_cmd->add_option("--out", remap_out, "output checkpoint file")->required();
  remap_cmd->add_option("--rule", rule_text, "suffix rule from=to (repeatable)");
  remap_cmd->add_flag("--inverse", inverse, "apply the rules backwards");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API for the interactive UI");
  ModelArgs serve_model;
  std::string host = "127.0.0.1", ui_dir;
  int port = 8080;
  bool allow_in_place = false;
  add_model_flags(serve_cmd, serve_model);
  serve_cmd->add_option("--host", host, "bind address");
  serve_cmd->add_option("--port", port, "port (0 picks a free one)");
  serve_cmd->add_option("--ui", ui_dir, "directory of static UI files");
  serve_cmd->add_flag("--allow-in-place-prune", allow_in_place, "let /api/prune modify the served model");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const fs::path dir(out_dir);

    if (train_cmd->parsed()) {
      RunConfig rc = run_config(train_model);
      if (train_seed) rc.train.seed = *train_seed;
      if (max_iter) rc.train.max_iter = *max_iter;
      if (batch_size) rc.train.batch_size = *batch_size;
      if (!g_loss_name.empty()) rc.train.loss = parse_g_loss(g_loss_name);
      rc.train.validate();
      std::unique_ptr<ImageSource> data;
      if (dataset_dir.empty())
        data = std::make_unique<SyntheticFaceDataset>(rc.generator.max_res, derive_seed(rc.train.seed, {0xDA7A}));
      else
        data = std::make_unique<ImageFolderDataset>(dataset_dir, rc.generator.max_res);
      TrainOptions opts;
      opts.out_dir = dir;
      if (!resume.empty()) opts.resume_from = resume;
      opts.record_wall_time = !no_wall_time;
      const auto result = train(rc.generator, rc.train, *data, opts);
      if (!result.metrics.empty()) {
        const auto& last = result.metrics.back();
        out << "iterations " << last.iter + 1 << "  d_loss " << last.d_loss << "  g_loss " << last.g_loss
            << "  D(x) " << last.d_real_mean << "  D(G(z)) " << last.d_fake_mean << "\n";
      }
      out << "metrics    " << result.metrics_path.string() << "\n"
          << "checkpoint " << result.checkpoint_path.string() << "\n";
      return kExitOk;
    }

    if (gen_cmd->parsed()) {
      LoadedModel m = load_model(gen_model, err);
      const double psi = gen_psi.value_or(m.generator.config().truncation_psi);
      NoGradScope no_grad;
      const auto batch = sample_latents(gen_count, m.generator.config().latent_size, gen_seed);
      const Tensor images = m.generator.generate(batch.z(), gen_seed, psi);
      const std::string stem = "generate_seed" + std::to_string(gen_seed);
      for (std::size_t i = 0; i < gen_count; ++i) {
        char name[96];
        std::snprintf(name, sizeof name, "%s_%03zu.png", stem.c_str(), i);
        write_file_atomic(dir / name, encode_png(sample(images, i)));
      }
      write_png(dir / (stem + "_grid.png"), image_grid(images));
      out << "wrote " << gen_count << " images and " << (dir / (stem + "_grid.png")).string() << "\n";
      return kExitOk;
    }

    if (sweep_cmd->parsed()) {
      LoadedModel m = load_model(sweep_model, err);
      if (!m.discriminator) {
        err << "checkpoint has no discriminator; scoring with a fresh one (init seed " << sweep_model.init_seed
            << ")\n";
        m.discriminator.emplace(m.generator.config(), 8, sweep_model.init_seed);
      }
      sweep_opts.noise_seed = sweep_seed;
      sweep_opts.scope = per_layer ? PruneScope::kPerLayer : PruneScope::kGlobal;
      sweep_opts.image_dir = dir;
      fs::create_directories(dir);
      const auto latents = sample_latents(sweep_count, m.generator.config().latent_size, sweep_seed);
      const PruneReport report = sweep(m.generator, *m.discriminator, latents.z(), sweep_opts);
      write_text_atomic(dir / "prune_report.csv", report.csv());
      if (sweep_opts.in_place) {
        Checkpoint ckpt;
        store_config(ckpt, m.generator.config());
        store_generator(ckpt, m.generator);
        save_checkpoint(ckpt, dir / "pruned.sgln");
      }
      const auto& first = report.rows.front();
      const auto& last = report.rows.back();
      out << report.rows.size() << " thresholds; nonzero " << first.nonzero_count << " -> " << last.nonzero_count
          << "; mean D score " << first.mean_d_score << " -> " << last.mean_d_score << "\n"
          << "report " << (dir / "prune_report.csv").string() << "\n";
      return kExitOk;
    }

    if (scale_cmd->parsed()) {
      LoadedModel m = load_model(scale_model, err);
      NoGradScope no_grad;
      const auto batch = sample_latents(scale_count, m.generator.config().latent_size, scale_seed);
      for (double f : factors) {
        const Tensor images = m.generator.generate(scale_latent(batch, f).z(), scale_seed, 1.0);
        const fs::path path = dir / latent_scale_name(f);
        write_png(path, image_grid(images));
        out << fmt("%-6g ", f) << path.string() << "\n";
      }
      return kExitOk;
    }

    if (pert_cmd->parsed()) {
      if (dims.size() != deltas.size()) {
        err << "error: --dim and --delta must be given the same number of times\n";
        return kExitUsage;
      }
      LoadedModel m = load_model(pert_model, err);
      Perturbation p;
      p.scale = pert_scale;
      for (std::size_t i = 0; i < dims.size(); ++i) p.deltas.emplace_back(dims[i], deltas[i]);
      CompareOptions opts;
      opts.w_space = w_space;
      opts.bounds.unbounded = unbounded;
      opts.psi = pert_psi.value_or(m.generator.config().truncation_psi);
      const auto batch = sample_latents(pert_count, m.generator.config().latent_size, pert_seed);
      const ComparePair pair = compare_pair(m.generator, batch, p, pert_seed, opts);
      std::string stem = "perturb";
      for (const auto& [d, delta] : p.deltas) stem += "_dim" + std::to_string(d) + "_delta" + fmt("%g", delta);
      const std::string after_name = p.deltas.size() == 1 ? perturb_name(p.deltas[0].first, p.deltas[0].second)
                                                          : stem + ".png";
      write_png(dir / "perturb_original.png", image_grid(pair.before));
      write_png(dir / after_name, image_grid(pair.after));
      std::string csv = "image,l2_distance\n";
      for (std::size_t i = 0; i < pair.distances.size(); ++i)
        csv += std::to_string(i) + "," + fmt("%.9g", pair.distances[i]) + "\n";
      write_text_atomic(dir / "perturb_distances.csv", csv);
      double total = 0;
      for (double d : pair.distances) total += d;
      out << "original " << (dir / "perturb_original.png").string() << "\nmodified "
          << (dir / after_name).string() << "\nmean L2 distance "
          << total / static_cast<double>(pair.distances.size()) << "\n";
      return kExitOk;
    }

    if (stats_cmd->parsed()) {
      Checkpoint ckpt;
      if (stats_model.checkpoint.empty()) {
        LoadedModel m = load_model(stats_model, err);
        store_generator(ckpt, m.generator);
      } else {
        ckpt = load_checkpoint(stats_model.checkpoint);
      }
      const KeyTable table = list_keys(ckpt);
      out << "key,shape,count\n";
      for (const auto& r : table.rows) out << r.key << "," << shape_str(r.shape) << "," << r.count << "\n";
      out << "total,," << table.total << "\nprunable_total,," << table.prunable_total << "\n\n";

      Generator g = stats_model.checkpoint.empty() ? Generator(run_config(stats_model).generator, stats_model.init_seed)
                                                   : generator_from_checkpoint(ckpt);
      const WeightStats ws = weight_stats(g);
      out << "tensor,min,max,mean,std,count,nonzero\n";
      auto row = [&](const TensorStats& s) {
        out << s.key << "," << fmt("%.6g", s.min) << "," << fmt("%.6g", s.max) << "," << fmt("%.6g", s.mean) << ","
            << fmt("%.6g", s.std) << "," << s.count << "," << s.nonzero << "\n";
      };
      for (const auto& s : ws.rows) row(s);
      row(ws.aggregate);
      return kExitOk;
    }

    if (remap_cmd->parsed()) {
      std::vector<SuffixRule> rules;
      for (const auto& text : rule_text) {
        const auto eq = text.find('=');
        if (eq == std::string::npos || eq == 0) {
          err << "error: --rule expects from=to, got '" << text << "'\n";
          return kExitUsage;
        }
        rules.push_back({text.substr(0, eq), text.substr(eq + 1)});
      }
      if (inverse) rules = invert_rules(rules);
      const Checkpoint remapped = remap_keys(load_checkpoint(remap_in), rules);
      save_checkpoint(remapped, remap_out);
      out << "wrote " << remapped.size() << " entries to " << remap_out << "\n";
      return kExitOk;
    }

    if (serve_cmd->parsed()) {
      LoadedModel m = load_model(serve_model, err);
      ServiceOptions opts;
      opts.allow_in_place_prune = allow_in_place;
      if (!ui_dir.empty()) opts.static_dir = ui_dir;
      ModelService service(std::move(m.generator), std::move(m.discriminator), opts);
      HttpServer server(service);
      const int bound = server.bind(host, port);
      out << "listening on http://" << host << ":" << bound << std::endl;
      server.listen();
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == CheckpointError::Code::kKeyCollision ? kExitMismatch : kExitIo;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace sglens
