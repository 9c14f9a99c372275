#include "sglens/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sglens/error.hpp"

namespace sglens {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items())
    if (allowed.count(key) == 0) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_size(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(where + "." + key + " must be a non-negative integer");
  out = v.get<std::size_t>();
}

void read_adam(const json& obj, const std::string& suffix, AdamParams& a, const std::string& where) {
  read(obj, ("lr_" + suffix).c_str(), a.lr, where);
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "desk") {
    c.generator = GeneratorConfig::desk();
    c.train = TrainParams::desk();
  } else if (name == "reference") {
    c.generator = GeneratorConfig::reference();
    c.train = TrainParams{};
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected desk or reference)");
  }
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(root, {"preset", "generator", "train"}, "config");
  std::string preset = "desk";
  read(root, "preset", preset, "config");
  RunConfig c = preset_config(preset);

  if (root.contains("generator")) {
    const json& g = root.at("generator");
    const std::string where = "generator";
    reject_unknown(g,
                   {"latent_size", "n_layers", "img_channels", "min_res", "blocks", "max_res", "channels",
                    "leaky_slope", "truncation_psi", "truncation_cutoff", "w_avg_decay"},
                   where);
    auto& G = c.generator;
    read_size(g, "latent_size", G.latent_size, where);
    read_size(g, "n_layers", G.n_layers, where);
    read_size(g, "img_channels", G.img_channels, where);
    read_size(g, "min_res", G.min_res, where);
    read_size(g, "blocks", G.blocks, where);
    read_size(g, "max_res", G.max_res, where);
    if (g.contains("channels")) {
      G.channels.clear();
      if (!g.at("channels").is_array()) throw ConfigError("generator.channels must be an array");
      for (const auto& v : g.at("channels")) {
        if (!v.is_number_unsigned()) throw ConfigError("generator.channels entries must be positive integers");
        G.channels.push_back(v.get<std::size_t>());
      }
    }
    read(g, "leaky_slope", G.leaky_slope, where);
    read(g, "truncation_psi", G.truncation_psi, where);
    read(g, "truncation_cutoff", G.truncation_cutoff, where);
    read(g, "w_avg_decay", G.w_avg_decay, where);
  }

  if (root.contains("train")) {
    const json& t = root.at("train");
    const std::string where = "train";
    reject_unknown(t,
                   {"max_iter", "batch_size", "lr_g", "lr_d", "beta1", "beta2", "adam_eps", "ema_decay", "seed",
                    "checkpoint_every", "histogram_every", "histogram_bins", "group_size", "g_loss"},
                   where);
    auto& T = c.train;
    read_size(t, "max_iter", T.max_iter, where);
    read_size(t, "batch_size", T.batch_size, where);
    read_adam(t, "g", T.adam_g, where);
    read_adam(t, "d", T.adam_d, where);
    for (auto* a : {&T.adam_g, &T.adam_d}) {
      read(t, "beta1", a->beta1, where);
      read(t, "beta2", a->beta2, where);
      read(t, "adam_eps", a->eps, where);
    }
    read(t, "ema_decay", T.ema_decay, where);
    read(t, "seed", T.seed, where);
    read_size(t, "checkpoint_every", T.checkpoint_every, where);
    read_size(t, "histogram_every", T.histogram_every, where);
    read_size(t, "histogram_bins", T.histogram_bins, where);
    read_size(t, "group_size", T.group_size, where);
    if (t.contains("g_loss")) {
      std::string name;
      read(t, "g_loss", name, where);
      try {
        T.loss = parse_g_loss(name);
      } catch (const ValidationError& e) {
        throw ConfigError(e.what());
      }
    }
  }
  c.generator.validate();
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string to_json(const RunConfig& c) {
  const auto& G = c.generator;
  const auto& T = c.train;
  json j;
  j["generator"] = {{"latent_size", G.latent_size},       {"n_layers", G.n_layers},
                    {"img_channels", G.img_channels},     {"min_res", G.min_res},
                    {"blocks", G.blocks},                 {"max_res", G.max_res},
                    {"channels", G.channel_widths()},     {"leaky_slope", G.leaky_slope},
                    {"truncation_psi", G.truncation_psi}, {"truncation_cutoff", G.truncation_cutoff},
                    {"w_avg_decay", G.w_avg_decay}};
  j["train"] = {{"max_iter", T.max_iter},
                {"batch_size", T.batch_size},
                {"lr_g", T.adam_g.lr},
                {"lr_d", T.adam_d.lr},
                {"beta1", T.adam_g.beta1},
                {"beta2", T.adam_g.beta2},
                {"adam_eps", T.adam_g.eps},
                {"ema_decay", T.ema_decay},
                {"seed", T.seed},
                {"checkpoint_every", T.checkpoint_every},
                {"histogram_every", T.histogram_every},
                {"histogram_bins", T.histogram_bins},
                {"group_size", T.group_size},
                {"g_loss", to_string(T.loss)}};
  return j.dump(2) + "\n";
}

}  // namespace sglens
