#include "sglens/service.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "httplib.h"
#include "json.hpp"
#include "sglens/error.hpp"
#include "sglens/image_io.hpp"
#include "sglens/pruning.hpp"

namespace sglens {

namespace {

using nlohmann::json;

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

ApiResponse json_response(int status, const json& j) { return {status, j.dump(), "application/json"}; }

ApiResponse error_response(int status, const std::string& message) {
  return json_response(status, json{{"error", message}});
}

json parse_body(const std::string& body, const std::set<std::string>& allowed) {
  json j;
  try {
    j = body.empty() ? json::object() : json::parse(body);
  } catch (const json::parse_error&) {
    throw BadRequest("request body is not valid JSON");
  }
  if (!j.is_object()) throw BadRequest("request body must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (allowed.count(key) == 0) throw BadRequest("unknown field '" + key + "'");
  return j;
}

std::uint64_t get_u64(const json& j, const char* key, std::optional<std::uint64_t> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw BadRequest(std::string("missing field '") + key + "'");
  }
  if (!j.at(key).is_number_unsigned()) throw BadRequest(std::string("'") + key + "' must be a non-negative integer");
  return j.at(key).get<std::uint64_t>();
}

double get_number(const json& j, const char* key, std::optional<double> fallback = std::nullopt) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw BadRequest(std::string("missing field '") + key + "'");
  }
  if (!j.at(key).is_number()) throw BadRequest(std::string("'") + key + "' must be a number");
  const double v = j.at(key).get<double>();
  if (!std::isfinite(v)) throw BadRequest(std::string("'") + key + "' must be finite");
  return v;
}

bool get_bool(const json& j, const char* key) {
  if (!j.contains(key)) return false;
  if (!j.at(key).is_boolean()) throw BadRequest(std::string("'") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

std::size_t get_count(const json& j, std::size_t fallback, std::size_t max) {
  const std::uint64_t n = get_u64(j, "count", fallback);
  if (n < 1 || n > max) throw BadRequest("'count' must lie in [1, " + std::to_string(max) + "]");
  return static_cast<std::size_t>(n);
}

double get_psi(const json& j, double fallback) {
  const double psi = get_number(j, "truncation_psi", fallback);
  if (psi < 0.0 || psi > 1.0) throw BadRequest("'truncation_psi' must lie in [0, 1]");
  return psi;
}

json encode_batch(const Tensor& images) {
  json out = json::array();
  const std::size_t n = images.dim(0), per = images.numel() / n;
  Shape one{images.dim(1), images.dim(2), images.dim(3)};
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(images.data().begin() + i * per, images.data().begin() + (i + 1) * per);
    out.push_back(base64_encode(encode_png(Tensor(one, std::move(v)))));
  }
  return out;
}

std::string error_id() {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint64_t salt = std::random_device{}();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(mix_seed(salt + counter.fetch_add(1))));
  return buf;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  return httplib::detail::base64_encode(std::string(bytes.begin(), bytes.end()));
}

ModelService::ModelService(Generator generator, std::optional<Discriminator> discriminator, ServiceOptions options)
    : generator_(std::move(generator)), discriminator_(std::move(discriminator)), options_(std::move(options)) {
  if (options_.max_count == 0) throw ConfigError("max_count must be positive");
}

template <typename Fn>
ApiResponse ModelService::guarded(const char* endpoint, Fn fn) {
  try {
    return fn();
  } catch (const BadRequest& e) {
    return error_response(400, e.what());
  } catch (const ValidationError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    const std::string id = error_id();
    std::fprintf(stderr, "[%s] %s failed: %s\n", id.c_str(), endpoint, e.what());
    return json_response(500, json{{"error", "internal error"}, {"id", id}});
  }
}

ApiResponse ModelService::info() {
  return guarded("info", [&] {
    std::shared_lock lock(model_mutex_);
    const auto& c = generator_.config();
    return json_response(200, json{{"latent_size", c.latent_size},
                                   {"blocks", c.blocks},
                                   {"max_res", c.max_res},
                                   {"nonzero_weights", count_nonzero(generator_)},
                                   {"total_weights", prunable_count(generator_)}});
  });
}

ApiResponse ModelService::generate(const std::string& body) {
  return guarded("generate", [&] {
    const json j = parse_body(body, {"seed", "count", "truncation_psi"});
    const std::uint64_t seed = get_u64(j, "seed");
    const std::size_t count = get_count(j, 32, options_.max_count);
    std::shared_lock lock(model_mutex_);
    const double psi = get_psi(j, generator_.config().truncation_psi);
    NoGradScope no_grad;
    const auto batch = sample_latents(count, generator_.config().latent_size, seed);
    const Tensor images = generator_.generate(batch.z(), seed, psi);
    return json_response(200, json{{"seed", seed}, {"count", count}, {"images", encode_batch(images)}});
  });
}

ApiResponse ModelService::perturb(const std::string& body) {
  return guarded("perturb", [&] {
    const json j =
        parse_body(body, {"seed", "count", "scale", "deltas", "w_space", "truncation_psi", "unbounded"});
    const std::uint64_t seed = get_u64(j, "seed");
    const std::size_t count = get_count(j, 32, options_.max_count);
    Perturbation p;
    p.scale = get_number(j, "scale", 1.0);
    if (j.contains("deltas")) {
      if (!j.at("deltas").is_array()) throw BadRequest("'deltas' must be an array");
      for (const auto& d : j.at("deltas")) {
        if (!d.is_object()) throw BadRequest("each delta must be an object {dim, delta}");
        p.deltas.emplace_back(static_cast<std::size_t>(get_u64(d, "dim")), get_number(d, "delta"));
      }
    }
    CompareOptions opts;
    opts.w_space = get_bool(j, "w_space");
    opts.bounds = options_.bounds;
    opts.bounds.unbounded = get_bool(j, "unbounded");
    std::shared_lock lock(model_mutex_);
    opts.psi = get_psi(j, generator_.config().truncation_psi);
    p.validate(generator_.config().latent_size, opts.bounds);
    const auto batch = sample_latents(count, generator_.config().latent_size, seed);
    const ComparePair pair = compare_pair(generator_, batch, p, seed, opts);
    return json_response(200, json{{"original", encode_batch(pair.before)},
                                   {"modified", encode_batch(pair.after)},
                                   {"distances", pair.distances}});
  });
}

ApiResponse ModelService::prune(const std::string& body) {
  return guarded("prune", [&]() -> ApiResponse {
    const json j = parse_body(body, {"threshold", "in_place", "seed", "count"});
    const double threshold = get_number(j, "threshold");
    if (threshold < 0) throw BadRequest("'threshold' must be >= 0");
    const bool in_place = get_bool(j, "in_place");
    const std::uint64_t seed = get_u64(j, "seed", 0);
    const std::size_t count = get_count(j, 32, options_.max_count);

    auto report = [&](Generator& g) {
      NoGradScope no_grad;
      const auto batch = sample_latents(count, g.config().latent_size, seed);
      const Tensor images = g.generate(batch.z(), seed, 1.0);
      json score = nullptr;
      if (discriminator_) {
        const Tensor p = probability(discriminator_->get_score(images));
        double s = 0;
        for (float v : p.data()) s += v;
        score = s / static_cast<double>(p.numel());
      }
      return json{{"threshold", threshold},         {"in_place", in_place},
                  {"nonzero_weights", count_nonzero(g)}, {"total_weights", prunable_count(g)},
                  {"mean_d_score", score},          {"images", encode_batch(images)}};
    };

    if (!in_place) {
      Generator copy = [&] {
        std::shared_lock lock(model_mutex_);
        return generator_.clone();
      }();
      prune_generator(copy, threshold);
      return json_response(200, report(copy));
    }
    if (!options_.allow_in_place_prune)
      return error_response(400, "in-place pruning is disabled; restart the server with --allow-in-place-prune");
    std::unique_lock mutation(mutation_mutex_, std::try_to_lock);
    if (!mutation.owns_lock()) return error_response(409, "another model mutation is in progress");
    {
      std::unique_lock lock(model_mutex_);
      prune_generator(generator_, threshold);
    }
    std::shared_lock lock(model_mutex_);
    return json_response(200, report(generator_));
  });
}

ApiResponse ModelService::handle(const std::string& method, const std::string& path, const std::string& body) {
  if (path == "/api/info") return method == "GET" ? info() : error_response(405, "use GET");
  if (path == "/api/generate") return method == "POST" ? generate(body) : error_response(405, "use POST");
  if (path == "/api/perturb") return method == "POST" ? perturb(body) : error_response(405, "use POST");
  if (path == "/api/prune") return method == "POST" ? prune(body) : error_response(405, "use POST");
  return error_response(404, "no such endpoint");
}

struct HttpServer::Impl {
  ModelService& service;
  httplib::Server server;
};

HttpServer::HttpServer(ModelService& service) : impl_(new Impl{service, {}}) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  for (const char* path : {"/api/info", "/api/generate", "/api/perturb", "/api/prune"}) {
    impl_->server.Get(path, forward);
    impl_->server.Post(path, forward);
  }
  if (const auto& dir = service.options().static_dir) {
    if (!impl_->server.set_mount_point("/", dir->string()))
      throw IoError("cannot serve static files from " + dir->string());
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace sglens
