#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "sglens/discriminator.hpp"
#include "sglens/generator.hpp"
#include "sglens/latent_lab.hpp"

namespace sglens {

struct ServiceOptions {
  bool allow_in_place_prune = false;
  std::size_t max_count = 64;
  DeltaBounds bounds;
  std::optional<std::filesystem::path> static_dir;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

// JSON API over one generator (and optionally its discriminator). Reads run
// concurrently under a shared lock; in-place pruning takes the exclusive lock
// and is refused with 409 while another mutation is running.
//
//   GET  /api/info      -> {latent_size, blocks, max_res, nonzero_weights, total_weights}
//   POST /api/generate  {seed, count, truncation_psi?} -> {images: [base64 PNG]}
//   POST /api/perturb   {seed, count?, scale?, deltas: [{dim, delta}], w_space?, truncation_psi?, unbounded?}
//                       -> {original, modified, distances}
//   POST /api/prune     {threshold, in_place?, seed?, count?}
//                       -> {threshold, in_place, nonzero_weights, total_weights, mean_d_score, images}
class ModelService {
 public:
  ModelService(Generator generator, std::optional<Discriminator> discriminator, ServiceOptions options = {});

  ApiResponse info();
  ApiResponse generate(const std::string& body);
  ApiResponse perturb(const std::string& body);
  ApiResponse prune(const std::string& body);
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body);

  const ServiceOptions& options() const { return options_; }

 private:
  template <typename Fn>
  ApiResponse guarded(const char* endpoint, Fn fn);

  Generator generator_;
  std::optional<Discriminator> discriminator_;
  ServiceOptions options_;
  std::shared_mutex model_mutex_;
  std::mutex mutation_mutex_;
};

// Blocking HTTP front end for a ModelService.
class HttpServer {
 public:
  explicit HttpServer(ModelService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Returns the bound port (port 0 picks a free one). Throws IoError.
  int bind(const std::string& host, int port);
  // Serves until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace sglens
