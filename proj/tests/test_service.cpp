#include <atomic>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "doctest.h"
#include "sglens/image_io.hpp"
#include "sglens/service.hpp"
#include "support/temp_dir.hpp"

using namespace sglens;
using nlohmann::json;

namespace {

GeneratorConfig tiny() {
  GeneratorConfig c = GeneratorConfig::desk();
  c.latent_size = 16;
  c.n_layers = 2;
  c.blocks = 1;
  c.max_res = 8;
  c.channels = {8, 8};
  return c;
}

ModelService make(bool allow_in_place = false, bool with_d = true) {
  ServiceOptions o;
  o.allow_in_place_prune = allow_in_place;
  std::optional<Discriminator> d;
  if (with_d) d.emplace(tiny(), 4, 2);
  return ModelService(Generator(tiny(), 1), std::move(d), o);
}

std::vector<std::uint8_t> unbase64(const std::string& s) {
  static const std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::vector<std::uint8_t> out;
  unsigned acc = 0;
  int bits = 0;
  for (char ch : s) {
    if (ch == '=') break;
    acc = (acc << 6) | static_cast<unsigned>(alphabet.find(ch));
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("base64") {
  CHECK(base64_encode({}) == "");
  CHECK(base64_encode({'f'}) == "Zg==");
  CHECK(base64_encode({'f', 'o', 'o', 'b'}) == "Zm9vYg==");
  CHECK(base64_encode({'f', 'o', 'o'}) == "Zm9v");
}

TEST_CASE("info") {
  ModelService s = make();
  const ApiResponse r = s.info();
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["latent_size"] == 16);
  CHECK(j["blocks"] == 1);
  CHECK(j["max_res"] == 8);
  CHECK(j["nonzero_weights"] == j["total_weights"]);
  CHECK(j["total_weights"].get<std::size_t>() > 0);
}

TEST_CASE("generate") {
  ModelService s = make();
  const ApiResponse r = s.generate(R"({"seed": 7, "count": 3})");
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  REQUIRE(j["images"].size() == 3);
  const Rgb8Image img = decode_png(unbase64(j["images"][0].get<std::string>()));
  CHECK(img.width == 8);
  CHECK(img.height == 8);
  CHECK(s.generate(R"({"seed": 7, "count": 3})").body == r.body);
  CHECK(json::parse(s.generate(R"({"seed": 1})").body)["images"].size() == 32);

  CHECK(s.generate(R"({"seed": 7, "count": 65})").status == 400);
  CHECK(s.generate(R"({"seed": 7, "count": 0})").status == 400);
  CHECK(s.generate(R"({"seed": -1})").status == 400);
  CHECK(s.generate(R"({"count": 2})").status == 400);
  CHECK(s.generate(R"({"seed": 1, "truncation_psi": 1.5})").status == 400);
  CHECK(s.generate(R"({"seed": 1, "colour": true})").status == 400);
  CHECK(s.generate("not json").status == 400);
  CHECK(s.generate("[1, 2]").status == 400);
}

TEST_CASE("perturb") {
  ModelService s = make();
  const ApiResponse same = s.perturb(R"({"seed": 3, "count": 2, "deltas": []})");
  REQUIRE(same.status == 200);
  const json a = json::parse(same.body);
  CHECK(a["original"] == a["modified"]);
  for (const auto& d : a["distances"]) CHECK(d.get<double>() == 0.0);

  const json b = json::parse(s.perturb(R"({"seed": 3, "count": 2, "deltas": [{"dim": 3, "delta": 10}]})").body);
  CHECK(b["original"] == a["original"]);
  for (const auto& d : b["distances"]) CHECK(d.get<double>() > 0.0);

  CHECK(s.perturb(R"({"seed": 3, "deltas": [{"dim": 3, "delta": 11}]})").status == 400);
  CHECK(s.perturb(R"({"seed": 3, "count": 1, "deltas": [{"dim": 3, "delta": 11}], "unbounded": true})").status == 200);
  CHECK(s.perturb(R"({"seed": 3, "deltas": [{"dim": 16, "delta": 1}]})").status == 400);
  CHECK(s.perturb(R"({"seed": 3, "deltas": {"dim": 1}})").status == 400);
  CHECK(s.perturb(R"({"seed": 3, "count": 1, "w_space": true, "scale": 0.5})").status == 200);
}

TEST_CASE("prune on a copy") {
  ModelService s = make();
  const json before = json::parse(s.info().body);
  const ApiResponse r = s.prune(R"({"threshold": 1.0, "count": 2})");
  REQUIRE(r.status == 200);
  const json j = json::parse(r.body);
  CHECK(j["in_place"] == false);
  CHECK(j["nonzero_weights"].get<std::size_t>() < j["total_weights"].get<std::size_t>());
  CHECK(j["mean_d_score"].is_number());
  CHECK(j["images"].size() == 2);
  CHECK(json::parse(s.info().body) == before);
  CHECK(s.prune(R"({"threshold": -1})").status == 400);
  CHECK(s.prune(R"({"threshold": 0.5, "in_place": true})").status == 400);
  CHECK(json::parse(make(false, false).prune(R"({"threshold": 0.5, "count": 1})").body)["mean_d_score"].is_null());
}

TEST_CASE("prune in place") {
  ModelService s = make(true);
  const ApiResponse r = s.prune(R"({"threshold": 1.0, "in_place": true, "count": 1})");
  REQUIRE(r.status == 200);
  const json info = json::parse(s.info().body);
  CHECK(info["nonzero_weights"] == json::parse(r.body)["nonzero_weights"]);
  CHECK(info["nonzero_weights"].get<std::size_t>() < info["total_weights"].get<std::size_t>());
}

TEST_CASE("concurrent in-place prunes are either served or refused") {
  ModelService s = make(true);
  std::atomic<bool> done{false};
  std::multiset<int> statuses;
  std::thread worker([&] {
    for (int i = 0; i < 3; ++i) statuses.insert(s.prune(R"({"threshold": 0.1, "in_place": true, "count": 64})").status);
    done = true;
  });
  std::multiset<int> mine;
  while (!done) mine.insert(s.prune(R"({"threshold": 0.1, "in_place": true, "count": 1})").status);
  worker.join();
  for (int st : statuses) CHECK((st == 200 || st == 409));
  for (int st : mine) CHECK((st == 200 || st == 409));
  CHECK(statuses.count(200) + mine.count(200) >= 1);
}

TEST_CASE("routing") {
  ModelService s = make();
  CHECK(s.handle("GET", "/api/info", "").status == 200);
  CHECK(s.handle("POST", "/api/info", "").status == 405);
  CHECK(s.handle("GET", "/api/generate", "").status == 405);
  CHECK(s.handle("GET", "/api/nothing", "").status == 404);
  CHECK(s.handle("POST", "/api/generate", R"({"seed": 2, "count": 1})").status == 200);
}

TEST_CASE("http round trip") {
  const sglens::testing::TempDir ui;
  write_text_atomic(ui.path() / "index.html", "<html>ui</html>");
  ServiceOptions o;
  o.static_dir = ui.path();
  ModelService s(Generator(tiny(), 1), Discriminator(tiny(), 4, 2), o);
  HttpServer server(s);
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread t([&] { server.listen(); });

  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);
  auto info = cli.Get("/api/info");
  REQUIRE(info);
  CHECK(info->status == 200);
  CHECK(json::parse(info->body)["latent_size"] == 16);
  auto gen = cli.Post("/api/generate", R"({"seed": 4, "count": 2})", "application/json");
  REQUIRE(gen);
  CHECK(gen->status == 200);
  CHECK(gen->body == s.generate(R"({"seed": 4, "count": 2})").body);
  auto bad = cli.Post("/api/generate", R"({"seed": 4, "count": 65})", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));
  auto page = cli.Get("/index.html");
  REQUIRE(page);
  CHECK(page->body == "<html>ui</html>");

  server.stop();
  t.join();
}
