#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <thread>

#include "fixtures.hpp"
#include "propsel/manager_io.hpp"
#include "propsel/service.hpp"

using namespace propsel;

namespace {

json score_request(const std::string& raw_text, int n, int ground_truth) {
  return json{{"raw_text", raw_text},
              {"n_candidates", n},
              {"reference",
               {{"think", "compare the drafts"},
                {"justification", "safest fix"},
                {"golden",
                 {{"problem", "stale badge"}, {"root_cause", "cache key"}, {"solution", "add id"}}},
                {"ground_truth_id", ground_truth}}}};
}

std::string well_formed(int selected) {
  ManagerOutput output;
  output.think = "compare the drafts";
  output.selected_id = selected;
  output.justification = "safest fix";
  output.golden = GoldenProposal{"stale badge", "cache key", "add id"};
  return render_manager_response(output);
}

}  // namespace

TEST_CASE("score handler computes the breakdown") {
  const json response = handle_score(score_request(well_formed(2), 3, 2));
  CHECK(response.at("format_ok") == 1);
  CHECK(response.at("r_sel") == 1.0);
  CHECK(response.at("r").get<double>() == doctest::Approx(1.0));

  const json wrong = handle_score(score_request(well_formed(1), 3, 2));
  CHECK(wrong.at("r_sel") == 0.0);

  const json malformed = handle_score(score_request("gibberish", 3, 2));
  CHECK(malformed.at("format_ok") == 0);
  CHECK(malformed.at("r") == 0.0);
}

TEST_CASE("score handler honors custom weights and rejects bad requests") {
  json request = score_request(well_formed(2), 3, 2);
  request["weights"] = {{"w_sel", 1.0}, {"w_think", 0.0}, {"w_justi", 0.0}, {"w_gold", 0.0}};
  CHECK(handle_score(request).at("r").get<double>() == doctest::Approx(1.0));

  request["weights"]["w_sel"] = 0.5;
  CHECK_THROWS(handle_score(request));
  CHECK_THROWS(handle_score(json{{"raw_text", "x"}}));
  CHECK_THROWS(handle_score_batch(json::object()));
}

TEST_CASE("batch handler maps arrays element-wise") {
  const json batch = json::array({score_request(well_formed(2), 3, 2),
                                  score_request("nope", 3, 2)});
  const json results = handle_score_batch(batch);
  REQUIRE(results.size() == 2);
  CHECK(results[0].at("format_ok") == 1);
  CHECK(results[1].at("format_ok") == 0);
}

TEST_CASE("the HTTP service answers /score and /score_batch on loopback") {
  RewardService service;
  const int port = service.bind_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server([&] { service.serve_bound(); });
  for (int i = 0; i < 100 && !service.is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  httplib::Client client("127.0.0.1", port);
  const auto single =
      client.Post("/score", score_request(well_formed(2), 3, 2).dump(), "application/json");
  REQUIRE(single);
  CHECK(single->status == 200);
  const json body = json::parse(single->body);
  CHECK(body.at("r").get<double>() == doctest::Approx(1.0));
  CHECK(body.at("format_ok") == 1);

  const json batch = json::array({score_request(well_formed(1), 3, 2)});
  const auto multi = client.Post("/score_batch", batch.dump(), "application/json");
  REQUIRE(multi);
  CHECK(json::parse(multi->body)[0].at("r_sel") == 0.0);

  const auto bad = client.Post("/score", "{broken", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).contains("error"));

  service.stop();
  server.join();
}

TEST_CASE("an HTTP backend talks to a scripted loopback completion endpoint") {
  httplib::Server server;
  int hits = 0;
  server.Post("/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json payload = json::parse(req.body);
    CHECK(payload.at("messages").size() == 1);
    CHECK(req.get_header_value("Authorization") == "Bearer sk-test-123");
    if (hits == 1) {
      res.status = 500;
      res.set_content("transient", "text/plain");
      return;
    }
    const json body = {
        {"choices",
         json::array({json{{"message", {{"content", "Best Proposal: #1"}}}}})},
        {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 4}}}};
    res.set_content(body.dump(), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  for (int i = 0; i < 100 && !server.is_running(); ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }

  setenv("PROPSEL_TEST_KEY", "sk-test-123", 1);
  BackendConfig config;
  config.base_url = "http://127.0.0.1:" + std::to_string(port);
  config.api_key_env = "PROPSEL_TEST_KEY";
  config.max_retries = 2;
  HttpBackend backend(config, "test-model");
  backend.set_sleeper([](std::chrono::milliseconds) {});
  const ChatResponse response =
      backend.complete(single_user_request("test-model", "pick one", 0.0, 64));
  CHECK(response.content == "Best Proposal: #1");
  CHECK(response.prompt_tokens == 5);
  CHECK(response.completion_tokens == 4);
  CHECK(hits == 2);  // one 500, one success

  server.stop();
  thread.join();
}
