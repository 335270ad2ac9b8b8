#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "propsel/service.hpp"

#include <httplib.h>

namespace propsel {

namespace {

RewardWeights weights_from_json(const json& value) {
  RewardWeights weights;
  weights.w_sel = value.at("w_sel").get<double>();
  weights.w_think = value.at("w_think").get<double>();
  weights.w_justi = value.at("w_justi").get<double>();
  weights.w_gold = value.at("w_gold").get<double>();
  return weights;
}

}  // namespace

json handle_score(const json& request) {
  if (!request.is_object()) throw std::invalid_argument("score request must be a JSON object");
  const std::string raw_text = request.at("raw_text").get<std::string>();
  const int n_candidates = request.at("n_candidates").get<int>();
  if (n_candidates < 1) throw std::invalid_argument("n_candidates must be positive");
  const ReferenceAnnotation reference = reference_from_json(request.at("reference"));
  RewardWeights weights;
  if (request.contains("weights") && !request["weights"].is_null()) {
    weights = weights_from_json(request["weights"]);
  }
  weights.validate();
  return reward_to_json(composite_reward_from_text(raw_text, n_candidates, reference, weights));
}

json handle_score_batch(const json& request) {
  if (!request.is_array()) throw std::invalid_argument("score_batch request must be a JSON array");
  json results = json::array();
  for (const json& item : request) results.push_back(handle_score(item));
  return results;
}

struct RewardService::Impl {
  httplib::Server server;

  Impl() {
    server.Post("/score", [](const httplib::Request& req, httplib::Response& res) {
      respond(req, res, &handle_score);
    });
    server.Post("/score_batch", [](const httplib::Request& req, httplib::Response& res) {
      respond(req, res, &handle_score_batch);
    });
  }

  static void respond(const httplib::Request& req, httplib::Response& res,
                      json (*handler)(const json&)) {
    try {
      const json body = json::parse(req.body);
      res.set_content(handler(body).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  }
};

RewardService::RewardService() : impl_(std::make_unique<Impl>()) {}
RewardService::~RewardService() { stop(); }

bool RewardService::listen(const std::string& host, int port) {
  return impl_->server.listen(host, port);
}

int RewardService::bind_any_port(const std::string& host) {
  return impl_->server.bind_to_any_port(host);
}

bool RewardService::serve_bound() { return impl_->server.listen_after_bind(); }

void RewardService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool RewardService::is_running() const { return impl_ && impl_->server.is_running(); }

}  // namespace propsel
