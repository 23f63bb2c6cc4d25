#pragma once

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <string>

#include "fincheck/llm_gateway.hpp"

namespace fincheck {

/// Completion-endpoint client over HTTP: POST {model, prompt,
/// temperature, n} to the configured path, read {choices:[{text}...]}.
/// The credential (if configured) is resolved from the environment at
/// dispatch time and sent as a bearer token.
class HttpTransport : public Transport {
public:
  explicit HttpTransport(GatewayConfig config) : config_(std::move(config)) {
    auto scheme_end = config_.endpoint.find("://");
    std::string rest = scheme_end == std::string::npos
                           ? config_.endpoint
                           : config_.endpoint.substr(scheme_end + 3);
    auto path_start = rest.find('/');
    path_ = path_start == std::string::npos ? "/" : rest.substr(path_start);
    base_ = config_.endpoint.substr(0, config_.endpoint.size() - path_.size() +
                                           (path_start == std::string::npos ? path_.size() : 0));
    if (path_start == std::string::npos) base_ = config_.endpoint;
  }

  CompletionResponse send(const CompletionRequest& request) override {
    httplib::Client client(base_);
    client.set_read_timeout(static_cast<time_t>(request.timeout_seconds), 0);
    client.set_connection_timeout(static_cast<time_t>(request.timeout_seconds), 0);
    httplib::Headers headers;
    if (!config_.credential_env.empty()) {
      if (const char* secret = std::getenv(config_.credential_env.c_str()))
        headers.insert({"Authorization", std::string("Bearer ") + secret});
    }
    Json body;
    body["model"] = request.model;
    body["prompt"] = request.prompt;
    body["temperature"] = request.temperature.to_double();
    body["n"] = request.n;
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransportFault(0, "connection failed: " + httplib::to_string(res.error()));
    if (res->status >= 500) throw TransportFault(res->status, "server error");
    if (res->status != 200)
      throw TransportFault(res->status, "unexpected status: " + res->body);
    try {
      Json j = Json::parse(res->body);
      CompletionResponse out;
      for (const auto& choice : j.at("choices")) {
        if (choice.is_string())
          out.texts.push_back(choice.get<std::string>());
        else
          out.texts.push_back(choice.at("text").get<std::string>());
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw TransportFault(res->status, std::string("unparseable response body: ") + e.what());
    }
  }

private:
  GatewayConfig config_;
  std::string base_;
  std::string path_;
};

/// Builds the transport named by the config (mock or http).
inline std::shared_ptr<Transport> make_transport(const GatewayConfig& config) {
  if (config.transport == "mock") return std::make_shared<MockTransport>(config);
  return std::make_shared<HttpTransport>(config);
}

}  // namespace fincheck
