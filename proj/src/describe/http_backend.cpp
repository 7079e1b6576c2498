// SPDX-License-Identifier: Apache-2.0
#include <regex>

#include "httplib.h"

#include "geoannot/vlm.hpp"

namespace geoannot {

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  static const std::regex kUrl(R"(^(https?)://([^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.endpoint, m, kUrl)) {
    throw BackendError("invalid endpoint URL: " + config_.endpoint);
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (m[1] == "https") {
    throw BackendError("this build has no TLS support; cannot reach " + config_.endpoint);
  }
#endif
  base_ = m[1].str() + "://" + m[2].str();
  path_ = m[3].matched ? m[3].str() : "/";
}

nlohmann::json HttpBackend::payload(const VlmRequest& request) const {
  nlohmann::json parts = nlohmann::json::array();
  if (request.image) {
    parts.push_back({{"type", "text"}, {"text", "<image 1>"}});
    parts.push_back(
        {{"type", "image_url"},
         {"image_url",
          {{"url", "data:" + config_.image_mime + ";base64," + base64_encode(*request.image)}}}});
    parts.push_back({{"type", "text"}, {"text", "</image 1>"}});
  }
  if (request.user_text) parts.push_back({{"type", "text"}, {"text", *request.user_text}});
  return {{"model", config_.model},
          {"temperature", request.temperature},
          {"messages",
           nlohmann::json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                  {{"role", "user"}, {"content", parts}}})}};
}

VlmResponse HttpBackend::send(const VlmRequest& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  const auto start = std::chrono::steady_clock::now();
  const auto res = client.Post(path_, headers, payload(request).dump(), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);

  if (!res) {
    throw TransientBackendError("request to " + config_.endpoint +
                                " failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw TransientBackendError("HTTP " + std::to_string(res->status) + " from " +
                                config_.endpoint);
  }
  if (res->status != 200) {
    throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.endpoint +
                       ": " + res->body.substr(0, 512));
  }
  try {
    const auto body = nlohmann::json::parse(res->body);
    return {body.at("choices").at(0).at("message").at("content").get<std::string>(), latency,
            id()};
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("unexpected response body: ") + e.what());
  }
}

}  // namespace geoannot
