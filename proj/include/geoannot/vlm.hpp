// SPDX-License-Identifier: Apache-2.0
#pragma once

// Vision-language model backends. A backend turns one request (system prompt
// plus optional image and optional text) into raw response text.

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "geoannot/error.hpp"

namespace geoannot {

struct VlmRequest {
  std::string system_prompt;
  std::optional<std::vector<std::uint8_t>> image;  // sent inside <image 1></image 1>
  std::optional<std::string> user_text;
  double temperature = 1.0;
};

struct VlmResponse {
  std::string text;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

// Retryable failure (rate limited, server error, connection reset).
class TransientBackendError : public BackendError {
 public:
  using BackendError::BackendError;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual VlmResponse send(const VlmRequest& request) = 0;
  virtual std::string id() const = 0;
};

// Deterministic offline backend. The answer is a pure function of the request:
// a description envelope whose word count honours the "between A and B words"
// constraint of the prompt, built from a hash of the request content. Label
// text, when present, is worked into the description.
class StubBackend : public VlmBackend {
 public:
  VlmResponse send(const VlmRequest& request) override;
  std::string id() const override { return "stub"; }
};

struct HttpBackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key;
  std::chrono::seconds timeout{120};
  std::string image_mime = "image/png";
};

// OpenAI-style chat-completions client. HTTP 429 and 5xx responses and
// connection failures raise TransientBackendError; other failures raise
// BackendError.
class HttpBackend : public VlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  VlmResponse send(const VlmRequest& request) override;
  std::string id() const override { return "http:" + config_.model; }

  // Request body for `request`; exposed for inspection.
  nlohmann::json payload(const VlmRequest& request) const;

 private:
  HttpBackendConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
};

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

// Spaces calls at least 1/rate seconds apart across all threads.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mu_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

}  // namespace geoannot
