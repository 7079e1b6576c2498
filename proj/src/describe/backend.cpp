// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <random>
#include <thread>

#include "geoannot/describe.hpp"

namespace geoannot {
namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Reads "between A and B words" out of a prompt.
std::pair<int, int> word_range(std::string_view prompt) {
  const std::size_t at = prompt.find("between ");
  int lo = 0;
  int hi = 0;
  if (at != std::string_view::npos &&
      std::sscanf(std::string(prompt.substr(at)).c_str(), "between %d and %d words", &lo,
                  &hi) == 2 &&
      lo > 0 && hi >= lo) {
    return {lo, hi};
  }
  return {5, 10};
}

constexpr std::array<std::string_view, 48> kWords = {
    "sleek",     "frame",     "lightweight", "aluminium", "carbon",   "steel",
    "geometry",  "aggressive", "relaxed",    "urban",     "trail",    "ride",
    "fast",      "smooth",    "stiff",       "responsive", "classic", "modern",
    "wheels",    "tubes",     "saddle",      "handlebar", "stem",     "fork",
    "bold",      "minimal",   "endurance",   "sprint",    "climb",    "descent",
    "commute",   "weekend",   "adventure",   "precision", "balanced", "compact",
    "tall",      "low",       "slim",        "oversized", "rugged",   "elegant",
    "crafted",   "engineered", "dynamic",    "agile",     "stable",   "iconic"};

}  // namespace

VlmResponse StubBackend::send(const VlmRequest& request) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, request.system_prompt);
  if (request.image) {
    h = fnv1a(h, std::string_view(reinterpret_cast<const char*>(request.image->data()),
                                  request.image->size()));
  }
  if (request.user_text) h = fnv1a(h, *request.user_text);
  std::mt19937_64 rng(h);

  const auto [lo, hi] = word_range(request.system_prompt);
  const int count = lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  std::vector<std::string> words;
  if (request.user_text) {
    // mention label values first, as "key: value" lines
    std::string_view text = *request.user_text;
    std::size_t pos = 0;
    while (pos < text.size() && static_cast<int>(words.size()) < count) {
      const std::size_t nl = std::min(text.find('\n', pos), text.size());
      const std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      const std::size_t colon = line.find(": ");
      if (colon != std::string_view::npos) words.emplace_back(line.substr(colon + 2));
    }
  }
  while (static_cast<int>(words.size()) < count) {
    words.emplace_back(kWords[rng() % kWords.size()]);
  }
  std::string body;
  for (const auto& w : words) {
    if (!body.empty()) body += ' ';
    body += w;
  }
  return {"<description 1>" + body + "</descriptions 1>", std::chrono::milliseconds(0),
          id()};
}

VlmResponse EchoClassifierBackend::send(const VlmRequest&) {
  return {render_label_answer(labels_), std::chrono::milliseconds(0), id()};
}

VlmResponse send_with_retry(VlmBackend& backend, const VlmRequest& request,
                            const RetryPolicy& policy, int* retries) {
  const int attempts = std::max(1, policy.max_attempts);
  for (int attempt = 0;; ++attempt) {
    if (retries != nullptr) *retries = attempt;
    try {
      return backend.send(request);
    } catch (const TransientBackendError& e) {
      if (attempt + 1 >= attempts) {
        throw BackendError("backend " + backend.id() + " failed after " +
                           std::to_string(attempts) + " attempts: " + e.what());
      }
      const auto shift = std::min(attempt, 20);
      const std::chrono::milliseconds delay =
          std::min<std::chrono::milliseconds>(policy.max_delay, policy.base_delay * (1LL << shift));
      if (policy.sleep) {
        policy.sleep(delay);
      } else {
        std::this_thread::sleep_for(delay);
      }
    }
  }
}

VlmRequest build_request(const DescriptionSpec& spec,
                         const std::optional<std::vector<std::uint8_t>>& image,
                         const std::optional<GroundTruthLabels>& labels) {
  validate(spec);
  const std::string mode(to_string(spec.mode));
  if (uses_image(spec.mode) != image.has_value()) {
    throw PreconditionError(uses_image(spec.mode)
                                ? "mode " + mode + " requires an image"
                                : "mode " + mode + " does not accept an image");
  }
  if (uses_labels(spec.mode) != labels.has_value()) {
    throw PreconditionError(uses_labels(spec.mode)
                                ? "mode " + mode + " requires labels"
                                : "mode " + mode + " does not accept labels");
  }
  VlmRequest req;
  req.system_prompt = construct_prompt(spec);
  req.image = image;
  if (labels) req.user_text = "<data 1>\n" + render_labels(*labels) + "</data 1>";
  req.temperature = spec.temperature;
  return req;
}

GenerationResult generate(const DescriptionSpec& spec,
                          const std::optional<std::vector<std::uint8_t>>& image,
                          const std::optional<GroundTruthLabels>& labels,
                          VlmBackend& backend, const RetryPolicy& policy) {
  const VlmRequest req = build_request(spec, image, labels);
  GenerationResult out;
  out.response = send_with_retry(backend, req, policy, &out.retries);
  const ParsedDescription parsed = parse_description(out.response.text);
  out.description = parsed.text;
  out.newline_violation = parsed.newline_violation;
  return out;
}

AccuracyResult classify_accuracy(const std::string& description,
                                 const GroundTruthLabels& truth, VlmBackend& backend,
                                 const RetryPolicy& policy) {
  if (description.empty()) throw PreconditionError("description is empty");
  VlmRequest req;
  req.system_prompt = classification_prompt();
  req.user_text = wrap_description(description);
  req.temperature = 0.0;
  const VlmResponse resp = send_with_retry(backend, req, policy);
  return compare_labels(parse_label_answer(resp.text), truth);
}

RateLimiter::RateLimiter(double requests_per_second)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(requests_per_second > 0.0 ? 1.0 / requests_per_second
                                                                  : 0.0))),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

}  // namespace geoannot
