// SPDX-License-Identifier: Apache-2.0
#pragma once

// Text description generation: system prompt assembly, the description
// envelope parser, label rendering, and the classifier-based label check.

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoannot/curate.hpp"
#include "geoannot/error.hpp"
#include "geoannot/vlm.hpp"

namespace geoannot {

enum class DescriptionLength { Short, Medium, Long };
enum class DescriptionCharacter { Technical, Casual };
enum class DescriptionStyle { MarketingMessage, PromptToMidjourney };
enum class GroundingMode { ImOnly, TxtGrounded, ImTxtGrounded };

std::string_view to_string(DescriptionLength v);
std::string_view to_string(DescriptionCharacter v);
std::string_view to_string(DescriptionStyle v);
std::string_view to_string(GroundingMode v);

std::optional<DescriptionLength> parse_length(std::string_view s);
std::optional<DescriptionCharacter> parse_character(std::string_view s);
std::optional<DescriptionStyle> parse_style(std::string_view s);
std::optional<GroundingMode> parse_mode(std::string_view s);

bool uses_image(GroundingMode mode);
bool uses_labels(GroundingMode mode);

struct DescriptionSpec {
  DescriptionLength length = DescriptionLength::Short;
  DescriptionCharacter character = DescriptionCharacter::Technical;
  DescriptionStyle style = DescriptionStyle::MarketingMessage;
  GroundingMode mode = GroundingMode::ImOnly;
  double temperature = 1.0;

  friend bool operator==(const DescriptionSpec&, const DescriptionSpec&) = default;
};

// Throws PreconditionError on a temperature outside [0, 2].
void validate(const DescriptionSpec& spec);

// All 8 length x character x style combinations for one mode.
std::vector<DescriptionSpec> all_specs(GroundingMode mode, double temperature = 1.0);

std::string construct_prompt(const DescriptionSpec& spec);

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DescriptionParseError : public Error {
 public:
  explicit DescriptionParseError(std::string raw)
      : Error("no <description i> envelope in response"), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

struct ParsedDescription {
  std::string text;
  bool newline_violation = false;  // content spanned several lines
};

// Content of the first "<description N>...</description N>" envelope; the
// closing tag may also be spelled "</descriptions N>".
ParsedDescription parse_description(std::string_view raw);

// "<description 1>text</description 1>"
std::string wrap_description(std::string_view text, int index = 1);

struct GroundTruthLabels {
  BikeStyle style = BikeStyle::Road;
  RimStyle rim_front = RimStyle::Spoked;
  RimStyle rim_rear = RimStyle::Spoked;
  ForkType fork_type = ForkType::Rigid;
  bool bottle_seat_tube = false;
  bool bottle_down_tube = false;

  friend bool operator==(const GroundTruthLabels&, const GroundTruthLabels&) = default;
};

GroundTruthLabels labels_of(const SampleRecord& record);

inline constexpr std::array<std::string_view, 6> kLabelKeys = {
    "style", "rim_front", "rim_rear", "fork_type", "bottle_seat_tube", "bottle_down_tube"};

// "key: value" lines.
std::string render_labels(const GroundTruthLabels& labels);
// "key=value" lines, the classifier answer format.
std::string render_label_answer(const GroundTruthLabels& labels);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  // Test hook; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Calls backend.send, retrying TransientBackendError with capped exponential
// backoff. `retries` receives the number of retries performed.
VlmResponse send_with_retry(VlmBackend& backend, const VlmRequest& request,
                            const RetryPolicy& policy, int* retries = nullptr);

struct GenerationResult {
  std::string description;
  bool newline_violation = false;
  VlmResponse response;
  int retries = 0;
};

// image must be present iff the mode uses images, labels iff it uses labels.
GenerationResult generate(const DescriptionSpec& spec,
                          const std::optional<std::vector<std::uint8_t>>& image,
                          const std::optional<GroundTruthLabels>& labels,
                          VlmBackend& backend, const RetryPolicy& policy = {});

// Builds the request generate() would send, without sending it.
VlmRequest build_request(const DescriptionSpec& spec,
                         const std::optional<std::vector<std::uint8_t>>& image,
                         const std::optional<GroundTruthLabels>& labels);

struct AccuracyResult {
  std::array<bool, 6> matches{};  // in kLabelKeys order
  int error_count = 0;
};

// The fixed instruction sent to the classifier.
std::string classification_prompt();

// Parses "key=value" lines; missing or unknown values stay empty.
struct ClassifiedLabels {
  std::optional<BikeStyle> style;
  std::optional<RimStyle> rim_front;
  std::optional<RimStyle> rim_rear;
  std::optional<ForkType> fork_type;
  std::optional<bool> bottle_seat_tube;
  std::optional<bool> bottle_down_tube;
};
ClassifiedLabels parse_label_answer(std::string_view text);

AccuracyResult compare_labels(const ClassifiedLabels& predicted,
                              const GroundTruthLabels& truth);

// Asks the backend to infer the six labels from the description and counts
// mismatches; unparseable or missing labels count as mismatches.
AccuracyResult classify_accuracy(const std::string& description,
                                 const GroundTruthLabels& truth, VlmBackend& backend,
                                 const RetryPolicy& policy = {});

// Classifier stand-in that answers every request with the labels it was
// constructed with, in the key=value answer format.
class EchoClassifierBackend : public VlmBackend {
 public:
  explicit EchoClassifierBackend(GroundTruthLabels labels) : labels_(labels) {}
  VlmResponse send(const VlmRequest& request) override;
  std::string id() const override { return "echo-classifier"; }

 private:
  GroundTruthLabels labels_;
};

}  // namespace geoannot
