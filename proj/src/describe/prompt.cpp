// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "geoannot/describe.hpp"

namespace geoannot {
namespace {

constexpr std::array<std::string_view, 3> kLengthNames = {"short", "medium", "long"};
constexpr std::array<std::string_view, 3> kLengthPhrases = {
    "between 5 and 10 words", "between 10 and 20 words", "between 20 and 40 words"};
constexpr std::array<std::string_view, 2> kCharacterNames = {"technical", "casual"};
constexpr std::array<std::string_view, 2> kStyleNames = {"marketing-message",
                                                         "prompt-to-midjourney"};
constexpr std::array<std::string_view, 3> kModeNames = {"im-only", "txt-grounded",
                                                        "im-txt-grounded"};
constexpr std::array<std::string_view, 3> kModeTasks = {
    "images", "technical data about bicycles",
    "images and technical data about bicycles contained in them"};

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::array<std::string_view, N>& names) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == s) return static_cast<E>(i);
  }
  return std::nullopt;
}

template <typename E>
std::size_t idx(E e) {
  return static_cast<std::size_t>(e);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string_view to_string(DescriptionLength v) { return kLengthNames[idx(v)]; }
std::string_view to_string(DescriptionCharacter v) { return kCharacterNames[idx(v)]; }
std::string_view to_string(DescriptionStyle v) { return kStyleNames[idx(v)]; }
std::string_view to_string(GroundingMode v) { return kModeNames[idx(v)]; }

std::optional<DescriptionLength> parse_length(std::string_view s) {
  return lookup<DescriptionLength>(s, kLengthNames);
}
std::optional<DescriptionCharacter> parse_character(std::string_view s) {
  return lookup<DescriptionCharacter>(s, kCharacterNames);
}
std::optional<DescriptionStyle> parse_style(std::string_view s) {
  return lookup<DescriptionStyle>(s, kStyleNames);
}
std::optional<GroundingMode> parse_mode(std::string_view s) {
  return lookup<GroundingMode>(s, kModeNames);
}

// The mode names are matched by substring, as in the original prompt mask.
bool uses_image(GroundingMode mode) {
  return to_string(mode).find("im") != std::string_view::npos;
}
bool uses_labels(GroundingMode mode) {
  return to_string(mode).find("txt") != std::string_view::npos;
}

void validate(const DescriptionSpec& spec) {
  if (!std::isfinite(spec.temperature) || spec.temperature < 0.0 ||
      spec.temperature > 2.0) {
    throw PreconditionError("temperature must lie in [0, 2]");
  }
}

std::vector<DescriptionSpec> all_specs(GroundingMode mode, double temperature) {
  std::vector<DescriptionSpec> out;
  for (std::size_t l = 0; l < kLengthNames.size(); ++l) {
    for (std::size_t c = 0; c < kCharacterNames.size(); ++c) {
      for (std::size_t s = 0; s < kStyleNames.size(); ++s) {
        out.push_back({static_cast<DescriptionLength>(l),
                       static_cast<DescriptionCharacter>(c),
                       static_cast<DescriptionStyle>(s), mode, temperature});
      }
    }
  }
  return out;
}

std::string construct_prompt(const DescriptionSpec& spec) {
  validate(spec);
  std::string p;
  p += "Your task is to create descriptions of bicycles based on ";
  p += kModeTasks[idx(spec.mode)];
  p += ". ";
  p += "Each description should fulfill the following constraints: \n";
  p += "- The length of the provided description should be ";
  p += kLengthPhrases[idx(spec.length)];
  p += ". \n";
  p += "- The descriptions should be ";
  p += to_string(spec.character);
  p += ". \n";
  p += "- The descriptions should be in the style of a ";
  p += to_string(spec.style);
  p += ". \n";
  if (uses_image(spec.mode)) {
    p += "Images will be wrapped between <image i></image i> tags.\n";
  }
  if (uses_labels(spec.mode)) {
    p += "Bike data will be wrapped between <data i></data i> tags.\n";
  }
  // The closing tag spelling is intentional; models are prompted with it.
  p += "Wrap the resulting bike description in <description i></descriptions i> tags.\n";
  p += "There should be *no* newlines in the descriptions.\n";
  if (uses_labels(spec.mode)) {
    p += "You do not have to include all, or any, of the bike data in the description "
         "if it does not fit the style or character. It is important that the "
         "description fits the constraints mentioned above.\n";
  }
  p += "The descriptions should be very diverse within the given constraints.";
  return p;
}

ParsedDescription parse_description(std::string_view raw) {
  static constexpr std::string_view kOpen = "<description ";
  std::size_t from = 0;
  while (true) {
    const std::size_t open = raw.find(kOpen, from);
    if (open == std::string_view::npos) break;
    from = open + 1;
    const std::size_t idx_begin = open + kOpen.size();
    const std::size_t gt = raw.find('>', idx_begin);
    if (gt == std::string_view::npos) break;
    const std::string_view index = raw.substr(idx_begin, gt - idx_begin);
    if (index.empty() || index.find_first_of(" \t\r\n<") != std::string_view::npos) {
      continue;
    }
    const std::string singular = "</description " + std::string(index) + ">";
    const std::string plural = "</descriptions " + std::string(index) + ">";
    const std::size_t body = gt + 1;
    const std::size_t close = std::min(raw.find(singular, body), raw.find(plural, body));
    if (close == std::string_view::npos) continue;
    const std::string_view content = trim(raw.substr(body, close - body));
    ParsedDescription out;
    out.text = std::string(content);
    out.newline_violation = content.find_first_of("\r\n") != std::string_view::npos;
    return out;
  }
  throw DescriptionParseError(std::string(raw));
}

std::string wrap_description(std::string_view text, int index) {
  const std::string i = std::to_string(index);
  return "<description " + i + ">" + std::string(text) + "</description " + i + ">";
}

GroundTruthLabels labels_of(const SampleRecord& r) {
  return {r.style, r.rim_front, r.rim_rear, r.fork_type, r.bottle_seat_tube,
          r.bottle_down_tube};
}

namespace {

std::array<std::string, 6> label_values(const GroundTruthLabels& l) {
  return {std::string(to_string(l.style)),     std::string(to_string(l.rim_front)),
          std::string(to_string(l.rim_rear)),  std::string(to_string(l.fork_type)),
          l.bottle_seat_tube ? "true" : "false", l.bottle_down_tube ? "true" : "false"};
}

std::string render(const GroundTruthLabels& labels, std::string_view sep) {
  const auto values = label_values(labels);
  std::string out;
  for (std::size_t i = 0; i < kLabelKeys.size(); ++i) {
    out += kLabelKeys[i];
    out += sep;
    out += values[i];
    out += '\n';
  }
  return out;
}

}  // namespace

std::string render_labels(const GroundTruthLabels& labels) { return render(labels, ": "); }
std::string render_label_answer(const GroundTruthLabels& labels) {
  return render(labels, "=");
}

std::string classification_prompt() {
  std::string styles;
  for (BikeStyle s : kAllBikeStyles) {
    if (!styles.empty()) styles += ", ";
    styles += to_string(s);
  }
  return "You will receive a text description of a bicycle wrapped between "
         "<description i></description i> tags. Infer the following categorical labels "
         "from the description alone.\n"
         "Answer with exactly six lines in the format key=value and nothing else:\n"
         "style=<one of: " + styles + ">\n"
         "rim_front=<one of: spoked, tri-spoked, disked>\n"
         "rim_rear=<one of: spoked, tri-spoked, disked>\n"
         "fork_type=<one of: rigid, suspension, single-sided>\n"
         "bottle_seat_tube=<true or false>\n"
         "bottle_down_tube=<true or false>\n"
         "If a label cannot be inferred from the description, write unknown as its value.";
}

ClassifiedLabels parse_label_answer(std::string_view text) {
  ClassifiedLabels out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key == "style") out.style = parse_bike_style(value);
    else if (key == "rim_front") out.rim_front = parse_rim_style(value);
    else if (key == "rim_rear") out.rim_rear = parse_rim_style(value);
    else if (key == "fork_type") out.fork_type = parse_fork_type(value);
    else if (key == "bottle_seat_tube") out.bottle_seat_tube = parse_bool(value);
    else if (key == "bottle_down_tube") out.bottle_down_tube = parse_bool(value);
  }
  return out;
}

AccuracyResult compare_labels(const ClassifiedLabels& p, const GroundTruthLabels& t) {
  AccuracyResult r;
  r.matches = {p.style == t.style,
               p.rim_front == t.rim_front,
               p.rim_rear == t.rim_rear,
               p.fork_type == t.fork_type,
               p.bottle_seat_tube == t.bottle_seat_tube,
               p.bottle_down_tube == t.bottle_down_tube};
  r.error_count = static_cast<int>(std::count(r.matches.begin(), r.matches.end(), false));
  return r;
}

}  // namespace geoannot
