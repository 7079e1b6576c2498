// SPDX-License-Identifier: Apache-2.0
#include "geoannot/campaign.hpp"

#include <atomic>
#include <thread>

namespace geoannot {

std::string campaign_key(const std::string& image_id, const DescriptionSpec& spec) {
  std::string key = image_id;
  for (std::string_view part : {to_string(spec.length), to_string(spec.character),
                                to_string(spec.style), to_string(spec.mode)}) {
    key += '\x1f';
    key += part;
  }
  return key;
}

nlohmann::json to_json(const CampaignRecord& r) {
  nlohmann::json j{{"image_id", r.image_id},
                   {"length", to_string(r.spec.length)},
                   {"character", to_string(r.spec.character)},
                   {"style", to_string(r.spec.style)},
                   {"mode", to_string(r.spec.mode)},
                   {"temperature", r.spec.temperature}};
  if (r.description) {
    j["description"] = *r.description;
  } else {
    j["error"] = r.error;
  }
  j["newline_violation"] = r.newline_violation;
  j["latency_ms"] = r.latency_ms;
  j["retries"] = r.retries;
  j["backend"] = r.backend;
  return j;
}

CampaignRecord campaign_record_from_json(const nlohmann::json& j) {
  auto need = [](auto parsed, const std::string& what) {
    if (!parsed) throw Error("campaign record has invalid " + what);
    return *parsed;
  };
  CampaignRecord r;
  r.image_id = j.at("image_id").get<std::string>();
  r.spec.length = need(parse_length(j.at("length").get<std::string>()), "length");
  r.spec.character = need(parse_character(j.at("character").get<std::string>()), "character");
  r.spec.style = need(parse_style(j.at("style").get<std::string>()), "style");
  r.spec.mode = need(parse_mode(j.at("mode").get<std::string>()), "mode");
  r.spec.temperature = j.value("temperature", 1.0);
  if (j.contains("description")) {
    r.description = j.at("description").get<std::string>();
  } else {
    r.error = j.value("error", std::string("unknown error"));
  }
  r.newline_violation = j.value("newline_violation", false);
  r.latency_ms = j.value("latency_ms", 0LL);
  r.retries = j.value("retries", 0);
  r.backend = j.value("backend", std::string());
  return r;
}

std::vector<CampaignRecord> load_campaign_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open campaign store " + path.string());
  std::vector<CampaignRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(campaign_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

CampaignStore::CampaignStore(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (std::filesystem::exists(path_, ec)) {
    for (const auto& r : load_campaign_records(path_)) {
      if (r.description) done_.insert(campaign_key(r.image_id, r.spec));
    }
  }
  out_.open(path_, std::ios::app);
  if (!out_) throw Error("cannot open campaign store for append: " + path_.string());
}

bool CampaignStore::done(const std::string& image_id, const DescriptionSpec& spec) const {
  std::lock_guard lock(mu_);
  return done_.count(campaign_key(image_id, spec)) != 0;
}

std::size_t CampaignStore::done_count() const {
  std::lock_guard lock(mu_);
  return done_.size();
}

void CampaignStore::append(const CampaignRecord& record) {
  const std::string line = to_json(record).dump();
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw Error("write to campaign store failed: " + path_.string());
  if (record.description) done_.insert(campaign_key(record.image_id, record.spec));
}

namespace {

CampaignRecord run_one(const CampaignSample& sample, const DescriptionSpec& spec,
                       VlmBackend& backend, const CampaignOptions& options) {
  CampaignRecord rec;
  rec.image_id = sample.image_id;
  rec.spec = spec;
  rec.backend = backend.id();
  try {
    std::optional<std::vector<std::uint8_t>> image;
    if (uses_image(spec.mode)) {
      if (!options.image_provider) {
        throw PreconditionError("mode " + std::string(to_string(spec.mode)) +
                                " needs images but no image source is configured");
      }
      image = options.image_provider(sample);
    }
    std::optional<GroundTruthLabels> labels;
    if (uses_labels(spec.mode)) labels = sample.labels;
    if (options.rate_limiter != nullptr) options.rate_limiter->acquire();
    const GenerationResult g = generate(spec, image, labels, backend, options.retry);
    rec.description = g.description;
    rec.newline_violation = g.newline_violation;
    rec.latency_ms = g.response.latency.count();
    rec.retries = g.retries;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  return rec;
}

}  // namespace

CampaignSummary run_campaign(const std::vector<CampaignSample>& samples,
                             const std::vector<DescriptionSpec>& specs,
                             VlmBackend& backend, CampaignStore& store,
                             const CampaignOptions& options) {
  struct Task {
    const CampaignSample* sample;
    const DescriptionSpec* spec;
  };
  CampaignSummary summary;
  std::vector<Task> tasks;
  for (const auto& sample : samples) {
    for (const auto& spec : specs) {
      if (store.done(sample.image_id, spec)) {
        ++summary.skipped;
      } else {
        tasks.push_back({&sample, &spec});
      }
    }
  }

  std::mutex mu;
  auto finish = [&](const CampaignRecord& rec) {
    store.append(rec);
    std::lock_guard lock(mu);
    ++summary.attempted;
    if (rec.description) {
      ++summary.succeeded;
    } else {
      ++summary.failed;
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  if (workers == 1) {
    for (const Task& t : tasks) finish(run_one(*t.sample, *t.spec, backend, options));
    return summary;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, tasks.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
          finish(run_one(*tasks[i].sample, *tasks[i].spec, backend, options));
        }
      });
    }
  }
  return summary;
}

}  // namespace geoannot
