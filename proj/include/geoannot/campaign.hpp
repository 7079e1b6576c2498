// SPDX-License-Identifier: Apache-2.0
#pragma once

// Description campaigns: every (sample, spec) pair is generated once and
// appended to a JSON-lines store, so an interrupted run resumes where it
// stopped.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geoannot/describe.hpp"

namespace geoannot {

struct CampaignSample {
  std::string image_id;
  GroundTruthLabels labels;
};

struct CampaignRecord {
  std::string image_id;
  DescriptionSpec spec;
  std::optional<std::string> description;
  std::string error;  // set when description is empty
  bool newline_violation = false;
  long long latency_ms = 0;
  int retries = 0;
  std::string backend;
};

nlohmann::json to_json(const CampaignRecord& record);
CampaignRecord campaign_record_from_json(const nlohmann::json& j);

std::string campaign_key(const std::string& image_id, const DescriptionSpec& spec);

// Append-only store. Only successful records mark a pair as done; failed pairs
// are attempted again on the next run.
class CampaignStore {
 public:
  explicit CampaignStore(std::filesystem::path path);

  bool done(const std::string& image_id, const DescriptionSpec& spec) const;
  std::size_t done_count() const;
  // Thread safe; each record is flushed as one line.
  void append(const CampaignRecord& record);

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::set<std::string> done_;
  std::ofstream out_;
};

// Every record in file order; malformed lines raise geoannot::Error.
std::vector<CampaignRecord> load_campaign_records(const std::filesystem::path& path);

struct CampaignOptions {
  std::size_t workers = 1;
  RateLimiter* rate_limiter = nullptr;
  RetryPolicy retry;
  // Image bytes for a sample; required by modes that send images.
  std::function<std::vector<std::uint8_t>(const CampaignSample&)> image_provider;
};

struct CampaignSummary {
  std::size_t skipped = 0;    // already in the store
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t attempted = 0;
};

CampaignSummary run_campaign(const std::vector<CampaignSample>& samples,
                             const std::vector<DescriptionSpec>& specs,
                             VlmBackend& backend, CampaignStore& store,
                             const CampaignOptions& options = {});

}  // namespace geoannot
