// SPDX-License-Identifier: Apache-2.0
#include "geoannot/cli.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "geoannot/campaign.hpp"
#include "geoannot/correspond.hpp"
#include "geoannot/csv.hpp"
#include "geoannot/curate.hpp"
#include "geoannot/describe.hpp"
#include "geoannot/geometry.hpp"
#include "geoannot/textmetrics.hpp"

namespace geoannot {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
};

void require_file(const fs::path& p, std::string_view what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::exists(p)) throw UsageError("missing input file: " + p.string());
}

void require_dir(const fs::path& p, std::string_view what) {
  if (p.empty()) throw UsageError(std::string(what) + " is required");
  if (!fs::is_directory(p)) throw UsageError("missing input directory: " + p.string());
}

fs::path prepare_out(const fs::path& out) {
  if (out.empty()) throw UsageError("--out is required");
  fs::create_directories(out);
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  if (!f) throw Error("write failed: " + p.string());
}

std::string env_name(const std::string& option) {
  std::string out = "GEOANNOT_";
  for (char c : option) {
    out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Fills options that neither a flag nor the environment set. Keys are option
// names; a nested object named after the subcommand overrides top-level keys.
void apply_config(CLI::App& sub, const fs::path& config_path) {
  std::ifstream f(config_path);
  if (!f) throw UsageError("missing input file: " + config_path.string());
  json cfg;
  try {
    cfg = json::parse(f);
  } catch (const json::exception& e) {
    throw UsageError(config_path.string() + ": " + e.what());
  }
  if (!cfg.is_object()) throw UsageError(config_path.string() + ": expected a JSON object");
  json merged = json::object();
  for (const auto& [k, v] : cfg.items()) {
    if (!v.is_object()) merged[k] = v;
  }
  if (cfg.contains(sub.get_name()) && cfg[sub.get_name()].is_object()) {
    for (const auto& [k, v] : cfg[sub.get_name()].items()) merged[k] = v;
  }
  for (CLI::Option* opt : sub.get_options()) {
    if (opt->count() > 0) continue;
    const std::string name = opt->get_single_name();
    if (!merged.contains(name)) continue;
    const json& v = merged[name];
    if (v.is_array()) {
      for (const auto& item : v) opt->add_result(scalar_text(item));
    } else {
      opt->add_result(scalar_text(v));
    }
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError(config_path.string() + ": " + name + ": " + e.what());
    }
  }
}

void with_env(CLI::Option* opt) { opt->envname(env_name(opt->get_single_name())); }

std::size_t check_resolution(std::size_t r) {
  if (r != kScale256.resolution && r != kScale2048.resolution) {
    throw UsageError("--resolution must be 256 or 2048");
  }
  return r;
}

// ---------------------------------------------------------------- curate

struct CurateArgs {
  fs::path manifest;
  fs::path exclude;
  fs::path geometry;
  fs::path out;
  std::size_t resolution = 256;
  bool published_averages = false;
};

int cmd_curate(const CurateArgs& a, Io io) {
  require_file(a.manifest, "--manifest");
  if (!a.exclude.empty()) require_file(a.exclude, "--exclude");
  if (!a.geometry.empty()) require_file(a.geometry, "--geometry");
  check_resolution(a.resolution);
  const fs::path out = prepare_out(a.out);

  std::vector<SampleRecord> all = read_parameter_table(a.manifest);
  std::vector<GeometryRecord> geometry;
  if (!a.geometry.empty()) {
    geometry = load_geometry_records(a.geometry);
    attach_geometry(all, geometry);
  }
  std::set<std::string> excluded;
  if (!a.exclude.empty()) excluded = read_exclusion_list(a.exclude);
  const ExclusionResult kept = apply_exclusions(all, excluded);
  if (kept.kept.empty()) throw CurationError("no records left after exclusions");

  const TubeAverages averages =
      a.published_averages ? kPublishedTubeAverages : compute_tube_averages(kept.kept);
  write_manifest(kept.kept, averages, out / "manifest.csv");

  const bool extents = std::all_of(kept.kept.begin(), kept.kept.end(), [](const auto& r) {
    return r.extent_mm.has_value() || r.geometry.has_value();
  });
  const ImageScale scale =
      extents ? normalize_scale(kept.kept, a.resolution) : published_scale(a.resolution);

  write_variance_csv(variance_report(all, kept.kept, default_size_fields()),
                     out / "variance.csv");

  std::map<std::string, int> tube_counts;
  std::map<std::string, int> frame_counts;
  for (const auto& r : kept.kept) {
    ++tube_counts[std::string(to_string(classify_tube_size(r.tubes, averages)))];
    ++frame_counts[std::string(to_string(classify_frame_size(r.seat_tube_length_mm)))];
  }
  json summary = {
      {"records_in", all.size()},
      {"records_kept", kept.kept.size()},
      {"records_excluded", kept.removed},
      {"resolution", scale.resolution},
      {"mm_per_pixel", scale.mm_per_pixel},
      {"scale_source", extents ? "derived" : "published"},
      {"tube_averages_mm",
       {{"seat", averages.seat}, {"down", averages.down}, {"head", averages.head},
        {"top", averages.top}}},
      {"tube_averages_source", a.published_averages ? "published" : "derived"},
      {"tube_size_counts", tube_counts},
      {"frame_size_counts", frame_counts}};
  write_text(out / "curation.json", summary.dump(2) + "\n");

  if (!geometry.empty()) {
    std::vector<GeometryRecord> kept_geometry;
    for (const auto& g : geometry) {
      if (excluded.count(g.image_id) == 0) kept_geometry.push_back(g);
    }
    save_geometry_records(kept_geometry, out / "geometry.json");
  }
  io.out << "curate: kept " << kept.kept.size() << " of " << all.size() << " records, "
         << scale.mm_per_pixel << " mm/px at " << scale.resolution << " px\n";
  return kExitOk;
}

// ---------------------------------------------------------------- evaluation

std::map<std::string, std::vector<LabeledPoint>> load_truth_pixels(const fs::path& path,
                                                                   std::size_t resolution) {
  const ImageScale scale = published_scale(resolution);
  std::map<std::string, std::vector<LabeledPoint>> out;
  for (const auto& g : load_geometry_records(path)) {
    out[g.image_id] = to_pixel_points(g.geometry, scale);
  }
  return out;
}

// Evaluates every successful outcome with truth available, restricting the
// truth to the predicted point ids. Returns the number of skipped images.
std::size_t evaluate_outcomes(const std::vector<AnnotationOutcome>& outcomes,
                              const std::map<std::string, std::vector<LabeledPoint>>& truth,
                              const fs::path& csv, Io io) {
  std::vector<ImageEvaluation> rows;
  std::size_t skipped = 0;
  for (const auto& o : outcomes) {
    if (!o.result) continue;
    const auto it = truth.find(o.image_id);
    if (it == truth.end()) {
      io.err << "evaluate: no ground truth for " << o.image_id << "\n";
      ++skipped;
      continue;
    }
    std::vector<LabeledPoint> predicted;
    std::set<std::string> ids;
    for (const auto& p : o.result->points) {
      predicted.push_back({p.id, static_cast<double>(p.x), static_cast<double>(p.y)});
      ids.insert(p.id);
    }
    std::vector<LabeledPoint> expected;
    for (const auto& t : it->second) {
      if (ids.count(t.id) != 0) expected.push_back(t);
    }
    try {
      rows.push_back({o.image_id, evaluate_predictions(predicted, expected)});
    } catch (const Error& e) {
      io.err << "evaluate: " << o.image_id << ": " << e.what() << "\n";
      ++skipped;
    }
  }
  write_evaluation_csv(rows, csv);
  return skipped;
}

// ---------------------------------------------------------------- annotate

struct AnnotateArgs {
  fs::path bank;
  fs::path features_dir;
  fs::path manifest;
  fs::path truth;
  fs::path out;
  std::size_t resolution = 256;
  std::size_t workers = 0;
};

std::vector<TargetRef> collect_targets(const AnnotateArgs& a) {
  std::vector<TargetRef> targets;
  if (!a.manifest.empty()) {
    for (const auto& r : read_parameter_table(a.manifest)) {
      targets.push_back({r.image_id, a.features_dir / (r.image_id + ".gbfm")});
    }
    return targets;
  }
  for (const auto& entry : fs::directory_iterator(a.features_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".gbfm") {
      targets.push_back({entry.path().stem().string(), entry.path()});
    }
  }
  std::sort(targets.begin(), targets.end(),
            [](const TargetRef& x, const TargetRef& y) { return x.image_id < y.image_id; });
  return targets;
}

int cmd_annotate(const AnnotateArgs& a, Io io) {
  require_file(a.bank, "--bank");
  require_dir(a.features_dir, "--features-dir");
  if (!a.manifest.empty()) require_file(a.manifest, "--manifest");
  if (!a.truth.empty()) require_file(a.truth, "--truth");
  const std::size_t res = check_resolution(a.resolution);
  const fs::path out = prepare_out(a.out);

  const BankManifest manifest = load_bank_manifest(a.bank);
  if ((manifest.height && *manifest.height != res) || (manifest.width && *manifest.width != res)) {
    throw UsageError("bank resolution differs from --resolution " + std::to_string(res));
  }
  const SourceBank bank = load_source_bank(manifest, res, res);
  const std::vector<TargetRef> targets = collect_targets(a);
  if (targets.empty()) throw UsageError("no targets found in " + a.features_dir.string());

  const auto start = std::chrono::steady_clock::now();
  std::vector<AnnotationOutcome> outcomes;
  std::ofstream jsonl(out / "predictions.jsonl", std::ios::binary);
  if (!jsonl) throw Error("cannot write " + (out / "predictions.jsonl").string());
  std::size_t failed = 0;
  annotate_dataset(bank, targets, a.workers, [&](AnnotationOutcome o) {
    jsonl << to_json(o).dump() << '\n';
    if (!o.result) {
      ++failed;
      io.err << "annotate: " << o.image_id << ": " << o.error << "\n";
    }
    outcomes.push_back(std::move(o));
  });
  jsonl.close();
  if (!jsonl) throw Error("write failed: " + (out / "predictions.jsonl").string());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!a.truth.empty()) {
    evaluate_outcomes(outcomes, load_truth_pixels(a.truth, res), out / "evaluation.csv", io);
  }
  const json info = {{"targets", targets.size()},
                     {"succeeded", targets.size() - failed},
                     {"failed", failed},
                     {"sources", bank.size()},
                     {"resolution", res},
                     {"duration_s", seconds}};
  write_text(out / "run_info.json", info.dump(2) + "\n");
  io.out << "annotate: " << targets.size() - failed << " of " << targets.size()
         << " targets annotated in " << seconds << " s\n";
  return failed == targets.size() ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  fs::path predictions;
  fs::path truth;
  fs::path out;
  std::size_t resolution = 256;
};

int cmd_evaluate(const EvaluateArgs& a, Io io) {
  require_file(a.predictions, "--predictions");
  require_file(a.truth, "--truth");
  const std::size_t res = check_resolution(a.resolution);
  const fs::path out = prepare_out(a.out);
  std::ifstream in(a.predictions);
  std::vector<AnnotationOutcome> outcomes;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      outcomes.push_back(annotation_outcome_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(a.predictions.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  const std::size_t skipped =
      evaluate_outcomes(outcomes, load_truth_pixels(a.truth, res), out / "evaluation.csv", io);
  io.out << "evaluate: " << outcomes.size() << " predictions, " << skipped << " skipped\n";
  return skipped == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------- describe

struct BackendArgs {
  std::string backend;
  std::string endpoint = HttpBackendConfig{}.endpoint;
  std::string model = HttpBackendConfig{}.model;
  std::string auth_env = "OPENAI_API_KEY";
  long timeout_s = 120;
};

std::unique_ptr<VlmBackend> make_http_backend(const BackendArgs& b) {
  const char* token = std::getenv(b.auth_env.c_str());
  if (token == nullptr || *token == '\0') {
    throw UsageError("environment variable " + b.auth_env + " holds no API token");
  }
  HttpBackendConfig cfg;
  cfg.endpoint = b.endpoint;
  cfg.model = b.model;
  cfg.api_key = token;
  cfg.timeout = std::chrono::seconds(b.timeout_s);
  return std::make_unique<HttpBackend>(cfg);
}

struct DescribeArgs {
  fs::path manifest;
  fs::path images;
  fs::path store;
  fs::path out;
  std::vector<std::string> modes;
  BackendArgs backend;
  double temperature = 1.0;
  double rate = 0.0;
  std::size_t workers = 1;
  int max_attempts = 4;
};

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw Error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

int cmd_describe(const DescribeArgs& a, Io io) {
  require_file(a.manifest, "--manifest");
  if (!a.images.empty()) require_dir(a.images, "--images");
  if (a.workers == 0) throw UsageError("--workers must be at least 1");
  const fs::path out = prepare_out(a.out);

  std::vector<GroundingMode> modes;
  for (const auto& m : a.modes) {
    const auto mode = parse_mode(m);
    if (!mode) throw UsageError("unknown --mode " + m);
    modes.push_back(*mode);
  }
  if (modes.empty()) modes = {GroundingMode::ImOnly, GroundingMode::TxtGrounded,
                              GroundingMode::ImTxtGrounded};
  std::vector<DescriptionSpec> specs;
  for (GroundingMode m : modes) {
    for (const auto& s : all_specs(m, a.temperature)) {
      validate(s);
      specs.push_back(s);
    }
  }

  std::unique_ptr<VlmBackend> backend;
  if (a.backend.backend == "stub") {
    backend = std::make_unique<StubBackend>();
  } else if (a.backend.backend == "http") {
    backend = make_http_backend(a.backend);
  } else {
    throw UsageError("--backend must be http or stub");
  }

  std::vector<CampaignSample> samples;
  for (const auto& r : read_parameter_table(a.manifest)) {
    samples.push_back({r.image_id, labels_of(r)});
  }

  CampaignOptions options;
  options.workers = a.workers;
  options.retry.max_attempts = a.max_attempts;
  std::unique_ptr<RateLimiter> limiter;
  if (a.rate > 0.0) {
    limiter = std::make_unique<RateLimiter>(a.rate);
    options.rate_limiter = limiter.get();
  }
  if (!a.images.empty()) {
    const fs::path dir = a.images;
    options.image_provider = [dir](const CampaignSample& s) {
      for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        const fs::path p = dir / (s.image_id + ext);
        if (fs::exists(p)) return read_bytes(p);
      }
      throw Error("no image for " + s.image_id + " in " + dir.string());
    };
  } else if (a.backend.backend == "stub") {
    // the stub never decodes images; the id stands in for the pixels
    options.image_provider = [](const CampaignSample& s) {
      return std::vector<std::uint8_t>(s.image_id.begin(), s.image_id.end());
    };
  }

  CampaignStore store(a.store.empty() ? out / "campaign.jsonl" : a.store);
  const CampaignSummary sum = run_campaign(samples, specs, *backend, store, options);
  io.out << "describe: " << sum.succeeded << " generated, " << sum.failed << " failed, "
         << sum.skipped << " already done\n";
  return sum.failed == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------- metrics

struct MetricsArgs {
  fs::path store;
  fs::path manifest;
  fs::path out;
  std::uint64_t seed = 0;
  std::size_t pair_cap = kDefaultPairCap;
  std::size_t bucket_width = kDefaultBucketWidth;
  BackendArgs backend;
};

std::string fmt6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_metrics(const MetricsArgs& a, Io io) {
  const fs::path out = prepare_out(a.out);
  const fs::path store = a.store.empty() ? out / "campaign.jsonl" : a.store;
  require_file(store, "--store");
  if (!a.manifest.empty()) require_file(a.manifest, "--manifest");
  if (a.pair_cap < 2) throw UsageError("--pair-cap must be at least 2");
  if (a.bucket_width == 0) throw UsageError("--bucket-width must be positive");

  std::vector<CampaignRecord> records;
  for (auto& r : load_campaign_records(store)) {
    if (r.description) records.push_back(std::move(r));
  }
  if (records.empty()) throw UsageError("campaign store holds no descriptions: " + store.string());

  std::vector<std::pair<GroupKey, std::string>> items;
  for (const auto& r : records) {
    items.push_back({GroupKey{std::string(to_string(r.spec.mode)),
                              std::string(to_string(r.spec.length)),
                              std::string(to_string(r.spec.character)),
                              std::string(to_string(r.spec.style))},
                     *r.description});
  }
  const DiversityReport report =
      build_diversity_report(items, a.seed, a.pair_cap, a.bucket_width);
  emit_report(report, out / "diversity.csv", out / "diversity_hist.json");

  int status = kExitOk;
  if (!a.manifest.empty()) {
    if (a.backend.backend.empty()) throw UsageError("the accuracy pass needs --backend");
    std::map<std::string, GroundTruthLabels> truth;
    for (const auto& r : read_parameter_table(a.manifest)) truth[r.image_id] = labels_of(r);
    std::unique_ptr<VlmBackend> http;
    if (a.backend.backend == "http") {
      http = make_http_backend(a.backend);
    } else if (a.backend.backend != "stub") {
      throw UsageError("--backend must be http or stub");
    }

    struct Tally {
      std::size_t n = 0;
      std::size_t errors = 0;
      std::array<std::size_t, 6> misses{};
    };
    std::map<GroupKey, Tally> tallies;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      const auto t = truth.find(r.image_id);
      if (t == truth.end()) {
        io.err << "metrics: no labels for " << r.image_id << "\n";
        ++failures;
        continue;
      }
      try {
        EchoClassifierBackend echo(t->second);
        VlmBackend& classifier = http ? *http : static_cast<VlmBackend&>(echo);
        const AccuracyResult acc = classify_accuracy(*r.description, t->second, classifier);
        Tally& tally = tallies[items[i].first];
        ++tally.n;
        tally.errors += static_cast<std::size_t>(acc.error_count);
        for (std::size_t k = 0; k < acc.matches.size(); ++k) {
          if (!acc.matches[k]) ++tally.misses[k];
        }
      } catch (const Error& e) {
        io.err << "metrics: " << r.image_id << ": " << e.what() << "\n";
        ++failures;
      }
    }
    std::string csv = "mode,length,character,style,descriptions,mean_error_count";
    for (auto key : kLabelKeys) csv += ",error_rate_" + std::string(key);
    csv += '\n';
    for (const auto& [key, t] : tallies) {
      CsvRow row = {key.mode, key.length, key.character, key.style, std::to_string(t.n),
                    fmt6(static_cast<double>(t.errors) / static_cast<double>(t.n))};
      for (std::size_t m : t.misses) {
        row.push_back(fmt6(static_cast<double>(m) / static_cast<double>(t.n)));
      }
      csv += csv_join(row) + '\n';
    }
    write_text(out / "accuracy.csv", csv);
    if (failures > 0) status = kExitPartial;
  }
  io.out << "metrics: " << records.size() << " descriptions in " << report.groups.size()
         << " groups\n";
  return status;
}

void add_backend_options(CLI::App* sub, BackendArgs& b) {
  with_env(sub->add_option("--backend", b.backend, "http or stub")
               ->check(CLI::IsMember({"http", "stub"})));
  with_env(sub->add_option("--endpoint", b.endpoint, "chat-completions URL"));
  with_env(sub->add_option("--model", b.model, "model name"));
  with_env(sub->add_option("--auth-env", b.auth_env,
                           "environment variable holding the API token"));
  with_env(sub->add_option("--timeout", b.timeout_s, "request timeout in seconds")
               ->check(CLI::PositiveNumber));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Io io{out, err};
  CLI::App app{"geoannot: dataset curation, keypoint transfer and description tooling"};
  app.require_subcommand(1);
  fs::path config;
  with_env(app.add_option("--config", config, "JSON file of option defaults"));

  CurateArgs curate;
  auto* c = app.add_subcommand("curate", "derive categories, scale and variance report");
  with_env(c->add_option("--manifest", curate.manifest, "raw parameter table (CSV)"));
  with_env(c->add_option("--exclude", curate.exclude, "exclusion list"));
  with_env(c->add_option("--geometry", curate.geometry, "geometry records (JSON, mm)"));
  with_env(c->add_option("--out", curate.out, "output directory"));
  with_env(c->add_option("--resolution", curate.resolution, "256 or 2048"));
  with_env(c->add_flag("--published-averages", curate.published_averages,
                       "classify tubes against the published dataset averages"));

  AnnotateArgs annotate;
  auto* an = app.add_subcommand("annotate", "transfer keypoints from a source bank");
  with_env(an->add_option("--bank", annotate.bank, "source bank manifest (JSON)"));
  with_env(an->add_option("--features-dir", annotate.features_dir, "target GBFM directory"));
  with_env(an->add_option("--manifest", annotate.manifest, "restrict targets to these ids"));
  with_env(an->add_option("--truth", annotate.truth, "ground-truth geometry (JSON, mm)"));
  with_env(an->add_option("--out", annotate.out, "output directory"));
  with_env(an->add_option("--resolution", annotate.resolution, "256 or 2048"));
  with_env(an->add_option("--workers", annotate.workers, "0 = hardware concurrency"));

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "score predictions against ground truth");
  with_env(ev->add_option("--predictions", evaluate.predictions, "predictions.jsonl"));
  with_env(ev->add_option("--truth", evaluate.truth, "ground-truth geometry (JSON, mm)"));
  with_env(ev->add_option("--out", evaluate.out, "output directory"));
  with_env(ev->add_option("--resolution", evaluate.resolution, "256 or 2048"));

  DescribeArgs describe;
  auto* d = app.add_subcommand("describe", "generate descriptions into a resumable store");
  with_env(d->add_option("--manifest", describe.manifest, "curated manifest (CSV)"));
  with_env(d->add_option("--images", describe.images, "directory of <image_id>.png"));
  with_env(d->add_option("--store", describe.store, "campaign store (default OUT/campaign.jsonl)"));
  with_env(d->add_option("--out", describe.out, "output directory"));
  with_env(d->add_option("--mode", describe.modes, "grounding modes (default: all)")
               ->check(CLI::IsMember({"im-only", "txt-grounded", "im-txt-grounded"})));
  with_env(d->add_option("--temperature", describe.temperature, "sampling temperature"));
  with_env(d->add_option("--rate", describe.rate, "max requests per second, 0 = unlimited"));
  with_env(d->add_option("--workers", describe.workers, "concurrent requests"));
  with_env(d->add_option("--max-attempts", describe.max_attempts, "attempts per request")
               ->check(CLI::PositiveNumber));
  add_backend_options(d, describe.backend);

  MetricsArgs metrics;
  auto* m = app.add_subcommand("metrics", "diversity and label-accuracy reports");
  with_env(m->add_option("--store", metrics.store, "campaign store (default OUT/campaign.jsonl)"));
  with_env(m->add_option("--manifest", metrics.manifest, "labels for the accuracy pass"));
  with_env(m->add_option("--out", metrics.out, "output directory"));
  with_env(m->add_option("--seed", metrics.seed, "subsampling seed"));
  with_env(m->add_option("--pair-cap", metrics.pair_cap, "unique strings per group"));
  with_env(m->add_option("--bucket-width", metrics.bucket_width, "histogram bucket width"));
  add_backend_options(m, metrics.backend);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config.empty()) apply_config(*sub, config);
    if (sub == c) return cmd_curate(curate, io);
    if (sub == an) return cmd_annotate(annotate, io);
    if (sub == ev) return cmd_evaluate(evaluate, io);
    if (sub == d) {
      if (describe.backend.backend.empty()) throw UsageError("--backend is required");
      return cmd_describe(describe, io);
    }
    return cmd_metrics(metrics, io);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    // fatal module errors abort the run; 1 is reserved for per-item failures
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace geoannot
