#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "writing_path/checkeval.hpp"
#include "writing_path/config.hpp"
#include "writing_path/domain.hpp"
#include "writing_path/pipeline.hpp"
#include "writing_path/providers.hpp"

namespace writing_path {

// ---------------------------------------------------------------------------
// Seeds

/// Line-delimited JSON {id, domain, title?, body, source_url?}.  Blank lines
/// are skipped.  Throws IngestError(line, reason) with reason one of
/// invalid_json, missing_field, empty_id, empty_body, unknown_domain,
/// duplicate_id.
std::vector<SeedPost> ingest_seeds(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Providers

/// Counts calls that reach the underlying provider.
class CountingLlm final : public LlmProvider {
public:
  explicit CountingLlm(LlmProvider& inner) : inner_(inner) {}
  CompletionResult complete(const CompletionRequest& request) override {
    ++calls_;
    return inner_.complete(request);
  }
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  LlmProvider& inner_;
  std::atomic<std::size_t> calls_{0};
};

class CountingSearch final : public SearchProvider {
public:
  explicit CountingSearch(SearchProvider& inner) : inner_(inner) {}
  std::vector<RetrievedDocument> search(const SearchQuery& query) override {
    ++calls_;
    return inner_.search(query);
  }
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  SearchProvider& inner_;
  std::atomic<std::size_t> calls_{0};
};

/// Owns the provider chain for a run: scripted fixtures (or live HTTP from
/// the environment), a call counter, and an optional response cache.
class ProviderStack {
public:
  ProviderStack(std::unique_ptr<LlmProvider> llm, std::unique_ptr<SearchProvider> search,
                const std::optional<std::filesystem::path>& cache_dir);

  /// Scripted when `scripted` is set, otherwise HttpLlm/HttpSearch from env.
  static ProviderStack from_config(const ExperimentConfig& config);

  LlmProvider& llm() noexcept { return cached_llm_ ? static_cast<LlmProvider&>(*cached_llm_) : *counting_llm_; }
  SearchProvider& search() noexcept {
    return cached_search_ ? static_cast<SearchProvider&>(*cached_search_) : *counting_search_;
  }
  /// Calls that reached the scripted or live provider (cache misses).
  std::size_t live_llm_calls() const noexcept { return counting_llm_->calls(); }
  std::size_t live_search_calls() const noexcept { return counting_search_->calls(); }

private:
  std::unique_ptr<LlmProvider> base_llm_;
  std::unique_ptr<SearchProvider> base_search_;
  std::unique_ptr<CountingLlm> counting_llm_;
  std::unique_ptr<CountingSearch> counting_search_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<CachingLlm> cached_llm_;
  std::unique_ptr<CachingSearch> cached_search_;
};

// ---------------------------------------------------------------------------
// Run records

struct FailureRecord {
  std::string seed_id;
  RunMode mode = RunMode::meta;
  std::string error;
  std::optional<PipelineTrace> partial;
};

enum class OutlineType { initial, augmented };
std::string to_string(OutlineType t);

struct OutlineReport {
  std::string seed_id;
  OutlineType outline_type = OutlineType::initial;
  std::string model_id;
  Domain domain = Domain::other;
  std::optional<double> nli;
  std::optional<double> uci;
  std::optional<double> npmi;
  std::optional<double> topic_diversity;
  std::optional<double> self_bleu;
  std::vector<std::string> diagnostics;

  bool operator==(const OutlineReport&) const = default;
};

struct ScorecardRecord {
  std::string seed_id;
  RunMode mode = RunMode::meta;
  std::string model_id;
  Domain domain = Domain::other;
  WritingScorecard scorecard;

  bool operator==(const ScorecardRecord&) const = default;
};

struct Diagnostic {
  std::string seed_id;
  std::string item;  // "scorecard:<mode>" or "outline:<type>:<metric>"
  std::string message;
};

struct ExperimentRun {
  ExperimentConfig config;  // snapshot taken at start
  std::vector<SeedPost> seeds;
  std::vector<PipelineTrace> traces;  // seed file order, then meta, init, aug
  std::vector<FailureRecord> failures;
  std::vector<OutlineReport> outline_reports;
  std::vector<ScorecardRecord> scorecards;
  std::vector<Diagnostic> diagnostics;

  const SeedPost* seed(const std::string& id) const;
};

// Files under output_dir.
namespace run_files {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kSeeds = "seeds.jsonl";
inline constexpr const char* kTraces = "traces/traces.jsonl";
inline constexpr const char* kFailures = "traces/failures.jsonl";
inline constexpr const char* kOutlineMetrics = "metrics/outline_metrics.jsonl";
inline constexpr const char* kDiagnostics = "metrics/diagnostics.jsonl";
inline constexpr const char* kScorecards = "scorecards/scorecards.jsonl";
inline constexpr const char* kReports = "reports";
}  // namespace run_files

/// Runs every seed in every configured mode.  Steps 1 and 2 run once per
/// seed and are shared by its modes.  Traces and failures are appended to
/// disk as they complete, then rewritten in canonical order.
ExperimentRun run_experiment(const ExperimentConfig& config, LlmProvider& llm, SearchProvider& search,
                             const TemplateSet& templates);

/// Reads a run directory written by run_experiment (and evaluate_run when
/// present).
ExperimentRun load_run(const std::filesystem::path& dir);

/// Outline metrics for every initial and augmented outline (deduplicated
/// per seed and type) and a scorecard for every composed document.
/// Per-item failures land in diagnostics.  Results are persisted.
void evaluate_run(ExperimentRun& run, LlmProvider& judge, const TemplateSet& templates, const Checklist& checklist);

// ---------------------------------------------------------------------------
// Reports

struct WritingAggregate {
  std::string model_id;
  std::optional<Domain> domain;
  RunMode mode = RunMode::meta;
  std::size_t count = 0;
  std::map<AspectName, double> aspect_means;
  double overall = 0.0;
};

struct MetricMean {
  double mean = 0.0;
  std::size_t count = 0;
};

struct OutlineAggregate {
  std::string model_id;
  std::optional<Domain> domain;
  OutlineType outline_type = OutlineType::initial;
  std::size_t count = 0;
  std::optional<MetricMean> nli, uci, npmi, topic_diversity, self_bleu;
};

/// Means per (model, mode) or, with by_domain, per (model, domain, mode).
/// overall is overall_score of the aspect means.
std::vector<WritingAggregate> aggregate_scorecards(const std::vector<ScorecardRecord>& records, bool by_domain);
std::vector<OutlineAggregate> aggregate_outlines(const std::vector<OutlineReport>& reports, bool by_domain);

enum class ReportFormat { tsv, markdown };
std::optional<ReportFormat> parse_report_format(std::string_view s);

/// Half-up (away from zero) to two decimals.
std::string format_score(double value);

/// Writes writing_scores, writing_scores_by_domain, outline_metrics and
/// outline_metrics_by_domain under output_dir/reports.  Returns the paths.
/// Throws ReportError(nothing_to_report) when no evaluations exist.
std::vector<std::filesystem::path> emit_report(const ExperimentRun& run, ReportFormat format);

// ---------------------------------------------------------------------------
// Human alignment

struct AlignedRow {
  std::string seed_id;
  RunMode mode = RunMode::meta;
  std::string rater_id;
  int overall_binary = 0;
  std::map<std::string, double> scores;  // column -> value used for tau
};

struct UnmatchedRow {
  std::size_t line = 0;
  std::string seed_id;
  std::string mode;
};

struct AlignmentResult {
  std::vector<AlignedRow> rows;
  std::vector<UnmatchedRow> unmatched;
  /// Kendall tau of each score column against overall_binary; nullopt when
  /// a side is constant.
  std::map<std::string, std::optional<double>> tau;
};

/// Joins human rows to successful traces by (seed_id, mode).  Aspect values
/// come from the CSV when it has the column, else from the run's scorecard.
/// Throws AlignError on a malformed CSV, an out-of-range outline score, or
/// when more than config.align_max_unmatched of the rows are unmatched.
AlignmentResult align_human_scores(const ExperimentRun& run, const std::filesystem::path& csv_path);

/// RFC 4180 style: quoted fields, doubled quotes, CRLF tolerated.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

}  // namespace writing_path
