#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "writing_path/domain.hpp"
#include "writing_path/prompt_kit.hpp"
#include "writing_path/providers.hpp"

namespace writing_path {

struct PipelineConfig {
  std::string model_id = "gpt-4";
  /// Per-stage sampling temperature; stages not listed use 0.7 for the
  /// generation stages and 0.0 for the judge stages.
  std::map<Stage, double> temperatures;
  int max_tokens = 2048;
  /// On SearchError(no_results) continue with an empty KeywordSet instead
  /// of aborting the run.
  bool soft_fail_search = false;
  /// Number of section drafts requested concurrently (1 = sequential).
  std::size_t draft_concurrency = 1;
  /// Ordinal written into the step-5 prompt for section i is
  /// ordinal(i - 1 + paragraph_ordinal_base).
  int paragraph_ordinal_base = 1;

  double temperature(Stage stage) const;
};

struct Providers {
  LlmProvider& llm;
  SearchProvider& search;
  const TemplateSet& templates;
};

/// Provider access for one run.  Every completion and search made through
/// a session is appended to its logs, and elapsed time is accumulated per
/// stage.
class Session {
public:
  Session(Providers providers, const PipelineConfig& config) : providers_(providers), config_(config) {}

  std::string complete(Stage stage, const std::string& prompt);
  RetrievedDocument search_top1(const std::string& query);
  std::string render(Stage stage, const BindingMap& bindings) const;
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

  /// A session over the same providers with empty logs.
  Session fork() const { return Session(providers_, config_); }
  /// Appends another session's logs after this one's.
  void absorb(Session&& other);

  const PipelineConfig& config() const noexcept { return config_; }
  std::vector<PromptLogEntry>& prompt_log() noexcept { return prompt_log_; }
  std::vector<SearchLogEntry>& search_log() noexcept { return search_log_; }
  std::vector<std::string>& warnings() noexcept { return warnings_; }
  std::map<std::string, double>& timing_ms() noexcept { return timing_ms_; }

private:
  Providers providers_;
  const PipelineConfig& config_;
  std::vector<PromptLogEntry> prompt_log_;
  std::vector<SearchLogEntry> search_log_;
  std::vector<std::string> warnings_;
  std::map<std::string, double> timing_ms_;
};

// The five steps.  Each renders its stage template, completes through the
// session and parses the result; provider and parse errors propagate.

Metadata prepare_metadata(const SeedPost& seed, Session& session);

TitledOutline generate_title_and_outline(const Metadata& metadata, Session& session);

struct BrowseResult {
  std::optional<RetrievedDocument> document;
  KeywordSet keywords;
};

/// Searches with the title verbatim and extracts keywords from the top
/// result.  With soft_fail_search, no_results yields an empty KeywordSet.
BrowseResult browse(const std::string& title, Session& session);

/// Tolerates rephrased headers; a section-count change or a result with no
/// subheaders is recorded as a session warning.
Outline augment_outline(const std::string& title, const KeywordSet& keywords, const Outline& initial,
                        Session& session);

/// Drafts section `section_index` (1-based).  Throws IndexError when out of
/// range.  Blank lines in the completion are collapsed.
SectionDraft write_section(const std::string& title, const Outline& outline, std::size_t section_index,
                           const Metadata& metadata, Session& session);

/// Single drafting call for meta mode: the step-5 template with the outline
/// slots bound to the metadata block.
SectionDraft write_from_metadata(const Metadata& metadata, Session& session);

/// Throws InvalidInput on empty drafts or indices that are not exactly 1..n.
ComposedDocument compose_document(const std::string& title, std::vector<SectionDraft> drafts);

/// Step 1 (and optionally step 2) results that can be shared by several
/// modes of the same seed.
struct RunPrefix {
  Metadata metadata;
  std::optional<TitledOutline> titled;
  std::vector<PromptLogEntry> prompt_log;
  std::map<std::string, double> timing_ms;
};

/// Runs step 1, plus step 2 when with_outline.  Throws on failure.
RunPrefix prepare_prefix(const SeedPost& seed, bool with_outline, Providers providers,
                         const PipelineConfig& config);

struct RunOutcome {
  PipelineTrace trace;  // partial when error is set
  std::optional<std::string> error;

  bool ok() const noexcept { return !error.has_value(); }
};

/// Executes one seed in one mode:
///   meta: step 1, then one drafting call from metadata
///   init: steps 1, 2, 5 (drafting from the initial outline)
///   aug:  steps 1-5
/// `reuse` supplies already computed step 1/2 artifacts.  The first error
/// stops the run; the outcome then carries the partial trace.
RunOutcome run_writing_path(const SeedPost& seed, RunMode mode, Providers providers,
                            const PipelineConfig& config, const RunPrefix* reuse = nullptr);

}  // namespace writing_path
