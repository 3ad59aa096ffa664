#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace writing_path {

enum class Domain { beauty, travel, gardening, cooking, it, other };

/// Ablation modes: write from metadata only, from the initial outline, or
/// through the full pipeline with the augmented outline.
enum class RunMode { meta, init, aug };

enum class Stage {
  s1_metadata,
  s2_title_outline,
  s3_keywords,
  s4_augment,
  s5_write,
  eval_writing,
  eval_nli,
};

std::string to_string(Domain d);
std::string to_string(RunMode m);
std::string to_string(Stage s);
std::optional<Domain> parse_domain(std::string_view s);
std::optional<RunMode> parse_run_mode(std::string_view s);
std::optional<Stage> parse_stage(std::string_view s);

inline constexpr RunMode kAllModes[] = {RunMode::meta, RunMode::init, RunMode::aug};
inline constexpr Domain kAllDomains[] = {Domain::beauty,  Domain::travel, Domain::gardening,
                                         Domain::cooking, Domain::it,     Domain::other};

struct SeedPost {
  std::string id;
  Domain domain = Domain::other;
  std::string title;
  std::string body;
  std::optional<std::string> source_url;

  bool operator==(const SeedPost&) const = default;
};

struct Metadata {
  std::string purpose;
  std::string post_type;
  std::string style;
  std::vector<std::string> keywords;
  /// Labelled lines outside the four core fields (e.g. "expected reader").
  std::map<std::string, std::string> extras;

  bool operator==(const Metadata&) const = default;
};

struct OutlineSection {
  std::string header;
  std::vector<std::string> subheaders;

  bool operator==(const OutlineSection&) const = default;
};

/// Ordered headers with ordered subheaders.  Section i (1-based) is
/// sections[i - 1].
struct Outline {
  std::vector<OutlineSection> sections;

  bool operator==(const Outline&) const = default;
  std::size_t size() const noexcept { return sections.size(); }
  bool header_only() const noexcept;
};

struct KeywordSet {
  std::vector<std::string> keywords;
  std::string provenance;

  bool operator==(const KeywordSet&) const = default;
};

struct RetrievedDocument {
  std::string id;
  std::string query;
  std::string title;
  std::string body;
  int rank = 1;

  bool operator==(const RetrievedDocument&) const = default;
};

struct SectionDraft {
  std::size_t section_index = 0;
  std::string text;

  bool operator==(const SectionDraft&) const = default;
};

struct ComposedDocument {
  std::string title;
  std::vector<SectionDraft> drafts;
  std::string full_text;

  bool operator==(const ComposedDocument&) const = default;
};

struct PromptLogEntry {
  Stage stage = Stage::s1_metadata;
  std::string prompt;
  std::string completion;

  bool operator==(const PromptLogEntry&) const = default;
};

struct SearchLogEntry {
  std::string query;
  std::optional<std::string> document_id;
  std::optional<std::string> error;

  bool operator==(const SearchLogEntry&) const = default;
};

/// Complete record of one run.  Built up by the pipeline, then treated as
/// an immutable value.
struct PipelineTrace {
  std::string seed_id;
  RunMode mode = RunMode::aug;
  std::string model_id;
  Metadata metadata;
  std::optional<std::string> title;
  std::optional<Outline> initial_outline;
  std::optional<RetrievedDocument> retrieved;
  std::optional<KeywordSet> keywords;
  std::optional<Outline> augmented_outline;
  std::optional<ComposedDocument> document;
  std::vector<PromptLogEntry> prompt_log;
  std::vector<SearchLogEntry> search_log;
  std::vector<std::string> warnings;
  std::map<std::string, double> timing_ms;

  bool operator==(const PipelineTrace&) const = default;
};

/// Throws InvalidInput unless the seed has a nonempty id and body.
void validate_seed(const SeedPost& seed);

/// Throws InvalidInput when a field is empty or keywords repeat (case-folded).
void validate_metadata(const Metadata& m);

/// Throws InvalidInput on an empty outline, an empty header, or a repeated
/// subheader within one section.
void validate_outline(const Outline& o);

/// Mode-dependent presence checks; returns one description per violation.
std::vector<std::string> validate_trace(const PipelineTrace& trace);

/// Joins draft texts in order with exactly one blank line.
std::string join_drafts(const std::vector<SectionDraft>& drafts);

/// Inverse of join_drafts for texts without blank lines.
std::vector<std::string> split_composed(std::string_view full_text);

// JSON records.  Field names follow the line-delimited record schema.
void to_json(nlohmann::json& j, const SeedPost& v);
void from_json(const nlohmann::json& j, SeedPost& v);
void to_json(nlohmann::json& j, const Metadata& v);
void from_json(const nlohmann::json& j, Metadata& v);
void to_json(nlohmann::json& j, const OutlineSection& v);
void from_json(const nlohmann::json& j, OutlineSection& v);
void to_json(nlohmann::json& j, const Outline& v);
void from_json(const nlohmann::json& j, Outline& v);
void to_json(nlohmann::json& j, const KeywordSet& v);
void from_json(const nlohmann::json& j, KeywordSet& v);
void to_json(nlohmann::json& j, const RetrievedDocument& v);
void from_json(const nlohmann::json& j, RetrievedDocument& v);
void to_json(nlohmann::json& j, const SectionDraft& v);
void from_json(const nlohmann::json& j, SectionDraft& v);
void to_json(nlohmann::json& j, const ComposedDocument& v);
void from_json(const nlohmann::json& j, ComposedDocument& v);
void to_json(nlohmann::json& j, const PromptLogEntry& v);
void from_json(const nlohmann::json& j, PromptLogEntry& v);
void to_json(nlohmann::json& j, const SearchLogEntry& v);
void from_json(const nlohmann::json& j, SearchLogEntry& v);
void to_json(nlohmann::json& j, const PipelineTrace& v);
void from_json(const nlohmann::json& j, PipelineTrace& v);

/// Single-line JSON record.  With include_timing=false the timing_ms field
/// is dropped, which makes scripted runs byte-comparable.
std::string serialize_trace(const PipelineTrace& trace, bool include_timing = true);
PipelineTrace deserialize_trace(std::string_view line);

}  // namespace writing_path
