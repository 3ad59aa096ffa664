#include "writing_path/domain.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

using nlohmann::json;

std::string to_string(Domain d) {
  switch (d) {
    case Domain::beauty: return "beauty";
    case Domain::travel: return "travel";
    case Domain::gardening: return "gardening";
    case Domain::cooking: return "cooking";
    case Domain::it: return "it";
    case Domain::other: return "other";
  }
  return "other";
}

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::meta: return "meta";
    case RunMode::init: return "init";
    case RunMode::aug: return "aug";
  }
  return "aug";
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::s1_metadata: return "s1_metadata";
    case Stage::s2_title_outline: return "s2_title_outline";
    case Stage::s3_keywords: return "s3_keywords";
    case Stage::s4_augment: return "s4_augment";
    case Stage::s5_write: return "s5_write";
    case Stage::eval_writing: return "eval_writing";
    case Stage::eval_nli: return "eval_nli";
  }
  return "s1_metadata";
}

std::optional<Domain> parse_domain(std::string_view s) {
  for (Domain d : kAllDomains)
    if (text::iequals(s, to_string(d))) return d;
  return std::nullopt;
}

std::optional<RunMode> parse_run_mode(std::string_view s) {
  for (RunMode m : kAllModes)
    if (s == to_string(m)) return m;
  return std::nullopt;
}

std::optional<Stage> parse_stage(std::string_view s) {
  for (Stage st : {Stage::s1_metadata, Stage::s2_title_outline, Stage::s3_keywords, Stage::s4_augment,
                   Stage::s5_write, Stage::eval_writing, Stage::eval_nli})
    if (s == to_string(st)) return st;
  return std::nullopt;
}

bool Outline::header_only() const noexcept {
  for (const auto& s : sections)
    if (!s.subheaders.empty()) return false;
  return true;
}

void validate_seed(const SeedPost& seed) {
  if (seed.id.empty()) throw InvalidInput("seed id is empty");
  if (text::trim(seed.body).empty()) throw InvalidInput("seed " + seed.id + " has an empty body");
}

void validate_metadata(const Metadata& m) {
  if (text::trim(m.purpose).empty()) throw InvalidInput("metadata purpose is empty");
  if (text::trim(m.post_type).empty()) throw InvalidInput("metadata type is empty");
  if (text::trim(m.style).empty()) throw InvalidInput("metadata style is empty");
  if (m.keywords.empty()) throw InvalidInput("metadata keywords are empty");
  std::set<std::string> seen;
  for (const auto& k : m.keywords) {
    if (text::trim(k).empty()) throw InvalidInput("metadata keyword is empty");
    if (!seen.insert(text::fold_case(k)).second)
      throw InvalidInput("duplicate metadata keyword '" + k + "'");
  }
}

void validate_outline(const Outline& o) {
  if (o.sections.empty()) throw InvalidInput("outline has no sections");
  for (std::size_t i = 0; i < o.sections.size(); ++i) {
    const auto& s = o.sections[i];
    if (text::trim(s.header).empty())
      throw InvalidInput("outline section " + std::to_string(i + 1) + " has an empty header");
    std::set<std::string> seen;
    for (const auto& sub : s.subheaders) {
      if (text::trim(sub).empty())
        throw InvalidInput("outline section " + std::to_string(i + 1) + " has an empty subheader");
      if (!seen.insert(sub).second)
        throw InvalidInput("outline section " + std::to_string(i + 1) + " repeats subheader '" +
                           sub + "'");
    }
  }
}

std::vector<std::string> validate_trace(const PipelineTrace& trace) {
  std::vector<std::string> out;
  const std::string mode = to_string(trace.mode);
  auto expect = [&](bool present, bool wanted, const char* name) {
    if (present && !wanted) out.push_back(std::string(name) + " present in " + mode + " mode");
    if (!present && wanted) out.push_back(std::string(name) + " absent in " + mode + " mode");
  };
  const bool outlines = trace.mode != RunMode::meta;
  const bool browsing = trace.mode == RunMode::aug;
  bool search_soft_failed = false;
  for (const auto& s : trace.search_log)
    if (s.error) search_soft_failed = true;

  expect(trace.title.has_value(), outlines, "title");
  expect(trace.initial_outline.has_value(), outlines, "initial_outline");
  if (!(browsing && search_soft_failed && !trace.retrieved))
    expect(trace.retrieved.has_value(), browsing, "retrieved");
  expect(trace.keywords.has_value(), browsing, "keywords");
  expect(trace.augmented_outline.has_value(), browsing, "augmented_outline");
  if (!trace.document) out.push_back("document absent");
  return out;
}

std::string join_drafts(const std::vector<SectionDraft>& drafts) {
  std::string out;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    if (i) out += "\n\n";
    out += drafts[i].text;
  }
  return out;
}

std::vector<std::string> split_composed(std::string_view full_text) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = full_text.find("\n\n", start);
    if (pos == std::string_view::npos) {
      parts.emplace_back(full_text.substr(start));
      break;
    }
    parts.emplace_back(full_text.substr(start, pos - start));
    start = pos + 2;
  }
  return parts;
}

namespace {

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
  else j[key] = nullptr;
}

template <typename T>
void get_optional(const json& j, const char* key, std::optional<T>& v) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) v.reset();
  else v = it->get<T>();
}

}  // namespace

void to_json(json& j, const SeedPost& v) {
  j = json{{"id", v.id}, {"domain", to_string(v.domain)}, {"title", v.title}, {"body", v.body}};
  put_optional(j, "source_url", v.source_url);
}

void from_json(const json& j, SeedPost& v) {
  j.at("id").get_to(v.id);
  auto d = parse_domain(j.at("domain").get<std::string>());
  if (!d) throw InvalidInput("unknown domain '" + j.at("domain").get<std::string>() + "'");
  v.domain = *d;
  v.title = j.value("title", std::string{});
  j.at("body").get_to(v.body);
  get_optional(j, "source_url", v.source_url);
}

void to_json(json& j, const Metadata& v) {
  j = json{{"purpose", v.purpose},
           {"post_type", v.post_type},
           {"style", v.style},
           {"keywords", v.keywords},
           {"extras", v.extras}};
}

void from_json(const json& j, Metadata& v) {
  j.at("purpose").get_to(v.purpose);
  j.at("post_type").get_to(v.post_type);
  j.at("style").get_to(v.style);
  j.at("keywords").get_to(v.keywords);
  v.extras.clear();
  if (auto it = j.find("extras"); it != j.end() && !it->is_null()) it->get_to(v.extras);
}

void to_json(json& j, const OutlineSection& v) {
  j = json{{"header", v.header}, {"subheaders", v.subheaders}};
}

void from_json(const json& j, OutlineSection& v) {
  j.at("header").get_to(v.header);
  j.at("subheaders").get_to(v.subheaders);
}

void to_json(json& j, const Outline& v) { j = json{{"sections", v.sections}}; }

void from_json(const json& j, Outline& v) { j.at("sections").get_to(v.sections); }

void to_json(json& j, const KeywordSet& v) {
  j = json{{"keywords", v.keywords}, {"provenance", v.provenance}};
}

void from_json(const json& j, KeywordSet& v) {
  j.at("keywords").get_to(v.keywords);
  j.at("provenance").get_to(v.provenance);
}

void to_json(json& j, const RetrievedDocument& v) {
  j = json{{"id", v.id}, {"query", v.query}, {"title", v.title}, {"body", v.body}, {"rank", v.rank}};
}

void from_json(const json& j, RetrievedDocument& v) {
  v.id = j.value("id", std::string{});
  v.query = j.value("query", std::string{});
  j.at("title").get_to(v.title);
  j.at("body").get_to(v.body);
  v.rank = j.value("rank", 1);
}

void to_json(json& j, const SectionDraft& v) {
  j = json{{"section_index", v.section_index}, {"text", v.text}};
}

void from_json(const json& j, SectionDraft& v) {
  j.at("section_index").get_to(v.section_index);
  j.at("text").get_to(v.text);
}

void to_json(json& j, const ComposedDocument& v) {
  j = json{{"title", v.title}, {"drafts", v.drafts}, {"full_text", v.full_text}};
}

void from_json(const json& j, ComposedDocument& v) {
  j.at("title").get_to(v.title);
  j.at("drafts").get_to(v.drafts);
  j.at("full_text").get_to(v.full_text);
}

void to_json(json& j, const PromptLogEntry& v) {
  j = json{{"stage", to_string(v.stage)}, {"prompt", v.prompt}, {"completion", v.completion}};
}

void from_json(const json& j, PromptLogEntry& v) {
  auto st = parse_stage(j.at("stage").get<std::string>());
  if (!st) throw InvalidInput("unknown stage '" + j.at("stage").get<std::string>() + "'");
  v.stage = *st;
  j.at("prompt").get_to(v.prompt);
  j.at("completion").get_to(v.completion);
}

void to_json(json& j, const SearchLogEntry& v) {
  j = json{{"query", v.query}};
  put_optional(j, "document_id", v.document_id);
  put_optional(j, "error", v.error);
}

void from_json(const json& j, SearchLogEntry& v) {
  j.at("query").get_to(v.query);
  get_optional(j, "document_id", v.document_id);
  get_optional(j, "error", v.error);
}

void to_json(json& j, const PipelineTrace& v) {
  j = json{{"seed_id", v.seed_id},
           {"mode", to_string(v.mode)},
           {"model_id", v.model_id},
           {"metadata", v.metadata},
           {"prompt_log", v.prompt_log},
           {"search_log", v.search_log},
           {"warnings", v.warnings},
           {"timing_ms", v.timing_ms}};
  put_optional(j, "title", v.title);
  put_optional(j, "initial_outline", v.initial_outline);
  put_optional(j, "retrieved", v.retrieved);
  put_optional(j, "keywords", v.keywords);
  put_optional(j, "augmented_outline", v.augmented_outline);
  put_optional(j, "document", v.document);
}

void from_json(const json& j, PipelineTrace& v) {
  j.at("seed_id").get_to(v.seed_id);
  auto mode = parse_run_mode(j.at("mode").get<std::string>());
  if (!mode) throw InvalidInput("unknown mode '" + j.at("mode").get<std::string>() + "'");
  v.mode = *mode;
  v.model_id = j.value("model_id", std::string{});
  j.at("metadata").get_to(v.metadata);
  get_optional(j, "title", v.title);
  get_optional(j, "initial_outline", v.initial_outline);
  get_optional(j, "retrieved", v.retrieved);
  get_optional(j, "keywords", v.keywords);
  get_optional(j, "augmented_outline", v.augmented_outline);
  get_optional(j, "document", v.document);
  j.at("prompt_log").get_to(v.prompt_log);
  v.search_log = j.value("search_log", std::vector<SearchLogEntry>{});
  v.warnings = j.value("warnings", std::vector<std::string>{});
  v.timing_ms = j.value("timing_ms", std::map<std::string, double>{});
}

std::string serialize_trace(const PipelineTrace& trace, bool include_timing) {
  json j = trace;
  if (!include_timing) j.erase("timing_ms");
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

PipelineTrace deserialize_trace(std::string_view line) {
  return json::parse(line).get<PipelineTrace>();
}

}  // namespace writing_path
