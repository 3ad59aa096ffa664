#include "writing_path/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <thread>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

using Clock = std::chrono::steady_clock;

double PipelineConfig::temperature(Stage stage) const {
  if (auto it = temperatures.find(stage); it != temperatures.end()) return it->second;
  return (stage == Stage::eval_writing || stage == Stage::eval_nli) ? 0.0 : 0.7;
}

std::string Session::render(Stage stage, const BindingMap& bindings) const {
  return render_prompt(providers_.templates.get(stage), bindings);
}

std::string Session::complete(Stage stage, const std::string& prompt) {
  CompletionRequest req{prompt, config_.model_id, config_.temperature(stage), config_.max_tokens,
                        to_string(stage)};
  const auto start = Clock::now();
  auto result = providers_.llm.complete(req);
  timing_ms_[to_string(stage)] += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  prompt_log_.push_back({stage, prompt, result.text});
  return result.text;
}

RetrievedDocument Session::search_top1(const std::string& query) {
  const auto start = Clock::now();
  try {
    auto doc = writing_path::search_top1(providers_.search, SearchQuery{query, 1});
    search_log_.push_back({query, doc.id, std::nullopt});
    timing_ms_["s3_search"] += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return doc;
  } catch (const Error& e) {
    search_log_.push_back({query, std::nullopt, std::string(e.what())});
    timing_ms_["s3_search"] += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    throw;
  }
}

void Session::absorb(Session&& other) {
  for (auto& e : other.prompt_log_) prompt_log_.push_back(std::move(e));
  for (auto& e : other.search_log_) search_log_.push_back(std::move(e));
  for (auto& w : other.warnings_) warnings_.push_back(std::move(w));
  for (auto& [k, v] : other.timing_ms_) timing_ms_[k] += v;
}

// ---------------------------------------------------------------------------

Metadata prepare_metadata(const SeedPost& seed, Session& session) {
  validate_seed(seed);
  std::string blog = seed.title.empty() ? seed.body : seed.title + "\n" + seed.body;
  auto prompt = session.render(Stage::s1_metadata, {{slots::kBlogText, blog}});
  return parse_metadata_block(session.complete(Stage::s1_metadata, prompt));
}

TitledOutline generate_title_and_outline(const Metadata& metadata, Session& session) {
  validate_metadata(metadata);
  auto prompt = session.render(Stage::s2_title_outline, {{slots::kMetaData, format_metadata_block(metadata)}});
  return parse_title_and_initial_outline(session.complete(Stage::s2_title_outline, prompt));
}

BrowseResult browse(const std::string& title, Session& session) {
  if (text::trim(title).empty()) throw InvalidInput("browse title is empty");
  BrowseResult out;
  try {
    out.document = session.search_top1(title);
  } catch (const SearchError& e) {
    if (e.kind() != SearchErrorKind::no_results || !session.config().soft_fail_search) throw;
    session.warn("search returned no results for '" + title + "'; continuing with empty keywords");
    return out;
  }
  const auto& doc = *out.document;
  std::string doc_text = doc.title.empty() ? doc.body : doc.title + "\n" + doc.body;
  auto prompt = session.render(Stage::s3_keywords, {{slots::kRetrievedDocument, doc_text}});
  out.keywords = parse_keyword_list(session.complete(Stage::s3_keywords, prompt), doc.id);
  return out;
}

Outline augment_outline(const std::string& title, const KeywordSet& keywords, const Outline& initial,
                        Session& session) {
  validate_outline(initial);
  auto prompt = session.render(Stage::s4_augment, {{slots::kTitle, title},
                                                   {slots::kAdditionalInfo, text::join(keywords.keywords, ", ")},
                                                   {slots::kInitialOutline, format_outline(initial)}});
  auto outline = parse_augmented_outline(session.complete(Stage::s4_augment, prompt));
  if (outline.size() != initial.size())
    session.warn("section count mismatch: initial " + std::to_string(initial.size()) + ", augmented " +
                 std::to_string(outline.size()));
  if (outline.header_only()) session.warn("no augmentation detected");
  return outline;
}

namespace {

SectionDraft finish_draft(std::size_t index, const std::string& completion) {
  auto text = text::collapse_blank_lines(completion);
  if (text.empty())
    throw ProviderError(ProviderErrorKind::malformed_response,
                        "empty draft for section " + std::to_string(index));
  return {index, std::move(text)};
}

std::string paragraph_ordinal(const PipelineConfig& config, std::size_t section_index) {
  return text::ordinal(static_cast<long>(section_index) - 1 + config.paragraph_ordinal_base);
}

}  // namespace

SectionDraft write_section(const std::string& title, const Outline& outline, std::size_t section_index,
                           const Metadata& metadata, Session& session) {
  if (section_index < 1 || section_index > outline.size()) throw IndexError(section_index, outline.size());
  auto prompt = session.render(Stage::s5_write,
                               {{slots::kParagraphOrdinal, paragraph_ordinal(session.config(), section_index)},
                                {slots::kAugmentedOutline, format_outline(outline)},
                                {slots::kMetaData, format_metadata_block(metadata)},
                                {slots::kTitle, title},
                                {slots::kCurrentSection, format_section(outline, section_index)}});
  return finish_draft(section_index, session.complete(Stage::s5_write, prompt));
}

SectionDraft write_from_metadata(const Metadata& metadata, Session& session) {
  const auto block = format_metadata_block(metadata);
  auto prompt = session.render(Stage::s5_write, {{slots::kParagraphOrdinal, paragraph_ordinal(session.config(), 1)},
                                                 {slots::kAugmentedOutline, block},
                                                 {slots::kMetaData, block},
                                                 {slots::kTitle, ""},
                                                 {slots::kCurrentSection, block}});
  return finish_draft(1, session.complete(Stage::s5_write, prompt));
}

ComposedDocument compose_document(const std::string& title, std::vector<SectionDraft> drafts) {
  if (drafts.empty()) throw InvalidInput("no drafts to compose");
  std::sort(drafts.begin(), drafts.end(),
            [](const SectionDraft& a, const SectionDraft& b) { return a.section_index < b.section_index; });
  for (std::size_t i = 0; i < drafts.size(); ++i)
    if (drafts[i].section_index != i + 1) throw InvalidInput("gap_in_indices");
  ComposedDocument doc;
  doc.title = title;
  doc.full_text = join_drafts(drafts);
  doc.drafts = std::move(drafts);
  return doc;
}

namespace {

std::vector<SectionDraft> write_all_sections(const std::string& title, const Outline& outline,
                                             const Metadata& metadata, Session& session) {
  const std::size_t n = outline.size();
  const std::size_t width = std::max<std::size_t>(1, session.config().draft_concurrency);
  std::vector<SectionDraft> drafts;
  if (width == 1 || n == 1) {
    for (std::size_t i = 1; i <= n; ++i) drafts.push_back(write_section(title, outline, i, metadata, session));
    return drafts;
  }

  // Fan out on forked sessions, then merge logs in section order.
  std::vector<Session> forks;
  forks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) forks.push_back(session.fork());
  std::vector<std::optional<SectionDraft>> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < std::min(width, n); ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            results[i] = write_section(title, outline, i + 1, metadata, forks[i]);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    session.absorb(std::move(forks[i]));
    if (errors[i]) std::rethrow_exception(errors[i]);
    drafts.push_back(std::move(*results[i]));
  }
  return drafts;
}

}  // namespace

RunPrefix prepare_prefix(const SeedPost& seed, bool with_outline, Providers providers,
                         const PipelineConfig& config) {
  Session session(providers, config);
  RunPrefix prefix;
  prefix.metadata = prepare_metadata(seed, session);
  if (with_outline) prefix.titled = generate_title_and_outline(prefix.metadata, session);
  prefix.prompt_log = std::move(session.prompt_log());
  prefix.timing_ms = std::move(session.timing_ms());
  return prefix;
}

RunOutcome run_writing_path(const SeedPost& seed, RunMode mode, Providers providers,
                            const PipelineConfig& config, const RunPrefix* reuse) {
  RunOutcome outcome;
  PipelineTrace& trace = outcome.trace;
  trace.seed_id = seed.id;
  trace.mode = mode;
  trace.model_id = config.model_id;

  Session session(providers, config);
  if (reuse) {
    trace.prompt_log = reuse->prompt_log;
    trace.timing_ms = reuse->timing_ms;
  }

  try {
    trace.metadata = reuse ? reuse->metadata : prepare_metadata(seed, session);

    if (mode == RunMode::meta) {
      std::vector<SectionDraft> drafts{write_from_metadata(trace.metadata, session)};
      trace.document = compose_document("", std::move(drafts));
    } else {
      TitledOutline titled = (reuse && reuse->titled) ? *reuse->titled
                                                      : generate_title_and_outline(trace.metadata, session);
      trace.title = titled.title;
      trace.initial_outline = titled.outline;

      const Outline* writing_outline = &*trace.initial_outline;
      if (mode == RunMode::aug) {
        auto browsed = browse(titled.title, session);
        trace.retrieved = browsed.document;
        trace.keywords = browsed.keywords;
        trace.augmented_outline = augment_outline(titled.title, browsed.keywords, titled.outline, session);
        writing_outline = &*trace.augmented_outline;
      }
      auto drafts = write_all_sections(titled.title, *writing_outline, trace.metadata, session);
      trace.document = compose_document(titled.title, std::move(drafts));
    }
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }

  for (auto& e : session.prompt_log()) trace.prompt_log.push_back(std::move(e));
  trace.search_log = std::move(session.search_log());
  trace.warnings = std::move(session.warnings());
  for (auto& [k, v] : session.timing_ms()) trace.timing_ms[k] += v;
  return outcome;
}

}  // namespace writing_path
