#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "writing_path/domain.hpp"

namespace writing_path {

using BindingMap = std::map<std::string, std::string>;

/// Names of every `{slot}` marker in a template body.  A slot name is any
/// nonempty run of characters other than braces and newlines.
std::set<std::string> find_slots(std::string_view body);

/// A stage prompt with named `{slot}` markers.
///
/// `presets` holds bindings supplied with the template itself (the few-shot
/// example slots); caller bindings are applied over them at render time.
class PromptTemplate {
public:
  /// Throws TemplateError unless required_slots equals the slots in body.
  PromptTemplate(Stage stage, std::string body, std::set<std::string> required_slots,
                 BindingMap presets = {});

  /// Derives required_slots from the body.
  static PromptTemplate from_body(Stage stage, std::string body, BindingMap presets = {});

  Stage stage() const noexcept { return stage_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& required_slots() const noexcept { return required_slots_; }
  const BindingMap& presets() const noexcept { return presets_; }

private:
  Stage stage_;
  std::string body_;
  std::set<std::string> required_slots_;
  BindingMap presets_;
};

/// Substitutes every slot verbatim in a single pass (bound values are never
/// rescanned for markers).  Throws UnknownSlot for a caller binding the
/// template does not declare and MissingSlot for an unbound required slot.
std::string render_prompt(const PromptTemplate& tmpl, const BindingMap& bindings);

/// Stage-keyed template files loaded from a JSON manifest:
///
///   {"fewshot": "fewshot.json",
///    "templates": [{"stage": "s1_metadata", "file": "s1_metadata.txt",
///                   "required_slots": ["examples", "original blog text"]}, ...]}
///
/// The optional fewshot file maps stage name -> {slot: text} presets.
class TemplateSet {
public:
  static TemplateSet load(const std::filesystem::path& manifest);

  void add(PromptTemplate tmpl);
  bool contains(Stage stage) const;
  /// Throws TemplateError if the stage has no template.
  const PromptTemplate& get(Stage stage) const;

private:
  std::map<Stage, PromptTemplate> templates_;
};

// Slot names used by the bundled templates.
namespace slots {
inline constexpr const char* kExamples = "examples";
inline constexpr const char* kExample = "example";
inline constexpr const char* kBlogText = "original blog text";
inline constexpr const char* kMetaData = "meta data";
inline constexpr const char* kRetrievedDocument = "retrieved document";
inline constexpr const char* kAdditionalInfo = "additional information from browsing";
inline constexpr const char* kInitialOutline = "initial outline";
inline constexpr const char* kTitle = "title";
inline constexpr const char* kParagraphOrdinal = "paragraph ordinal";
inline constexpr const char* kAugmentedOutline = "augmented outline";
inline constexpr const char* kCurrentSection = "current section";
inline constexpr const char* kAspect = "aspect";
inline constexpr const char* kDefinition = "definition";
inline constexpr const char* kQuestion = "question";
inline constexpr const char* kWriting = "writing";
inline constexpr const char* kHeader = "header";
inline constexpr const char* kSubheader = "subheader";
}  // namespace slots

struct TitledOutline {
  std::string title;
  Outline outline;

  bool operator==(const TitledOutline&) const = default;
};

// Parsers for structured completions.  None of them throws anything other
// than ParseError, whatever the input bytes.

/// `==Title==` and `==Initial Outline==` blocks.  Only top-level numbered
/// lines (`N.`, `N)`, `N -`) open a section; every other line continues the
/// previous item, so the result is always header-only.
TitledOutline parse_title_and_initial_outline(std::string_view raw);

/// `==Augmented Outline==` block.  Top-level numbered lines are headers;
/// indented lines and `N.M` / `N-M` numbered lines are subheaders of the
/// preceding header.
Outline parse_augmented_outline(std::string_view raw);

/// Comma/newline separated list, trimmed, case-folded dedup keeping the
/// first spelling.
KeywordSet parse_keyword_list(std::string_view raw, std::string provenance = {});

/// Labelled purpose/type/style/keywords fields in any order.
Metadata parse_metadata_block(std::string_view raw);

/// Canonical numbered form: "1. Header\n  1.1 Sub\n2. Header".
std::string format_outline(const Outline& outline);

/// One section in canonical form, numbered by its 1-based index.
std::string format_section(const Outline& outline, std::size_t section_index);

std::string format_metadata_block(const Metadata& m);

std::string format_title_and_initial_outline(const TitledOutline& t);

}  // namespace writing_path
