#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "writing_path/domain.hpp"
#include "writing_path/prompt_kit.hpp"
#include "writing_path/providers.hpp"

namespace writing_path {

enum class AspectName {
  linguistic_fluency,
  logical_fluency,
  coherence,
  consistency,
  complexity,
  specificity,
  interestingness,
};

inline constexpr std::array<AspectName, 7> kAllAspects{
    AspectName::linguistic_fluency, AspectName::logical_fluency, AspectName::coherence,
    AspectName::consistency,        AspectName::complexity,      AspectName::specificity,
    AspectName::interestingness,
};

std::string to_string(AspectName name);
/// "Linguistic Fluency" etc.
std::string display_name(AspectName name);
/// Accepts the identifier or the display name, any case, spaces or
/// underscores.  Throws InvalidInput.
AspectName parse_aspect_name(std::string_view s);

struct Subaspect {
  std::string name;
  std::vector<std::string> questions;

  bool operator==(const Subaspect&) const = default;
};

struct Aspect {
  AspectName name = AspectName::linguistic_fluency;
  std::string definition;
  std::vector<Subaspect> subaspects;

  std::vector<std::string> questions() const;
  std::size_t question_count() const;

  bool operator==(const Aspect&) const = default;
};

struct Checklist {
  std::vector<Aspect> aspects;

  /// Throws InvalidInput when the aspect is not in the checklist.
  const Aspect& get(AspectName name) const;
  std::size_t question_count() const;

  bool operator==(const Checklist&) const = default;
};

/// Parses the indented checklist format:
///
///   Aspect Name: definition
///     Subaspect
///       Q: question
///
/// Every one of the seven aspects must appear exactly once and hold at least
/// one question.  Throws ChecklistFormatError(line, reason).
Checklist parse_checklist(std::istream& in);
Checklist load_checklist(const std::filesystem::path& path);

using AnswerSheet = std::map<AspectName, std::vector<bool>>;

struct WritingScorecard {
  std::map<AspectName, double> aspect_scores;
  double overall = 0.0;

  bool operator==(const WritingScorecard&) const = default;
};

/// Binds aspect, definition, the aspect's questions (one "Q." line each)
/// and the text.  Throws InvalidInput on empty writing.
std::string render_writing_eval_prompt(const Aspect& aspect, std::string_view writing,
                                       const PromptTemplate& eval_template);

/// One boolean per "A:" field in order.  Throws
/// AnswerParseError(unrecognized_token) for anything but yes/no and
/// AnswerParseError(count_mismatch) when the count differs from expected.
std::vector<bool> parse_boolean_answers(std::string_view raw, std::size_t expected);

/// Percentage of true answers.  Throws InvalidInput(empty).
double aspect_score(const std::vector<bool>& answers);

/// Arithmetic mean of exactly seven scores in [0, 100].  Throws
/// InvalidInput(arity) or InvalidInput(out_of_range).
double overall_score(const std::vector<double>& aspect_scores);
double overall_score(const std::map<AspectName, double>& aspect_scores);

struct JudgeSettings {
  std::string model_id = "gpt-4";
  double temperature = 0.0;
  int max_tokens = 512;
  std::size_t concurrency = 1;
};

/// One judge call per aspect.  Errors carry the failing aspect as context.
/// When `answers` is given it receives the parsed answer sheet.
WritingScorecard evaluate_writing(const ComposedDocument& doc, const Checklist& checklist, LlmProvider& judge,
                                  const PromptTemplate& eval_template, const JudgeSettings& settings = {},
                                  AnswerSheet* answers = nullptr);

/// Tau-b.  Throws InvalidInput(length_mismatch) for unequal lengths or
/// fewer than two items, InvalidInput(all_tied) when either side is
/// constant.
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace writing_path
