#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace writing_path {

/// Base of every error raised by the library.  Context strings (e.g. the
/// aspect or seed being processed) can be attached while the error
/// propagates; what() reports them outermost first.
class Error : public std::runtime_error {
public:
  explicit Error(std::string message)
      : std::runtime_error(message), message_(std::move(message)) {}

  const char* what() const noexcept override { return message_.c_str(); }

  void add_context(const std::string& context) {
    context_ = context_.empty() ? context : context + ": " + context_;
    message_ = context + ": " + message_;
  }

  const std::string& context() const noexcept { return context_; }

private:
  std::string message_;
  std::string context_;
};

class InvalidInput : public Error {
public:
  explicit InvalidInput(std::string reason)
      : Error("invalid input: " + reason), reason_(std::move(reason)) {}
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string reason_;
};

class IndexError : public Error {
public:
  IndexError(std::size_t index, std::size_t size)
      : Error("index " + std::to_string(index) + " out of range [1, " +
              std::to_string(size) + "]"),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

private:
  std::size_t index_;
};

enum class ParseErrorKind { missing_block, no_items, orphan_subheader, missing_field };

class ParseError : public Error {
public:
  ParseError(ParseErrorKind kind, std::string detail);
  ParseErrorKind kind() const noexcept { return kind_; }
  /// Block marker or field name the error refers to.
  const std::string& detail() const noexcept { return detail_; }

private:
  ParseErrorKind kind_;
  std::string detail_;
};

class MissingSlot : public Error {
public:
  explicit MissingSlot(std::string slot)
      : Error("missing slot {" + slot + "}"), slot_(std::move(slot)) {}
  const std::string& slot() const noexcept { return slot_; }

private:
  std::string slot_;
};

class UnknownSlot : public Error {
public:
  explicit UnknownSlot(std::string slot)
      : Error("unknown slot {" + slot + "}"), slot_(std::move(slot)) {}
  const std::string& slot() const noexcept { return slot_; }

private:
  std::string slot_;
};

class TemplateError : public Error {
public:
  using Error::Error;
};

enum class ProviderErrorKind { auth, transient_exhausted, malformed_response };

class ProviderError : public Error {
public:
  ProviderError(ProviderErrorKind kind, std::string detail);
  ProviderErrorKind kind() const noexcept { return kind_; }

private:
  ProviderErrorKind kind_;
};

enum class SearchErrorKind { no_results, transport };

class SearchError : public Error {
public:
  SearchError(SearchErrorKind kind, std::string detail);
  SearchErrorKind kind() const noexcept { return kind_; }

private:
  SearchErrorKind kind_;
};

class UnknownWord : public Error {
public:
  explicit UnknownWord(std::string word)
      : Error("unknown word '" + word + "'"), word_(std::move(word)) {}
  const std::string& word() const noexcept { return word_; }

private:
  std::string word_;
};

class JudgeParseError : public Error {
public:
  using Error::Error;
};

class ChecklistFormatError : public Error {
public:
  ChecklistFormatError(std::size_t line, const std::string& reason)
      : Error("checklist line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

enum class AnswerParseErrorKind { count_mismatch, unrecognized_token };

class AnswerParseError : public Error {
public:
  AnswerParseError(AnswerParseErrorKind kind, std::string detail);
  AnswerParseErrorKind kind() const noexcept { return kind_; }

private:
  AnswerParseErrorKind kind_;
};

class IngestError : public Error {
public:
  IngestError(std::size_t line, std::string reason)
      : Error("line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(std::move(reason)) {}
  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::size_t line_;
  std::string reason_;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class ReportError : public Error {
public:
  using Error::Error;
};

class AlignError : public Error {
public:
  using Error::Error;
};

std::string to_string(ParseErrorKind kind);
std::string to_string(ProviderErrorKind kind);
std::string to_string(SearchErrorKind kind);
std::string to_string(AnswerParseErrorKind kind);

inline ParseError::ParseError(ParseErrorKind kind, std::string detail)
    : Error("parse error (" + to_string(kind) + "): " + detail),
      kind_(kind),
      detail_(std::move(detail)) {}

inline ProviderError::ProviderError(ProviderErrorKind kind, std::string detail)
    : Error("provider error (" + to_string(kind) + "): " + detail), kind_(kind) {}

inline SearchError::SearchError(SearchErrorKind kind, std::string detail)
    : Error("search error (" + to_string(kind) + "): " + detail), kind_(kind) {}

inline AnswerParseError::AnswerParseError(AnswerParseErrorKind kind, std::string detail)
    : Error("answer parse error (" + to_string(kind) + "): " + detail), kind_(kind) {}

inline std::string to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::missing_block: return "missing_block";
    case ParseErrorKind::no_items: return "no_items";
    case ParseErrorKind::orphan_subheader: return "orphan_subheader";
    case ParseErrorKind::missing_field: return "missing_field";
  }
  return "unknown";
}

inline std::string to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::auth: return "auth";
    case ProviderErrorKind::transient_exhausted: return "transient_exhausted";
    case ProviderErrorKind::malformed_response: return "malformed_response";
  }
  return "unknown";
}

inline std::string to_string(SearchErrorKind kind) {
  switch (kind) {
    case SearchErrorKind::no_results: return "no_results";
    case SearchErrorKind::transport: return "transport";
  }
  return "unknown";
}

inline std::string to_string(AnswerParseErrorKind kind) {
  switch (kind) {
    case AnswerParseErrorKind::count_mismatch: return "count_mismatch";
    case AnswerParseErrorKind::unrecognized_token: return "unrecognized_token";
  }
  return "unknown";
}

}  // namespace writing_path
