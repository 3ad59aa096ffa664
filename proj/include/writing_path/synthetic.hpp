#pragma once

#include <string>
#include <vector>

#include "writing_path/providers.hpp"

namespace writing_path {

/// Deterministic offline responder.  Reads the stage from the request tag
/// and the stage inputs from the rendered prompt, and answers in the format
/// each stage parser expects.  Used to generate the bundled fixtures.
class SyntheticLlm final : public LlmProvider {
public:
  /// Judge answers are "yes" with probability roughly yes_rate, decided by
  /// a hash of (question, text).
  explicit SyntheticLlm(double yes_rate = 0.6) : yes_rate_(yes_rate) {}
  CompletionResult complete(const CompletionRequest& request) override;
  std::string respond(const CompletionRequest& request) const;

private:
  double yes_rate_;
};

/// One synthetic document per query, built from the query words.
class SyntheticSearch final : public SearchProvider {
public:
  std::vector<RetrievedDocument> search(const SearchQuery& query) override;
};

}  // namespace writing_path
