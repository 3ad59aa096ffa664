#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "writing_path/domain.hpp"
#include "writing_path/prompt_kit.hpp"
#include "writing_path/providers.hpp"

namespace writing_path {

// ---------------------------------------------------------------------------
// Tokenization

enum class TokenScheme { unicode_words, whitespace, character_ngram };

struct TokenizerConfig {
  TokenScheme scheme = TokenScheme::unicode_words;
  std::size_t ngram = 2;  // used by character_ngram
  bool lowercase = true;
  std::set<std::string> stopwords;
};

/// whitespace:      split on whitespace, punctuation kept
/// unicode_words:   maximal runs of word characters
/// character_ngram: sliding n-code-point windows inside each
///                  whitespace-delimited chunk; chunks shorter than n are
///                  emitted whole
/// Lowercasing happens before segmentation, stopword removal after.
std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config);

// ---------------------------------------------------------------------------
// Co-occurrence

/// Boolean-presence counts over sliding windows.  A document of length L
/// contributes max(1, L - window + 1) windows when L > 0 and none when empty.
class CooccurrenceModel {
public:
  /// When `vocabulary` is given only its words are counted (windows are
  /// still counted in full).  Throws InvalidInput(empty_corpus) when the
  /// corpus yields no window, and InvalidInput for window == 0.
  static CooccurrenceModel build(const std::vector<std::vector<std::string>>& corpus, std::size_t window,
                                 const std::set<std::string>* vocabulary = nullptr);

  std::size_t window() const noexcept { return window_; }
  std::size_t doc_count() const noexcept { return doc_count_; }
  std::int64_t total_windows() const noexcept { return total_windows_; }

  bool contains(std::string_view word) const { return word_count(word) > 0; }
  std::int64_t word_count(std::string_view word) const;
  /// Symmetric; pair_count(w, w) == word_count(w).
  std::int64_t pair_count(std::string_view a, std::string_view b) const;

  double probability(std::string_view word) const;
  double joint_probability(std::string_view a, std::string_view b) const;

private:
  std::int64_t id_of(std::string_view word) const;

  std::size_t window_ = 0;
  std::size_t doc_count_ = 0;
  std::int64_t total_windows_ = 0;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::vector<std::int64_t> word_counts_;
  std::unordered_map<std::uint64_t, std::int64_t> pair_counts_;
};

inline constexpr double kDefaultCoherenceEpsilon = 1e-12;

/// log(P(a,b) / (P(a)P(b))) / -log P(a,b), clamped to [-1, 1].  When the
/// pair never co-occurs, epsilon stands in for the joint probability.
/// Throws UnknownWord for a word absent from the model.
double npmi(const CooccurrenceModel& model, std::string_view a, std::string_view b,
            double epsilon = kDefaultCoherenceEpsilon);

/// Pairwise log((P(a,b) + epsilon) / (P(a)P(b))).
double pmi_smoothed(const CooccurrenceModel& model, std::string_view a, std::string_view b,
                    double epsilon = kDefaultCoherenceEpsilon);

enum class CoherenceVariant { uci, npmi_avg };

/// Mean pairwise score over all i < j.  Throws InvalidInput with fewer than
/// two words.
double coherence(const CooccurrenceModel& model, const std::vector<std::string>& topic, CoherenceVariant variant,
                 double epsilon = kDefaultCoherenceEpsilon);

struct CoherenceSettings {
  TokenizerConfig tokenizer;
  std::size_t window = 10;
  std::size_t top_k = 10;
  double epsilon = kDefaultCoherenceEpsilon;
};

/// Distinct tokens of a section's header and subheaders, most frequent
/// first, ties by first occurrence, at most k.  With a model, words the
/// model does not contain are dropped first (and counted in `dropped`).
std::vector<std::string> section_topic_words(const OutlineSection& section, const TokenizerConfig& tokenizer,
                                             std::size_t k, const CooccurrenceModel* model = nullptr,
                                             std::size_t* dropped = nullptr);

struct OutlineCoherence {
  double uci = 0.0;
  double npmi = 0.0;
  std::size_t scored_sections = 0;
  std::size_t skipped_sections = 0;  // fewer than two usable topic words
  std::size_t unknown_words = 0;     // topic words absent from the corpus
};

/// Each section is one topic; scores are averaged over sections with at
/// least two topic words.  Throws InvalidInput(no_scorable_sections).
OutlineCoherence outline_coherence(const Outline& outline, const CooccurrenceModel& model,
                                   const CoherenceSettings& settings);

/// Builds the model from raw texts (restricted to the outline's words).
OutlineCoherence outline_coherence(const Outline& outline, const std::vector<std::string>& corpus,
                                   const CoherenceSettings& settings);

// ---------------------------------------------------------------------------
// Topic diversity

struct Topic {
  std::string label;
  std::vector<std::string> top_words;
  std::size_t k = 0;
};

struct TopicWordSets {
  std::vector<Topic> topics;
};

/// |unique words over all topics| / (k * T).  Every topic must hold exactly
/// k words unless `pad_short`, in which case missing slots count in the
/// denominator only.  Throws InvalidInput(k_mismatch) otherwise.
double topic_diversity(const TopicWordSets& topics, bool pad_short = false);

/// Per-section topics truncated to min(k, shortest nonempty section topic)
/// so that every topic has the same size.
TopicWordSets outline_topics(const Outline& outline, const TokenizerConfig& tokenizer, std::size_t k);

// ---------------------------------------------------------------------------
// Self-BLEU

struct BleuSettings {
  std::size_t max_n = 4;
  /// Stands in for a zero matched n-gram count.
  double epsilon = 1e-9;
};

/// BLEU of one hypothesis against a reference set: clipped n-gram
/// precisions for the orders the hypothesis has, geometric mean, brevity
/// penalty against the closest reference length (ties to the shorter).
double sentence_bleu(const std::vector<std::string>& hypothesis,
                     const std::vector<const std::vector<std::string>*>& references, const BleuSettings& settings);

/// Mean over sections of the BLEU of each section against all the others,
/// times 100.  Throws InvalidInput(fewer_than_two_sections).
double self_bleu(const std::vector<std::vector<std::string>>& sections, const BleuSettings& settings = {});

double self_bleu(const std::vector<std::string>& sections, const TokenizerConfig& tokenizer,
                 const BleuSettings& settings = {});

enum class SelfBleuUnit { block, line };

/// block: header plus its subheaders per section; line: every header and
/// subheader on its own.
std::vector<std::string> self_bleu_units(const Outline& outline, SelfBleuUnit unit);

// ---------------------------------------------------------------------------
// NLI alignment

enum class NliLabel { entail, neutral, contradict };

std::string to_string(NliLabel label);

/// First recognised label word in the judge's reply.  Throws JudgeParseError.
NliLabel parse_nli_label(std::string_view raw);

struct NliSettings {
  std::string model_id = "gpt-4-turbo";
  double temperature = 0.0;
  int max_tokens = 16;
  std::size_t concurrency = 1;
};

struct NliResult {
  double score = 0.0;
  std::size_t entailed = 0;
  std::size_t total = 0;
  std::vector<NliLabel> labels;  // in (header, subheader) pair order
};

/// Judges every (header, subheader) pair; score = entailed / total.  Throws
/// InvalidInput(no_pairs) for header-only outlines.
NliResult nli_alignment(const Outline& outline, LlmProvider& judge, const PromptTemplate& nli_template,
                        const NliSettings& settings = {});

}  // namespace writing_path
