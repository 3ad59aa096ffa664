#include "writing_path/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <thread>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

// ---------------------------------------------------------------------------
// Tokenization

std::vector<std::string> tokenize(std::string_view input, const TokenizerConfig& config) {
  if (config.scheme == TokenScheme::character_ngram && config.ngram == 0)
    throw InvalidInput("character_ngram requires n >= 1");
  const std::string folded = config.lowercase ? text::fold_case(input) : std::string(input);
  const auto cps = text::decode_utf8(folded);

  std::vector<std::string> tokens;
  auto emit_runs = [&](auto&& in_token) {
    std::size_t i = 0;
    while (i < cps.size()) {
      if (!in_token(cps[i])) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < cps.size() && in_token(cps[j])) ++j;
      tokens.push_back(text::encode_utf8(cps, i, j));
      i = j;
    }
  };

  switch (config.scheme) {
    case TokenScheme::whitespace:
      emit_runs([](char32_t c) { return !text::is_space(c); });
      break;
    case TokenScheme::unicode_words:
      emit_runs([](char32_t c) { return text::is_word_char(c); });
      break;
    case TokenScheme::character_ngram: {
      const std::size_t n = config.ngram;
      std::size_t i = 0;
      while (i < cps.size()) {
        if (text::is_space(cps[i])) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < cps.size() && !text::is_space(cps[j])) ++j;
        if (j - i < n) {
          tokens.push_back(text::encode_utf8(cps, i, j));
        } else {
          for (std::size_t s = i; s + n <= j; ++s) tokens.push_back(text::encode_utf8(cps, s, s + n));
        }
        i = j;
      }
      break;
    }
  }

  if (!config.stopwords.empty())
    std::erase_if(tokens, [&](const std::string& t) { return config.stopwords.count(t) > 0; });
  return tokens;
}

// ---------------------------------------------------------------------------
// Co-occurrence

namespace {
std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}
}  // namespace

CooccurrenceModel CooccurrenceModel::build(const std::vector<std::vector<std::string>>& corpus,
                                           std::size_t window, const std::set<std::string>* vocabulary) {
  if (window == 0) throw InvalidInput("window must be >= 1");
  CooccurrenceModel m;
  m.window_ = window;
  m.doc_count_ = corpus.size();

  std::vector<std::int64_t> doc_ids;
  std::vector<std::uint32_t> present;
  for (const auto& doc : corpus) {
    const std::size_t len = doc.size();
    if (len == 0) continue;
    doc_ids.assign(len, -1);
    for (std::size_t i = 0; i < len; ++i) {
      if (vocabulary && !vocabulary->count(doc[i])) continue;
      auto [it, inserted] = m.ids_.try_emplace(doc[i], static_cast<std::uint32_t>(m.word_counts_.size()));
      if (inserted) m.word_counts_.push_back(0);
      doc_ids[i] = it->second;
    }
    const std::size_t windows = len <= window ? 1 : len - window + 1;
    m.total_windows_ += static_cast<std::int64_t>(windows);
    for (std::size_t s = 0; s < windows; ++s) {
      present.clear();
      for (std::size_t i = s; i < std::min(s + window, len); ++i)
        if (doc_ids[i] >= 0) present.push_back(static_cast<std::uint32_t>(doc_ids[i]));
      std::sort(present.begin(), present.end());
      present.erase(std::unique(present.begin(), present.end()), present.end());
      for (std::size_t a = 0; a < present.size(); ++a) {
        ++m.word_counts_[present[a]];
        for (std::size_t b = a + 1; b < present.size(); ++b) ++m.pair_counts_[pair_key(present[a], present[b])];
      }
    }
  }
  if (m.total_windows_ == 0) throw InvalidInput("empty_corpus");
  return m;
}

std::int64_t CooccurrenceModel::id_of(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::int64_t CooccurrenceModel::word_count(std::string_view word) const {
  auto id = id_of(word);
  return id < 0 ? 0 : word_counts_[static_cast<std::size_t>(id)];
}

std::int64_t CooccurrenceModel::pair_count(std::string_view a, std::string_view b) const {
  auto ia = id_of(a);
  auto ib = id_of(b);
  if (ia < 0 || ib < 0) return 0;
  if (ia == ib) return word_counts_[static_cast<std::size_t>(ia)];
  auto it = pair_counts_.find(pair_key(static_cast<std::uint32_t>(ia), static_cast<std::uint32_t>(ib)));
  return it == pair_counts_.end() ? 0 : it->second;
}

double CooccurrenceModel::probability(std::string_view word) const {
  return static_cast<double>(word_count(word)) / static_cast<double>(total_windows_);
}

double CooccurrenceModel::joint_probability(std::string_view a, std::string_view b) const {
  return static_cast<double>(pair_count(a, b)) / static_cast<double>(total_windows_);
}

namespace {
void require_known(const CooccurrenceModel& model, std::string_view w) {
  if (!model.contains(w)) throw UnknownWord(std::string(w));
}
}  // namespace

double npmi(const CooccurrenceModel& model, std::string_view a, std::string_view b, double epsilon) {
  require_known(model, a);
  require_known(model, b);
  double c1 = static_cast<double>(model.word_count(a));
  double c2 = static_cast<double>(model.word_count(b));
  if (c1 > c2) std::swap(c1, c2);
  const double c12 = static_cast<double>(model.pair_count(a, b));
  const double n = static_cast<double>(model.total_windows());

  double num = 0.0;
  double den = 0.0;
  if (c12 == 0.0) {
    if (!(epsilon > 0.0)) return -1.0;
    num = std::log(epsilon) - std::log(c1 / n) - std::log(c2 / n);
    den = -std::log(epsilon);
  } else {
    // Grouped so that c12 == c1 == c2 yields num == den exactly.
    num = (std::log(n) - std::log(c1)) + (std::log(c12) - std::log(c2));
    den = std::log(n) - std::log(c12);
  }
  if (den == 0.0) return 1.0;  // the pair fills every window
  return std::clamp(num / den, -1.0, 1.0);
}

double pmi_smoothed(const CooccurrenceModel& model, std::string_view a, std::string_view b, double epsilon) {
  require_known(model, a);
  require_known(model, b);
  return std::log(model.joint_probability(a, b) + epsilon) - std::log(model.probability(a)) -
         std::log(model.probability(b));
}

double coherence(const CooccurrenceModel& model, const std::vector<std::string>& topic, CoherenceVariant variant,
                 double epsilon) {
  if (topic.size() < 2) throw InvalidInput("fewer_than_two_words");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < topic.size(); ++i) {
    for (std::size_t j = i + 1; j < topic.size(); ++j) {
      sum += variant == CoherenceVariant::uci ? pmi_smoothed(model, topic[i], topic[j], epsilon)
                                              : npmi(model, topic[i], topic[j], epsilon);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<std::string> section_topic_words(const OutlineSection& section, const TokenizerConfig& tokenizer,
                                             std::size_t k, const CooccurrenceModel* model, std::size_t* dropped) {
  std::string joined = section.header;
  for (const auto& s : section.subheaders) joined += "\n" + s;
  auto tokens = tokenize(joined, tokenizer);

  struct Entry {
    std::string word;
    std::size_t count;
    std::size_t first;
  };
  std::vector<Entry> entries;
  std::map<std::string, std::size_t> index;
  std::set<std::string> unknown;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (model && !model->contains(tokens[i])) {
      unknown.insert(tokens[i]);
      continue;
    }
    auto [it, inserted] = index.try_emplace(tokens[i], entries.size());
    if (inserted) entries.push_back({tokens[i], 0, i});
    ++entries[it->second].count;
  }
  if (dropped) *dropped += unknown.size();
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return x.count != y.count ? x.count > y.count : x.first < y.first;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < entries.size() && i < k; ++i) out.push_back(entries[i].word);
  return out;
}

OutlineCoherence outline_coherence(const Outline& outline, const CooccurrenceModel& model,
                                   const CoherenceSettings& settings) {
  validate_outline(outline);
  OutlineCoherence out;
  double uci_sum = 0.0;
  double npmi_sum = 0.0;
  for (const auto& section : outline.sections) {
    auto words = section_topic_words(section, settings.tokenizer, settings.top_k, &model, &out.unknown_words);
    if (words.size() < 2) {
      ++out.skipped_sections;
      continue;
    }
    uci_sum += coherence(model, words, CoherenceVariant::uci, settings.epsilon);
    npmi_sum += coherence(model, words, CoherenceVariant::npmi_avg, settings.epsilon);
    ++out.scored_sections;
  }
  if (out.scored_sections == 0) throw InvalidInput("no_scorable_sections");
  out.uci = uci_sum / static_cast<double>(out.scored_sections);
  out.npmi = npmi_sum / static_cast<double>(out.scored_sections);
  return out;
}

OutlineCoherence outline_coherence(const Outline& outline, const std::vector<std::string>& corpus,
                                   const CoherenceSettings& settings) {
  std::set<std::string> vocabulary;
  for (const auto& section : outline.sections)
    for (auto& w : section_topic_words(section, settings.tokenizer, std::numeric_limits<std::size_t>::max()))
      vocabulary.insert(std::move(w));
  std::vector<std::vector<std::string>> docs;
  docs.reserve(corpus.size());
  for (const auto& t : corpus) docs.push_back(tokenize(t, settings.tokenizer));
  auto model = CooccurrenceModel::build(docs, settings.window, &vocabulary);
  return outline_coherence(outline, model, settings);
}

// ---------------------------------------------------------------------------
// Topic diversity

double topic_diversity(const TopicWordSets& topics, bool pad_short) {
  if (topics.topics.empty()) throw InvalidInput("no topics");
  const std::size_t k = topics.topics.front().k;
  if (k == 0) throw InvalidInput("k must be >= 1");
  std::set<std::string> unique;
  for (const auto& t : topics.topics) {
    if (t.k != k) throw InvalidInput("k_mismatch");
    if (t.top_words.size() > k || (t.top_words.size() < k && !pad_short)) throw InvalidInput("k_mismatch");
    unique.insert(t.top_words.begin(), t.top_words.end());
  }
  return static_cast<double>(unique.size()) / static_cast<double>(k * topics.topics.size());
}

TopicWordSets outline_topics(const Outline& outline, const TokenizerConfig& tokenizer, std::size_t k) {
  std::vector<std::vector<std::string>> per_section;
  for (const auto& section : outline.sections) {
    auto words = section_topic_words(section, tokenizer, k);
    if (!words.empty()) per_section.push_back(std::move(words));
  }
  if (per_section.empty()) throw InvalidInput("no topic words in outline");
  std::size_t k_eff = k;
  for (const auto& w : per_section) k_eff = std::min(k_eff, w.size());

  TopicWordSets out;
  for (std::size_t i = 0; i < per_section.size(); ++i) {
    auto& words = per_section[i];
    words.resize(k_eff);
    out.topics.push_back({"section " + std::to_string(i + 1), std::move(words), k_eff});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Self-BLEU

namespace {

using NgramCounts = std::unordered_map<std::string, std::size_t>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += tokens[i + j];
    }
    ++counts[key];
  }
  return counts;
}

}  // namespace

double sentence_bleu(const std::vector<std::string>& hypothesis,
                     const std::vector<const std::vector<std::string>*>& references, const BleuSettings& settings) {
  if (settings.max_n == 0) throw InvalidInput("max_n must be >= 1");
  const std::size_t c = hypothesis.size();
  if (c == 0) return 0.0;

  std::size_t r = 0;
  bool have_ref = false;
  for (const auto* ref : references) {
    const std::size_t len = ref->size();
    const auto diff = [&](std::size_t x) { return x > c ? x - c : c - x; };
    if (!have_ref || diff(len) < diff(r) || (diff(len) == diff(r) && len < r)) r = len;
    have_ref = true;
  }
  const double bp = c > r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));

  double log_sum = 0.0;
  std::size_t orders = 0;
  for (std::size_t n = 1; n <= settings.max_n; ++n) {
    if (c < n) break;
    const auto hyp = count_ngrams(hypothesis, n);
    NgramCounts max_ref;
    for (const auto* ref : references)
      for (const auto& [g, cnt] : count_ngrams(*ref, n)) max_ref[g] = std::max(max_ref[g], cnt);
    std::size_t matched = 0;
    for (const auto& [g, cnt] : hyp) {
      if (auto it = max_ref.find(g); it != max_ref.end()) matched += std::min(cnt, it->second);
    }
    const double total = static_cast<double>(c - n + 1);
    const double numerator = matched > 0 ? static_cast<double>(matched) : settings.epsilon;
    log_sum += std::log(numerator / total);
    ++orders;
  }
  return bp * std::exp(log_sum / static_cast<double>(orders));
}

double self_bleu(const std::vector<std::vector<std::string>>& sections, const BleuSettings& settings) {
  if (sections.size() < 2) throw InvalidInput("fewer_than_two_sections");
  double sum = 0.0;
  std::vector<const std::vector<std::string>*> refs;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    refs.clear();
    for (std::size_t j = 0; j < sections.size(); ++j)
      if (j != i) refs.push_back(&sections[j]);
    sum += sentence_bleu(sections[i], refs, settings);
  }
  return 100.0 * sum / static_cast<double>(sections.size());
}

double self_bleu(const std::vector<std::string>& sections, const TokenizerConfig& tokenizer,
                 const BleuSettings& settings) {
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(sections.size());
  for (const auto& s : sections) tokenized.push_back(tokenize(s, tokenizer));
  return self_bleu(tokenized, settings);
}

std::vector<std::string> self_bleu_units(const Outline& outline, SelfBleuUnit unit) {
  std::vector<std::string> out;
  for (const auto& section : outline.sections) {
    if (unit == SelfBleuUnit::line) {
      out.push_back(section.header);
      for (const auto& s : section.subheaders) out.push_back(s);
    } else {
      std::string block = section.header;
      for (const auto& s : section.subheaders) block += " " + s;
      out.push_back(std::move(block));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// NLI alignment

std::string to_string(NliLabel label) {
  switch (label) {
    case NliLabel::entail: return "entail";
    case NliLabel::neutral: return "neutral";
    case NliLabel::contradict: return "contradict";
  }
  return "neutral";
}

NliLabel parse_nli_label(std::string_view raw) {
  TokenizerConfig words;
  for (const auto& w : tokenize(raw, words)) {
    if (w.rfind("entail", 0) == 0) return NliLabel::entail;
    if (w == "neutral") return NliLabel::neutral;
    if (w.rfind("contradict", 0) == 0) return NliLabel::contradict;
  }
  std::string shown(raw.substr(0, 80));
  throw JudgeParseError("unrecognised NLI label in '" + shown + "'");
}

NliResult nli_alignment(const Outline& outline, LlmProvider& judge, const PromptTemplate& nli_template,
                        const NliSettings& settings) {
  std::vector<std::pair<const std::string*, const std::string*>> pairs;
  for (const auto& section : outline.sections)
    for (const auto& sub : section.subheaders) pairs.emplace_back(&section.header, &sub);
  if (pairs.empty()) throw InvalidInput("no_pairs");

  const std::size_t n = pairs.size();
  std::vector<std::optional<NliLabel>> labels(n);
  std::vector<std::exception_ptr> errors(n);
  auto judge_one = [&](std::size_t i) {
    try {
      auto prompt = render_prompt(nli_template, {{slots::kHeader, *pairs[i].first},
                                                 {slots::kSubheader, *pairs[i].second}});
      CompletionRequest req{prompt, settings.model_id, settings.temperature, settings.max_tokens,
                            to_string(Stage::eval_nli)};
      labels[i] = parse_nli_label(judge.complete(req).text);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t width = std::min(std::max<std::size_t>(1, settings.concurrency), n);
  if (width == 1) {
    for (std::size_t i = 0; i < n; ++i) judge_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < width; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) judge_one(i);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  NliResult out;
  out.total = n;
  for (const auto& l : labels) {
    out.labels.push_back(*l);
    if (*l == NliLabel::entail) ++out.entailed;
  }
  out.score = static_cast<double>(out.entailed) / static_cast<double>(out.total);
  return out;
}

}  // namespace writing_path
