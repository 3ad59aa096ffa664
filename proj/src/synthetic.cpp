#include "writing_path/synthetic.hpp"

#include <set>

#include "writing_path/domain.hpp"
#include "writing_path/error.hpp"
#include "writing_path/metrics.hpp"
#include "writing_path/prompt_kit.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace {

Outline parse_plain_outline(const std::string& body) {
  return parse_augmented_outline("==Augmented Outline==\n" + body);
}

const std::set<std::string> kStop = {
    "about", "after", "also", "because", "been", "before", "being", "from", "have", "here", "into",
    "just", "more", "most", "only", "over", "some", "such", "than", "that", "their", "them", "then",
    "there", "these", "they", "this", "those", "very", "were", "what", "when", "where", "which",
    "while", "will", "with", "would", "your", "share", "purpose", "type", "style", "keywords",
};

/// Text following the last line equal to `marker`, up to the next marker
/// line or `stop`.
std::string block_after(const std::string& prompt, const std::string& marker, const std::string& stop = "") {
  auto pos = prompt.rfind(marker + "\n");
  if (pos == std::string::npos) return {};
  std::string rest = prompt.substr(pos + marker.size() + 1);
  std::string out;
  for (const auto& line : text::split_lines(rest)) {
    auto t = text::trim(line);
    if (t.size() > 4 && t.substr(0, 2) == "==" && t.substr(t.size() - 2) == "==") break;
    if (!stop.empty() && text::starts_with_icase(t, stop)) break;
    out += line;
    out += '\n';
  }
  return std::string(text::trim(out));
}

std::vector<std::string> content_words(const std::string& s, std::size_t limit) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& w : tokenize(s, TokenizerConfig{})) {
    if (w.size() < 4 || kStop.count(w) || std::isdigit(static_cast<unsigned char>(w[0]))) continue;
    if (seen.insert(w).second) out.push_back(w);
    if (out.size() == limit) break;
  }
  return out;
}

std::uint64_t stable_hash(std::string_view s) {
  auto hex = sha256_hex(s);
  return std::stoull(hex.substr(0, 15), nullptr, 16);
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

std::string pick(const std::vector<std::string>& words, std::size_t i, const char* fallback) {
  return words.empty() ? std::string(fallback) : words[i % words.size()];
}

std::string metadata_reply(const std::string& prompt) {
  const auto blog = block_after(prompt, "==Blog post==");
  const auto lines = text::split_lines(blog);
  const auto words = content_words(blog, 6);
  std::string first = lines.empty() ? std::string("a personal story") : std::string(text::trim(lines[0]));
  std::string out = "1. purpose: share an experience about " + text::fold_case(first) + "\n";
  out += "2. type: personal review\n";
  out += "3. style: friendly and practical, first person\n";
  out += "4. keywords: " + (words.empty() ? std::string("blog") : text::join(words, ", "));
  return out;
}

std::string title_outline_reply(const std::string& prompt) {
  std::vector<std::string> kws;
  try {
    kws = parse_metadata_block(block_after(prompt, "==Meta data==")).keywords;
  } catch (const Error&) {
  }
  const auto a = pick(kws, 0, "ideas");
  const auto b = pick(kws, 1, "plans");
  const auto c = pick(kws, 2, "notes");
  std::string out = "==Title==\nNotes on " + capitalize(a) + " and " + capitalize(b) + "\n\n";
  out += "==Initial Outline==\n";
  out += "1. Getting started with " + a + "\n";
  out += "2. What we learned about " + b + "\n";
  out += "3. Practical tips for " + c + "\n";
  return out;
}

std::string keywords_reply(const std::string& prompt) {
  auto words = content_words(block_after(prompt, "==Document=="), 6);
  if (words.empty()) words = {"overview"};
  return text::join(words, ", ");
}

std::string augment_reply(const std::string& prompt) {
  Outline initial;
  try {
    initial = parse_plain_outline(block_after(prompt, "==Initial Outline=="));
  } catch (const Error&) {
    initial.sections = {{"Overview", {}}};
  }
  auto kws = parse_keyword_list(block_after(prompt, "==Additional Information==")).keywords;
  std::string out = "==Augmented Outline==\n";
  std::size_t k = 0;
  for (std::size_t i = 0; i < initial.sections.size(); ++i) {
    const auto& h = initial.sections[i].header;
    out += std::to_string(i + 1) + ". " + h + "\n";
    auto head_words = content_words(h, 3);
    const auto topic = pick(head_words, 0, "topic");
    for (std::size_t j = 0; j < 2; ++j) {
      const auto kw = pick(kws, k++, "detail");
      out += "  " + std::to_string(i + 1) + "." + std::to_string(j + 1) + " " + capitalize(kw) + " and " + topic +
             (j == 0 ? " basics" : " in practice") + "\n";
    }
  }
  return out;
}

std::string write_reply(const std::string& prompt) {
  const auto section = block_after(prompt, "==Current Outline==");
  const auto title = block_after(prompt, "==Title==");
  Outline o;
  try {
    o = parse_plain_outline(section);
  } catch (const Error&) {
    o.sections = {{section.empty() ? std::string("this topic") : section, {}}};
  }
  std::string out;
  for (const auto& s : o.sections) {
    out += "In this part we look at " + text::fold_case(s.header) + ".";
    if (!title.empty()) out += " It ties back to " + title + ".";
    for (const auto& sub : s.subheaders) out += " We also cover " + text::fold_case(sub) + ", which many readers ask about.";
    out += " I tried it myself last spring and kept notes on every step.\n";
  }
  return out;
}

std::string eval_reply(const std::string& prompt, double yes_rate) {
  const auto questions_block = block_after(prompt, "### Questions###", "Blog text:");
  const auto pos = prompt.rfind("Blog text:");
  const std::string writing = pos == std::string::npos ? std::string{} : prompt.substr(pos);
  std::string out;
  for (const auto& line : text::split_lines(questions_block)) {
    auto t = text::trim(line);
    if (!text::starts_with_icase(t, "Q.")) continue;
    std::string q(text::trim(t.substr(2)));
    const double u = static_cast<double>(stable_hash(q + "\x1f" + writing) % 10000) / 10000.0;
    out += "Q: " + q + " A: " + (u < yes_rate ? "yes" : "no") + "\n";
  }
  return out;
}

std::string nli_reply(const std::string& prompt) {
  auto field = [&](const std::string& label) {
    auto pos = prompt.find(label);
    if (pos == std::string::npos) return std::string{};
    auto end = prompt.find('\n', pos);
    return prompt.substr(pos + label.size(), end == std::string::npos ? std::string::npos : end - pos - label.size());
  };
  const auto header = content_words(field("Premise (section heading):"), 20);
  const auto sub = content_words(field("Hypothesis (subheading):"), 20);
  std::set<std::string> h(header.begin(), header.end());
  for (const auto& w : sub)
    if (h.count(w)) return "entail";
  return "neutral";
}

}  // namespace

std::string SyntheticLlm::respond(const CompletionRequest& request) const {
  const auto stage = parse_stage(request.request_tag);
  if (!stage) throw ProviderError(ProviderErrorKind::malformed_response, "unknown request tag " + request.request_tag);
  switch (*stage) {
    case Stage::s1_metadata: return metadata_reply(request.prompt);
    case Stage::s2_title_outline: return title_outline_reply(request.prompt);
    case Stage::s3_keywords: return keywords_reply(request.prompt);
    case Stage::s4_augment: return augment_reply(request.prompt);
    case Stage::s5_write: return write_reply(request.prompt);
    case Stage::eval_writing: return eval_reply(request.prompt, yes_rate_);
    case Stage::eval_nli: return nli_reply(request.prompt);
  }
  return {};
}

CompletionResult SyntheticLlm::complete(const CompletionRequest& request) {
  request.validate();
  return {respond(request), "synthetic", false, 0.0};
}

std::vector<RetrievedDocument> SyntheticSearch::search(const SearchQuery& query) {
  query.validate();
  const auto words = content_words(query.query, 8);
  RetrievedDocument d;
  d.id = "doc-" + sha256_hex(query.query).substr(0, 12);
  d.query = query.query;
  d.title = query.query;
  const auto a = pick(words, 0, "topic");
  const auto b = pick(words, 1, "guide");
  d.body = "A reader guide on " + a + " and " + b + ". Seasonal checklist, budget planning, beginner mistakes, " +
           "local recommendations and maintenance routine for " + a + ". Comparison table of " + b +
           " options with prices and durations.";
  return {d};
}

}  // namespace writing_path
