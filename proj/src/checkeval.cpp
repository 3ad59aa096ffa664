#include "writing_path/checkeval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <thread>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace {

struct AspectInfo {
  AspectName name;
  const char* id;
  const char* display;
};

constexpr AspectInfo kAspectInfo[] = {
    {AspectName::linguistic_fluency, "linguistic_fluency", "Linguistic Fluency"},
    {AspectName::logical_fluency, "logical_fluency", "Logical Fluency"},
    {AspectName::coherence, "coherence", "Coherence"},
    {AspectName::consistency, "consistency", "Consistency"},
    {AspectName::complexity, "complexity", "Complexity"},
    {AspectName::specificity, "specificity", "Specificity"},
    {AspectName::interestingness, "interestingness", "Interestingness"},
};

const AspectInfo& info(AspectName name) {
  for (const auto& i : kAspectInfo)
    if (i.name == name) return i;
  return kAspectInfo[0];
}

}  // namespace

std::string to_string(AspectName name) { return info(name).id; }

std::string display_name(AspectName name) { return info(name).display; }

AspectName parse_aspect_name(std::string_view s) {
  std::string key = text::fold_case(text::trim(s));
  std::replace(key.begin(), key.end(), ' ', '_');
  for (const auto& i : kAspectInfo)
    if (key == i.id) return i.name;
  throw InvalidInput("unknown aspect '" + std::string(s) + "'");
}

std::vector<std::string> Aspect::questions() const {
  std::vector<std::string> out;
  for (const auto& s : subaspects) out.insert(out.end(), s.questions.begin(), s.questions.end());
  return out;
}

std::size_t Aspect::question_count() const {
  std::size_t n = 0;
  for (const auto& s : subaspects) n += s.questions.size();
  return n;
}

const Aspect& Checklist::get(AspectName name) const {
  for (const auto& a : aspects)
    if (a.name == name) return a;
  throw InvalidInput("aspect not in checklist: " + to_string(name));
}

std::size_t Checklist::question_count() const {
  std::size_t n = 0;
  for (const auto& a : aspects) n += a.question_count();
  return n;
}

// ---------------------------------------------------------------------------
// Checklist file

Checklist parse_checklist(std::istream& in) {
  Checklist out;
  std::set<AspectName> seen;
  std::size_t aspect_line = 0;
  std::size_t line_no = 0;

  auto close_aspect = [&] {
    if (out.aspects.empty()) return;
    const auto& a = out.aspects.back();
    if (a.question_count() == 0)
      throw ChecklistFormatError(aspect_line, "aspect '" + display_name(a.name) + "' has no questions");
    for (const auto& s : a.subaspects)
      if (s.questions.empty())
        throw ChecklistFormatError(aspect_line, "subaspect '" + s.name + "' has no questions");
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line(text::trim(raw));
    if (line.empty() || line[0] == '#') continue;
    const bool indented = raw[0] == ' ' || raw[0] == '\t';

    if (!indented) {
      close_aspect();
      auto colon = line.find(':');
      if (colon == std::string::npos) throw ChecklistFormatError(line_no, "aspect line needs 'Name: definition'");
      AspectName name;
      try {
        name = parse_aspect_name(line.substr(0, colon));
      } catch (const InvalidInput&) {
        throw ChecklistFormatError(line_no, "unknown aspect '" + std::string(text::trim(line.substr(0, colon))) + "'");
      }
      if (!seen.insert(name).second)
        throw ChecklistFormatError(line_no, "duplicate aspect '" + display_name(name) + "'");
      out.aspects.push_back({name, std::string(text::trim(line.substr(colon + 1))), {}});
      aspect_line = line_no;
      continue;
    }

    if (out.aspects.empty()) throw ChecklistFormatError(line_no, "indented line before any aspect");
    auto& aspect = out.aspects.back();
    if (text::starts_with_icase(line, "Q:")) {
      if (aspect.subaspects.empty()) throw ChecklistFormatError(line_no, "question outside a subaspect");
      std::string q(text::trim(line.substr(2)));
      if (q.empty()) throw ChecklistFormatError(line_no, "empty question");
      aspect.subaspects.back().questions.push_back(std::move(q));
    } else {
      aspect.subaspects.push_back({line, {}});
    }
  }
  close_aspect();

  for (auto name : kAllAspects)
    if (!seen.count(name))
      throw ChecklistFormatError(line_no + 1, "missing aspect '" + display_name(name) + "'");
  return out;
}

Checklist load_checklist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checklist " + path.string());
  return parse_checklist(in);
}

// ---------------------------------------------------------------------------
// Prompt and answers

std::string render_writing_eval_prompt(const Aspect& aspect, std::string_view writing,
                                       const PromptTemplate& eval_template) {
  if (text::trim(writing).empty()) throw InvalidInput("writing is empty");
  auto questions = aspect.questions();
  if (questions.empty()) throw InvalidInput("aspect has no questions");
  return render_prompt(eval_template, {{slots::kAspect, display_name(aspect.name)},
                                       {slots::kDefinition, aspect.definition},
                                       {slots::kQuestion, text::join(questions, "\nQ. ")},
                                       {slots::kWriting, std::string(writing)}});
}

std::vector<bool> parse_boolean_answers(std::string_view raw, std::size_t expected) {
  if (expected == 0) throw InvalidInput("expected must be >= 1");
  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); };
  std::vector<bool> out;
  for (std::size_t i = 0; i + 1 < raw.size(); ++i) {
    if ((raw[i] != 'A' && raw[i] != 'a') || raw[i + 1] != ':') continue;
    if (i > 0 && is_alpha(raw[i - 1])) continue;
    std::size_t b = i + 2;
    while (b < raw.size() && (raw[b] == ' ' || raw[b] == '\t')) ++b;
    std::size_t e = b;
    while (e < raw.size() && !std::isspace(static_cast<unsigned char>(raw[e]))) ++e;
    std::string token(raw.substr(b, e - b));
    while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.back()))) token.pop_back();
    while (!token.empty() && !std::isalnum(static_cast<unsigned char>(token.front()))) token.erase(0, 1);
    token = text::fold_case(token);
    if (token == "yes") out.push_back(true);
    else if (token == "no") out.push_back(false);
    else
      throw AnswerParseError(AnswerParseErrorKind::unrecognized_token,
                             "answer " + std::to_string(out.size() + 1) + ": '" + std::string(raw.substr(b, e - b)) +
                                 "'");
    i = e > 0 ? e - 1 : i;
  }
  if (out.size() != expected)
    throw AnswerParseError(AnswerParseErrorKind::count_mismatch,
                           "expected " + std::to_string(expected) + " answers, got " + std::to_string(out.size()));
  return out;
}

double aspect_score(const std::vector<bool>& answers) {
  if (answers.empty()) throw InvalidInput("empty");
  const auto yes = std::count(answers.begin(), answers.end(), true);
  return 100.0 * static_cast<double>(yes) / static_cast<double>(answers.size());
}

double overall_score(const std::vector<double>& aspect_scores) {
  if (aspect_scores.size() != kAllAspects.size()) throw InvalidInput("arity");
  double sum = 0.0;
  for (double s : aspect_scores) {
    if (!(s >= 0.0 && s <= 100.0)) throw InvalidInput("out_of_range");
    sum += s;
  }
  return sum / static_cast<double>(aspect_scores.size());
}

double overall_score(const std::map<AspectName, double>& aspect_scores) {
  std::vector<double> v;
  for (const auto& [name, s] : aspect_scores) v.push_back(s);
  return overall_score(v);
}

// ---------------------------------------------------------------------------
// Judge

WritingScorecard evaluate_writing(const ComposedDocument& doc, const Checklist& checklist, LlmProvider& judge,
                                  const PromptTemplate& eval_template, const JudgeSettings& settings,
                                  AnswerSheet* answers) {
  if (text::trim(doc.full_text).empty()) throw InvalidInput("document text is empty");
  const std::size_t n = checklist.aspects.size();
  std::vector<std::optional<std::vector<bool>>> parsed(n);
  std::vector<std::exception_ptr> errors(n);

  auto judge_one = [&](std::size_t i) {
    const Aspect& aspect = checklist.aspects[i];
    try {
      CompletionRequest req{render_writing_eval_prompt(aspect, doc.full_text, eval_template), settings.model_id,
                            settings.temperature, settings.max_tokens, to_string(Stage::eval_writing)};
      parsed[i] = parse_boolean_answers(judge.complete(req).text, aspect.question_count());
    } catch (Error& e) {
      e.add_context("aspect " + to_string(aspect.name));
      errors[i] = std::current_exception();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  const std::size_t width = std::min(std::max<std::size_t>(1, settings.concurrency), n);
  if (width <= 1) {
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

  WritingScorecard card;
  for (std::size_t i = 0; i < n; ++i) {
    card.aspect_scores[checklist.aspects[i].name] = aspect_score(*parsed[i]);
    if (answers) (*answers)[checklist.aspects[i].name] = std::move(*parsed[i]);
  }
  card.overall = overall_score(card.aspect_scores);
  return card;
}

// ---------------------------------------------------------------------------
// Kendall tau-b (Knight's merge-sort formulation)

namespace {

std::int64_t tie_pairs(const std::vector<std::pair<double, double>>& v, bool both) {
  std::int64_t total = 0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i + 1;
    while (j < v.size() && v[j].first == v[i].first && (!both || v[j].second == v[i].second)) ++j;
    const auto t = static_cast<std::int64_t>(j - i);
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

std::int64_t merge_count(std::vector<double>& a, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = merge_count(a, buf, lo, mid) + merge_count(a, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (a[j] < a[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = a[j++];
    } else {
      buf[k++] = a[i++];
    }
  }
  while (i < mid) buf[k++] = a[i++];
  while (j < hi) buf[k++] = a[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            a.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("length_mismatch");
  const std::size_t n = x.size();
  std::vector<std::pair<double, double>> xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) throw InvalidInput("nan value");
    xy[i] = {x[i], y[i]};
  }
  std::sort(xy.begin(), xy.end());

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const std::int64_t n1 = tie_pairs(xy, false);
  const std::int64_t n3 = tie_pairs(xy, true);

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = xy[i].second;
  const std::int64_t swaps = merge_count(ys, buf, 0, n);

  std::vector<std::pair<double, double>> ysorted(n);
  for (std::size_t i = 0; i < n; ++i) ysorted[i] = {ys[i], 0.0};
  const std::int64_t n2 = tie_pairs(ysorted, false);

  if (n0 == n1 || n0 == n2) throw InvalidInput("all_tied");
  const std::int64_t diff = n0 - n1 - n2 + n3 - 2 * swaps;  // concordant - discordant
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(static_cast<double>(diff) / denom, -1.0, 1.0);
}

}  // namespace writing_path
