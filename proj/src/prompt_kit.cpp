#include "writing_path/prompt_kit.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Templates

namespace {

struct SlotSpan {
  std::size_t begin;  // position of '{'
  std::size_t end;    // one past '}'
  std::string name;
};

std::vector<SlotSpan> scan_slots(std::string_view body) {
  std::vector<SlotSpan> out;
  std::size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '{') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < body.size() && body[j] != '}' && body[j] != '{' && body[j] != '\n') ++j;
    if (j < body.size() && body[j] == '}' && j > i + 1) {
      out.push_back({i, j + 1, std::string(body.substr(i + 1, j - i - 1))});
      i = j + 1;
    } else {
      i = j;
    }
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw TemplateError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::set<std::string> find_slots(std::string_view body) {
  std::set<std::string> out;
  for (auto& s : scan_slots(body)) out.insert(s.name);
  return out;
}

PromptTemplate::PromptTemplate(Stage stage, std::string body, std::set<std::string> required_slots,
                               BindingMap presets)
    : stage_(stage),
      body_(std::move(body)),
      required_slots_(std::move(required_slots)),
      presets_(std::move(presets)) {
  auto found = find_slots(body_);
  for (const auto& s : found)
    if (!required_slots_.count(s))
      throw TemplateError(to_string(stage_) + " template uses undeclared slot {" + s + "}");
  for (const auto& s : required_slots_)
    if (!found.count(s))
      throw TemplateError(to_string(stage_) + " template declares unused slot {" + s + "}");
  for (const auto& [k, v] : presets_)
    if (!found.count(k))
      throw TemplateError(to_string(stage_) + " preset binds unknown slot {" + k + "}");
}

PromptTemplate PromptTemplate::from_body(Stage stage, std::string body, BindingMap presets) {
  auto slots = find_slots(body);
  return PromptTemplate(stage, std::move(body), std::move(slots), std::move(presets));
}

std::string render_prompt(const PromptTemplate& tmpl, const BindingMap& bindings) {
  for (const auto& [name, value] : bindings)
    if (!tmpl.required_slots().count(name)) throw UnknownSlot(name);

  auto lookup = [&](const std::string& name) -> const std::string* {
    if (auto it = bindings.find(name); it != bindings.end()) return &it->second;
    if (auto it = tmpl.presets().find(name); it != tmpl.presets().end()) return &it->second;
    return nullptr;
  };
  for (const auto& name : tmpl.required_slots())
    if (!lookup(name)) throw MissingSlot(name);

  const std::string& body = tmpl.body();
  std::string out;
  out.reserve(body.size());
  std::size_t pos = 0;
  for (const auto& span : scan_slots(body)) {
    out.append(body, pos, span.begin - pos);
    out += *lookup(span.name);
    pos = span.end;
  }
  out.append(body, pos, std::string::npos);
  return out;
}

TemplateSet TemplateSet::load(const fs::path& manifest) {
  json m;
  try {
    m = json::parse(read_file(manifest));
  } catch (const json::exception& e) {
    throw TemplateError("bad template manifest " + manifest.string() + ": " + e.what());
  }
  const fs::path dir = manifest.parent_path();

  std::map<std::string, BindingMap> fewshot;
  if (auto it = m.find("fewshot"); it != m.end() && it->is_string()) {
    try {
      fewshot = json::parse(read_file(dir / it->get<std::string>())).get<std::map<std::string, BindingMap>>();
    } catch (const json::exception& e) {
      throw TemplateError("bad fewshot file: " + std::string(e.what()));
    }
  }

  TemplateSet set;
  try {
    for (const auto& entry : m.at("templates")) {
      const auto stage_name = entry.at("stage").get<std::string>();
      auto stage = parse_stage(stage_name);
      if (!stage) throw TemplateError("unknown stage '" + stage_name + "' in manifest");
      auto required = entry.at("required_slots").get<std::set<std::string>>();
      BindingMap presets;
      if (auto it = fewshot.find(stage_name); it != fewshot.end()) presets = it->second;
      set.add(PromptTemplate(*stage, read_file(dir / entry.at("file").get<std::string>()),
                             std::move(required), std::move(presets)));
    }
  } catch (const json::exception& e) {
    throw TemplateError("bad template manifest " + manifest.string() + ": " + e.what());
  }
  return set;
}

void TemplateSet::add(PromptTemplate tmpl) {
  Stage s = tmpl.stage();
  templates_.insert_or_assign(s, std::move(tmpl));
}

bool TemplateSet::contains(Stage stage) const { return templates_.count(stage) > 0; }

const PromptTemplate& TemplateSet::get(Stage stage) const {
  auto it = templates_.find(stage);
  if (it == templates_.end()) throw TemplateError("no template for stage " + to_string(stage));
  return it->second;
}

// ---------------------------------------------------------------------------
// Parsers

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }

enum class LineKind { top, sub, plain };

struct Classified {
  LineKind kind;
  std::string text;
};

/// Classifies a trimmed line by its numbering prefix.
Classified classify(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == 0 || i > 6) return {LineKind::plain, std::string(s)};

  // N.M / N-M (optionally N.M.K), then optional '.' or ')'
  if (i + 1 < s.size() && (s[i] == '.' || s[i] == '-') && is_digit(s[i + 1])) {
    std::size_t j = i;
    while (j + 1 < s.size() && (s[j] == '.' || s[j] == '-') && is_digit(s[j + 1])) {
      ++j;
      while (j < s.size() && is_digit(s[j])) ++j;
    }
    if (j < s.size() && (s[j] == '.' || s[j] == ')')) ++j;
    if (j == s.size() || is_blank(s[j])) return {LineKind::sub, std::string(text::trim(s.substr(j)))};
    return {LineKind::plain, std::string(s)};
  }
  if (i < s.size() && (s[i] == '.' || s[i] == ')'))
    return {LineKind::top, std::string(text::trim(s.substr(i + 1)))};

  std::size_t j = i;
  while (j < s.size() && is_blank(s[j])) ++j;
  if (j < s.size() && s[j] == '-' && (j + 1 == s.size() || is_blank(s[j + 1])))
    return {LineKind::top, std::string(text::trim(s.substr(j + 1)))};
  return {LineKind::plain, std::string(s)};
}

std::string strip_bullet(std::string_view s) {
  for (std::string_view b : {"- ", "* ", "+ ", "\xE2\x80\xA2 "}) {
    if (s.substr(0, b.size()) == b) return std::string(text::trim(s.substr(b.size())));
  }
  return std::string(s);
}

bool is_marker_line(std::string_view trimmed) {
  return trimmed.size() > 4 && trimmed.substr(0, 2) == "==" &&
         trimmed.substr(trimmed.size() - 2) == "==" && trimmed[2] != '=';
}

/// Raw lines of the first `==name==` block, up to the next marker line.
std::optional<std::vector<std::string>> find_block(std::string_view raw, std::string_view name) {
  const std::string marker = "==" + std::string(name) + "==";
  auto lines = text::split_lines(raw);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]) != marker) continue;
    std::vector<std::string> block;
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      if (is_marker_line(text::trim(lines[j]))) break;
      block.push_back(lines[j]);
    }
    return block;
  }
  return std::nullopt;
}

bool block_empty(const std::vector<std::string>& block) {
  for (const auto& l : block)
    if (!text::trim(l).empty()) return false;
  return true;
}

void append_continuation(std::string& target, std::string_view extra) {
  if (!target.empty()) target += ' ';
  target += extra;
}

}  // namespace

TitledOutline parse_title_and_initial_outline(std::string_view raw) {
  auto title_block = find_block(raw, "Title");
  if (!title_block || block_empty(*title_block))
    throw ParseError(ParseErrorKind::missing_block, "==Title==");
  auto outline_block = find_block(raw, "Initial Outline");
  if (!outline_block || block_empty(*outline_block))
    throw ParseError(ParseErrorKind::missing_block, "==Initial Outline==");

  TitledOutline result;
  std::vector<std::string> title_parts;
  for (const auto& l : *title_block) {
    auto t = text::trim(l);
    if (!t.empty()) title_parts.emplace_back(t);
  }
  result.title = text::join(title_parts, " ");

  std::vector<std::string> headers;
  for (const auto& l : *outline_block) {
    auto t = text::trim(l);
    if (t.empty()) continue;
    auto c = classify(t);
    if (c.kind == LineKind::top) headers.push_back(c.text);
    else if (!headers.empty()) append_continuation(headers.back(), t);
  }
  for (auto& h : headers) {
    std::string trimmed(text::trim(h));
    if (!trimmed.empty()) result.outline.sections.push_back({trimmed, {}});
  }
  if (result.outline.sections.empty())
    throw ParseError(ParseErrorKind::no_items, "==Initial Outline==");
  return result;
}

Outline parse_augmented_outline(std::string_view raw) {
  auto block = find_block(raw, "Augmented Outline");
  if (!block || block_empty(*block))
    throw ParseError(ParseErrorKind::missing_block, "==Augmented Outline==");

  Outline outline;
  bool last_was_sub = false;
  for (const auto& line : *block) {
    auto t = text::trim(line);
    if (t.empty()) continue;
    const bool indented = is_blank(line.front());
    auto c = classify(t);

    if (c.kind == LineKind::sub || indented) {
      std::string sub = c.kind == LineKind::plain ? strip_bullet(t) : c.text;
      if (outline.sections.empty()) throw ParseError(ParseErrorKind::orphan_subheader, std::string(t));
      if (sub.empty()) continue;
      auto& subs = outline.sections.back().subheaders;
      if (std::find(subs.begin(), subs.end(), sub) == subs.end()) subs.push_back(std::move(sub));
      last_was_sub = true;
    } else if (c.kind == LineKind::top) {
      outline.sections.push_back({c.text, {}});
      last_was_sub = false;
    } else if (!outline.sections.empty()) {
      auto& sec = outline.sections.back();
      if (last_was_sub && !sec.subheaders.empty()) append_continuation(sec.subheaders.back(), t);
      else append_continuation(sec.header, t);
    }
  }
  // A header line like "3." with nothing after it and no continuation.
  std::erase_if(outline.sections, [](const OutlineSection& s) { return text::trim(s.header).empty(); });
  if (outline.sections.empty()) throw ParseError(ParseErrorKind::no_items, "==Augmented Outline==");
  return outline;
}

KeywordSet parse_keyword_list(std::string_view raw, std::string provenance) {
  KeywordSet out;
  out.provenance = std::move(provenance);
  std::set<std::string> seen;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= raw.size(); ++i) {
    if (i < raw.size() && raw[i] != ',' && raw[i] != '\n') continue;
    auto item = text::trim(raw.substr(start, i - start));
    start = i + 1;
    if (item.empty()) continue;
    if (seen.insert(text::fold_case(item)).second) out.keywords.emplace_back(item);
  }
  return out;
}

namespace {

struct FieldAlias {
  const char* field;
  std::string_view alias;
};

// Longest aliases first so "the type of post" wins over "type".
constexpr FieldAlias kFieldAliases[] = {
    {"purpose", "the purpose of the post"}, {"purpose", "purpose of the post"},
    {"type", "the type of post"},           {"type", "type of post"},
    {"type", "the type of the post"},       {"type", "post type"},
    {"style", "the style of the post"},     {"style", "style of the post"},
    {"style", "writing style"},             {"keywords", "keywords"},
    {"keywords", "keyword"},                {"purpose", "purpose"},
    {"type", "type"},                       {"style", "style"},
};

std::string_view strip_decoration(std::string_view t) {
  auto c = classify(t);
  if (c.kind == LineKind::top) t = t.substr(t.size() - c.text.size());
  if (t.substr(0, 2) == "- " || t.substr(0, 2) == "* ") t = text::trim(t.substr(2));
  while (t.substr(0, 2) == "**") t = t.substr(2);
  return text::trim(t);
}

/// Returns the value if `line` starts with `label` followed by a separator.
std::optional<std::string> labelled_value(std::string_view line, std::string_view label) {
  if (!text::starts_with_icase(line, label)) return std::nullopt;
  std::string_view rest = line.substr(label.size());
  while (rest.substr(0, 2) == "**") rest = rest.substr(2);
  rest = text::trim(rest);
  while (rest.substr(0, 2) == "**") rest = rest.substr(2);
  if (rest.empty()) return std::string{};
  if (rest[0] == ':' || rest[0] == '-') return std::string(text::trim(rest.substr(1)));
  if (rest.substr(0, 3) == "\xEF\xBC\x9A") return std::string(text::trim(rest.substr(3)));  // fullwidth colon
  return std::nullopt;
}

}  // namespace

Metadata parse_metadata_block(std::string_view raw) {
  std::map<std::string, std::string> fields;
  std::map<std::string, std::string> extras;
  std::string* current = nullptr;
  std::string current_field;

  for (const auto& line : text::split_lines(raw)) {
    auto t = text::trim(line);
    if (t.empty() || is_marker_line(t)) continue;
    auto body = strip_decoration(t);

    bool matched = false;
    for (const auto& fa : kFieldAliases) {
      if (auto v = labelled_value(body, fa.alias)) {
        auto [it, inserted] = fields.try_emplace(fa.field, *v);
        if (!inserted && it->second.empty()) it->second = *v;
        current = &it->second;
        current_field = fa.field;
        matched = true;
        break;
      }
    }
    if (matched) continue;

    // Other short "label: value" lines are kept as extras.
    if (auto colon = body.find(':'); colon != std::string_view::npos && colon > 0 && colon <= 40) {
      std::string label = text::fold_case(text::trim(body.substr(0, colon)));
      std::string value(text::trim(body.substr(colon + 1)));
      auto [it, inserted] = extras.try_emplace(label, value);
      current = &it->second;
      current_field.clear();
      continue;
    }
    if (current) {
      if (current_field == "keywords") {
        if (!current->empty()) *current += '\n';
        *current += std::string(t);
      } else {
        append_continuation(*current, t);
      }
    }
  }

  Metadata m;
  auto require = [&](const char* name) -> std::string {
    auto it = fields.find(name);
    if (it == fields.end() || text::trim(it->second).empty())
      throw ParseError(ParseErrorKind::missing_field, name);
    return std::string(text::trim(it->second));
  };
  m.purpose = require("purpose");
  m.post_type = require("type");
  m.style = require("style");
  auto kw = parse_keyword_list(require("keywords"));
  if (kw.keywords.empty()) throw ParseError(ParseErrorKind::missing_field, "keywords");
  m.keywords = std::move(kw.keywords);
  m.extras = std::move(extras);
  return m;
}

// ---------------------------------------------------------------------------
// Formatters

std::string format_section(const Outline& outline, std::size_t section_index) {
  if (section_index < 1 || section_index > outline.sections.size())
    throw IndexError(section_index, outline.sections.size());
  const auto& sec = outline.sections[section_index - 1];
  std::string out = std::to_string(section_index) + ". " + sec.header;
  for (std::size_t j = 0; j < sec.subheaders.size(); ++j) {
    out += "\n  " + std::to_string(section_index) + "." + std::to_string(j + 1) + " " +
           sec.subheaders[j];
  }
  return out;
}

std::string format_outline(const Outline& outline) {
  std::string out;
  for (std::size_t i = 1; i <= outline.sections.size(); ++i) {
    if (i > 1) out += '\n';
    out += format_section(outline, i);
  }
  return out;
}

std::string format_metadata_block(const Metadata& m) {
  std::string out = "1. purpose: " + m.purpose + "\n2. type: " + m.post_type +
                    "\n3. style: " + m.style + "\n4. keywords: " + text::join(m.keywords, ", ");
  for (const auto& [k, v] : m.extras) out += "\n" + k + ": " + v;
  return out;
}

std::string format_title_and_initial_outline(const TitledOutline& t) {
  return "==Title==\n" + t.title + "\n==Initial Outline==\n" + format_outline(t.outline);
}

}  // namespace writing_path
