#include "writing_path/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string scheme_name(TokenScheme s) {
  switch (s) {
    case TokenScheme::unicode_words: return "unicode_words";
    case TokenScheme::whitespace: return "whitespace";
    case TokenScheme::character_ngram: return "character_ngram";
  }
  return "unicode_words";
}

TokenScheme parse_scheme(const std::string& s) {
  for (auto t : {TokenScheme::unicode_words, TokenScheme::whitespace, TokenScheme::character_ngram})
    if (s == scheme_name(t)) return t;
  throw ConfigError("unknown tokenizer '" + s + "'");
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError("not a number: '" + v + "'");
  return d;
}

std::size_t to_size(const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("not a non-negative integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  const auto f = text::fold_case(v);
  if (f == "true" || f == "yes" || f == "1") return true;
  if (f == "false" || f == "no" || f == "0") return false;
  throw ConfigError("not a boolean: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(v);
  while (std::getline(in, cur, ',')) {
    auto t = text::trim(cur);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

fs::path resolve(const fs::path& base, const std::string& v) {
  fs::path p(v);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& value, const fs::path& base) {
  if (key == "seeds") c.seed_path = resolve(base, value);
  else if (key == "modes") {
    c.modes.clear();
    for (const auto& m : split_list(value)) {
      auto mode = parse_run_mode(m);
      if (!mode) throw ConfigError("unknown mode '" + m + "'");
      c.modes.push_back(*mode);
    }
  } else if (key == "model_id") c.pipeline.model_id = value;
  else if (key == "judge_model_id") c.judge.model_id = value;
  else if (key == "nli_model_id") c.nli.model_id = value;
  else if (key.rfind("temperature.", 0) == 0) {
    auto stage = parse_stage(key.substr(12));
    if (!stage) throw ConfigError("unknown stage in '" + key + "'");
    const double t = to_double(value);
    if (*stage == Stage::eval_writing) c.judge.temperature = t;
    else if (*stage == Stage::eval_nli) c.nli.temperature = t;
    else c.pipeline.temperatures[*stage] = t;
  } else if (key == "max_tokens") c.pipeline.max_tokens = static_cast<int>(to_size(value));
  else if (key == "judge_max_tokens") c.judge.max_tokens = static_cast<int>(to_size(value));
  else if (key == "soft_fail_search") c.pipeline.soft_fail_search = to_bool(value);
  else if (key == "draft_concurrency") c.pipeline.draft_concurrency = to_size(value);
  else if (key == "paragraph_ordinal_base") c.pipeline.paragraph_ordinal_base = std::stoi(value);
  else if (key == "concurrency") c.concurrency = to_size(value);
  else if (key == "judge_concurrency") c.judge.concurrency = c.nli.concurrency = to_size(value);
  else if (key == "templates") c.templates = resolve(base, value);
  else if (key == "checklist") c.checklist = resolve(base, value);
  else if (key == "output_dir") c.output_dir = resolve(base, value);
  else if (key == "cache_dir") c.cache_dir = resolve(base, value);
  else if (key == "scripted") c.scripted = resolve(base, value);
  else if (key == "tokenizer") c.coherence.tokenizer.scheme = parse_scheme(value);
  else if (key == "ngram") c.coherence.tokenizer.ngram = to_size(value);
  else if (key == "lowercase") c.coherence.tokenizer.lowercase = to_bool(value);
  else if (key == "stopwords") {
    auto words = split_list(value);
    c.coherence.tokenizer.stopwords = {words.begin(), words.end()};
  } else if (key == "window") c.coherence.window = to_size(value);
  else if (key == "top_k") c.coherence.top_k = to_size(value);
  else if (key == "epsilon") c.coherence.epsilon = to_double(value);
  else if (key == "max_n") c.bleu.max_n = to_size(value);
  else if (key == "bleu_epsilon") c.bleu.epsilon = to_double(value);
  else if (key == "self_bleu_unit") {
    if (value == "block") c.self_bleu_unit = SelfBleuUnit::block;
    else if (value == "line") c.self_bleu_unit = SelfBleuUnit::line;
    else throw ConfigError("self_bleu_unit must be block or line");
  } else if (key == "align_max_unmatched") c.align_max_unmatched = to_double(value);
  else throw ConfigError("unknown key '" + key + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  if (modes.empty()) throw ConfigError("modes is empty");
  if (seed_path.empty()) throw ConfigError("seeds is not set");
  if (templates.empty()) throw ConfigError("templates is not set");
  if (checklist.empty()) throw ConfigError("checklist is not set");
  if (output_dir.empty()) throw ConfigError("output_dir is not set");
  if (concurrency == 0) throw ConfigError("concurrency must be >= 1");
  if (coherence.window == 0) throw ConfigError("window must be >= 1");
  if (coherence.top_k < 2) throw ConfigError("top_k must be >= 2");
  if (bleu.max_n == 0) throw ConfigError("max_n must be >= 1");
  if (!(align_max_unmatched >= 0.0 && align_max_unmatched <= 1.0))
    throw ConfigError("align_max_unmatched must lie in [0, 1]");
}

ExperimentConfig parse_config(std::string_view content, const fs::path& base_dir) {
  ExperimentConfig c;
  std::size_t line_no = 0;
  for (const auto& raw : text::split_lines(content)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    if (text::trim(line).empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key(text::trim(line.substr(0, eq)));
    std::string value(text::trim(line.substr(eq + 1)));
    try {
      apply(c, key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = fs::absolute(path).parent_path();
  auto c = parse_config(ss.str(), base);
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json temps = json::object();
  for (const auto& [stage, t] : c.pipeline.temperatures) temps[to_string(stage)] = t;
  json modes = json::array();
  for (auto m : c.modes) modes.push_back(to_string(m));
  auto opt_path = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
  return json{
      {"seeds", c.seed_path.string()},
      {"modes", modes},
      {"model_id", c.pipeline.model_id},
      {"temperatures", temps},
      {"max_tokens", c.pipeline.max_tokens},
      {"soft_fail_search", c.pipeline.soft_fail_search},
      {"draft_concurrency", c.pipeline.draft_concurrency},
      {"paragraph_ordinal_base", c.pipeline.paragraph_ordinal_base},
      {"judge", {{"model_id", c.judge.model_id},
                 {"temperature", c.judge.temperature},
                 {"max_tokens", c.judge.max_tokens},
                 {"concurrency", c.judge.concurrency}}},
      {"nli", {{"model_id", c.nli.model_id},
               {"temperature", c.nli.temperature},
               {"max_tokens", c.nli.max_tokens},
               {"concurrency", c.nli.concurrency}}},
      {"templates", c.templates.string()},
      {"checklist", c.checklist.string()},
      {"output_dir", c.output_dir.string()},
      {"cache_dir", opt_path(c.cache_dir)},
      {"scripted", opt_path(c.scripted)},
      {"concurrency", c.concurrency},
      {"tokenizer", {{"scheme", scheme_name(c.coherence.tokenizer.scheme)},
                     {"ngram", c.coherence.tokenizer.ngram},
                     {"lowercase", c.coherence.tokenizer.lowercase},
                     {"stopwords", c.coherence.tokenizer.stopwords}}},
      {"window", c.coherence.window},
      {"top_k", c.coherence.top_k},
      {"epsilon", c.coherence.epsilon},
      {"max_n", c.bleu.max_n},
      {"bleu_epsilon", c.bleu.epsilon},
      {"self_bleu_unit", c.self_bleu_unit == SelfBleuUnit::line ? "line" : "block"},
      {"align_max_unmatched", c.align_max_unmatched},
  };
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.seed_path = j.at("seeds").get<std::string>();
    c.modes.clear();
    for (const auto& m : j.at("modes")) {
      auto mode = parse_run_mode(m.get<std::string>());
      if (!mode) throw ConfigError("unknown mode in snapshot");
      c.modes.push_back(*mode);
    }
    c.pipeline.model_id = j.at("model_id").get<std::string>();
    for (const auto& [name, t] : j.at("temperatures").items()) {
      auto stage = parse_stage(name);
      if (!stage) throw ConfigError("unknown stage in snapshot");
      c.pipeline.temperatures[*stage] = t.get<double>();
    }
    c.pipeline.max_tokens = j.at("max_tokens").get<int>();
    c.pipeline.soft_fail_search = j.at("soft_fail_search").get<bool>();
    c.pipeline.draft_concurrency = j.at("draft_concurrency").get<std::size_t>();
    c.pipeline.paragraph_ordinal_base = j.at("paragraph_ordinal_base").get<int>();
    const auto& jd = j.at("judge");
    c.judge = {jd.at("model_id").get<std::string>(), jd.at("temperature").get<double>(),
               jd.at("max_tokens").get<int>(), jd.at("concurrency").get<std::size_t>()};
    const auto& jn = j.at("nli");
    c.nli = {jn.at("model_id").get<std::string>(), jn.at("temperature").get<double>(),
             jn.at("max_tokens").get<int>(), jn.at("concurrency").get<std::size_t>()};
    c.templates = j.at("templates").get<std::string>();
    c.checklist = j.at("checklist").get<std::string>();
    c.output_dir = j.at("output_dir").get<std::string>();
    if (!j.at("cache_dir").is_null()) c.cache_dir = j.at("cache_dir").get<std::string>();
    if (!j.at("scripted").is_null()) c.scripted = j.at("scripted").get<std::string>();
    c.concurrency = j.at("concurrency").get<std::size_t>();
    const auto& jt = j.at("tokenizer");
    c.coherence.tokenizer.scheme = parse_scheme(jt.at("scheme").get<std::string>());
    c.coherence.tokenizer.ngram = jt.at("ngram").get<std::size_t>();
    c.coherence.tokenizer.lowercase = jt.at("lowercase").get<bool>();
    c.coherence.tokenizer.stopwords = jt.at("stopwords").get<std::set<std::string>>();
    c.coherence.window = j.at("window").get<std::size_t>();
    c.coherence.top_k = j.at("top_k").get<std::size_t>();
    c.coherence.epsilon = j.at("epsilon").get<double>();
    c.bleu.max_n = j.at("max_n").get<std::size_t>();
    c.bleu.epsilon = j.at("bleu_epsilon").get<double>();
    c.self_bleu_unit = j.at("self_bleu_unit").get<std::string>() == "line" ? SelfBleuUnit::line : SelfBleuUnit::block;
    c.align_max_unmatched = j.at("align_max_unmatched").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config snapshot: ") + e.what());
  }
  return c;
}

}  // namespace writing_path
