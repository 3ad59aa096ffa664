#include "writing_path/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "writing_path/error.hpp"
#include "writing_path/http_providers.hpp"
#include "writing_path/metrics.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
    if (!out.flush()) throw Error("write failed for " + p.string());
  }
  fs::rename(tmp, p);
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  if (!fs::exists(p)) return out;
  for (const auto& line : text::split_lines(read_text(p))) {
    if (text::trim(line).empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

std::string lines_of(const std::vector<json>& items) {
  std::string s;
  for (const auto& j : items) s += dump(j) + "\n";
  return s;
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

RunMode mode_of(const json& j) {
  auto m = parse_run_mode(j.at("mode").get<std::string>());
  if (!m) throw Error("bad mode in run file");
  return *m;
}

Domain domain_of(const json& j) {
  auto d = parse_domain(j.at("domain").get<std::string>());
  if (!d) throw Error("bad domain in run file");
  return *d;
}

// Record serialization ------------------------------------------------------

json failure_json(const FailureRecord& f) {
  return json{{"seed_id", f.seed_id},
              {"mode", to_string(f.mode)},
              {"error", f.error},
              {"partial", f.partial ? json(*f.partial) : json(nullptr)}};
}

FailureRecord failure_from(const json& j) {
  FailureRecord f;
  f.seed_id = j.at("seed_id").get<std::string>();
  f.mode = mode_of(j);
  f.error = j.at("error").get<std::string>();
  if (!j.at("partial").is_null()) f.partial = j.at("partial").get<PipelineTrace>();
  return f;
}

json outline_json(const OutlineReport& r) {
  return json{{"seed_id", r.seed_id},
              {"outline_type", to_string(r.outline_type)},
              {"model_id", r.model_id},
              {"domain", to_string(r.domain)},
              {"nli", opt(r.nli)},
              {"uci", opt(r.uci)},
              {"npmi", opt(r.npmi)},
              {"topic_diversity", opt(r.topic_diversity)},
              {"self_bleu", opt(r.self_bleu)},
              {"diagnostics", r.diagnostics}};
}

OutlineReport outline_from(const json& j) {
  OutlineReport r;
  r.seed_id = j.at("seed_id").get<std::string>();
  r.outline_type = j.at("outline_type").get<std::string>() == "augmented" ? OutlineType::augmented
                                                                        : OutlineType::initial;
  r.model_id = j.at("model_id").get<std::string>();
  r.domain = domain_of(j);
  r.nli = opt_from(j, "nli");
  r.uci = opt_from(j, "uci");
  r.npmi = opt_from(j, "npmi");
  r.topic_diversity = opt_from(j, "topic_diversity");
  r.self_bleu = opt_from(j, "self_bleu");
  r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return r;
}

json scorecard_json(const ScorecardRecord& r) {
  json aspects = json::object();
  for (const auto& [a, s] : r.scorecard.aspect_scores) aspects[to_string(a)] = s;
  return json{{"seed_id", r.seed_id},
              {"mode", to_string(r.mode)},
              {"model_id", r.model_id},
              {"domain", to_string(r.domain)},
              {"aspect_scores", aspects},
              {"overall", r.scorecard.overall}};
}

ScorecardRecord scorecard_from(const json& j) {
  ScorecardRecord r;
  r.seed_id = j.at("seed_id").get<std::string>();
  r.mode = mode_of(j);
  r.model_id = j.at("model_id").get<std::string>();
  r.domain = domain_of(j);
  for (const auto& [name, v] : j.at("aspect_scores").items())
    r.scorecard.aspect_scores[parse_aspect_name(name)] = v.get<double>();
  r.scorecard.overall = j.at("overall").get<double>();
  return r;
}

json diagnostic_json(const Diagnostic& d) {
  return json{{"seed_id", d.seed_id}, {"item", d.item}, {"message", d.message}};
}

}  // namespace

std::string to_string(OutlineType t) { return t == OutlineType::augmented ? "augmented" : "initial"; }

const SeedPost* ExperimentRun::seed(const std::string& id) const {
  for (const auto& s : seeds)
    if (s.id == id) return &s;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Seeds

std::vector<SeedPost> ingest_seeds(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError(0, "file_not_found");
  std::vector<SeedPost> seeds;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw IngestError(line_no, "invalid_json");
    }
    if (!j.is_object()) throw IngestError(line_no, "invalid_json");
    auto str = [&](const char* key, bool required) -> std::optional<std::string> {
      auto it = j.find(key);
      if (it == j.end() || it->is_null()) {
        if (required) throw IngestError(line_no, "missing_field");
        return std::nullopt;
      }
      if (!it->is_string()) throw IngestError(line_no, "missing_field");
      return it->get<std::string>();
    };
    SeedPost s;
    s.id = *str("id", true);
    if (text::trim(s.id).empty()) throw IngestError(line_no, "empty_id");
    auto domain = parse_domain(*str("domain", true));
    if (!domain) throw IngestError(line_no, "unknown_domain");
    s.domain = *domain;
    s.body = *str("body", true);
    if (text::trim(s.body).empty()) throw IngestError(line_no, "empty_body");
    s.title = str("title", false).value_or("");
    s.source_url = str("source_url", false);
    if (!ids.insert(s.id).second) throw IngestError(line_no, "duplicate_id");
    seeds.push_back(std::move(s));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Providers

ProviderStack::ProviderStack(std::unique_ptr<LlmProvider> llm, std::unique_ptr<SearchProvider> search,
                             const std::optional<fs::path>& cache_dir)
    : base_llm_(std::move(llm)), base_search_(std::move(search)) {
  counting_llm_ = std::make_unique<CountingLlm>(*base_llm_);
  counting_search_ = std::make_unique<CountingSearch>(*base_search_);
  if (cache_dir) {
    cache_ = std::make_shared<ResponseCache>(*cache_dir);
    cached_llm_ = std::make_unique<CachingLlm>(*counting_llm_, cache_);
    cached_search_ = std::make_unique<CachingSearch>(*counting_search_, cache_);
  }
}

ProviderStack ProviderStack::from_config(const ExperimentConfig& config) {
  if (config.scripted) {
    const auto llm_file = *config.scripted / "llm.jsonl";
    const auto search_file = *config.scripted / "search.jsonl";
    auto llm = std::make_unique<ScriptedLlm>(ScriptedLlm::load(llm_file));
    auto search = fs::exists(search_file) ? std::make_unique<ScriptedSearch>(ScriptedSearch::load(search_file))
                                          : std::make_unique<ScriptedSearch>();
    return ProviderStack(std::move(llm), std::move(search), config.cache_dir);
  }
  return ProviderStack(std::make_unique<HttpLlm>(HttpLlm::from_env()),
                       std::make_unique<HttpSearch>(HttpSearch::from_env()), config.cache_dir);
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

class Appender {
public:
  explicit Appender(fs::path path) : path_(std::move(path)) {
    fs::create_directories(path_.parent_path());
    std::ofstream(path_, std::ios::trunc);
  }
  void append(const std::string& line) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app | std::ios::binary);
    out << line << '\n';
    out.flush();
  }

private:
  fs::path path_;
  std::mutex mu_;
};

std::vector<RunMode> canonical_modes(const std::vector<RunMode>& modes) {
  std::vector<RunMode> out;
  for (auto m : kAllModes)
    if (std::find(modes.begin(), modes.end(), m) != modes.end()) out.push_back(m);
  return out;
}

struct SeedResult {
  std::vector<PipelineTrace> traces;
  std::vector<FailureRecord> failures;
};

}  // namespace

ExperimentRun run_experiment(const ExperimentConfig& config, LlmProvider& llm, SearchProvider& search,
                             const TemplateSet& templates) {
  config.validate();
  ExperimentRun run;
  run.config = config;
  run.seeds = ingest_seeds(config.seed_path);

  const fs::path out = config.output_dir;
  fs::create_directories(out);
  write_text(out / run_files::kConfig, config_to_json(config).dump(2) + "\n");
  {
    std::vector<json> seeds;
    for (const auto& s : run.seeds) seeds.emplace_back(s);
    write_text(out / run_files::kSeeds, lines_of(seeds));
  }
  for (const char* stale : {run_files::kOutlineMetrics, run_files::kDiagnostics, run_files::kScorecards})
    fs::remove(out / stale);

  Appender trace_log(out / run_files::kTraces);
  Appender failure_log(out / run_files::kFailures);

  const auto modes = canonical_modes(config.modes);
  const bool need_outline = std::any_of(modes.begin(), modes.end(), [](RunMode m) { return m != RunMode::meta; });
  Providers providers{llm, search, templates};

  std::vector<SeedResult> results(run.seeds.size());
  auto run_seed = [&](std::size_t i) {
    const SeedPost& seed = run.seeds[i];
    SeedResult& r = results[i];
    std::optional<RunPrefix> prefix;
    std::string prefix_error;
    try {
      prefix = prepare_prefix(seed, need_outline, providers, config.pipeline);
    } catch (const std::exception& e) {
      prefix_error = e.what();
    }
    for (auto mode : modes) {
      if (!prefix) {
        PipelineTrace partial;
        partial.seed_id = seed.id;
        partial.mode = mode;
        partial.model_id = config.pipeline.model_id;
        FailureRecord f{seed.id, mode, prefix_error, partial};
        failure_log.append(dump(failure_json(f)));
        r.failures.push_back(std::move(f));
        continue;
      }
      auto outcome = run_writing_path(seed, mode, providers, config.pipeline, &*prefix);
      if (outcome.ok()) {
        trace_log.append(serialize_trace(outcome.trace));
        r.traces.push_back(std::move(outcome.trace));
      } else {
        FailureRecord f{seed.id, mode, *outcome.error, std::move(outcome.trace)};
        failure_log.append(dump(failure_json(f)));
        r.failures.push_back(std::move(f));
      }
    }
  };

  const std::size_t n = run.seeds.size();
  const std::size_t width = std::min(config.concurrency, std::max<std::size_t>(n, 1));
  if (width <= 1) {
    for (std::size_t i = 0; i < n; ++i) run_seed(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < width; ++w)
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run_seed(i);
      });
  }

  std::string traces_text;
  std::vector<json> failures;
  for (auto& r : results) {
    for (auto& t : r.traces) {
      traces_text += serialize_trace(t) + "\n";
      run.traces.push_back(std::move(t));
    }
    for (auto& f : r.failures) {
      failures.push_back(failure_json(f));
      run.failures.push_back(std::move(f));
    }
  }
  write_text(out / run_files::kTraces, traces_text);
  write_text(out / run_files::kFailures, lines_of(failures));
  return run;
}

ExperimentRun load_run(const fs::path& dir) {
  if (!fs::exists(dir / run_files::kConfig)) throw ConfigError("not a run directory: " + dir.string());
  ExperimentRun run;
  try {
    run.config = config_from_json(json::parse(read_text(dir / run_files::kConfig)));
    run.config.output_dir = dir;
    for (const auto& j : read_jsonl(dir / run_files::kSeeds)) run.seeds.push_back(j.get<SeedPost>());
    for (const auto& j : read_jsonl(dir / run_files::kTraces)) run.traces.push_back(j.get<PipelineTrace>());
    for (const auto& j : read_jsonl(dir / run_files::kFailures)) run.failures.push_back(failure_from(j));
    for (const auto& j : read_jsonl(dir / run_files::kOutlineMetrics)) run.outline_reports.push_back(outline_from(j));
    for (const auto& j : read_jsonl(dir / run_files::kScorecards)) run.scorecards.push_back(scorecard_from(j));
    for (const auto& j : read_jsonl(dir / run_files::kDiagnostics))
      run.diagnostics.push_back({j.at("seed_id").get<std::string>(), j.at("item").get<std::string>(),
                                 j.at("message").get<std::string>()});
  } catch (const json::exception& e) {
    throw ConfigError("corrupt run directory " + dir.string() + ": " + e.what());
  }
  return run;
}

// ---------------------------------------------------------------------------
// Evaluation

void evaluate_run(ExperimentRun& run, LlmProvider& judge, const TemplateSet& templates, const Checklist& checklist) {
  if (run.traces.empty()) throw ReportError("run has no successful trace");
  run.outline_reports.clear();
  run.scorecards.clear();
  run.diagnostics.clear();
  const auto& cfg = run.config;

  // Reference corpus: seed posts plus every retrieved document.
  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : run.seeds) corpus.push_back(tokenize(s.title + "\n" + s.body, cfg.coherence.tokenizer));
  std::set<std::string> doc_ids;
  for (const auto& t : run.traces)
    if (t.retrieved && doc_ids.insert(t.retrieved->id).second)
      corpus.push_back(tokenize(t.retrieved->title + "\n" + t.retrieved->body, cfg.coherence.tokenizer));
  std::optional<CooccurrenceModel> model;
  std::string model_error;
  try {
    model = CooccurrenceModel::build(corpus, cfg.coherence.window);
  } catch (const Error& e) {
    model_error = e.what();
  }

  auto domain_of_seed = [&](const std::string& id) {
    const SeedPost* s = run.seed(id);
    return s ? s->domain : Domain::other;
  };

  std::set<std::tuple<std::string, OutlineType, std::string>> seen;
  auto report_outline = [&](const PipelineTrace& t, OutlineType type, const Outline& outline) {
    if (!seen.insert({t.seed_id, type, t.model_id}).second) return;
    OutlineReport r;
    r.seed_id = t.seed_id;
    r.outline_type = type;
    r.model_id = t.model_id;
    r.domain = domain_of_seed(t.seed_id);
    auto note = [&](const std::string& metric, const std::string& msg) {
      r.diagnostics.push_back(metric + ": " + msg);
      run.diagnostics.push_back({t.seed_id, "outline:" + to_string(type) + ":" + metric, msg});
    };
    try {
      r.nli = nli_alignment(outline, judge, templates.get(Stage::eval_nli), cfg.nli).score;
    } catch (const std::exception& e) {
      note("nli", e.what());
    }
    if (model) {
      try {
        auto c = outline_coherence(outline, *model, cfg.coherence);
        r.uci = c.uci;
        r.npmi = c.npmi;
        if (c.unknown_words > 0)
          note("coherence", std::to_string(c.unknown_words) + " topic words absent from the reference corpus");
        if (c.skipped_sections > 0)
          note("coherence", std::to_string(c.skipped_sections) + " sections with fewer than two topic words");
      } catch (const std::exception& e) {
        note("coherence", e.what());
      }
    } else {
      note("coherence", model_error);
    }
    try {
      r.topic_diversity = topic_diversity(outline_topics(outline, cfg.coherence.tokenizer, cfg.coherence.top_k));
    } catch (const std::exception& e) {
      note("topic_diversity", e.what());
    }
    try {
      r.self_bleu = self_bleu(self_bleu_units(outline, cfg.self_bleu_unit), cfg.coherence.tokenizer, cfg.bleu);
    } catch (const std::exception& e) {
      note("self_bleu", e.what());
    }
    run.outline_reports.push_back(std::move(r));
  };

  for (const auto& t : run.traces) {
    if (t.initial_outline) report_outline(t, OutlineType::initial, *t.initial_outline);
    if (t.augmented_outline) report_outline(t, OutlineType::augmented, *t.augmented_outline);
  }

  for (const auto& t : run.traces) {
    if (!t.document) continue;
    try {
      auto card = evaluate_writing(*t.document, checklist, judge, templates.get(Stage::eval_writing), cfg.judge);
      run.scorecards.push_back({t.seed_id, t.mode, t.model_id, domain_of_seed(t.seed_id), std::move(card)});
    } catch (const std::exception& e) {
      run.diagnostics.push_back({t.seed_id, "scorecard:" + to_string(t.mode), e.what()});
    }
  }

  const fs::path out = cfg.output_dir;
  std::vector<json> rows;
  for (const auto& r : run.outline_reports) rows.push_back(outline_json(r));
  write_text(out / run_files::kOutlineMetrics, lines_of(rows));
  rows.clear();
  for (const auto& r : run.scorecards) rows.push_back(scorecard_json(r));
  write_text(out / run_files::kScorecards, lines_of(rows));
  rows.clear();
  for (const auto& d : run.diagnostics) rows.push_back(diagnostic_json(d));
  write_text(out / run_files::kDiagnostics, lines_of(rows));
}

// ---------------------------------------------------------------------------
// Aggregation and reports

std::vector<WritingAggregate> aggregate_scorecards(const std::vector<ScorecardRecord>& records, bool by_domain) {
  using Key = std::tuple<std::string, int, RunMode>;
  std::map<Key, WritingAggregate> groups;
  for (const auto& r : records) {
    Key key{r.model_id, by_domain ? static_cast<int>(r.domain) : -1, r.mode};
    auto& g = groups[key];
    g.model_id = r.model_id;
    if (by_domain) g.domain = r.domain;
    g.mode = r.mode;
    ++g.count;
    for (const auto& [a, s] : r.scorecard.aspect_scores) g.aspect_means[a] += s;
  }
  std::vector<WritingAggregate> out;
  for (auto& [key, g] : groups) {
    for (auto& [a, s] : g.aspect_means) s /= static_cast<double>(g.count);
    g.overall = overall_score(g.aspect_means);
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<OutlineAggregate> aggregate_outlines(const std::vector<OutlineReport>& reports, bool by_domain) {
  using Key = std::tuple<std::string, int, OutlineType>;
  std::map<Key, OutlineAggregate> groups;
  auto add = [](std::optional<MetricMean>& m, const std::optional<double>& v) {
    if (!v) return;
    if (!m) m = MetricMean{};
    m->mean += *v;
    ++m->count;
  };
  for (const auto& r : reports) {
    Key key{r.model_id, by_domain ? static_cast<int>(r.domain) : -1, r.outline_type};
    auto& g = groups[key];
    g.model_id = r.model_id;
    if (by_domain) g.domain = r.domain;
    g.outline_type = r.outline_type;
    ++g.count;
    add(g.nli, r.nli);
    add(g.uci, r.uci);
    add(g.npmi, r.npmi);
    add(g.topic_diversity, r.topic_diversity);
    add(g.self_bleu, r.self_bleu);
  }
  std::vector<OutlineAggregate> out;
  for (auto& [key, g] : groups) {
    for (auto* m : {&g.nli, &g.uci, &g.npmi, &g.topic_diversity, &g.self_bleu})
      if (*m) (*m)->mean /= static_cast<double>((*m)->count);
    out.push_back(std::move(g));
  }
  return out;
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "tsv") return ReportFormat::tsv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  return std::nullopt;
}

std::string format_score(double value) {
  double r = std::round(value * 100.0) / 100.0;
  if (r == 0.0) r = 0.0;
  return fmt::format("{:.2f}", r);
}

namespace {

std::string render_table(ReportFormat format, const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  if (format == ReportFormat::tsv) {
    out += text::join(header, "\t") + "\n";
    for (const auto& r : rows) out += text::join(r, "\t") + "\n";
    return out;
  }
  out += "| " + text::join(header, " | ") + " |\n";
  // Label columns precede "N"; numeric columns are right-aligned.
  const auto n_col = static_cast<std::size_t>(std::find(header.begin(), header.end(), "N") - header.begin());
  out += "|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i < n_col ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& r : rows) out += "| " + text::join(r, " | ") + " |\n";
  return out;
}

std::string metric_cell(const std::optional<MetricMean>& m) { return m ? format_score(m->mean) : "-"; }

}  // namespace

std::vector<fs::path> emit_report(const ExperimentRun& run, ReportFormat format) {
  if (run.scorecards.empty() && run.outline_reports.empty()) throw ReportError("nothing_to_report");
  const fs::path dir = run.config.output_dir / run_files::kReports;
  const std::string ext = format == ReportFormat::tsv ? ".tsv" : ".md";
  std::vector<fs::path> written;

  for (bool by_domain : {false, true}) {
    std::vector<std::string> header{"Model"};
    if (by_domain) header.push_back("Domain");
    header.insert(header.end(), {"Mode", "N"});
    for (auto a : kAllAspects) header.push_back(display_name(a));
    header.push_back("Overall");
    std::vector<std::vector<std::string>> rows;
    for (const auto& g : aggregate_scorecards(run.scorecards, by_domain)) {
      std::vector<std::string> row{g.model_id};
      if (by_domain) row.push_back(to_string(*g.domain));
      row.insert(row.end(), {to_string(g.mode), std::to_string(g.count)});
      for (auto a : kAllAspects) {
        auto it = g.aspect_means.find(a);
        row.push_back(it == g.aspect_means.end() ? "-" : format_score(it->second));
      }
      row.push_back(format_score(g.overall));
      rows.push_back(std::move(row));
    }
    auto path = dir / ((by_domain ? "writing_scores_by_domain" : "writing_scores") + ext);
    write_text(path, render_table(format, header, rows));
    written.push_back(path);
  }

  for (bool by_domain : {false, true}) {
    std::vector<std::string> header{"Model"};
    if (by_domain) header.push_back("Domain");
    header.insert(header.end(), {"Outline", "N", "NLI", "UCI", "NPMI", "Topic Diversity", "Self-BLEU"});
    std::vector<std::vector<std::string>> rows;
    for (const auto& g : aggregate_outlines(run.outline_reports, by_domain)) {
      std::vector<std::string> row{g.model_id};
      if (by_domain) row.push_back(to_string(*g.domain));
      row.insert(row.end(), {to_string(g.outline_type), std::to_string(g.count), metric_cell(g.nli),
                             metric_cell(g.uci), metric_cell(g.npmi), metric_cell(g.topic_diversity),
                             metric_cell(g.self_bleu)});
      rows.push_back(std::move(row));
    }
    auto path = dir / ((by_domain ? "outline_metrics_by_domain" : "outline_metrics") + ext);
    write_text(path, render_table(format, header, rows));
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Human alignment

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw AlignError("unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::optional<double> parse_number(const std::string& s) {
  const auto t = std::string(text::trim(s));
  if (t.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    double v = std::stod(t, &used);
    if (used == t.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

struct OutlineColumn {
  const char* name;
  double lo;
  double hi;
};

constexpr OutlineColumn kOutlineColumns[] = {
    {"cohesion", 1, 4},   {"natural_flow", 1, 4}, {"diversity", 1, 4},
    {"redundancy", 1, 4}, {"usefulness", 1, 4},   {"improvement", 0, 1},
};

}  // namespace

AlignmentResult align_human_scores(const ExperimentRun& run, const fs::path& csv_path) {
  std::string content;
  try {
    content = read_text(csv_path);
  } catch (const Error& e) {
    throw AlignError(e.what());
  }
  const auto table = parse_csv(content);
  if (table.empty()) throw AlignError("empty csv");
  std::vector<std::string> header;
  for (const auto& h : table[0]) header.push_back(text::fold_case(text::trim(h)));
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  };
  for (const char* required : {"seed_id", "mode", "rater_id", "overall_binary"})
    if (!column(required)) throw AlignError(std::string("missing column ") + required);
  const auto c_seed = *column("seed_id");
  const auto c_mode = *column("mode");
  const auto c_rater = *column("rater_id");
  const auto c_overall = *column("overall_binary");

  // Score columns: aspects (by id or display name) and any other numeric column.
  std::map<std::size_t, std::string> aspect_cols;
  std::map<std::size_t, std::string> other_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i == c_seed || i == c_mode || i == c_rater || i == c_overall || header[i] == "model_id") continue;
    try {
      aspect_cols[i] = to_string(parse_aspect_name(header[i]));
    } catch (const InvalidInput&) {
      other_cols[i] = header[i];
    }
  }

  AlignmentResult result;
  std::size_t total = 0;
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    const std::size_t row_no = r + 1;
    if (row.size() == 1 && text::trim(row[0]).empty()) continue;
    if (row.size() != header.size())
      throw AlignError("row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                       " fields, got " + std::to_string(row.size()));
    ++total;
    auto overall = parse_number(row[c_overall]);
    if (!overall || (*overall != 0.0 && *overall != 1.0))
      throw AlignError("row " + std::to_string(row_no) + ": overall_binary must be 0 or 1");
    for (const auto& oc : kOutlineColumns) {
      auto c = column(oc.name);
      if (!c) continue;
      auto v = parse_number(row[*c]);
      if (!v || *v < oc.lo || *v > oc.hi || std::floor(*v) != *v)
        throw AlignError("row " + std::to_string(row_no) + ": " + oc.name + "=" + row[*c] + fmt::format(" outside [{:g}, {:g}]", oc.lo, oc.hi));
    }

    const std::string seed_id(text::trim(row[c_seed]));
    const std::string mode_text(text::trim(row[c_mode]));
    const auto mode = parse_run_mode(mode_text);
    const PipelineTrace* trace = nullptr;
    if (mode)
      for (const auto& t : run.traces)
        if (t.seed_id == seed_id && t.mode == *mode) {
          trace = &t;
          break;
        }
    if (!trace) {
      result.unmatched.push_back({row_no, seed_id, mode_text});
      continue;
    }

    AlignedRow aligned{seed_id, *mode, std::string(text::trim(row[c_rater])), static_cast<int>(*overall), {}};
    const ScorecardRecord* card = nullptr;
    for (const auto& s : run.scorecards)
      if (s.seed_id == seed_id && s.mode == *mode && s.model_id == trace->model_id) {
        card = &s;
        break;
      }
    for (auto a : kAllAspects) {
      const auto id = to_string(a);
      std::optional<double> v;
      for (const auto& [c, name] : aspect_cols)
        if (name == id) v = parse_number(row[c]);
      if (!v && card) {
        auto it = card->scorecard.aspect_scores.find(a);
        if (it != card->scorecard.aspect_scores.end()) v = it->second;
      }
      if (v) aligned.scores[id] = *v;
    }
    for (const auto& [c, name] : other_cols)
      if (auto v = parse_number(row[c])) aligned.scores[name] = *v;
    result.rows.push_back(std::move(aligned));
  }

  if (total > 0 &&
      static_cast<double>(result.unmatched.size()) / static_cast<double>(total) > run.config.align_max_unmatched)
    throw AlignError(std::to_string(result.unmatched.size()) + " of " + std::to_string(total) +
                     " rows match no trace");

  std::set<std::string> names;
  for (const auto& r : result.rows)
    for (const auto& [name, v] : r.scores) names.insert(name);
  for (const auto& name : names) {
    std::vector<double> x, y;
    for (const auto& r : result.rows)
      if (auto it = r.scores.find(name); it != r.scores.end()) {
        x.push_back(it->second);
        y.push_back(r.overall_binary);
      }
    std::optional<double> tau;
    try {
      tau = kendall_tau(x, y);
    } catch (const InvalidInput&) {
    }
    result.tau[name] = tau;
  }
  return result;
}

}  // namespace writing_path
