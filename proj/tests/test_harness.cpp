#include <gtest/gtest.h>

#include <cmath>
#include <mutex>
#include <random>
#include <set>

#include "oracles.hpp"
#include "support.hpp"
#include "writing_path/error.hpp"
#include "writing_path/harness.hpp"
#include "writing_path/metrics.hpp"
#include "writing_path/synthetic.hpp"

using namespace writing_path;
namespace fs = std::filesystem;

namespace {

const char* kTwoSeeds =
    R"({"id": "a", "domain": "travel", "title": "Seoul in spring", "body": "Cherry blossoms along the river.\nStreet food at night markets."})"
    "\n"
    R"({"id": "b", "domain": "cooking", "title": "Easy kimchi stew", "body": "Aged kimchi, pork belly and tofu.\nSimmer for twenty minutes."})"
    "\n";

/// Synthetic responses with per-stage counts.  Fails a stage when the prompt
/// holds fail_marker, or on its fail_on_call-th call (1-based).
class TaggedLlm final : public LlmProvider {
public:
  std::string fail_stage;
  std::string fail_marker;
  int fail_on_call = 0;

  CompletionResult complete(const CompletionRequest& r) override {
    int n = 0;
    {
      std::lock_guard lock(mu_);
      n = ++calls_[r.request_tag];
    }
    const bool hit = fail_on_call ? n == fail_on_call : r.prompt.find(fail_marker) != std::string::npos;
    if (!fail_stage.empty() && r.request_tag == fail_stage && hit)
      throw ProviderError(ProviderErrorKind::malformed_response, "scripted failure");
    return inner_.complete(r);
  }
  int calls(const std::string& tag) {
    std::lock_guard lock(mu_);
    return calls_[tag];
  }

private:
  SyntheticLlm inner_;
  std::mutex mu_;
  std::map<std::string, int> calls_;
};

struct Workspace {
  support::TempDir dir{"wp-harness"};
  ExperimentConfig config;

  explicit Workspace(const std::string& seeds = kTwoSeeds, std::vector<RunMode> modes = {RunMode::meta, RunMode::init,
                                                                                          RunMode::aug}) {
    support::write_file(dir.path() / "seeds.jsonl", seeds);
    config.seed_path = dir.path() / "seeds.jsonl";
    config.modes = std::move(modes);
    config.templates = support::data_dir() / "templates" / "manifest.json";
    config.checklist = support::data_dir() / "checklist" / "default_checklist.txt";
    config.output_dir = dir.path() / "out";
    config.concurrency = 2;
    config.coherence.top_k = 5;
  }
};

IngestError ingest_error(const std::string& content) {
  support::TempDir d;
  support::write_file(d.path() / "s.jsonl", content);
  try {
    ingest_seeds(d.path() / "s.jsonl");
  } catch (const IngestError& e) {
    return e;
  }
  ADD_FAILURE() << "expected IngestError";
  return IngestError(0, "");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, '\t')) out.push_back(cell);
  return out;
}

std::size_t line_count(const fs::path& p) {
  auto s = support::read_file(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ExperimentRun evaluated_run(Workspace& w) {
  SyntheticLlm llm;
  SyntheticSearch search;
  auto run = run_experiment(w.config, llm, search, support::bundled_templates());
  evaluate_run(run, llm, support::bundled_templates(), load_checklist(w.config.checklist));
  return run;
}

}  // namespace

TEST(Ingest, ValidFile) {
  auto seeds = ingest_seeds(support::data_dir() / "fixtures" / "seeds.jsonl");
  ASSERT_EQ(seeds.size(), 3u);
  EXPECT_EQ(seeds[0].id, "beauty-001");
  EXPECT_EQ(seeds[0].domain, Domain::beauty);
}

TEST(Ingest, Errors) {
  auto dup = ingest_error(R"({"id": "x", "domain": "it", "body": "b"})"
                          "\n"
                          R"({"id": "x", "domain": "it", "body": "c"})");
  EXPECT_EQ(dup.line(), 2u);
  EXPECT_EQ(dup.reason(), "duplicate_id");

  auto empty = ingest_error(R"({"id": "x", "domain": "it", "body": ""})");
  EXPECT_EQ(empty.line(), 1u);
  EXPECT_EQ(empty.reason(), "empty_body");

  EXPECT_EQ(ingest_error("\n{not json").reason(), "invalid_json");
  EXPECT_EQ(ingest_error("\n{not json").line(), 2u);
  EXPECT_EQ(ingest_error(R"({"id": "x", "domain": "space", "body": "b"})").reason(), "unknown_domain");
  EXPECT_EQ(ingest_error(R"({"id": "x", "domain": "it"})").reason(), "missing_field");
  EXPECT_EQ(ingest_error(R"({"id": "", "domain": "it", "body": "b"})").reason(), "empty_id");
  EXPECT_THROW(ingest_seeds("/nonexistent/seeds.jsonl"), Error);
}

TEST(Experiment, AllModesShareSteps) {
  Workspace w;
  TaggedLlm llm;
  SyntheticSearch raw_search;
  CountingSearch search(raw_search);
  auto run = run_experiment(w.config, llm, search, support::bundled_templates());
  ASSERT_EQ(run.traces.size(), 6u);
  EXPECT_TRUE(run.failures.empty());
  EXPECT_EQ(llm.calls("s1_metadata"), 2);
  EXPECT_EQ(llm.calls("s2_title_outline"), 2);
  EXPECT_EQ(llm.calls("s3_keywords"), 2);
  EXPECT_EQ(llm.calls("s4_augment"), 2);
  EXPECT_EQ(search.calls(), 2u);

  const std::vector<std::pair<std::string, RunMode>> order{{"a", RunMode::meta}, {"a", RunMode::init},
                                                           {"a", RunMode::aug},  {"b", RunMode::meta},
                                                           {"b", RunMode::init}, {"b", RunMode::aug}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    EXPECT_EQ(run.traces[i].seed_id, order[i].first);
    EXPECT_EQ(run.traces[i].mode, order[i].second);
    EXPECT_TRUE(validate_trace(run.traces[i]).empty());
  }
  // The shared prefix is identical across a seed's modes.
  EXPECT_EQ(run.traces[1].metadata, run.traces[2].metadata);
  EXPECT_EQ(run.traces[1].initial_outline, run.traces[2].initial_outline);

  EXPECT_EQ(line_count(w.config.output_dir / run_files::kTraces), 6u);
  EXPECT_TRUE(fs::exists(w.config.output_dir / run_files::kConfig));
}

TEST(Experiment, FailureIsRecordedAndOthersContinue) {
  Workspace w;
  w.config.concurrency = 1;
  TaggedLlm llm;
  llm.fail_stage = "s4_augment";
  llm.fail_on_call = 2;
  SyntheticSearch search;
  auto run = run_experiment(w.config, llm, search, support::bundled_templates());
  EXPECT_EQ(run.traces.size(), 5u);
  ASSERT_EQ(run.failures.size(), 1u);
  EXPECT_EQ(run.failures[0].seed_id, "b");
  EXPECT_EQ(run.failures[0].mode, RunMode::aug);
  ASSERT_TRUE(run.failures[0].partial);
  EXPECT_TRUE(run.failures[0].partial->initial_outline);
  EXPECT_EQ(line_count(w.config.output_dir / run_files::kFailures), 1u);
}

TEST(Experiment, PrefixFailureFailsEveryMode) {
  Workspace w;
  TaggedLlm llm;
  llm.fail_stage = "s1_metadata";
  llm.fail_marker = "Cherry blossoms";
  SyntheticSearch search;
  auto run = run_experiment(w.config, llm, search, support::bundled_templates());
  EXPECT_EQ(run.traces.size(), 3u);
  EXPECT_EQ(run.failures.size(), 3u);
  for (const auto& f : run.failures) EXPECT_EQ(f.seed_id, "a");
}

TEST(Experiment, WarmCacheMakesNoCalls) {
  Workspace w;
  const auto cache = w.dir.path() / "cache";
  std::vector<std::string> first;
  for (int pass = 0; pass < 2; ++pass) {
    ProviderStack stack(std::make_unique<SyntheticLlm>(), std::make_unique<SyntheticSearch>(), cache);
    auto run = run_experiment(w.config, stack.llm(), stack.search(), support::bundled_templates());
    std::vector<std::string> traces;
    for (const auto& t : run.traces) traces.push_back(serialize_trace(t, false));
    if (pass == 0) {
      EXPECT_GT(stack.live_llm_calls(), 0u);
      first = traces;
    } else {
      EXPECT_EQ(stack.live_llm_calls(), 0u);
      EXPECT_EQ(stack.live_search_calls(), 0u);
      EXPECT_EQ(traces, first);
    }
  }
}

TEST(Experiment, LoadRunRoundTrip) {
  Workspace w;
  auto run = evaluated_run(w);
  auto back = load_run(w.config.output_dir);
  ASSERT_EQ(back.traces.size(), run.traces.size());
  for (std::size_t i = 0; i < run.traces.size(); ++i)
    EXPECT_EQ(serialize_trace(back.traces[i]), serialize_trace(run.traces[i]));
  EXPECT_EQ(back.seeds, run.seeds);
  EXPECT_EQ(back.scorecards, run.scorecards);
  ASSERT_EQ(back.outline_reports.size(), run.outline_reports.size());
  EXPECT_EQ(config_to_json(back.config), config_to_json(run.config));
  EXPECT_THROW(load_run(w.dir.path() / "missing"), Error);
}

TEST(Evaluate, AugOnlyRunReportsBothOutlines) {
  Workspace w(kTwoSeeds, {RunMode::aug});
  auto run = evaluated_run(w);
  ASSERT_EQ(run.outline_reports.size(), 4u);
  std::set<std::pair<std::string, OutlineType>> keys;
  for (const auto& r : run.outline_reports) keys.insert({r.seed_id, r.outline_type});
  EXPECT_EQ(keys.size(), 4u);
  EXPECT_TRUE(keys.count({"a", OutlineType::initial}));
  EXPECT_TRUE(keys.count({"b", OutlineType::augmented}));
  EXPECT_EQ(run.scorecards.size(), 2u);
}

TEST(Evaluate, MetaOnlyRunHasNoOutlineRows) {
  Workspace w(kTwoSeeds, {RunMode::meta});
  auto run = evaluated_run(w);
  EXPECT_TRUE(run.outline_reports.empty());
  ASSERT_EQ(run.scorecards.size(), 2u);
  EXPECT_EQ(run.scorecards[0].mode, RunMode::meta);
}

TEST(Evaluate, ReportsMatchDirectMetricCalls) {
  Workspace w;
  auto run = evaluated_run(w);
  const auto& cfg = run.config;

  std::vector<std::vector<std::string>> corpus;
  for (const auto& s : run.seeds) corpus.push_back(tokenize(s.title + "\n" + s.body, cfg.coherence.tokenizer));
  std::set<std::string> ids;
  for (const auto& t : run.traces)
    if (t.retrieved && ids.insert(t.retrieved->id).second)
      corpus.push_back(tokenize(t.retrieved->title + "\n" + t.retrieved->body, cfg.coherence.tokenizer));
  const auto model = CooccurrenceModel::build(corpus, cfg.coherence.window);

  SyntheticLlm judge;
  ASSERT_EQ(run.outline_reports.size(), 4u);
  for (const auto& r : run.outline_reports) {
    const PipelineTrace* trace = nullptr;
    for (const auto& t : run.traces)
      if (t.seed_id == r.seed_id && t.mode == RunMode::aug) trace = &t;
    ASSERT_NE(trace, nullptr);
    const Outline& o = r.outline_type == OutlineType::initial ? *trace->initial_outline : *trace->augmented_outline;

    ASSERT_TRUE(r.topic_diversity);
    EXPECT_NEAR(*r.topic_diversity, topic_diversity(outline_topics(o, cfg.coherence.tokenizer, cfg.coherence.top_k)),
                1e-12);
    ASSERT_TRUE(r.self_bleu);
    EXPECT_NEAR(*r.self_bleu, self_bleu(self_bleu_units(o, cfg.self_bleu_unit), cfg.coherence.tokenizer, cfg.bleu),
                1e-12);
    try {
      auto c = outline_coherence(o, model, cfg.coherence);
      ASSERT_TRUE(r.uci && r.npmi);
      EXPECT_NEAR(*r.uci, c.uci, 1e-12);
      EXPECT_NEAR(*r.npmi, c.npmi, 1e-12);
    } catch (const Error&) {
      EXPECT_FALSE(r.uci);
    }
    if (r.outline_type == OutlineType::augmented) {
      ASSERT_TRUE(r.nli);
      EXPECT_NEAR(*r.nli, nli_alignment(o, judge, support::bundled_templates().get(Stage::eval_nli), cfg.nli).score,
                  1e-12);
    } else {
      EXPECT_FALSE(r.nli);
    }
  }
}

TEST(Evaluate, ScorecardOverallIsAspectMean) {
  Workspace w;
  auto run = evaluated_run(w);
  ASSERT_EQ(run.scorecards.size(), 6u);
  for (const auto& s : run.scorecards) {
    ASSERT_EQ(s.scorecard.aspect_scores.size(), 7u);
    double sum = 0;
    for (const auto& [a, v] : s.scorecard.aspect_scores) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 100.0);
      sum += v;
    }
    EXPECT_NEAR(s.scorecard.overall, sum / 7.0, 1e-9);
  }
}

TEST(Reports, FormatScore) {
  EXPECT_EQ(format_score(0.125), "0.13");
  EXPECT_EQ(format_score(-0.125), "-0.13");
  EXPECT_EQ(format_score(48.5571), "48.56");
  EXPECT_EQ(format_score(-0.001), "0.00");
  EXPECT_EQ(format_score(100), "100.00");
  EXPECT_EQ(parse_report_format("tsv"), ReportFormat::tsv);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::markdown);
  EXPECT_FALSE(parse_report_format("html"));
}

TEST(Reports, EmptyRunIsAnError) {
  ExperimentRun run;
  EXPECT_THROW(emit_report(run, ReportFormat::tsv), ReportError);
}

TEST(Reports, TsvOverallColumnAndStability) {
  Workspace w;
  auto run = evaluated_run(w);
  auto paths = emit_report(run, ReportFormat::tsv);
  ASSERT_EQ(paths.size(), 4u);
  std::vector<std::string> first;
  for (const auto& p : paths) first.push_back(support::read_file(p));

  auto table = first[0];
  std::istringstream in(table);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 14), "Model\tMode\tN\tL");
  const auto aggs = aggregate_scorecards(run.scorecards, false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    auto cells = split_tabs(line);
    ASSERT_EQ(cells.size(), 4u + 7u);
    const auto& g = aggs.at(rows++);
    EXPECT_EQ(cells[1], to_string(g.mode));
    EXPECT_EQ(cells.back(), format_score(overall_score(g.aspect_means)));
  }
  EXPECT_EQ(rows, 3u);

  for (std::size_t i = 0; i < paths.size(); ++i) {
    emit_report(run, ReportFormat::tsv);
    EXPECT_EQ(support::read_file(paths[i]), first[i]);
  }
  auto md = emit_report(run, ReportFormat::markdown);
  EXPECT_EQ(md[0].extension(), ".md");
  EXPECT_EQ(support::read_file(md[0]).rfind("| Model | Mode | N |", 0), 0u);
}

TEST(Reports, AggregatesAreMeans) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(0, 100);
  std::vector<ScorecardRecord> cards;
  std::vector<OutlineReport> outlines;
  for (int i = 0; i < 40; ++i) {
    ScorecardRecord r;
    r.seed_id = "s" + std::to_string(i);
    r.mode = static_cast<RunMode>(i % 3);
    r.model_id = i % 2 ? "m1" : "m2";
    r.domain = static_cast<Domain>(i % 4);
    for (auto a : kAllAspects) r.scorecard.aspect_scores[a] = u(rng);
    cards.push_back(r);
    OutlineReport o;
    o.seed_id = r.seed_id;
    o.model_id = r.model_id;
    o.domain = r.domain;
    o.outline_type = i % 2 ? OutlineType::initial : OutlineType::augmented;
    o.uci = u(rng);
    if (i % 5) o.nli = u(rng) / 100;
    outlines.push_back(o);
  }
  for (bool by_domain : {false, true}) {
    for (const auto& g : aggregate_scorecards(cards, by_domain)) {
      std::map<AspectName, double> sum;
      std::size_t n = 0;
      for (const auto& c : cards)
        if (c.model_id == g.model_id && c.mode == g.mode && (!by_domain || c.domain == *g.domain)) {
          ++n;
          for (const auto& [a, v] : c.scorecard.aspect_scores) sum[a] += v;
        }
      ASSERT_EQ(g.count, n);
      double overall = 0;
      for (auto a : kAllAspects) {
        EXPECT_NEAR(g.aspect_means.at(a), sum[a] / n, 1e-9);
        overall += sum[a] / n;
      }
      EXPECT_NEAR(g.overall, overall / 7, 1e-9);
    }
    for (const auto& g : aggregate_outlines(outlines, by_domain)) {
      double uci = 0, nli = 0;
      std::size_t n = 0, n_nli = 0;
      for (const auto& o : outlines)
        if (o.model_id == g.model_id && o.outline_type == g.outline_type && (!by_domain || o.domain == *g.domain)) {
          ++n;
          uci += *o.uci;
          if (o.nli) {
            ++n_nli;
            nli += *o.nli;
          }
        }
      ASSERT_EQ(g.count, n);
      ASSERT_TRUE(g.uci);
      EXPECT_NEAR(g.uci->mean, uci / n, 1e-9);
      EXPECT_FALSE(g.npmi);
      if (n_nli) {
        ASSERT_TRUE(g.nli);
        EXPECT_EQ(g.nli->count, n_nli);
        EXPECT_NEAR(g.nli->mean, nli / n_nli, 1e-9);
      }
    }
  }
}

TEST(Csv, Parse) {
  auto rows = parse_csv("a,b,c\r\n\"x, y\",\"he said \"\"hi\"\"\",\n\"multi\nline\",2,3\n");
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(rows[1], (std::vector<std::string>{"x, y", "he said \"hi\"", ""}));
  EXPECT_EQ(rows[2][0], "multi\nline");
  EXPECT_EQ(parse_csv("a,b").size(), 1u);
}

class Align : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    ws_ = new Workspace;
    run_ = new ExperimentRun(evaluated_run(*ws_));
  }
  static void TearDownTestSuite() {
    delete run_;
    delete ws_;
  }
  fs::path write_csv(const std::string& content) {
    auto p = ws_->dir.path() / "humans.csv";
    support::write_file(p, content);
    return p;
  }
  static Workspace* ws_;
  static ExperimentRun* run_;
};
Workspace* Align::ws_ = nullptr;
ExperimentRun* Align::run_ = nullptr;

TEST_F(Align, InformativeColumnOutranksNoise) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(0, 100);
  std::string csv = "seed_id,mode,rater_id,overall_binary,coherence,noise,cohesion\n";
  std::vector<double> coh, noise, y;
  for (const auto& t : run_->traces)
    for (int rater = 0; rater < 6; ++rater) {
      double c = std::round(u(rng));
      double n = std::round(u(rng));
      int b = c >= 50 ? 1 : 0;
      coh.push_back(c);
      noise.push_back(n);
      y.push_back(b);
      csv += t.seed_id + "," + to_string(t.mode) + ",r" + std::to_string(rater) + "," + std::to_string(b) + "," +
             std::to_string(c) + "," + std::to_string(n) + "," + std::to_string(1 + rater % 4) + "\n";
    }
  csv += "a,aug2,r0,1,10,10,2\n";
  auto result = align_human_scores(*run_, write_csv(csv));
  EXPECT_EQ(result.rows.size(), 36u);
  ASSERT_EQ(result.unmatched.size(), 1u);
  EXPECT_EQ(result.unmatched[0].mode, "aug2");
  EXPECT_EQ(result.unmatched[0].line, 38u);
  ASSERT_TRUE(result.tau.at("coherence"));
  ASSERT_TRUE(result.tau.at("noise"));
  EXPECT_GT(*result.tau.at("coherence"), *result.tau.at("noise"));
  EXPECT_NEAR(*result.tau.at("coherence"), oracle::tau_b(coh, y), 1e-12);
  EXPECT_NEAR(*result.tau.at("noise"), oracle::tau_b(noise, y), 1e-12);
  // Aspects absent from the CSV come from the run's scorecards.
  EXPECT_TRUE(result.tau.count("specificity"));
  EXPECT_TRUE(result.rows[0].scores.count("linguistic_fluency"));
}

TEST_F(Align, OutOfRangeOutlineScore) {
  auto csv = "seed_id,mode,rater_id,overall_binary,cohesion\na,aug,r1,1,5\n";
  try {
    align_human_scores(*run_, write_csv(csv));
    FAIL();
  } catch (const AlignError& e) {
    EXPECT_NE(std::string(e.what()).find("cohesion"), std::string::npos);
  }
  EXPECT_THROW(align_human_scores(*run_, write_csv("seed_id,mode,rater_id,overall_binary,cohesion\na,aug,r1,1,2.5\n")),
               AlignError);
}

TEST_F(Align, MalformedInputs) {
  EXPECT_THROW(align_human_scores(*run_, write_csv("seed_id,mode,overall_binary\na,aug,1\n")), AlignError);
  EXPECT_THROW(align_human_scores(*run_, write_csv("seed_id,mode,rater_id,overall_binary\na,aug,r,2\n")), AlignError);
  EXPECT_THROW(align_human_scores(*run_, write_csv("seed_id,mode,rater_id,overall_binary\na,aug,r\n")), AlignError);
  EXPECT_THROW(align_human_scores(*run_, ws_->dir.path() / "none.csv"), AlignError);
  // Mostly unmatched rows exceed the default tolerance.
  EXPECT_THROW(align_human_scores(*run_, write_csv("seed_id,mode,rater_id,overall_binary\nzz,aug,r,1\na,aug,r,0\n"
                                                   "zz,meta,r,1\n")),
               AlignError);
}
