// writing_path: ingest seeds, run the outline-guided pipeline, evaluate,
// report and align with human ratings.
//
// Exit codes: 0 success, 1 partial failure, 2 hard failure.

#include <filesystem>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "writing_path/checkeval.hpp"
#include "writing_path/config.hpp"
#include "writing_path/error.hpp"
#include "writing_path/harness.hpp"

namespace fs = std::filesystem;
using namespace writing_path;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kHard = 2;

int cmd_ingest(const std::string& seeds_path) {
  auto seeds = ingest_seeds(seeds_path);
  std::map<std::string, int> per_domain;
  for (const auto& s : seeds) ++per_domain[to_string(s.domain)];
  std::cout << seeds.size() << " seeds\n";
  for (const auto& [d, n] : per_domain) std::cout << "  " << d << ": " << n << "\n";
  return kOk;
}

struct ProviderOverrides {
  std::string scripted;
  std::string cache_dir;

  void apply(ExperimentConfig& c) const {
    if (!scripted.empty()) c.scripted = fs::absolute(scripted);
    if (!cache_dir.empty()) c.cache_dir = fs::absolute(cache_dir);
  }
};

int cmd_run(const std::string& config_path, const std::vector<std::string>& modes, const ProviderOverrides& o,
            const std::string& output_dir) {
  auto config = load_config(config_path);
  if (!modes.empty()) {
    config.modes.clear();
    for (const auto& m : modes) {
      auto mode = parse_run_mode(m);
      if (!mode) throw ConfigError("unknown mode '" + m + "'");
      config.modes.push_back(*mode);
    }
  }
  o.apply(config);
  if (!output_dir.empty()) config.output_dir = fs::absolute(output_dir);
  config.validate();

  auto providers = ProviderStack::from_config(config);
  auto templates = TemplateSet::load(config.templates);
  auto run = run_experiment(config, providers.llm(), providers.search(), templates);

  std::cout << "traces: " << run.traces.size() << "\nfailures: " << run.failures.size()
            << "\nprovider calls: llm " << providers.live_llm_calls() << ", search "
            << providers.live_search_calls() << "\noutput: " << config.output_dir.string() << "\n";
  for (const auto& f : run.failures)
    std::cerr << "failed " << f.seed_id << " [" << to_string(f.mode) << "]: " << f.error << "\n";
  if (run.traces.empty()) return kHard;
  return run.failures.empty() ? kOk : kPartial;
}

int cmd_eval(const std::string& run_dir, const ProviderOverrides& o) {
  auto run = load_run(run_dir);
  o.apply(run.config);
  auto providers = ProviderStack::from_config(run.config);
  auto templates = TemplateSet::load(run.config.templates);
  auto checklist = load_checklist(run.config.checklist);
  evaluate_run(run, providers.llm(), templates, checklist);

  std::size_t scorecard_failures = 0;
  for (const auto& d : run.diagnostics)
    if (d.item.rfind("scorecard:", 0) == 0) {
      ++scorecard_failures;
      std::cerr << "scorecard failed for " << d.seed_id << " (" << d.item << "): " << d.message << "\n";
    }
  std::cout << "outline reports: " << run.outline_reports.size() << "\nscorecards: " << run.scorecards.size()
            << "\ndiagnostics: " << run.diagnostics.size() << "\njudge calls: " << providers.live_llm_calls()
            << "\n";
  return scorecard_failures == 0 ? kOk : kPartial;
}

int cmd_report(const std::string& run_dir, const std::string& format_name) {
  auto format = parse_report_format(format_name);
  if (!format) throw ConfigError("format must be tsv or markdown");
  auto run = load_run(run_dir);
  for (const auto& p : emit_report(run, *format)) std::cout << p.string() << "\n";
  return kOk;
}

int cmd_align(const std::string& run_dir, const std::string& csv) {
  auto run = load_run(run_dir);
  auto result = align_human_scores(run, csv);
  std::cout << "aligned rows: " << result.rows.size() << "\n";
  for (const auto& u : result.unmatched)
    std::cout << "unmatched row " << u.line << ": seed_id=" << u.seed_id << " mode=" << u.mode << "\n";
  std::cout << "column\tkendall_tau\n";
  for (const auto& [name, tau] : result.tau)
    std::cout << name << "\t" << (tau ? std::to_string(*tau) : std::string("n/a")) << "\n";
  return result.unmatched.empty() ? kOk : kPartial;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outline-guided blog writing pipeline and evaluation harness"};
  app.require_subcommand(1);

  std::string seeds_path;
  auto* ingest = app.add_subcommand("ingest", "validate a seed file");
  ingest->add_option("--seeds", seeds_path, "line-delimited JSON seeds")->required();

  std::string config_path;
  std::vector<std::string> modes;
  std::string output_dir;
  ProviderOverrides overrides;
  auto* run = app.add_subcommand("run", "run the pipeline over all seeds and modes");
  run->add_option("--config", config_path, "experiment config")->required();
  run->add_option("--mode", modes, "meta, init or aug (repeatable)");
  run->add_option("--scripted", overrides.scripted, "fixture directory with llm.jsonl and search.jsonl");
  run->add_option("--cache-dir", overrides.cache_dir, "response cache directory");
  run->add_option("--output-dir", output_dir, "override the config's output_dir");

  std::string run_dir;
  auto* eval = app.add_subcommand("eval", "outline metrics and writing scorecards for a run");
  eval->add_option("--run", run_dir, "run directory")->required();
  eval->add_option("--scripted", overrides.scripted, "fixture directory for the judge");
  eval->add_option("--cache-dir", overrides.cache_dir, "response cache directory");

  std::string format = "markdown";
  auto* report = app.add_subcommand("report", "aggregate tables for an evaluated run");
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--format", format, "tsv or markdown")->check(CLI::IsMember({"tsv", "markdown"}));

  std::string human_csv;
  auto* align = app.add_subcommand("align", "correlate human ratings with aspect scores");
  align->add_option("--run", run_dir, "run directory")->required();
  align->add_option("--human", human_csv, "CSV with seed_id, mode, rater_id, overall_binary")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kHard;
  }

  try {
    if (*ingest) return cmd_ingest(seeds_path);
    if (*run) return cmd_run(config_path, modes, overrides, output_dir);
    if (*eval) return cmd_eval(run_dir, overrides);
    if (*report) return cmd_report(run_dir, format);
    if (*align) return cmd_align(run_dir, human_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kHard;
  }
  return kHard;
}
