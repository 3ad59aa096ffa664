// Regenerates the scripted fixtures (llm.jsonl, search.jsonl) for a seed
// set by running the full experiment and evaluation against the synthetic
// responder and recording every exchange.
//
//   gen_fixtures --config data/fixtures/run.conf

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "writing_path/checkeval.hpp"
#include "writing_path/config.hpp"
#include "writing_path/harness.hpp"
#include "writing_path/synthetic.hpp"

namespace fs = std::filesystem;
using namespace writing_path;

int main(int argc, char** argv) {
  CLI::App app{"Record scripted fixtures from the synthetic responder"};
  std::string config_path;
  std::string out_dir;
  app.add_option("--config", config_path, "experiment config")->required();
  app.add_option("--out", out_dir, "fixture directory (default: the config's scripted dir)");
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = load_config(config_path);
    const fs::path dest = out_dir.empty() ? config.scripted.value_or(fs::path(config_path).parent_path()) : fs::path(out_dir);
    config.output_dir = fs::temp_directory_path() / "writing_path_gen_fixtures";
    config.cache_dir.reset();
    fs::remove_all(config.output_dir);

    SyntheticLlm synthetic_llm;
    SyntheticSearch synthetic_search;
    RecordingLlm llm(synthetic_llm);
    RecordingSearch search(synthetic_search);
    auto templates = TemplateSet::load(config.templates);
    auto checklist = load_checklist(config.checklist);

    auto run = run_experiment(config, llm, search, templates);
    evaluate_run(run, llm, templates, checklist);
    fs::create_directories(dest);
    llm.write(dest / "llm.jsonl");
    search.write(dest / "search.jsonl");
    fs::remove_all(config.output_dir);
    std::cout << "traces: " << run.traces.size() << ", failures: " << run.failures.size()
              << ", scorecards: " << run.scorecards.size() << "\nwrote " << (dest / "llm.jsonl").string() << " and "
              << (dest / "search.jsonl").string() << "\n";
    return run.failures.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
