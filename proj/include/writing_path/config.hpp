#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "writing_path/checkeval.hpp"
#include "writing_path/domain.hpp"
#include "writing_path/metrics.hpp"
#include "writing_path/pipeline.hpp"

namespace writing_path {

struct ExperimentConfig {
  std::filesystem::path seed_path;
  std::vector<RunMode> modes{RunMode::meta, RunMode::init, RunMode::aug};
  PipelineConfig pipeline;
  JudgeSettings judge;
  NliSettings nli;

  std::filesystem::path templates;  // manifest.json
  std::filesystem::path checklist;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> scripted;  // holds llm.jsonl / search.jsonl

  /// Seeds processed concurrently.
  std::size_t concurrency = 1;

  CoherenceSettings coherence;  // tokenizer, window, top_k (also the diversity k), epsilon
  BleuSettings bleu;
  SelfBleuUnit self_bleu_unit = SelfBleuUnit::block;
  /// align_human_scores fails when more than this fraction of rows is unmatched.
  double align_max_unmatched = 0.5;

  /// Throws ConfigError.
  void validate() const;
};

/// `key = value` lines; '#' starts a comment.  Relative paths resolve
/// against the directory of the file.  Throws ConfigError with the line.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(std::string_view content, const std::filesystem::path& base_dir);

nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);

}  // namespace writing_path
