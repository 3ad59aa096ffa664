#pragma once

#include <array>
#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "writing_path/domain.hpp"

namespace writing_path {

struct CompletionRequest {
  std::string prompt;
  std::string model_id;
  double temperature = 0.7;
  int max_tokens = 2048;
  /// Stage label for logging; not part of the cache key.
  std::string request_tag;

  /// Throws InvalidInput on an empty prompt, temperature outside [0, 2] or
  /// a non-positive max_tokens.
  void validate() const;
};

struct CompletionResult {
  std::string text;
  std::string provider_id;
  bool cached = false;
  double latency_ms = 0.0;
};

struct SearchQuery {
  std::string query;
  int top_k = 1;

  void validate() const;
};

class LlmProvider {
public:
  virtual ~LlmProvider() = default;
  virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

class SearchProvider {
public:
  virtual ~SearchProvider() = default;
  /// Ranked results, best first; at most query.top_k entries.
  virtual std::vector<RetrievedDocument> search(const SearchQuery& query) = 0;
};

/// Highest-ranked result with rank forced to 1 and query recorded.
/// Throws SearchError(no_results) when the provider returns nothing.
RetrievedDocument search_top1(SearchProvider& provider, const SearchQuery& query);

std::string sha256_hex(std::string_view data);

/// Fixture key of the scripted LLM: SHA-256 of the prompt text.
std::string prompt_hash(std::string_view prompt);

/// Stable content hash over (prompt, model_id, temperature, max_tokens).
std::string cache_key(const CompletionRequest& request);

std::string search_cache_key(const SearchQuery& query);

/// Line-delimited JSON {key, response}; response may be any JSON value.
std::vector<std::pair<std::string, nlohmann::json>> read_fixture_file(const std::filesystem::path& path);
void write_fixture_file(const std::filesystem::path& path,
                        const std::map<std::string, nlohmann::json>& entries);

/// Answers from a fixed prompt-hash -> text table.
class ScriptedLlm final : public LlmProvider {
public:
  ScriptedLlm() = default;
  explicit ScriptedLlm(std::map<std::string, std::string> by_hash);
  ScriptedLlm(ScriptedLlm&& other) noexcept
      : by_hash_(std::move(other.by_hash_)), calls_(other.calls_.load()) {}
  static ScriptedLlm load(const std::filesystem::path& fixtures);

  void add(std::string_view prompt, std::string response);
  CompletionResult complete(const CompletionRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  std::map<std::string, std::string> by_hash_;
  std::atomic<std::size_t> calls_{0};
};

/// Answers from a fixed exact-query -> documents table.
class ScriptedSearch final : public SearchProvider {
public:
  ScriptedSearch() = default;
  ScriptedSearch(ScriptedSearch&& other) noexcept
      : by_query_(std::move(other.by_query_)), calls_(other.calls_.load()) {}
  static ScriptedSearch load(const std::filesystem::path& fixtures);

  void add(std::string query, std::vector<RetrievedDocument> results);
  std::vector<RetrievedDocument> search(const SearchQuery& query) override;
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  std::map<std::string, std::vector<RetrievedDocument>> by_query_;
  std::atomic<std::size_t> calls_{0};
};

/// Adapts a callable; useful for synthetic responders.
class FunctionLlm final : public LlmProvider {
public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionLlm(Fn fn, std::string provider_id = "function")
      : fn_(std::move(fn)), provider_id_(std::move(provider_id)) {}
  CompletionResult complete(const CompletionRequest& request) override;
  std::size_t calls() const noexcept { return calls_.load(); }

private:
  Fn fn_;
  std::string provider_id_;
  std::atomic<std::size_t> calls_{0};
};

/// Passes requests through and records prompt-hash -> response, ready to
/// be written as a scripted fixture file.
class RecordingLlm final : public LlmProvider {
public:
  explicit RecordingLlm(LlmProvider& inner) : inner_(inner) {}
  CompletionResult complete(const CompletionRequest& request) override;
  void write(const std::filesystem::path& path) const;

private:
  LlmProvider& inner_;
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> recorded_;
};

class RecordingSearch final : public SearchProvider {
public:
  explicit RecordingSearch(SearchProvider& inner) : inner_(inner) {}
  std::vector<RetrievedDocument> search(const SearchQuery& query) override;
  void write(const std::filesystem::path& path) const;

private:
  SearchProvider& inner_;
  mutable std::mutex mu_;
  std::map<std::string, nlohmann::json> recorded_;
};

/// Content-addressed JSON files under a directory: <dir>/<k0k1>/<key>.json.
/// Writes go through a temp file and rename; a striped lock serialises
/// access per key.
class ResponseCache {
public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& value);
  std::mutex& lock_for(const std::string& key) const;
  const std::filesystem::path& dir() const noexcept { return dir_; }

private:
  std::filesystem::path path_for(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::array<std::mutex, 64> stripes_;
};

class CachingLlm final : public LlmProvider {
public:
  CachingLlm(LlmProvider& inner, std::shared_ptr<ResponseCache> cache)
      : inner_(inner), cache_(std::move(cache)) {}
  CompletionResult complete(const CompletionRequest& request) override;
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

private:
  LlmProvider& inner_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

class CachingSearch final : public SearchProvider {
public:
  CachingSearch(SearchProvider& inner, std::shared_ptr<ResponseCache> cache)
      : inner_(inner), cache_(std::move(cache)) {}
  std::vector<RetrievedDocument> search(const SearchQuery& query) override;
  std::size_t hits() const noexcept { return hits_.load(); }
  std::size_t misses() const noexcept { return misses_.load(); }

private:
  SearchProvider& inner_;
  std::shared_ptr<ResponseCache> cache_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

}  // namespace writing_path
