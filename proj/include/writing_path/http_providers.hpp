#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>

#include "writing_path/providers.hpp"

namespace writing_path {

/// Transient failures are retried `max_retries` times, sleeping
/// initial_backoff * 2^attempt between attempts (1s, 2s, 4s by default).
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct BaseUrl {
  std::string scheme_host_port;  // "http://localhost:8080"
  std::string path;              // "/v1", never ends with '/'
};

/// Splits "scheme://host[:port][/path]".  Throws InvalidInput otherwise.
BaseUrl split_base_url(const std::string& url);

struct HttpLlmConfig {
  std::string base_url;
  std::string api_key;
  std::string endpoint = "/chat/completions";
  std::chrono::seconds timeout{120};
  RetryPolicy retry;
};

/// Chat-completion style POST:
///   {"model", "messages": [{"role": "user", "content": prompt}],
///    "temperature", "max_tokens"}
/// and reads choices[0].message.content from the reply.
class HttpLlm final : public LlmProvider {
public:
  explicit HttpLlm(HttpLlmConfig config);
  /// WRITING_PATH_LLM_BASE_URL / WRITING_PATH_LLM_API_KEY.
  static HttpLlm from_env(RetryPolicy retry = {});

  CompletionResult complete(const CompletionRequest& request) override;

private:
  HttpLlmConfig config_;
  BaseUrl url_;
};

struct HttpSearchConfig {
  std::string base_url;
  std::string api_key;
  std::string query_param = "query";
  std::string count_param = "display";
  /// Extra request headers (e.g. vendor client id/secret pairs).  When empty
  /// and api_key is set, "Authorization: Bearer <api_key>" is sent.
  std::map<std::string, std::string> headers;
  std::chrono::seconds timeout{30};
  RetryPolicy retry;
};

/// GET base_url?query=...&display=k returning JSON.  Results are read from
/// "items" (or "results", or a top-level array); each item supplies title,
/// body|description|content|snippet and id|link|url.  HTML tags in titles
/// and bodies are stripped.
class HttpSearch final : public SearchProvider {
public:
  explicit HttpSearch(HttpSearchConfig config);
  /// WRITING_PATH_SEARCH_BASE_URL / WRITING_PATH_SEARCH_API_KEY.
  static HttpSearch from_env(RetryPolicy retry = {});

  std::vector<RetrievedDocument> search(const SearchQuery& query) override;

private:
  HttpSearchConfig config_;
  BaseUrl url_;
};

std::string strip_html_tags(std::string_view s);

}  // namespace writing_path
