#include "writing_path/http_providers.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

BaseUrl split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("base url without scheme: " + url);
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw InvalidInput("unsupported url scheme: " + scheme);
  auto path_start = url.find('/', scheme_end + 3);
  BaseUrl out;
  out.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) out.path = url.substr(path_start);
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  if (out.scheme_host_port.size() <= scheme_end + 3) throw InvalidInput("base url without host: " + url);
  return out;
}

std::string strip_html_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_tag = false;
  for (char c : s) {
    if (c == '<') in_tag = true;
    else if (c == '>' && in_tag) in_tag = false;
    else if (!in_tag) out += c;
  }
  static const std::pair<std::string_view, std::string_view> kEntities[] = {
      {"&quot;", "\""}, {"&#39;", "'"}, {"&apos;", "'"}, {"&lt;", "<"}, {"&gt;", ">"}, {"&amp;", "&"}};
  for (const auto& [from, to] : kEntities) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  }
  return out;
}

namespace {

void sleep_backoff(const RetryPolicy& policy, int attempt) {
  auto delay = policy.initial_backoff * (1LL << attempt);
  if (policy.sleep) policy.sleep(delay);
  else std::this_thread::sleep_for(delay);
}

bool transient_status(int status) { return status == 408 || status == 409 || status == 429 || status >= 500; }

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string{};
}

}  // namespace

HttpLlm::HttpLlm(HttpLlmConfig config) : config_(std::move(config)), url_(split_base_url(config_.base_url)) {}

HttpLlm HttpLlm::from_env(RetryPolicy retry) {
  HttpLlmConfig c;
  c.base_url = env_or_empty("WRITING_PATH_LLM_BASE_URL");
  c.api_key = env_or_empty("WRITING_PATH_LLM_API_KEY");
  if (c.base_url.empty()) throw ConfigError("WRITING_PATH_LLM_BASE_URL is not set");
  c.retry = std::move(retry);
  return HttpLlm(std::move(c));
}

CompletionResult HttpLlm::complete(const CompletionRequest& request) {
  request.validate();
  json body{{"model", request.model_id},
            {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens}};
  const auto payload = body.dump(-1, ' ', false, json::error_handler_t::replace);

  httplib::Client client(url_.scheme_host_port);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  const auto start = Clock::now();
  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleep_backoff(config_.retry, attempt - 1);
    auto res = client.Post(url_.path + config_.endpoint, headers, payload, "application/json");
    if (!res) {
      last_failure = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw ProviderError(ProviderErrorKind::auth, "status " + std::to_string(res->status));
    if (transient_status(res->status)) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw ProviderError(ProviderErrorKind::malformed_response, "status " + std::to_string(res->status));
    try {
      auto reply = json::parse(res->body);
      auto text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
      double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      return {std::move(text), "http:" + request.model_id, false, ms};
    } catch (const json::exception& e) {
      throw ProviderError(ProviderErrorKind::malformed_response, e.what());
    }
  }
  throw ProviderError(ProviderErrorKind::transient_exhausted,
                      std::to_string(config_.retry.max_retries + 1) + " attempts, last " + last_failure);
}

HttpSearch::HttpSearch(HttpSearchConfig config)
    : config_(std::move(config)), url_(split_base_url(config_.base_url)) {}

HttpSearch HttpSearch::from_env(RetryPolicy retry) {
  HttpSearchConfig c;
  c.base_url = env_or_empty("WRITING_PATH_SEARCH_BASE_URL");
  c.api_key = env_or_empty("WRITING_PATH_SEARCH_API_KEY");
  if (c.base_url.empty()) throw ConfigError("WRITING_PATH_SEARCH_BASE_URL is not set");
  c.retry = std::move(retry);
  return HttpSearch(std::move(c));
}

std::vector<RetrievedDocument> HttpSearch::search(const SearchQuery& query) {
  query.validate();
  httplib::Client client(url_.scheme_host_port);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers(config_.headers.begin(), config_.headers.end());
  if (config_.headers.empty() && !config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  httplib::Params params{{config_.query_param, query.query},
                         {config_.count_param, std::to_string(query.top_k)}};
  const std::string path = url_.path.empty() ? "/" : url_.path;

  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
    if (attempt > 0) sleep_backoff(config_.retry, attempt - 1);
    auto res = client.Get(path, params, headers);
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (transient_status(res->status)) {
      last_failure = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw SearchError(SearchErrorKind::transport, "status " + std::to_string(res->status));

    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::exception& e) {
      throw SearchError(SearchErrorKind::transport, std::string("unparseable reply: ") + e.what());
    }
    const json* items = nullptr;
    if (reply.is_array()) items = &reply;
    else if (reply.contains("items") && reply["items"].is_array()) items = &reply["items"];
    else if (reply.contains("results") && reply["results"].is_array()) items = &reply["results"];
    if (!items) throw SearchError(SearchErrorKind::transport, "reply has no result list");

    auto str = [](const json& item, std::initializer_list<const char*> keys) {
      for (const char* k : keys)
        if (auto it = item.find(k); it != item.end() && it->is_string()) return it->get<std::string>();
      return std::string{};
    };
    std::vector<RetrievedDocument> out;
    for (const auto& item : *items) {
      if (!item.is_object()) continue;
      RetrievedDocument d;
      d.id = str(item, {"id", "link", "url"});
      d.title = strip_html_tags(str(item, {"title"}));
      d.body = strip_html_tags(str(item, {"body", "description", "content", "snippet"}));
      d.query = query.query;
      d.rank = static_cast<int>(out.size() + 1);
      out.push_back(std::move(d));
      if (out.size() == static_cast<std::size_t>(query.top_k)) break;
    }
    if (out.empty()) throw SearchError(SearchErrorKind::no_results, query.query);
    return out;
  }
  throw SearchError(SearchErrorKind::transport, "retries exhausted, last " + last_failure);
}

}  // namespace writing_path
