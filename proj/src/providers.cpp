#include "writing_path/providers.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "writing_path/error.hpp"
#include "writing_path/text.hpp"

namespace writing_path {

namespace fs = std::filesystem;
using nlohmann::json;

void CompletionRequest::validate() const {
  if (prompt.empty()) throw InvalidInput("completion prompt is empty");
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw InvalidInput("temperature " + std::to_string(temperature) + " outside [0, 2]");
  if (max_tokens <= 0) throw InvalidInput("max_tokens must be positive");
}

void SearchQuery::validate() const {
  if (text::trim(query).empty()) throw InvalidInput("search query is empty");
  if (top_k <= 0) throw InvalidInput("top_k must be positive");
}

RetrievedDocument search_top1(SearchProvider& provider, const SearchQuery& query) {
  query.validate();
  auto results = provider.search(query);
  if (results.empty()) throw SearchError(SearchErrorKind::no_results, query.query);
  RetrievedDocument best = std::move(results.front());
  best.rank = 1;
  best.query = query.query;
  return best;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string prompt_hash(std::string_view prompt) { return sha256_hex(prompt); }

std::string cache_key(const CompletionRequest& request) {
  // Length-prefixed fields so no concatenation of two requests collides.
  char temp[32];
  std::snprintf(temp, sizeof temp, "%.17g", request.temperature);
  std::string canonical;
  for (std::string_view field : {std::string_view(request.prompt), std::string_view(request.model_id),
                                 std::string_view(temp)}) {
    canonical += std::to_string(field.size());
    canonical += ':';
    canonical += field;
  }
  canonical += std::to_string(request.max_tokens);
  return sha256_hex(canonical);
}

std::string search_cache_key(const SearchQuery& query) {
  return sha256_hex("search:" + std::to_string(query.query.size()) + ":" + query.query + ":" +
                    std::to_string(query.top_k));
}

std::vector<std::pair<std::string, json>> read_fixture_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open fixture file " + path.string());
  std::vector<std::pair<std::string, json>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto j = json::parse(line);
      out.emplace_back(j.at("key").get<std::string>(), j.at("response"));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": bad fixture: " + e.what());
    }
  }
  return out;
}

void write_fixture_file(const fs::path& path, const std::map<std::string, json>& entries) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write fixture file " + path.string());
  for (const auto& [key, response] : entries)
    out << json{{"key", key}, {"response", response}}.dump(-1, ' ', false, json::error_handler_t::replace)
        << '\n';
}

// ---------------------------------------------------------------------------

ScriptedLlm::ScriptedLlm(std::map<std::string, std::string> by_hash) : by_hash_(std::move(by_hash)) {}

ScriptedLlm ScriptedLlm::load(const fs::path& fixtures) {
  std::map<std::string, std::string> m;
  for (auto& [key, response] : read_fixture_file(fixtures)) {
    if (!response.is_string()) throw Error("llm fixture " + key + " response is not a string");
    m[key] = response.get<std::string>();
  }
  return ScriptedLlm(std::move(m));
}

void ScriptedLlm::add(std::string_view prompt, std::string response) {
  by_hash_[prompt_hash(prompt)] = std::move(response);
}

CompletionResult ScriptedLlm::complete(const CompletionRequest& request) {
  request.validate();
  ++calls_;
  auto key = prompt_hash(request.prompt);
  auto it = by_hash_.find(key);
  if (it == by_hash_.end())
    throw ProviderError(ProviderErrorKind::malformed_response,
                        "no fixture for prompt " + key + " (" + request.request_tag + ")");
  return {it->second, "scripted", false, 0.0};
}

namespace {

RetrievedDocument doc_from_fixture(const json& j) {
  RetrievedDocument d;
  d.id = j.value("id", std::string{});
  d.title = j.value("title", std::string{});
  d.body = j.value("body", std::string{});
  return d;
}

json doc_to_fixture(const RetrievedDocument& d) {
  return json{{"id", d.id}, {"title", d.title}, {"body", d.body}};
}

}  // namespace

ScriptedSearch ScriptedSearch::load(const fs::path& fixtures) {
  ScriptedSearch s;
  for (auto& [key, response] : read_fixture_file(fixtures)) {
    std::vector<RetrievedDocument> docs;
    if (response.is_array()) {
      for (const auto& item : response) docs.push_back(doc_from_fixture(item));
    } else {
      docs.push_back(doc_from_fixture(response));
    }
    s.add(key, std::move(docs));
  }
  return s;
}

void ScriptedSearch::add(std::string query, std::vector<RetrievedDocument> results) {
  for (std::size_t i = 0; i < results.size(); ++i) {
    results[i].rank = static_cast<int>(i + 1);
    results[i].query = query;
  }
  by_query_[std::move(query)] = std::move(results);
}

std::vector<RetrievedDocument> ScriptedSearch::search(const SearchQuery& query) {
  query.validate();
  ++calls_;
  auto it = by_query_.find(query.query);
  if (it == by_query_.end() || it->second.empty())
    throw SearchError(SearchErrorKind::no_results, query.query);
  std::vector<RetrievedDocument> out = it->second;
  if (out.size() > static_cast<std::size_t>(query.top_k)) out.resize(static_cast<std::size_t>(query.top_k));
  return out;
}

CompletionResult FunctionLlm::complete(const CompletionRequest& request) {
  request.validate();
  ++calls_;
  return {fn_(request), provider_id_, false, 0.0};
}

CompletionResult RecordingLlm::complete(const CompletionRequest& request) {
  auto result = inner_.complete(request);
  std::lock_guard lock(mu_);
  recorded_[prompt_hash(request.prompt)] = result.text;
  return result;
}

void RecordingLlm::write(const fs::path& path) const {
  std::lock_guard lock(mu_);
  write_fixture_file(path, recorded_);
}

std::vector<RetrievedDocument> RecordingSearch::search(const SearchQuery& query) {
  auto results = inner_.search(query);
  json arr = json::array();
  for (const auto& d : results) arr.push_back(doc_to_fixture(d));
  std::lock_guard lock(mu_);
  recorded_[query.query] = std::move(arr);
  return results;
}

void RecordingSearch::write(const fs::path& path) const {
  std::lock_guard lock(mu_);
  write_fixture_file(path, recorded_);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::mutex& ResponseCache::lock_for(const std::string& key) const {
  return stripes_[std::hash<std::string>{}(key) % stripes_.size()];
}

std::optional<json> ResponseCache::get(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception&) {
    return std::nullopt;  // torn or foreign file: treat as a miss
  }
}

void ResponseCache::put(const std::string& key, const json& value) {
  auto target = path_for(key);
  fs::create_directories(target.parent_path());
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  auto tmp = target;
  tmp += ".tmp." + tid.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache entry " + tmp.string());
    out << value.dump(-1, ' ', false, json::error_handler_t::replace);
  }
  fs::rename(tmp, target);
}

CompletionResult CachingLlm::complete(const CompletionRequest& request) {
  request.validate();
  const auto key = cache_key(request);
  std::lock_guard lock(cache_->lock_for(key));
  if (auto hit = cache_->get(key); hit && hit->contains("text")) {
    ++hits_;
    return {hit->at("text").get<std::string>(), hit->value("provider_id", std::string{}), true, 0.0};
  }
  ++misses_;
  auto result = inner_.complete(request);
  cache_->put(key, json{{"text", result.text}, {"provider_id", result.provider_id}});
  return result;
}

std::vector<RetrievedDocument> CachingSearch::search(const SearchQuery& query) {
  query.validate();
  const auto key = search_cache_key(query);
  std::lock_guard lock(cache_->lock_for(key));
  if (auto hit = cache_->get(key); hit && hit->is_array()) {
    ++hits_;
    std::vector<RetrievedDocument> out;
    for (const auto& item : *hit) out.push_back(item.get<RetrievedDocument>());
    return out;
  }
  ++misses_;
  auto results = inner_.search(query);
  cache_->put(key, json(results));
  return results;
}

}  // namespace writing_path
