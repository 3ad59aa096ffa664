#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <string>

#include "writing_path/domain.hpp"
#include "writing_path/error.hpp"
#include "writing_path/prompt_kit.hpp"
#include "writing_path/providers.hpp"

namespace support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return fs::path(WRITING_PATH_DATA_DIR); }

inline const writing_path::TemplateSet& bundled_templates() {
  static const auto set = writing_path::TemplateSet::load(data_dir() / "templates" / "manifest.json");
  return set;
}

/// Fresh directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag = "wp") {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Replies keyed by stage tag; counts calls per stage.
class StageLlm final : public writing_path::LlmProvider {
public:
  explicit StageLlm(std::map<std::string, std::string> r = {}) : replies(std::move(r)) {}

  std::map<std::string, std::string> replies;
  std::map<std::string, int> calls;

  writing_path::CompletionResult complete(const writing_path::CompletionRequest& r) override {
    r.validate();
    std::lock_guard lock(mu_);
    ++calls[r.request_tag];
    auto it = replies.find(r.request_tag);
    if (it == replies.end())
      throw writing_path::ProviderError(writing_path::ProviderErrorKind::malformed_response, "no reply");
    return {it->second, "stage", false, 0.0};
  }
  int total() const {
    std::lock_guard lock(mu_);
    int n = 0;
    for (const auto& [k, v] : calls) n += v;
    return n;
  }

private:
  mutable std::mutex mu_;
};

/// Outline with 1-6 sections and 0-4 distinct subheaders each; phrases are
/// drawn from ASCII and Hangul words.
inline writing_path::Outline random_outline(std::mt19937& rng) {
  static const char* kWords[] = {"Arrival", "lunch", "night", "views", "market", "kimchi", "tips", "budget",
                                 "서울", "시장", "여행", "Q&A", "(part", "two)", "rail", "check-in"};
  auto phrase = [&] {
    std::string s;
    int n = 1 + static_cast<int>(rng() % 4);
    for (int i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += kWords[rng() % std::size(kWords)];
    }
    return s;
  };
  writing_path::Outline o;
  int sections = 1 + static_cast<int>(rng() % 6);
  for (int i = 0; i < sections; ++i) {
    writing_path::OutlineSection sec{phrase(), {}};
    int subs = static_cast<int>(rng() % 5);
    for (int j = 0; j < subs; ++j) {
      auto p = phrase();
      if (std::find(sec.subheaders.begin(), sec.subheaders.end(), p) == sec.subheaders.end())
        sec.subheaders.push_back(p);
    }
    o.sections.push_back(std::move(sec));
  }
  return o;
}

inline const char* kMetadataReply =
    "1. purpose: share a food tour\n2. type: travel diary\n3. style: casual\n4. keywords: kimchi, market, Seoul";
inline const char* kTitleReply = "==Title==\nA Day in Seoul\n==Initial Outline==\n1. Arrival\n2. Lunch\n3. Night views";
inline const char* kAugReply =
    "==Augmented Outline==\n1. Arrival\n  1.1 Airport rail\n  1.2 Hotel check-in\n2. Lunch\n  2.1 Kimchi stew\n"
    "3. Night views\n  3.1 Namsan tower";

inline std::map<std::string, std::string> seoul_replies() {
  return {{"s1_metadata", kMetadataReply},
          {"s2_title_outline", kTitleReply},
          {"s3_keywords", "kimchi, market"},
          {"s4_augment", kAugReply},
          {"s5_write", "Some paragraph text.\n\nWith a blank line."}};
}

inline writing_path::SeedPost seoul_seed() {
  return {"seed-1", writing_path::Domain::travel, "Seoul trip", "We ate kimchi at the market.", std::nullopt};
}

}  // namespace support
