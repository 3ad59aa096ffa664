#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "writing_path/error.hpp"
#include "writing_path/metrics.hpp"
#include "writing_path/text.hpp"

using namespace writing_path;

namespace {

TokenizerConfig scheme(TokenScheme s, std::size_t n = 2) {
  TokenizerConfig c;
  c.scheme = s;
  c.ngram = n;
  return c;
}

std::vector<std::vector<std::string>> random_corpus(std::mt19937& rng, std::size_t max_tokens) {
  const char* vocab[] = {"a", "b", "c", "d", "e", "f", "g"};
  std::vector<std::vector<std::string>> corpus;
  std::size_t budget = 1 + rng() % max_tokens;
  while (budget > 0) {
    std::size_t len = std::min<std::size_t>(budget, rng() % 30);
    std::vector<std::string> doc;
    for (std::size_t i = 0; i < len; ++i) doc.push_back(vocab[rng() % (2 + rng() % 5)]);
    corpus.push_back(std::move(doc));
    budget -= std::min(budget, std::max<std::size_t>(len, 1));
  }
  return corpus;
}

std::string reason_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const InvalidInput& e) {
    return e.reason();
  }
  return "<no throw>";
}

}  // namespace

TEST(Tokenize, Schemes) {
  EXPECT_EQ(tokenize("Seoul market, Seoul", scheme(TokenScheme::whitespace)),
            (std::vector<std::string>{"seoul", "market,", "seoul"}));
  EXPECT_EQ(tokenize("Seoul market, Seoul", scheme(TokenScheme::unicode_words)),
            (std::vector<std::string>{"seoul", "market", "seoul"}));
  auto c = scheme(TokenScheme::unicode_words);
  c.stopwords = {"market"};
  EXPECT_EQ(tokenize("Seoul Market", c), (std::vector<std::string>{"seoul"}));
  c.lowercase = false;
  EXPECT_EQ(tokenize("Seoul Market", c), (std::vector<std::string>{"Seoul", "Market"}));
  EXPECT_EQ(tokenize("서울 시장에서, 김치!", scheme(TokenScheme::unicode_words)),
            (std::vector<std::string>{"서울", "시장에서", "김치"}));
}

TEST(Tokenize, CharacterNgramsMatchSlidingWindow) {
  const std::string sample = "서울의 전통시장 김치 맛집 a";
  for (std::size_t n : {1u, 2u, 3u}) {
    std::vector<std::string> expected;
    std::string chunk;
    auto flush = [&] {
      auto cps = text::decode_utf8(chunk);
      chunk.clear();
      if (cps.empty()) return;
      if (cps.size() < n) {
        expected.push_back(text::encode_utf8(cps, 0, cps.size()));
        return;
      }
      for (std::size_t i = 0; i + n <= cps.size(); ++i) expected.push_back(text::encode_utf8(cps, i, i + n));
    };
    for (char ch : sample) {
      if (ch == ' ') flush();
      else chunk += ch;
    }
    flush();
    EXPECT_EQ(tokenize(sample, scheme(TokenScheme::character_ngram, n)), expected) << n;
  }
  EXPECT_EQ(tokenize("김치", scheme(TokenScheme::character_ngram, 2)), (std::vector<std::string>{"김치"}));
}

TEST(Cooccurrence, SingleWindow) {
  auto m = CooccurrenceModel::build({{"a", "b"}}, 2);
  EXPECT_EQ(m.total_windows(), 1);
  EXPECT_DOUBLE_EQ(m.probability("a"), 1.0);
  EXPECT_DOUBLE_EQ(m.joint_probability("a", "b"), 1.0);
}

TEST(Cooccurrence, NeverCooccur) {
  auto m = CooccurrenceModel::build({{"a"}, {"b"}}, 1);
  EXPECT_EQ(m.pair_count("a", "b"), 0);
  EXPECT_EQ(m.total_windows(), 2);
}

TEST(Cooccurrence, Errors) {
  EXPECT_EQ(reason_of([] { CooccurrenceModel::build({}, 3); }), "empty_corpus");
  EXPECT_EQ(reason_of([] { CooccurrenceModel::build({{}, {}}, 3); }), "empty_corpus");
  EXPECT_THROW(CooccurrenceModel::build({{"a"}}, 0), InvalidInput);
}

TEST(Cooccurrence, MatchesBruteForce) {
  std::mt19937 rng(42);
  for (int iter = 0; iter < 150; ++iter) {
    auto corpus = random_corpus(rng, 200);
    std::size_t w = 1 + rng() % 8;
    bool any = false;
    for (auto& d : corpus) any |= !d.empty();
    if (!any) continue;
    auto m = CooccurrenceModel::build(corpus, w);
    auto o = oracle::count_windows(corpus, w);
    ASSERT_EQ(m.total_windows(), o.windows);
    const char* vocab[] = {"a", "b", "c", "d", "e", "f", "g"};
    for (auto a : vocab)
      for (auto b : vocab) {
        ASSERT_EQ(m.pair_count(a, b), o.pair_count(a, b)) << a << b;
        ASSERT_EQ(m.pair_count(a, b), m.pair_count(b, a));
        ASSERT_LE(m.pair_count(a, b), std::min(m.word_count(a), m.word_count(b)));
      }
  }
}

TEST(Cooccurrence, VocabularyRestriction) {
  std::set<std::string> vocab{"a"};
  auto m = CooccurrenceModel::build({{"a", "b", "c"}}, 2, &vocab);
  EXPECT_EQ(m.total_windows(), 2);
  EXPECT_EQ(m.word_count("a"), 1);
  EXPECT_FALSE(m.contains("b"));
}

TEST(Npmi, Identities) {
  // P(a) = P(b) = P(a,b) = 0.5.
  auto perfect = CooccurrenceModel::build({{"a", "b"}, {"c"}}, 5);
  EXPECT_EQ(npmi(perfect, "a", "b"), 1.0);
  EXPECT_EQ(npmi(perfect, "a", "a"), 1.0);
  // P(a) = P(b) = 0.5, P(a,b) = 0.25.
  auto indep = CooccurrenceModel::build({{"a", "b"}, {"a"}, {"b"}, {"c"}}, 5);
  EXPECT_NEAR(npmi(indep, "a", "b"), 0.0, 1e-12);
  EXPECT_THROW(npmi(indep, "a", "zzz"), UnknownWord);
}

TEST(Npmi, NeverCooccurApproachesMinusOne) {
  std::vector<std::vector<std::string>> corpus;
  for (int i = 0; i < 5; ++i) corpus.push_back({"a"});
  for (int i = 0; i < 5; ++i) corpus.push_back({"b"});
  for (int i = 0; i < 10; ++i) corpus.push_back({"c"});
  auto m = CooccurrenceModel::build(corpus, 1);
  const double p = 0.25, eps = 1e-12;
  const double expected = std::log(eps / (p * p)) / -std::log(eps);
  EXPECT_NEAR(npmi(m, "a", "b", eps), expected, 1e-12);
  // Moderate marginals bring the value close to -1 but not exactly there.
  EXPECT_NEAR(npmi(m, "a", "b", eps), -1.0, 0.11);
  EXPECT_EQ(npmi(m, "a", "b", 0.0), -1.0);
}

TEST(Npmi, BoundedAndMatchesOracle) {
  std::mt19937 rng(9);
  for (int iter = 0; iter < 100; ++iter) {
    auto corpus = random_corpus(rng, 120);
    std::size_t w = 1 + rng() % 6;
    bool any = false;
    for (auto& d : corpus) any |= !d.empty();
    if (!any) continue;
    auto m = CooccurrenceModel::build(corpus, w);
    auto o = oracle::count_windows(corpus, w);
    for (const auto& [a, ca] : o.word)
      for (const auto& [b, cb] : o.word) {
        double v = npmi(m, a, b);
        ASSERT_GE(v, -1.0);
        ASSERT_LE(v, 1.0);
        ASSERT_NEAR(v, oracle::npmi(o, a, b, kDefaultCoherenceEpsilon), 1e-9);
      }
  }
}

TEST(Coherence, ToyCorpusMatchesPairwise) {
  // Ten single-window documents.
  std::vector<std::vector<std::string>> corpus{{"x", "y", "z"}, {"x", "y"}, {"x"}, {"y", "z"}, {"z"},
                                               {"x", "z"},      {"q"},      {"x", "y", "z"}, {"y"}, {"q", "x"}};
  auto m = CooccurrenceModel::build(corpus, 3);
  ASSERT_EQ(m.total_windows(), 10);
  auto o = oracle::count_windows(corpus, 3);
  std::vector<std::string> topic{"x", "y", "z"};
  for (double eps : {1e-12, 1e-3}) {
    EXPECT_NEAR(coherence(m, topic, CoherenceVariant::npmi_avg, eps), oracle::coherence(o, topic, true, eps), 1e-12);
    EXPECT_NEAR(coherence(m, topic, CoherenceVariant::uci, eps), oracle::coherence(o, topic, false, eps), 1e-12);
  }
  // Hand count: x in 6 windows, y in 5, joint 3 -> pmi(x,y) = log(0.3 / 0.3).
  EXPECT_NEAR(pmi_smoothed(m, "x", "y", 0.0), 0.0, 1e-12);
  EXPECT_EQ(reason_of([&] { coherence(m, {"x"}, CoherenceVariant::uci); }), "fewer_than_two_words");
}

TEST(Coherence, PerfectPairNpmiAvg) {
  auto m = CooccurrenceModel::build({{"a", "b"}, {"c"}}, 5);
  EXPECT_EQ(coherence(m, {"a", "b"}, CoherenceVariant::npmi_avg), 1.0);
}

TEST(Coherence, UciMonotoneInEpsilonForZeroJoint) {
  auto m = CooccurrenceModel::build({{"a"}, {"b"}, {"c"}}, 1);
  double prev = coherence(m, {"a", "b"}, CoherenceVariant::uci, 1e-1);
  for (double eps : {1e-2, 1e-4, 1e-8, 1e-12, 1e-16}) {
    double v = coherence(m, {"a", "b"}, CoherenceVariant::uci, eps);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(OutlineCoherence, IdenticalSectionsOverPerfectCorpus) {
  Outline o{{{"Kimchi market", {}}, {"Market kimchi", {}}}};
  CoherenceSettings s;
  auto r = outline_coherence(o, std::vector<std::string>{"kimchi market", "kimchi market today"}, s);
  EXPECT_EQ(r.npmi, 1.0);
  EXPECT_EQ(r.scored_sections, 2u);
}

TEST(OutlineCoherence, NoScorableSections) {
  Outline o{{{"Kimchi", {}}}};
  EXPECT_EQ(reason_of([&] { outline_coherence(o, std::vector<std::string>{"kimchi stew"}, CoherenceSettings{}); }),
            "no_scorable_sections");
}

TEST(OutlineCoherence, ThreeSectionsEqualManualMean) {
  Outline o{{{"Seoul market food", {"market stalls"}}, {"Night tower views", {"tower lights"}}, {"Budget", {}}}};
  std::vector<std::string> texts{"seoul market food stalls open early", "market food stalls near seoul station",
                                 "night views from the tower", "tower lights at night", "budget travel tips",
                                 "food budget at the market"};
  CoherenceSettings s;
  s.window = 4;
  s.top_k = 3;
  auto r = outline_coherence(o, texts, s);
  EXPECT_EQ(r.scored_sections, 2u);
  EXPECT_EQ(r.skipped_sections, 1u);

  std::vector<std::vector<std::string>> corpus;
  for (const auto& t : texts) corpus.push_back(tokenize(t, s.tokenizer));
  auto counts = oracle::count_windows(corpus, s.window);
  // Top-3 by frequency, ties by first occurrence.
  std::vector<std::vector<std::string>> topics{{"market", "seoul", "food"}, {"tower", "night", "views"}};
  double u = 0, n = 0;
  for (const auto& t : topics) {
    u += oracle::coherence(counts, t, false, s.epsilon);
    n += oracle::coherence(counts, t, true, s.epsilon);
  }
  EXPECT_NEAR(r.uci, u / 2, 1e-12);
  EXPECT_NEAR(r.npmi, n / 2, 1e-12);
}

TEST(TopicWords, FrequencyThenFirstOccurrence) {
  OutlineSection s{"Tower views and tower lights", {"night lights"}};
  TokenizerConfig c;
  c.stopwords = {"and"};
  EXPECT_EQ(section_topic_words(s, c, 3), (std::vector<std::string>{"tower", "lights", "views"}));
}

TEST(TopicDiversity, Cases) {
  auto td = [](std::vector<std::vector<std::string>> ws) {
    TopicWordSets t;
    for (auto& w : ws) t.topics.push_back({"", w, w.size()});
    return topic_diversity(t);
  };
  EXPECT_DOUBLE_EQ(td({{"a", "b", "c"}, {"d", "e", "f"}}), 1.0);
  EXPECT_DOUBLE_EQ(td({{"a", "b", "c"}, {"a", "b", "c"}}), 0.5);
  EXPECT_DOUBLE_EQ(td({{"a", "b", "c"}, {"c", "d", "e"}, {"f", "g", "h"}}), 8.0 / 9.0);

  TopicWordSets bad{{{"", {"a", "b"}, 3}, {"", {"c", "d", "e"}, 3}}};
  EXPECT_EQ(reason_of([&] { topic_diversity(bad); }), "k_mismatch");
  EXPECT_DOUBLE_EQ(topic_diversity(bad, true), 5.0 / 6.0);
}

TEST(TopicDiversity, OrderInvariantAndIdenticalTopics) {
  std::mt19937 rng(3);
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t k = 1 + rng() % 5, T = 1 + rng() % 6;
    TopicWordSets t;
    std::vector<std::vector<std::string>> raw;
    for (std::size_t i = 0; i < T; ++i) {
      std::vector<std::string> w;
      for (std::size_t j = 0; j < k; ++j) w.push_back(std::string(1, static_cast<char>('a' + rng() % 12)));
      raw.push_back(w);
      t.topics.push_back({"", w, k});
    }
    double v = topic_diversity(t);
    EXPECT_DOUBLE_EQ(v, oracle::topic_diversity(raw, k));
    std::shuffle(t.topics.begin(), t.topics.end(), rng);
    EXPECT_DOUBLE_EQ(topic_diversity(t), v);

    TopicWordSets same;
    std::vector<std::string> distinct;
    for (std::size_t j = 0; j < k; ++j) distinct.push_back("w" + std::to_string(j));
    for (std::size_t i = 0; i < T; ++i) same.topics.push_back({"", distinct, k});
    EXPECT_DOUBLE_EQ(topic_diversity(same), 1.0 / static_cast<double>(T));
  }
}

TEST(TopicDiversity, OutlineTopicsTruncateToCommonK) {
  Outline o{{{"seoul market food", {"stalls"}}, {"tower views", {}}}};
  auto t = outline_topics(o, TokenizerConfig{}, 10);
  ASSERT_EQ(t.topics.size(), 2u);
  EXPECT_EQ(t.topics[0].top_words.size(), 2u);
  EXPECT_EQ(t.topics[0].k, 2u);
  EXPECT_EQ(t.topics[0].label, "section 1");
  EXPECT_DOUBLE_EQ(topic_diversity(t), 1.0);
}

TEST(SelfBleu, IdenticalSections) {
  std::vector<std::vector<std::string>> s{{"the", "market", "opens", "early"}, {"the", "market", "opens", "early"}};
  EXPECT_NEAR(self_bleu(s), 100.0, 1e-9);
  auto dup = s;
  dup.insert(dup.end(), s.begin(), s.end());
  EXPECT_NEAR(self_bleu(dup), 100.0, 1e-9);
}

TEST(SelfBleu, NoOverlap) {
  EXPECT_LT(self_bleu({{"a", "b", "c"}, {"d", "e", "f"}}), 1.0);
  EXPECT_EQ(reason_of([] { self_bleu({{"a"}}); }), "fewer_than_two_sections");
}

TEST(SelfBleu, MatchesBruteForceAndPermutationInvariant) {
  std::mt19937 rng(77);
  const char* vocab[] = {"a", "b", "c", "d", "e"};
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::vector<std::string>> s(2 + rng() % 4);
    for (auto& sec : s) {
      std::size_t len = 1 + rng() % 12;
      for (std::size_t i = 0; i < len; ++i) sec.push_back(vocab[rng() % 5]);
    }
    BleuSettings b;
    b.max_n = 1 + rng() % 4;
    double v = self_bleu(s, b);
    ASSERT_NEAR(v, oracle::self_bleu(s, b.max_n, b.epsilon), 1e-9);
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 100.0 + 1e-9);
    std::shuffle(s.begin(), s.end(), rng);
    ASSERT_NEAR(self_bleu(s, b), v, 1e-9);
  }
}

TEST(SelfBleu, BrevityPenaltyHandComputed) {
  // Hypothesis "a b" vs reference "a b c d": all precisions 1, BP = exp(1 - 4/2).
  std::vector<std::string> h{"a", "b"}, r{"a", "b", "c", "d"};
  BleuSettings s;
  s.max_n = 2;
  EXPECT_NEAR(sentence_bleu(h, {&r}, s), std::exp(-1.0), 1e-15);
}

TEST(SelfBleu, Units) {
  Outline o{{{"A", {"a1", "a2"}}, {"B", {}}}};
  EXPECT_EQ(self_bleu_units(o, SelfBleuUnit::block), (std::vector<std::string>{"A a1 a2", "B"}));
  EXPECT_EQ(self_bleu_units(o, SelfBleuUnit::line), (std::vector<std::string>{"A", "a1", "a2", "B"}));
}

TEST(Nli, LabelParsing) {
  EXPECT_EQ(parse_nli_label("Entailment"), NliLabel::entail);
  EXPECT_EQ(parse_nli_label("label: neutral."), NliLabel::neutral);
  EXPECT_EQ(parse_nli_label("CONTRADICTION"), NliLabel::contradict);
  EXPECT_THROW(parse_nli_label("maybe"), JudgeParseError);
}

TEST(Nli, ScriptedRatios) {
  const auto& tmpl = support::bundled_templates().get(Stage::eval_nli);
  Outline o{{{"Seoul", {"s1", "s2"}}, {"Busan", {"b1", "b2"}}}};
  std::map<std::string, std::string> labels{{"s1", "entail"}, {"s2", "neutral"}, {"b1", "contradict"}, {"b2", "entail"}};
  FunctionLlm judge([&](const CompletionRequest& r) {
    EXPECT_EQ(r.request_tag, "eval_nli");
    for (const auto& [sub, label] : labels)
      if (r.prompt.find("Hypothesis (subheading): " + sub + "\n") != std::string::npos) return label;
    return std::string("?");
  });
  auto res = nli_alignment(o, judge, tmpl);
  EXPECT_DOUBLE_EQ(res.score, 0.5);
  EXPECT_EQ(res.total, 4u);
  EXPECT_EQ(res.labels, (std::vector<NliLabel>{NliLabel::entail, NliLabel::neutral, NliLabel::contradict,
                                               NliLabel::entail}));
  NliSettings par;
  par.concurrency = 3;
  EXPECT_EQ(nli_alignment(o, judge, tmpl, par).labels, res.labels);

  FunctionLlm all([](const CompletionRequest&) { return std::string("entail"); });
  EXPECT_DOUBLE_EQ(nli_alignment(o, all, tmpl).score, 1.0);

  EXPECT_EQ(reason_of([&] { nli_alignment(Outline{{{"A", {}}, {"B", {}}}}, all, tmpl); }), "no_pairs");

  FunctionLlm junk([](const CompletionRequest&) { return std::string("unsure"); });
  EXPECT_THROW(nli_alignment(o, junk, tmpl), JudgeParseError);
}
