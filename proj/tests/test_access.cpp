#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <regex>

#include "paramine/access.hpp"

using namespace paramine;
using access::Control;

namespace {

// Exhaustive search over alignments: minimum cost first, then most replaces.
std::pair<std::size_t, std::size_t> brute_script(const std::u32string& a, const std::u32string& b) {
  std::function<std::pair<std::size_t, std::size_t>(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size()) return std::pair<std::size_t, std::size_t>{b.size() - j, 0};
    if (j == b.size()) return std::pair<std::size_t, std::size_t>{a.size() - i, 0};
    auto best = go(i + 1, j + 1);
    if (a[i] != b[j]) {
      best.first += 1;
      best.second += 1;
    }
    for (auto cand : {go(i + 1, j), go(i, j + 1)}) {
      cand.first += 1;
      if (cand.first < best.first || (cand.first == best.first && cand.second > best.second)) best = cand;
    }
    return best;
  };
  return go(0, 0);
}

double oracle_levsim(const std::string& a, const std::string& b) {
  const std::u32string ua(a.begin(), a.end()), ub(b.begin(), b.end());
  const auto longest = std::max(ua.size(), ub.size());
  if (!longest) return 1.0;
  return 1.0 - double(brute_script(ua, ub).second) / double(longest);
}

}  // namespace

TEST(Controls, CharRatio) {
  EXPECT_DOUBLE_EQ(access::char_ratio("aaaaaaaaaa", "aaaaaaaa"), 0.8);
  EXPECT_DOUBLE_EQ(access::char_ratio("same", "same"), 1.0);
  EXPECT_DOUBLE_EQ(access::char_ratio("ab", "abcd"), 2.0);
  EXPECT_DOUBLE_EQ(access::char_ratio("éé", "é"), 0.5);
  EXPECT_THROW(access::char_ratio("", "x"), InvalidArgument);
}

TEST(Controls, ReplaceOnlyLevSim) {
  EXPECT_NEAR(access::replace_only_levsim("abc", "abd"), 2.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(access::replace_only_levsim("abc", "abcxyz"), 1.0);
  EXPECT_DOUBLE_EQ(access::replace_only_levsim("", ""), 1.0);
}

TEST(Controls, LevSimMatchesExhaustiveSearchAndIsSymmetric) {
  std::mt19937 rng(4);
  for (int t = 0; t < 400; ++t) {
    auto word = [&] {
      std::string s(rng() % 6, 'a');
      for (auto& c : s) c = static_cast<char>('a' + rng() % 3);
      return s;
    };
    const auto a = word(), b = word();
    const double got = access::replace_only_levsim(a, b);
    EXPECT_NEAR(got, oracle_levsim(a, b), 1e-12) << a << " / " << b;
    EXPECT_DOUBLE_EQ(got, access::replace_only_levsim(b, a));
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(Controls, WordFreqRatioOfLogRanks) {
  access::FrequencyTable table("t");
  table.add("cat", 10);
  table.add("zebra", 100);
  EXPECT_NEAR(access::word_freq_ratio("zebra", "cat", table), 0.5, 1e-12);
  EXPECT_NEAR(access::word_freq_ratio("the zebra", "a cat", table), 0.5, 1e-12);
  // only stop-words: every word counts, unseen words rank size() + 1 = 3
  EXPECT_NEAR(access::word_freq_aggregate("the of", table), std::log(3.0), 1e-12);
  EXPECT_DOUBLE_EQ(access::word_freq_ratio("...", "!!", table), 1.0);
  EXPECT_DOUBLE_EQ(access::word_freq_ratio("...", "cat", table), access::kTokenMax);
}

TEST(Controls, ProxyDepth) {
  access::ProxyDepthParser p;
  EXPECT_EQ(p.depth("He left."), 1);
  EXPECT_EQ(p.depth("He left because it rained which was sad."), 3);
  EXPECT_EQ(p.depth("One (two [three]) four."), 3);
  EXPECT_FALSE(p.depth("").has_value());
  EXPECT_DOUBLE_EQ(*access::dep_depth_ratio("He left.", "He left because it rained which was sad.", p), 3.0);
  EXPECT_FALSE(access::dep_depth_ratio("He left.", "  ", p).has_value());
}

TEST(Tokens, FormattingAndGrammar) {
  EXPECT_EQ(access::format_token(Control::NumChars, 0.637), "<NumChars_65%>");
  EXPECT_EQ(access::format_token(Control::LevSim, 0.05), "<LevSim_20%>");
  EXPECT_EQ(access::format_token(Control::WordFreq, 7.0), "<WordFreq_200%>");
  EXPECT_EQ(access::format_token(Control::DepTreeDepth, NAN), "<DepTreeDepth_100%>");
  const std::regex grammar(R"(<(NumChars|LevSim|WordFreq|DepTreeDepth)_(\d+)%>)");
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    const auto tok = access::format_token(access::kControls[i % 4], u(rng));
    std::smatch m;
    ASSERT_TRUE(std::regex_match(tok, m, grammar)) << tok;
    const int pct = std::stoi(m[2].str());
    EXPECT_GE(pct, 20);
    EXPECT_LE(pct, 200);
    EXPECT_EQ(pct % 5, 0);
  }
}

TEST(Tokens, PrependAndStripRoundTrip) {
  const access::ControlValues v{0.8, 0.65, 0.75, 0.4};
  const auto line = access::prepend_inference_tokens("The cat sat.", v);
  EXPECT_EQ(line, "<NumChars_80%> <LevSim_65%> <WordFreq_75%> <DepTreeDepth_40%> The cat sat.");
  const auto parsed = access::strip_tokens(line);
  EXPECT_EQ(parsed.text, "The cat sat.");
  EXPECT_EQ(parsed.present.size(), 4u);
  for (auto c : access::kControls) EXPECT_NEAR(parsed.controls.get(c), v.get(c), 1e-12);
  EXPECT_EQ(access::strip_tokens("<Foo_80%> text").text, "<Foo_80%> text");
}

TEST(Preprocess, IdentityPairAndSkips) {
  access::FrequencyTable table("t");
  table.add("cat", 1);
  access::ProxyDepthParser parser;
  std::ostringstream warn;
  const auto out = access::preprocess_corpus({{"The cat sat.", "The cat sat."}, {"The cat sat.", ""}}, table, parser,
                                             0.05, access::FreqAggregation::quartile3, &warn);
  ASSERT_EQ(out.sources.size(), 1u);
  EXPECT_EQ(out.sources[0], "<NumChars_100%> <LevSim_100%> <WordFreq_100%> <DepTreeDepth_100%> The cat sat.");
  EXPECT_EQ(out.targets[0], "The cat sat.");
  EXPECT_EQ(out.skipped, 1u);
  EXPECT_NE(warn.str().find("pair 1"), std::string::npos);
}

TEST(FrequencyTable, FromCorpusRanksByCount) {
  const auto t = access::FrequencyTable::from_corpus({"b a a", "a c b", "1 2 ,"});
  EXPECT_EQ(t.rank("a"), 1u);
  EXPECT_EQ(t.rank("b"), 2u);
  EXPECT_EQ(t.rank("c"), 3u);
  EXPECT_FALSE(t.contains("1"));
  EXPECT_EQ(t.rank("zzz"), 4u);
  access::FrequencyTable dup;
  dup.add("x", 1);
  EXPECT_THROW(dup.add("x", 2), InvalidArgument);
}
