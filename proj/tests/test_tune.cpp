#include <gtest/gtest.h>

#include <cmath>

#include "paramine/tune.hpp"

using namespace paramine;
using tune::Point;

namespace {

double sphere(const Point& p) {
  double s = 0;
  for (double x : p) s -= (x - 0.8) * (x - 0.8);
  return s;
}

double distance_to(const Point& p, double c) {
  double s = 0;
  for (double x : p) s += (x - c) * (x - c);
  return std::sqrt(s);
}

std::vector<std::string> of_length(std::size_t n, std::size_t len) {
  return std::vector<std::string>(n, std::string(len, 'x'));
}

}  // namespace

TEST(OnePlusOne, SphereConvergesOnMostSeeds) {
  int good = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::size_t calls = 0;
    const auto r = tune::one_plus_one(
        [&](const Point& p) {
          ++calls;
          return sphere(p);
        },
        {}, 64, seed);
    EXPECT_EQ(calls, 64u);
    EXPECT_EQ(r.history.size(), 64u);
    good += distance_to(r.best, 0.8) <= 0.05;
  }
  EXPECT_GE(good, 18);
}

TEST(OnePlusOne, BudgetOneIsTheMidpoint) {
  const auto r = tune::one_plus_one(sphere, {}, 1, 3);
  for (double x : r.best) EXPECT_DOUBLE_EQ(x, 0.85);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_THROW(tune::one_plus_one(sphere, {}, 0, 3), InvalidArgument);
  EXPECT_THROW(tune::one_plus_one(sphere, {1.0, 1.0}, 5, 3), InvalidArgument);
}

TEST(OnePlusOne, ConstantObjectiveAcceptsEverythingAndStaysInBounds) {
  std::size_t calls = 0;
  const auto r = tune::one_plus_one(
      [&](const Point&) {
        ++calls;
        return 1.0;
      },
      {}, 64, 7);
  EXPECT_EQ(calls, 64u);
  for (const auto& e : r.history) {
    EXPECT_TRUE(e.accepted);
    for (double x : e.point) {
      EXPECT_GE(x, 0.2);
      EXPECT_LE(x, 1.5);
    }
  }
  EXPECT_DOUBLE_EQ(r.final_state.sigma, 1.3);
}

TEST(OnePlusOne, AcceptedValuesNeverDecreaseAndRunsRepeat) {
  auto bumpy = [](const Point& p) { return sphere(p) + 0.01 * std::sin(40 * p[0]); };
  const auto a = tune::one_plus_one(bumpy, {}, 64, 11);
  double last = -INFINITY;
  for (const auto& e : a.history)
    if (e.accepted) {
      EXPECT_GE(e.value, last);
      last = e.value;
    }
  EXPECT_DOUBLE_EQ(a.best_value, last);
  const auto b = tune::one_plus_one(bumpy, {}, 64, 11);
  EXPECT_EQ(a.best, b.best);
  EXPECT_NE(a.best, tune::one_plus_one(bumpy, {}, 64, 12).best);
}

TEST(OnePlusOne, NanCountsAsWorst) {
  const auto r = tune::one_plus_one([](const Point& p) { return p[0] > 0.85 ? NAN : sphere(p); }, {}, 40, 2);
  EXPECT_TRUE(std::isfinite(r.best_value));
  EXPECT_LE(r.best[0], 0.85);
}

TEST(PriorKnowledge, RoundsLengthRatioToTwentieths) {
  EXPECT_DOUBLE_EQ(tune::prior_knowledge_controls(of_length(50, 100), of_length(50, 80)).num_chars, 0.8);
  EXPECT_DOUBLE_EQ(tune::prior_knowledge_controls(of_length(50, 100), of_length(50, 95)).lev_sim, 0.95);
  EXPECT_DOUBLE_EQ(tune::prior_knowledge_controls(of_length(50, 100), of_length(50, 41)).word_freq, 0.4);
  EXPECT_DOUBLE_EQ(tune::prior_knowledge_controls(of_length(50, 100), of_length(50, 100)).dep_tree_depth, 1.0);
  EXPECT_DOUBLE_EQ(tune::prior_knowledge_controls(of_length(50, 40), of_length(50, 20)).num_chars, 0.5);
  EXPECT_THROW(tune::prior_knowledge_controls({}, of_length(1, 3)), InvalidArgument);
}

TEST(ToySimplifier, ReadsNumCharsAndWordFreq) {
  tune::ToySimplifier toy(std::map<std::string, std::string>{{"enormous", "big"}});
  EXPECT_EQ(toy.simplify_one("<NumChars_50%> aaaa bbbb cccc dddd"), "aaaa bbbb");
  EXPECT_EQ(toy.simplify_one("<NumChars_20%> aaaaaaaa bb"), "aaaaaaaa");
  EXPECT_EQ(toy.simplify_one("<NumChars_100%> <WordFreq_80%> an Enormous dog"), "an big dog");
  EXPECT_EQ(toy.simplify_one("<NumChars_100%> <WordFreq_100%> an enormous dog"), "an enormous dog");

  access::FrequencyTable table("t");
  table.add("enormous", 900);
  tune::ToySimplifier ranked({{"enormous", "big"}}, &table, 1000);
  EXPECT_EQ(ranked.simplify_one("<NumChars_100%> <WordFreq_80%> an enormous dog"), "an big dog");
  EXPECT_EQ(ranked.simplify_one("<NumChars_100%> <WordFreq_95%> an enormous dog"), "an enormous dog");
}

TEST(ToySimplifier, TunedControlsBeatMidpoint) {
  eval::EvalCorpus valid;
  for (int i = 0; i < 20; ++i) {
    valid.sources.push_back("the enormous dog ran across the wide green field near the old house " + std::to_string(i));
    valid.references.push_back({"the big dog ran across the field", "the big dog ran across the wide field"});
  }
  tune::ToySimplifier toy(std::map<std::string, std::string>{{"enormous", "big"}});
  const auto r = tune::tune_controls(toy, valid, 32, 5);
  EXPECT_GE(r.sari, r.midpoint_sari);
  EXPECT_EQ(r.search.history.size(), 32u);
  tune::EchoSimplifier echo;
  const auto e = tune::tune_controls(echo, valid, 4, 5);
  EXPECT_DOUBLE_EQ(e.sari, eval::sari(valid.sources, valid.sources, valid.references).sari);
}

TEST(Synonyms, FileParsing) {
  const std::string path = ::testing::TempDir() + "syn.tsv";
  text::write_lines(path, {"# comment", "Enormous\tbig", "", "utilize\tuse"});
  const auto s = tune::read_synonyms(path);
  EXPECT_EQ(s.at("enormous"), "big");
  EXPECT_EQ(s.size(), 2u);
  text::write_lines(path, {"one\ttwo\tthree"});
  EXPECT_THROW(tune::read_synonyms(path), ParseError);
}
