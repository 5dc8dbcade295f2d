#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <fstream>
#include <sstream>

#include "paramine/mine.hpp"
#include "synthetic.hpp"

using namespace paramine;
using corpus::Sequence;
using mine::ParaphrasePair;

namespace {

Sequence seq(const std::string& doc, std::size_t a, std::size_t b, const std::string& text) {
  return {corpus::make_seq_id(doc, a, b), doc, a, b, text, unicode::length(text)};
}

ParaphrasePair pair_of(const std::string& q, const std::string& c, const std::string& qdoc = "q",
                       const std::string& cdoc = "c") {
  return {seq(qdoc, 0, 0, q), seq(cdoc, 0, 0, c), 0.01, 0.1};
}

mine::CandidateSet candidates(const std::vector<double>& distances) {
  mine::CandidateSet set{seq("q", 0, 0, "query"), {}};
  for (std::size_t i = 0; i < distances.size(); ++i)
    set.candidates.push_back({seq("c" + std::to_string(i), 0, 0, "cand " + std::to_string(i)), distances[i]});
  return set;
}

struct Mined {
  std::vector<ParaphrasePair> pairs;
  mine::MiningStats stats;
};

Mined run(const synth::PlantedCorpus& c, mine::MiningConfig cfg, unsigned threads, const mine::Decontaminator* eval = nullptr) {
  std::vector<std::string> ids;
  for (const auto& s : c.sequences) ids.push_back(s.seq_id);
  const auto store = embed::EmbeddingStore::from_f32(ids, c.vectors);
  const auto idx = index::build_index(c.vectors, {10, 25, 100000, 3, threads});
  mine::MiningInputs in{&c.sequences, &store, &idx, nullptr, eval};
  Mined m;
  m.pairs = mine::mine_pairs(in, cfg, threads, &m.stats);
  return m;
}

}  // namespace

TEST(Margin, HandComputedExamples) {
  const auto set = candidates({0.02, 0.04, 0.05, 0.06, 0.06, 0.07, 0.08, 0.10});
  const auto kept = mine::margin_filter(set, {});
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_DOUBLE_EQ(kept[0].distance, 0.02);
  EXPECT_NEAR(kept[0].margin, 0.02 / 0.06, 1e-12);
  EXPECT_TRUE(mine::margin_filter(candidates({0.10}), {}).empty());
  EXPECT_THROW(mine::margin_filter(candidates({}), {}), InvalidArgument);
}

TEST(Margin, MaxModeAndZeroDistances) {
  mine::MiningConfig cfg;
  cfg.margin_mode = mine::MarginMode::max;
  const auto kept = mine::margin_filter(candidates({0.02, 0.04, 0.10}), cfg);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_NEAR(kept[1].margin, 0.4, 1e-12);
  EXPECT_EQ(mine::margin_filter(candidates({0.0, 0.0}), {}).size(), 2u);
}

TEST(Distinctness, Examples) {
  EXPECT_FALSE(mine::levenshtein_distinct(pair_of("same text", "same text"), 0.2));
  EXPECT_TRUE(mine::levenshtein_distinct(pair_of("abcd", "ABCE"), 0.2));
  EXPECT_NEAR(levenshtein::distance_ratio_ci("abcd", "ABCE"), 0.25, 1e-12);
  EXPECT_TRUE(mine::levenshtein_distinct(pair_of("aaaa", "bbbb"), 0.2));
  EXPECT_DOUBLE_EQ(levenshtein::distance_ratio_ci("aaaa", "bbbb"), 1.0);
}

TEST(Structural, Examples) {
  ParaphrasePair overlap{seq("7", 2, 4, "one two three"), seq("7", 3, 5, "four five six"), 0.01, 0.1};
  EXPECT_FALSE(mine::structurally_valid(overlap));
  EXPECT_TRUE(mine::sequence_ranges_overlap(overlap.query, overlap.candidate));
  EXPECT_FALSE(mine::structurally_valid(pair_of("He left.", "He left. extra clause.")));
  EXPECT_FALSE(mine::structurally_valid(pair_of("HE LEFT", "he left, extra")));
  EXPECT_TRUE(mine::structurally_valid(pair_of("He left early.", "She departed soon.")));
}

TEST(Structural, OrderInsensitiveWithDistinctness) {
  std::mt19937_64 rng(1);
  std::vector<ParaphrasePair> pairs;
  for (int i = 0; i < 300; ++i) {
    auto a = synth::random_words(rng, 1 + rng() % 4);
    auto b = rng() % 3 == 0 ? a + (rng() % 2 ? " x" : "") : synth::random_words(rng, 1 + rng() % 4);
    pairs.push_back(pair_of(a, b, "d" + std::to_string(rng() % 3), "d" + std::to_string(rng() % 3)));
  }
  auto s_then_l = pairs, l_then_s = pairs;
  std::erase_if(s_then_l, [](const auto& p) { return !mine::structurally_valid(p); });
  std::erase_if(s_then_l, [](const auto& p) { return !mine::levenshtein_distinct(p, 0.2); });
  std::erase_if(l_then_s, [](const auto& p) { return !mine::levenshtein_distinct(p, 0.2); });
  std::erase_if(l_then_s, [](const auto& p) { return !mine::structurally_valid(p); });
  ASSERT_EQ(s_then_l.size(), l_then_s.size());
  for (std::size_t i = 0; i < s_then_l.size(); ++i) EXPECT_EQ(s_then_l[i].query, l_then_s[i].query);
}

TEST(Simplicity, Rules) {
  EXPECT_TRUE(mine::looks_simpler(pair_of("a much longer query text here", "short text"), nullptr));
  EXPECT_FALSE(mine::looks_simpler(pair_of("same words here", "here same words"), nullptr));
  EXPECT_TRUE(mine::looks_simpler(pair_of("He left because it rained.", "He left. It rained a lot then."), nullptr));

  access::FrequencyTable table("t");
  table.add("big", 1);
  table.add("enormous", 500);
  EXPECT_TRUE(mine::looks_simpler(pair_of("an enormous dog", "an big dog sat here"), &table));
}

TEST(Stats, MeanTokensAndIdentity) {
  const std::vector<access::TextPair> pairs{{"w w w w w w w w w w", "a"}, {"w w w w w w w w w w w w w w", "b"}};
  const auto s = mine::corpus_stats(pairs, nullptr);
  EXPECT_DOUBLE_EQ(s.mean_query_tokens, 12.0);
  const auto same = mine::corpus_stats({{"The same text.", "The same text."}}, nullptr);
  EXPECT_EQ(same.compression.counts[20], 1u);
  EXPECT_EQ(same.levsim.counts[20], 1u);
  const auto j = same.to_json();
  EXPECT_NEAR(j["compression_ratio"]["density"][20].get<double>(), 20.0, 1e-12);
}

TEST(Decontamination, NormalizedExactMatch) {
  mine::Decontaminator d({{"The  Cat sat."}});
  EXPECT_TRUE(d.contaminated("the cat SAT."));
  EXPECT_FALSE(d.contaminated("the cat sat"));
  const auto kept = mine::decontaminate({pair_of("x y", "The cat sat."), pair_of("x y", "other")}, d);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].candidate.text, "other");
}

TEST(Pipeline, PlantedPairsRecoveredDeterministically) {
  const auto c = synth::planted_corpus(17);
  const auto a = run(c, {}, 1);
  const auto b = run(c, {}, 4);
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& p : a.pairs) {
    EXPECT_NE(p.query.doc_id, p.candidate.doc_id);
    EXPECT_LT(p.distance, 0.05);
    EXPECT_LT(p.margin, 0.6);
    EXPECT_TRUE(mine::structurally_valid(p));
    EXPECT_TRUE(mine::levenshtein_distinct(p, 0.2));
    got.insert(std::minmax(p.query.seq_id, p.candidate.seq_id));
  }
  std::size_t recovered = 0;
  for (const auto& [x, y] : c.planted) recovered += got.count(std::minmax(x, y));
  EXPECT_GE(recovered, 48u);
  for (const auto& [x, y] : c.traps) EXPECT_EQ(got.count(std::minmax(x, y)), 0u);
  std::stringstream sa, sb;
  mine::write_pairs(sa, a.pairs);
  mine::write_pairs(sb, b.pairs);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_GT(a.stats.after_margin, a.stats.output);
}

TEST(Pipeline, DecontaminationRemovesEvalSentences) {
  const auto c = synth::planted_corpus(18);
  mine::Decontaminator d;
  d.add(c.sequences[0].text);
  const auto m = run(c, {}, 2, &d);
  for (const auto& p : m.pairs) {
    EXPECT_NE(p.query.text, c.sequences[0].text);
    EXPECT_NE(p.candidate.text, c.sequences[0].text);
  }
}

TEST(Pipeline, SimplificationModeDropsIdenticalPairByLengthRule) {
  auto c = synth::planted_corpus(19, 200, 1, 0);
  c.sequences[1].text = c.sequences[0].text;
  c.sequences[1].char_len = c.sequences[0].char_len;
  mine::MiningConfig cfg;
  cfg.mode = mine::Mode::simplification;
  const auto m = run(c, cfg, 1);
  EXPECT_GE(m.stats.after_margin, 2u);
  EXPECT_EQ(m.stats.after_heuristics, 0u);
  EXPECT_TRUE(m.pairs.empty());
}

TEST(Io, PairsRoundTripAndConfig) {
  std::stringstream buf;
  mine::write_pairs(buf, {pair_of("tab\there", "line\nbreak")});
  const std::string path = ::testing::TempDir() + "pairs.tsv";
  {
    std::ofstream out(path);
    out << buf.str();
  }
  const auto rows = mine::read_pairs(path);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].query_text, "tab\there");
  EXPECT_EQ(rows[0].candidate_text, "line\nbreak");
  EXPECT_NEAR(rows[0].distance, 0.01, 1e-9);

  std::istringstream cfg_text("# comment\ndist_max = 0.07\nmode = simplification\n");
  const auto cfg = mine::parse_mining_config(cfg_text);
  EXPECT_DOUBLE_EQ(cfg.dist_max, 0.07);
  EXPECT_EQ(cfg.mode, mine::Mode::simplification);
  std::istringstream bad("nonsense = 1\n");
  EXPECT_THROW(mine::parse_mining_config(bad), ParseError);
}
