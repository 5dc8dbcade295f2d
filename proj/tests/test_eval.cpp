#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "paramine/eval.hpp"

using namespace paramine;
using eval::SariAggregation;
using eval::SariOptions;

namespace {

// Straight transcription of the corpus-level formula with vector keys, kept
// apart from the library's counter helpers.
using Gram = std::vector<std::string>;
using Bag = std::map<Gram, long>;

Bag grams(const std::string& normalized, std::size_t n) {
  const auto toks = text::split_whitespace(normalized);
  Bag b;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++b[Gram(toks.begin() + i, toks.begin() + i + n)];
  return b;
}

double oracle_sari(const std::vector<std::string>& srcs, const std::vector<std::string>& preds,
                   const std::vector<std::vector<std::string>>& refs) {
  double total[3] = {0, 0, 0};
  for (std::size_t n = 1; n <= 4; ++n) {
    // [op][0=correct,1=sys,2=ref]
    double c[3][3] = {};
    for (std::size_t i = 0; i < srcs.size(); ++i) {
      const long k = static_cast<long>(refs[i].size());
      const Bag s = grams(eval::normalize_for_metrics(srcs[i]), n);
      const Bag y = grams(eval::normalize_for_metrics(preds[i]), n);
      Bag r;
      for (const auto& ref : refs[i])
        for (const auto& [g, v] : grams(eval::normalize_for_metrics(ref), n)) r[g] += v;
      // add: types only
      for (const auto& [g, v] : y)
        if (!s.count(g)) {
          c[0][1] += 1;
          c[0][0] += r.count(g) ? 1 : 0;
        }
      for (const auto& [g, v] : r) c[0][2] += s.count(g) ? 0 : 1;
      // keep / delete with the source and output scaled by the reference count
      for (const auto& [g, v] : s) {
        const long sv = v * k;
        const long yv = y.count(g) ? y.at(g) * k : 0;
        const long rv = r.count(g) ? r.at(g) : 0;
        const long kept_sys = std::min(sv, yv), kept_ref = std::min(sv, rv);
        c[1][0] += std::min(kept_sys, kept_ref);
        c[1][1] += kept_sys;
        c[1][2] += kept_ref;
        const long del_sys = std::max(0L, sv - yv), del_ref = std::max(0L, sv - rv);
        c[2][0] += std::min(del_sys, del_ref);
        c[2][1] += del_sys;
        c[2][2] += del_ref;
      }
    }
    for (int op = 0; op < 3; ++op) {
      const double p = c[op][1] > 0 ? c[op][0] / c[op][1] : 0;
      const double r = c[op][2] > 0 ? c[op][0] / c[op][2] : 0;
      total[op] += (p + r > 0 ? 2 * p * r / (p + r) : 0) / 4.0;
    }
  }
  return 100.0 * (total[0] + total[1] + total[2]) / 3.0;
}

std::string words(std::mt19937& rng, std::size_t n) {
  static const char* vocab[] = {"the", "cat", "sat", "on", "mat", "dog", "ran", "big", "red", "a", ",", "."};
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " " : "") + std::string(vocab[rng() % 12]);
  return out;
}

}  // namespace

TEST(Tokenize13a, Cases) {
  EXPECT_EQ(eval::tokenize_13a("Hello, world!"), "Hello , world !");
  EXPECT_EQ(eval::tokenize_13a("pi is 3.14, roughly"), "pi is 3.14 , roughly");
  EXPECT_EQ(eval::tokenize_13a("pages 1-2 (see)"), "pages 1 - 2 ( see )");
  EXPECT_EQ(eval::tokenize_13a("don't"), "don't");
  EXPECT_EQ(eval::tokenize_13a("fish &amp; chips"), "fish & chips");
  EXPECT_EQ(eval::tokenize_13a("a<skipped>b"), "ab");
  EXPECT_EQ(eval::tokenize_13a("  spaced \t out  "), "spaced out");
  EXPECT_EQ(eval::normalize_for_metrics("The END."), "the end .");
}

TEST(Sari, HandExampleMatchesOracle) {
  const std::vector<std::string> src{"a b c"}, pred{"a b"};
  const std::vector<std::vector<std::string>> refs{{"a b"}};
  const auto r = eval::sari(src, pred, refs);
  // add 0, keep (1 + 1 + 0 + 0) / 4, delete (1 + 1 + 1 + 0) / 4
  EXPECT_NEAR(r.sari, 100.0 * (0.0 + 0.5 + 0.75) / 3.0, 1e-9);
  EXPECT_NEAR(r.sari, oracle_sari(src, pred, refs), 1e-9);
  EXPECT_DOUBLE_EQ(r.keep.per_order[0].f1, 1.0);
}

TEST(Sari, RandomCorporaMatchOracle) {
  std::mt19937 rng(31);
  for (int t = 0; t < 60; ++t) {
    std::vector<std::string> src, pred;
    std::vector<std::vector<std::string>> refs;
    const std::size_t samples = 1 + rng() % 5;
    for (std::size_t i = 0; i < samples; ++i) {
      src.push_back(words(rng, 1 + rng() % 9));
      pred.push_back(rng() % 4 ? words(rng, 1 + rng() % 9) : src.back());
      std::vector<std::string> r;
      for (std::size_t k = 0, nr = 1 + rng() % 4; k < nr; ++k) r.push_back(words(rng, 1 + rng() % 9));
      refs.push_back(r);
    }
    ASSERT_NEAR(eval::sari(src, pred, refs).sari, oracle_sari(src, pred, refs), 1e-9) << "trial " << t;
  }
}

TEST(Sari, ReferenceOrderDoesNotMatter) {
  std::mt19937 rng(5);
  std::vector<std::string> src, pred;
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 20; ++i) {
    src.push_back(words(rng, 8));
    pred.push_back(words(rng, 6));
    refs.push_back({words(rng, 5), words(rng, 7), words(rng, 6)});
  }
  const double base = eval::sari(src, pred, refs).sari;
  for (int k = 0; k < 5; ++k) {
    for (auto& r : refs) std::shuffle(r.begin(), r.end(), rng);
    EXPECT_DOUBLE_EQ(eval::sari(src, pred, refs).sari, base);
  }
}

TEST(Sari, IdentityAgainstSourceReferences) {
  std::mt19937 rng(6);
  std::vector<std::string> src;
  std::vector<std::vector<std::string>> refs;
  for (int i = 0; i < 10; ++i) {
    src.push_back(words(rng, 4 + rng() % 6));
    refs.push_back({src.back(), src.back()});
  }
  const auto corpus = eval::sari(src, src, refs);
  EXPECT_NEAR(corpus.sari, 100.0 / 3.0, 1e-9);
  EXPECT_NEAR(corpus.keep.score, 1.0, 1e-12);
  SariOptions per;
  per.aggregation = SariAggregation::per_sample;
  EXPECT_NEAR(eval::sari(src, src, refs, per).sari, 100.0, 1e-9);
}

TEST(Sari, IdentityKeepIsPerfectAndValidation) {
  const std::vector<std::string> src{"the cat sat on the mat"};
  const std::vector<std::vector<std::string>> refs{{"the cat sat"}};
  const auto r = eval::sari(src, src, refs);
  EXPECT_DOUBLE_EQ(r.keep.per_order[0].recall, 1.0);
  EXPECT_DOUBLE_EQ(r.add.score, 0.0);
  EXPECT_THROW(eval::sari({}, {}, {}), InvalidArgument);
  EXPECT_THROW(eval::sari(src, {}, refs), InvalidArgument);
  EXPECT_THROW(eval::sari(src, src, {{}}), InvalidArgument);
}

TEST(Sari, MicroAveragingDiffersOnlyInAveraging) {
  const std::vector<std::string> src{"a b c d e"}, pred{"a b x d"};
  const std::vector<std::vector<std::string>> refs{{"a b d", "a x d e"}};
  SariOptions micro;
  micro.averaging = eval::SariAveraging::precision_recall_mean;
  const auto a = eval::sari(src, pred, refs), b = eval::sari(src, pred, refs, micro);
  for (int n = 0; n < 4; ++n) EXPECT_DOUBLE_EQ(a.keep.per_order[n].f1, b.keep.per_order[n].f1);
  double p = 0, r = 0;
  for (const auto& o : b.keep.per_order) {
    p += o.precision / 4;
    r += o.recall / 4;
  }
  EXPECT_NEAR(b.keep.score, eval::f1_score(p, r), 1e-12);
}

TEST(Fkgl, Examples) {
  EXPECT_NEAR(eval::fkgl({"The cat sat."}), -2.62, 1e-9);
  EXPECT_EQ(eval::count_syllables("make"), 1);
  EXPECT_EQ(eval::count_syllables("rhythm"), 1);
  EXPECT_EQ(eval::count_syllables("banana"), 3);
  EXPECT_EQ(eval::count_syllables("see"), 1);
  EXPECT_EQ(eval::count_syllables("xyz"), 1);
  EXPECT_EQ(eval::count_syllables("brr"), 1);
  EXPECT_THROW(eval::fkgl({}), InvalidArgument);
  EXPECT_THROW(eval::fkgl({". , !"}), InvalidArgument);
  const std::vector<std::string> two{"The cat sat. The dog ran away quickly."};
  EXPECT_LT(eval::fkgl(two, true), eval::fkgl(two, false));
}

TEST(Bleu, IdentityAndValidation) {
  const std::vector<std::string> preds{"the cat sat on the mat .", "a dog ran in the big park today"};
  const auto r = eval::bleu(preds, {{preds[0], "x"}, {preds[1]}});
  EXPECT_NEAR(r.score, 100.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.brevity_penalty, 1.0);
  EXPECT_THROW(eval::bleu({}, {}), InvalidArgument);
  EXPECT_THROW(eval::bleu(preds, {{"a"}}), InvalidArgument);
}

TEST(Bleu, HandComputedClippingAndBrevity) {
  // hyp "the the the the" vs ref "the cat": 1-gram 1/4 clipped, higher orders 0
  const auto r = eval::bleu({"the the the the"}, {{"the cat"}});
  EXPECT_NEAR(r.precisions[0], 25.0, 1e-12);
  EXPECT_NEAR(r.precisions[1], 100.0 / (2 * 3), 1e-12);
  EXPECT_NEAR(r.precisions[2], 100.0 / (4 * 2), 1e-12);
  EXPECT_NEAR(r.precisions[3], 100.0 / (8 * 1), 1e-12);
  const auto shortr = eval::bleu({"the cat"}, {{"the cat sat on the mat"}});
  EXPECT_NEAR(shortr.brevity_penalty, std::exp(1.0 - 6.0 / 2.0), 1e-12);
  // length tie goes to the shorter reference
  EXPECT_DOUBLE_EQ(eval::bleu({"a b c"}, {{"a b c d", "a b"}}).ref_len, 2.0);
}

TEST(Baselines, TruncationKeepsFloorFourFifths) {
  std::mt19937 rng(12);
  for (std::size_t n = 1; n <= 40; ++n) {
    const auto s = words(rng, n);
    const auto out = eval::truncate_baseline(s);
    const auto got = text::split_whitespace(out);
    EXPECT_EQ(got.size(), std::max<std::size_t>(1, n * 4 / 5));
    EXPECT_EQ(s.rfind(out, 0), 0u);
  }
  EXPECT_EQ(eval::truncate_baseline("Hello, world! Bye", eval::TruncationTokenizer::tok13a), "Hello , world !");
  EXPECT_EQ(eval::truncate_baseline(""), "");
  EXPECT_EQ(eval::identity_baseline("x y"), "x y");
}

TEST(Gold, IdenticalReferencesAndUnrolledTwoReferenceCase) {
  eval::EvalCorpus same{{"the big dog ran far", "a cat sat on a mat"},
                        {{"the dog ran far", "the dog ran far", "the dog ran far"}, {"a cat sat down", "a cat sat down", "a cat sat down"}}};
  const auto g = eval::gold_reference_loo(same, 1);
  ASSERT_EQ(g.sari_per_slot.size(), 3u);
  for (double s : g.sari_per_slot) EXPECT_DOUBLE_EQ(s, g.sari_per_slot[0]);
  EXPECT_NEAR(g.bleu, 100.0, 1e-9);  // needs 4-grams; three-word corpora score 0


  eval::EvalCorpus two{{"the big dog ran far away", "a cat sat on a mat"},
                       {{"the dog ran", "a dog went far"}, {"the cat sat", "cat on mat"}}};
  const auto h = eval::gold_reference_loo(two, 9);
  const double s0 = eval::sari(two.sources, {"the dog ran", "the cat sat"},
                               {{"a dog went far", "a dog went far"}, {"cat on mat", "cat on mat"}}).sari;
  const double s1 = eval::sari(two.sources, {"a dog went far", "cat on mat"},
                               {{"the dog ran", "the dog ran"}, {"the cat sat", "the cat sat"}}).sari;
  EXPECT_NEAR(h.sari, (s0 + s1) / 2, 1e-9);
  EXPECT_NEAR(h.fkgl, (eval::fkgl({"the dog ran", "the cat sat"}) + eval::fkgl({"a dog went far", "cat on mat"})) / 2,
              1e-9);

  eval::EvalCorpus one{{"x"}, {{"y"}}};
  EXPECT_THROW(eval::gold_reference_loo(one, 1), InvalidArgument);
}

TEST(Report, JsonKeysAndCorpusReading) {
  const std::string dir = ::testing::TempDir();
  text::write_lines(dir + "src.txt", {"the big dog ran far", "a cat sat on a mat"});
  text::write_lines(dir + "ref0.txt", {"the dog ran", "a cat sat"});
  text::write_lines(dir + "ref1.txt", {"the dog ran far", "the cat sat"});
  text::write_lines(dir + "short.txt", {"one"});
  const auto c = eval::read_eval_corpus(dir + "src.txt", {dir + "ref0.txt", dir + "ref1.txt"});
  EXPECT_EQ(c.min_references(), 2u);
  EXPECT_THROW(eval::read_eval_corpus(dir + "src.txt", {dir + "short.txt"}), InvalidArgument);
  const auto j = eval::evaluate(c, c.sources).to_json();
  for (const char* key : {"samples", "sari", "sari_add", "sari_keep", "sari_delete", "fkgl", "bleu", "bleu_detail"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["sari_keep"]["per_order"].size(), 4u);
}
