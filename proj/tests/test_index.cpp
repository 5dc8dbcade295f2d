#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "paramine/index.hpp"
#include "synthetic.hpp"

using namespace paramine;
using embed::Matrix;

namespace {

// Sorts every row by (distance, id) with a plain double loop.
std::vector<std::uint64_t> oracle_ids(const Matrix& m, const std::vector<std::uint64_t>& ids, std::span<const float> q,
                                      std::size_t k) {
  std::vector<std::pair<double, std::uint64_t>> all;
  for (std::size_t r = 0; r < m.rows; ++r) {
    double s = 0;
    for (std::size_t j = 0; j < m.cols; ++j) s += (double(q[j]) - m.row(r)[j]) * (double(q[j]) - m.row(r)[j]);
    all.push_back({s, ids[r]});
  }
  std::sort(all.begin(), all.end());
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

}  // namespace

TEST(KMeans, SingleClusterIsMean) {
  const auto m = synth::uniform(500, 4, 1);
  const auto km = index::train_kmeans(m, 1, 10, 0, 1);
  for (std::size_t j = 0; j < 4; ++j) {
    double mean = 0;
    for (std::size_t r = 0; r < m.rows; ++r) mean += m.row(r)[j] / double(m.rows);
    EXPECT_NEAR(km.centroids.row(0)[j], mean, 1e-5);
  }
}

TEST(KMeans, TwoBlobsFound) {
  Matrix m(400, 2);
  std::mt19937 rng(2);
  std::normal_distribution<float> g(0.0f, 0.3f);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const float c = r % 2 ? 10.0f : -10.0f;
    m.row(r)[0] = c + g(rng);
    m.row(r)[1] = c + g(rng);
  }
  const auto km = index::train_kmeans(m, 2, 25, 7, 1);
  for (float target : {-10.0f, 10.0f}) {
    bool found = false;
    for (std::size_t c = 0; c < 2; ++c) {
      const double dx = km.centroids.row(c)[0] - target, dy = km.centroids.row(c)[1] - target;
      found |= std::sqrt(dx * dx + dy * dy) < 0.1;
    }
    EXPECT_TRUE(found) << target;
  }
}

TEST(KMeans, ObjectiveMonotoneAndThreadIndependent) {
  const auto m = synth::blobs(2000, 8, 20, 3);
  const auto a = index::train_kmeans(m, 16, 20, 5, 1);
  for (std::size_t t = 1; t < a.objective.size(); ++t) EXPECT_LE(a.objective[t], a.objective[t - 1] + 1e-9);
  const auto b = index::train_kmeans(m, 16, 20, 5, 4);
  EXPECT_EQ(a.centroids.data, b.centroids.data);
}

TEST(Ivf, FullProbeEqualsBruteForceOverDequantized) {
  const auto m = synth::uniform(2000, 8, 4);
  const auto idx = index::build_index(m, {20, 10, 100000, 1, 1});
  const auto [ids, deq] = idx.dequantized();
  const auto queries = synth::uniform(100, 8, 5);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    const auto got = idx.search(queries.row(q), {10, idx.cell_count()});
    const auto want = oracle_ids(deq, ids, queries.row(q), 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].id, want[i]);
    for (std::size_t i = 1; i < got.size(); ++i) EXPECT_LE(got[i - 1].distance, got[i].distance);
    for (const auto& n : got) EXPECT_GE(n.distance, 0.0);
  }
}

TEST(Ivf, SelfQueryRankOneWithinQuantizationBound) {
  const auto m = synth::uniform(1000, 6, 6);
  const auto idx = index::build_index(m, {10, 10, 100000, 2, 1});
  double bound2 = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double h = (double(idx.quantizer().maxs()[i]) - idx.quantizer().mins()[i]) / 255.0 / 2.0 + 1e-6;
    bound2 += h * h;
  }
  for (std::size_t r = 0; r < m.rows; r += 37) {
    const auto got = idx.search(m.row(r), {1, idx.cell_count()});
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].id, r);
    EXPECT_LE(got[0].distance, std::sqrt(bound2));
  }
}

TEST(Ivf, SparseProbeMayReturnFewerNeverThrows) {
  Matrix m(30, 2);
  for (std::size_t r = 0; r < 30; ++r) {
    m.row(r)[0] = r < 27 ? 0.0f + 0.01f * r : 100.0f + r;
    m.row(r)[1] = 0.0f;
  }
  const auto idx = index::build_index(m, {2, 10, 100000, 3, 1});
  const std::vector<float> far{1000.0f, 0.0f};
  const auto got = idx.search(far, {8, 1});
  EXPECT_LT(got.size(), 8u);
}

TEST(Ivf, ArgumentValidation) {
  const auto m = synth::uniform(50, 3, 7);
  const auto idx = index::build_index(m, {2, 5, 100000, 1, 1});
  EXPECT_THROW(idx.search(m.row(0), {0, 1}), InvalidArgument);
  EXPECT_THROW(idx.search(m.row(0), {1, 3}), InvalidArgument);
  const std::vector<float> bad(4, 0.0f);
  EXPECT_THROW(idx.search(bad, {1, 1}), InvalidArgument);
  auto copy = idx;
  EXPECT_THROW(copy.add(0, m.row(0)), InvalidArgument);
}

TEST(Ivf, PersistenceBitExact) {
  const auto m = synth::blobs(3000, 8, 10, 8);
  const auto idx = index::build_index(m, {0, 10, 100000, 4, 2});
  EXPECT_EQ(idx.cell_count(), 30u);
  std::stringstream a;
  idx.write(a);
  const std::string bytes = a.str();
  EXPECT_EQ(bytes.substr(0, 8), "PMIX0001");
  const auto back = index::IvfIndex::read(a);
  std::stringstream b;
  back.write(b);
  EXPECT_EQ(b.str(), bytes);
  const auto q = synth::uniform(5, 8, 9);
  for (std::size_t r = 0; r < q.rows; ++r) {
    const auto x = idx.search(q.row(r), {8, 4});
    const auto y = back.search(q.row(r), {8, 4});
    ASSERT_EQ(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_EQ(x[i].id, y[i].id);
      EXPECT_EQ(x[i].distance, y[i].distance);
    }
  }
}

TEST(Ivf, BlobRecallAtEight) {
  const auto m = synth::blobs(10000, 16, 64, 10);
  const auto idx = index::build_index(m, {64, 25, 100000, 11, 4});
  const auto ids = synth::iota_ids(m.rows);
  const auto queries = synth::blobs(200, 16, 64, 10);
  std::size_t hit = 0, total = 0;
  for (std::size_t q = 0; q < queries.rows; ++q) {
    const auto want = oracle_ids(m, ids, queries.row(q), 8);
    const auto got = idx.search(queries.row(q), {8, 16});
    std::set<std::uint64_t> g;
    for (const auto& n : got) g.insert(n.id);
    for (auto id : want) hit += g.count(id);
    total += want.size();
  }
  EXPECT_GE(double(hit) / double(total), 0.90);
}
