#pragma once

// Inverted-file index over 8-bit scalar-quantized vectors, and the exact
// brute-force search used as its oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "paramine/embed.hpp"
#include "paramine/error.hpp"
#include "paramine/parallel.hpp"

namespace paramine::index {

using embed::Matrix;

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s;
}

struct Neighbor {
  std::uint64_t id = 0;
  double distance = 0.0;  // L2, not squared

  bool operator==(const Neighbor&) const = default;
};

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

struct KMeansResult {
  Matrix centroids;
  std::vector<double> objective;  // sum of squared distances after each assignment step
};

namespace detail {

inline std::size_t nearest(const Matrix& centroids, std::span<const float> x, double* best_out = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows; ++c) {
    const double d = squared_l2(centroids.row(c), x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_out) *best_out = best_d;
  return best;
}

}  // namespace detail

// Lloyd iterations from k-means++ seeding. Empty clusters are reseeded with the
// point farthest from its current centroid.
inline KMeansResult train_kmeans(const Matrix& sample, std::size_t k, std::size_t max_iters, std::uint64_t seed,
                                 unsigned threads = 1) {
  if (k == 0) throw InvalidArgument("k must be >= 1");
  if (sample.rows < k) throw InvalidArgument("k-means needs at least k sample vectors");
  const std::size_t n = sample.rows, d = sample.cols;
  std::mt19937_64 rng(seed);

  Matrix centroids(k, d);
  {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t first = pick(rng);
    std::copy_n(sample.row(first).begin(), d, centroids.row(0).begin());
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_l2(sample.row(i), centroids.row(0));
    for (std::size_t c = 1; c < k; ++c) {
      const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
      std::size_t chosen = 0;
      if (total > 0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (chosen = 0; chosen + 1 < n; ++chosen) {
          target -= dist[chosen];
          if (target < 0) break;
        }
      } else {
        chosen = pick(rng);
      }
      std::copy_n(sample.row(chosen).begin(), d, centroids.row(c).begin());
      for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], squared_l2(sample.row(i), centroids.row(c)));
    }
  }

  KMeansResult result;
  std::vector<std::size_t> assign(n, 0), prev(n, k);
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iters); ++iter) {
    parallel_for(n, threads, [&](std::size_t i) { assign[i] = detail::nearest(centroids, sample.row(i), &dist[i]); });
    result.objective.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (assign == prev) break;
    prev = assign;

    std::vector<std::size_t> sizes(k, 0);
    std::vector<std::vector<double>> acc(k, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      ++sizes[assign[i]];
      auto row = sample.row(i);
      for (std::size_t j = 0; j < d; ++j) acc[assign[i]][j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) centroids.row(c)[j] = static_cast<float>(acc[c][j] / static_cast<double>(sizes[c]));
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double di = squared_l2(sample.row(i), centroids.row(assign[i]));
        if (di > far_d) {
          far_d = di;
          far = i;
        }
      }
      std::copy_n(sample.row(far).begin(), d, centroids.row(c).begin());
      assign[far] = c;
      sizes[c] = 1;
    }
  }
  result.centroids = std::move(centroids);
  return result;
}

struct SearchParams {
  std::size_t top_k = 8;
  std::size_t nprobe = 16;
};

class IvfIndex {
 public:
  struct Cell {
    std::vector<std::uint64_t> ids;
    std::vector<std::uint8_t> codes;  // ids.size() * dim
  };

  IvfIndex() = default;
  IvfIndex(Matrix centroids, embed::ScalarQuantizer quantizer)
      : centroids_(std::move(centroids)), quantizer_(std::move(quantizer)), cells_(centroids_.rows) {
    if (centroids_.rows == 0) throw InvalidArgument("index needs at least one centroid");
    if (quantizer_.dim() != centroids_.cols) throw InvalidArgument("quantizer and centroid dimensions differ");
  }

  std::size_t dim() const { return centroids_.cols; }
  std::size_t cell_count() const { return centroids_.rows; }
  std::size_t size() const { return total_; }
  const Matrix& centroids() const { return centroids_; }
  const embed::ScalarQuantizer& quantizer() const { return quantizer_; }
  const std::vector<Cell>& cells() const { return cells_; }

  std::size_t assign(std::span<const float> x) const { return detail::nearest(centroids_, x); }

  void add(std::uint64_t id, std::span<const float> x) {
    if (x.size() != dim()) throw InvalidArgument("vector dimension does not match the index");
    if (!present_.insert(id).second) throw InvalidArgument("duplicate id " + std::to_string(id));
    auto& cell = cells_[assign(x)];
    cell.ids.push_back(id);
    const auto offset = cell.codes.size();
    cell.codes.resize(offset + dim());
    quantizer_.quantize(x, std::span<std::uint8_t>(cell.codes.data() + offset, dim()));
    ++total_;
  }

  // Probes the nprobe nearest cells; distances use the full-precision query
  // against dequantized stored vectors.
  std::vector<Neighbor> search(std::span<const float> query, const SearchParams& params) const {
    if (total_ == 0) throw InvalidArgument("search on an empty index");
    if (params.top_k == 0) throw InvalidArgument("top_k must be >= 1");
    if (params.nprobe == 0 || params.nprobe > cell_count()) throw InvalidArgument("nprobe must be in [1, cells]");
    if (query.size() != dim()) throw InvalidArgument("query dimension does not match the index");

    std::vector<std::pair<double, std::size_t>> order(cell_count());
    for (std::size_t c = 0; c < cell_count(); ++c) order[c] = {squared_l2(centroids_.row(c), query), c};
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(params.nprobe), order.end());

    std::vector<Neighbor> found;
    std::vector<float> buf(dim());
    for (std::size_t p = 0; p < params.nprobe; ++p) {
      const auto& cell = cells_[order[p].second];
      for (std::size_t r = 0; r < cell.ids.size(); ++r) {
        quantizer_.dequantize(std::span<const std::uint8_t>(cell.codes.data() + r * dim(), dim()), buf);
        found.push_back({cell.ids[r], std::sqrt(squared_l2(query, buf))});
      }
    }
    const auto keep = std::min(params.top_k, found.size());
    std::partial_sort(found.begin(), found.begin() + static_cast<std::ptrdiff_t>(keep), found.end(), neighbor_less);
    found.resize(keep);
    return found;
  }

  // Dequantized copy of every stored vector, indexed by id order of insertion
  // into a dense matrix (row r holds id ids[r]).
  std::pair<std::vector<std::uint64_t>, Matrix> dequantized() const {
    std::vector<std::uint64_t> ids;
    Matrix m(total_, dim());
    std::size_t r = 0;
    for (const auto& cell : cells_)
      for (std::size_t i = 0; i < cell.ids.size(); ++i, ++r) {
        ids.push_back(cell.ids[i]);
        quantizer_.dequantize(std::span<const std::uint8_t>(cell.codes.data() + i * dim(), dim()), m.row(r));
      }
    return {ids, m};
  }

  void write(std::ostream& out) const;
  static IvfIndex read(std::istream& in);

 private:
  Matrix centroids_;
  embed::ScalarQuantizer quantizer_;
  std::vector<Cell> cells_;
  std::unordered_set<std::uint64_t> present_;
  std::size_t total_ = 0;
};

// Exact top-k by L2 over every row; ties broken by id.
inline std::vector<Neighbor> brute_force_search(const Matrix& vectors, std::span<const std::uint64_t> ids,
                                                std::span<const float> query, std::size_t top_k) {
  std::vector<Neighbor> all;
  all.reserve(vectors.rows);
  for (std::size_t r = 0; r < vectors.rows; ++r) {
    double s = 0.0;
    auto row = vectors.row(r);
    for (std::size_t j = 0; j < vectors.cols; ++j) {
      const double diff = static_cast<double>(query[j]) - static_cast<double>(row[j]);
      s += diff * diff;
    }
    all.push_back({ids[r], std::sqrt(s)});
  }
  std::sort(all.begin(), all.end(), neighbor_less);
  if (all.size() > top_k) all.resize(top_k);
  return all;
}

inline std::vector<Neighbor> brute_force_search(const embed::EmbeddingStore& store, std::span<const float> query,
                                                std::size_t top_k) {
  const Matrix m = store.to_f32();
  std::vector<std::uint64_t> ids(store.size());
  std::iota(ids.begin(), ids.end(), 0);
  return brute_force_search(m, ids, query, top_k);
}

inline std::size_t default_cell_count(std::size_t n) { return std::max<std::size_t>(1, n / 100); }

struct BuildConfig {
  std::size_t cells = 0;  // 0 = default_cell_count(n)
  std::size_t max_iters = 25;
  std::size_t train_sample = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// Trains centroids and the quantizer on a prefix sample, then adds every row
// with id = row number.
inline IvfIndex build_index(const Matrix& vectors, const BuildConfig& cfg) {
  if (vectors.rows == 0) throw InvalidArgument("cannot build an index from zero vectors");
  const std::size_t cells = cfg.cells ? cfg.cells : default_cell_count(vectors.rows);
  Matrix sample;
  if (vectors.rows <= cfg.train_sample) {
    sample = vectors;
  } else {
    std::vector<std::size_t> rows(vectors.rows);
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(cfg.train_sample);
    std::sort(rows.begin(), rows.end());
    sample = Matrix(rows.size(), vectors.cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
      std::copy_n(vectors.row(rows[i]).begin(), vectors.cols, sample.row(i).begin());
  }
  auto km = train_kmeans(sample, cells, cfg.max_iters, cfg.seed, cfg.threads);
  IvfIndex index(std::move(km.centroids), embed::fit_quantizer(sample, sample.rows));
  for (std::size_t r = 0; r < vectors.rows; ++r) index.add(r, vectors.row(r));
  return index;
}

inline constexpr std::array<char, 8> kIndexMagic = {'P', 'M', 'I', 'X', '0', '0', '0', '1'};

// "PMIX0001", u64 total, centroid block in the embedding store format (f32,
// ids = cell numbers), d f32 quantizer mins, d f32 maxs, u32 cell count, then
// per cell: u32 cell id, u32 length, length x (u64 row id, d code bytes).
inline void IvfIndex::write(std::ostream& out) const {
  out.write(kIndexMagic.data(), 8);
  embed::detail::put<std::uint64_t>(out, total_);
  std::vector<std::string> cell_ids;
  for (std::size_t c = 0; c < cell_count(); ++c) cell_ids.push_back(std::to_string(c));
  embed::write_store(out, embed::EmbeddingStore::from_f32(cell_ids, centroids_));
  out.write(reinterpret_cast<const char*>(quantizer_.mins().data()), static_cast<std::streamsize>(dim() * 4));
  out.write(reinterpret_cast<const char*>(quantizer_.maxs().data()), static_cast<std::streamsize>(dim() * 4));
  embed::detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cell_count()));
  for (std::size_t c = 0; c < cell_count(); ++c) {
    const auto& cell = cells_[c];
    embed::detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(c));
    embed::detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(cell.ids.size()));
    for (std::size_t i = 0; i < cell.ids.size(); ++i) {
      embed::detail::put<std::uint64_t>(out, cell.ids[i]);
      out.write(reinterpret_cast<const char*>(cell.codes.data() + i * dim()), static_cast<std::streamsize>(dim()));
    }
  }
  if (!out) throw std::runtime_error("failed writing index");
}

inline IvfIndex IvfIndex::read(std::istream& in) {
  std::array<char, 8> magic{};
  embed::detail::get_bytes(in, magic.data(), 8, "index header");
  if (magic != kIndexMagic) throw ParseError("bad index magic (expected PMIX0001)");
  const auto total = embed::detail::get<std::uint64_t>(in, "index header");
  auto store = embed::read_store(in);
  if (store.dtype != embed::Dtype::f32) throw ParseError("index centroids must be f32");
  const std::size_t d = store.dim();
  std::vector<float> mins(d), maxs(d);
  embed::detail::get_bytes(in, mins.data(), d * 4, "quantizer");
  embed::detail::get_bytes(in, maxs.data(), d * 4, "quantizer");
  IvfIndex index;
  try {
    index = IvfIndex(std::move(store.vectors), embed::ScalarQuantizer(std::move(mins), std::move(maxs)));
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  const auto cells = embed::detail::get<std::uint32_t>(in, "cell count");
  if (cells != index.cell_count()) throw ParseError("cell count disagrees with centroid count");
  for (std::uint32_t s = 0; s < cells; ++s) {
    const auto c = embed::detail::get<std::uint32_t>(in, "cell header");
    const auto len = embed::detail::get<std::uint32_t>(in, "cell header");
    if (c >= cells) throw ParseError("cell id out of range");
    auto& cell = index.cells_[c];
    for (std::uint32_t i = 0; i < len; ++i) {
      const auto id = embed::detail::get<std::uint64_t>(in, "cell entry");
      if (!index.present_.insert(id).second) throw ParseError("duplicate id in index file");
      cell.ids.push_back(id);
      const auto off = cell.codes.size();
      cell.codes.resize(off + d);
      embed::detail::get_bytes(in, cell.codes.data() + off, d, "cell entry");
    }
    index.total_ += len;
  }
  if (index.total_ != total) throw ParseError("index total disagrees with cell contents");
  return index;
}

inline void write_index(const std::string& path, const IvfIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  index.write(out);
}

inline IvfIndex read_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return IvfIndex::read(in);
}

}  // namespace paramine::index
