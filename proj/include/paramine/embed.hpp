#pragma once

// Embedding storage and the PCA -> random rotation -> 8-bit scalar quantization
// chain applied before indexing. Embeddings themselves come from an external
// encoder.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "paramine/error.hpp"

namespace paramine::embed {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

enum class Dtype : std::uint8_t { f32 = 0, u8 = 1 };

// Row-major matrix with per-row external ids.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

class ScalarQuantizer {
 public:
  ScalarQuantizer() = default;
  ScalarQuantizer(std::vector<float> mins, std::vector<float> maxs) : min_(std::move(mins)), max_(std::move(maxs)) {
    if (min_.size() != max_.size()) throw InvalidArgument("quantizer min/max length mismatch");
    for (std::size_t i = 0; i < min_.size(); ++i)
      if (!(min_[i] <= max_[i])) throw InvalidArgument("quantizer requires min <= max");
  }

  std::size_t dim() const { return min_.size(); }
  const std::vector<float>& mins() const { return min_; }
  const std::vector<float>& maxs() const { return max_; }

  void quantize(std::span<const float> x, std::span<std::uint8_t> codes) const {
    for (std::size_t i = 0; i < min_.size(); ++i) {
      const float range = max_[i] - min_[i];
      if (range <= 0.0f) {
        codes[i] = 0;
        continue;
      }
      const double scaled = 255.0 * (static_cast<double>(x[i]) - min_[i]) / range;
      codes[i] = static_cast<std::uint8_t>(std::clamp(std::round(scaled), 0.0, 255.0));
    }
  }

  std::vector<std::uint8_t> quantize(std::span<const float> x) const {
    std::vector<std::uint8_t> codes(min_.size());
    quantize(x, codes);
    return codes;
  }

  float decode(std::size_t i, std::uint8_t code) const {
    if (code == 255) return max_[i];
    const float range = max_[i] - min_[i];
    return static_cast<float>(min_[i] + static_cast<double>(range) * code / 255.0);
  }

  void dequantize(std::span<const std::uint8_t> codes, std::span<float> out) const {
    for (std::size_t i = 0; i < min_.size(); ++i) out[i] = decode(i, codes[i]);
  }

  std::vector<float> dequantize(std::span<const std::uint8_t> codes) const {
    std::vector<float> out(min_.size());
    dequantize(codes, out);
    return out;
  }

 private:
  std::vector<float> min_;
  std::vector<float> max_;
};

// Per-dimension min/max over (at most `sample` leading) rows.
inline ScalarQuantizer fit_quantizer(const Matrix& vectors, std::size_t sample = 100000) {
  if (vectors.rows == 0) throw InvalidArgument("cannot fit a quantizer on zero vectors");
  const std::size_t n = std::min(sample, vectors.rows);
  std::vector<float> mins(vectors.row(0).begin(), vectors.row(0).end());
  std::vector<float> maxs = mins;
  for (std::size_t r = 1; r < n; ++r) {
    auto row = vectors.row(r);
    for (std::size_t i = 0; i < vectors.cols; ++i) {
      mins[i] = std::min(mins[i], row[i]);
      maxs[i] = std::max(maxs[i], row[i]);
    }
  }
  return ScalarQuantizer(std::move(mins), std::move(maxs));
}

struct EmbeddingStore {
  Dtype dtype = Dtype::f32;
  std::vector<std::string> ids;
  Matrix vectors;                    // dtype f32
  std::vector<std::uint8_t> codes;   // dtype u8, rows * dim bytes
  ScalarQuantizer quantizer;         // dtype u8

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return dtype == Dtype::f32 ? vectors.cols : quantizer.dim(); }

  static EmbeddingStore from_f32(std::vector<std::string> ids, Matrix m) {
    if (ids.size() != m.rows) throw InvalidArgument("id count does not match row count");
    EmbeddingStore s;
    s.ids = std::move(ids);
    s.vectors = std::move(m);
    s.validate();
    return s;
  }

  static EmbeddingStore quantized(std::vector<std::string> ids, const Matrix& m, ScalarQuantizer q) {
    if (ids.size() != m.rows) throw InvalidArgument("id count does not match row count");
    if (q.dim() != m.cols) throw InvalidArgument("quantizer dimension mismatch");
    EmbeddingStore s;
    s.dtype = Dtype::u8;
    s.ids = std::move(ids);
    s.codes.resize(m.rows * m.cols);
    for (std::size_t r = 0; r < m.rows; ++r)
      q.quantize(m.row(r), std::span<std::uint8_t>(s.codes.data() + r * m.cols, m.cols));
    s.quantizer = std::move(q);
    s.validate();
    return s;
  }

  // f32 view of every row (dequantized for u8 stores).
  Matrix to_f32() const {
    if (dtype == Dtype::f32) return vectors;
    Matrix m(size(), dim());
    for (std::size_t r = 0; r < m.rows; ++r)
      quantizer.dequantize(std::span<const std::uint8_t>(codes.data() + r * m.cols, m.cols), m.row(r));
    return m;
  }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
      if (id.find('\0') != std::string::npos) throw InvalidArgument("ids must not contain NUL");
      if (!seen.insert(id).second) throw InvalidArgument("duplicate id " + id);
    }
    if (dtype == Dtype::f32 && (vectors.rows != ids.size() || vectors.data.size() != vectors.rows * vectors.cols))
      throw InvalidArgument("f32 payload does not match header");
    if (dtype == Dtype::u8 && codes.size() != ids.size() * quantizer.dim())
      throw InvalidArgument("u8 payload does not match header");
  }
};

namespace detail {

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError(std::string("truncated ") + what);
  return v;
}

inline void get_bytes(std::istream& in, void* dst, std::size_t n, const char* what) {
  if (n && !in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n)))
    throw ParseError(std::string("truncated ") + what);
}

}  // namespace detail

inline constexpr std::array<char, 8> kStoreMagic = {'P', 'M', 'E', 'B', '0', '0', '0', '1'};

// Layout (little-endian): magic "PMEB0001", u32 n, u32 d, u8 dtype, 3 zero
// bytes, n NUL-terminated ids, [u8 only: d f32 mins, d f32 maxs], payload.
inline void write_store(std::ostream& out, const EmbeddingStore& s) {
  s.validate();
  out.write(kStoreMagic.data(), kStoreMagic.size());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.dim()));
  detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(s.dtype));
  const char pad[3] = {0, 0, 0};
  out.write(pad, 3);
  for (const auto& id : s.ids) out.write(id.c_str(), static_cast<std::streamsize>(id.size() + 1));
  if (s.dtype == Dtype::u8) {
    out.write(reinterpret_cast<const char*>(s.quantizer.mins().data()), static_cast<std::streamsize>(s.dim() * 4));
    out.write(reinterpret_cast<const char*>(s.quantizer.maxs().data()), static_cast<std::streamsize>(s.dim() * 4));
    out.write(reinterpret_cast<const char*>(s.codes.data()), static_cast<std::streamsize>(s.codes.size()));
  } else {
    out.write(reinterpret_cast<const char*>(s.vectors.data.data()),
              static_cast<std::streamsize>(s.vectors.data.size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("failed writing embedding store");
}

inline EmbeddingStore read_store(std::istream& in) {
  std::array<char, 8> magic{};
  detail::get_bytes(in, magic.data(), magic.size(), "header");
  if (magic != kStoreMagic) throw ParseError("bad embedding magic (expected PMEB0001)");
  const auto n = detail::get<std::uint32_t>(in, "header");
  const auto d = detail::get<std::uint32_t>(in, "header");
  const auto dtype = detail::get<std::uint8_t>(in, "header");
  char pad[3];
  detail::get_bytes(in, pad, 3, "header");
  if (pad[0] || pad[1] || pad[2]) throw ParseError("non-zero header padding");
  if (dtype > 1) throw ParseError("unknown dtype " + std::to_string(dtype));
  EmbeddingStore s;
  s.dtype = static_cast<Dtype>(dtype);
  s.ids.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string id;
    if (!std::getline(in, id, '\0')) throw ParseError("truncated id table");
    s.ids.push_back(std::move(id));
  }
  if (s.dtype == Dtype::u8) {
    std::vector<float> mins(d), maxs(d);
    detail::get_bytes(in, mins.data(), d * 4ull, "quantizer");
    detail::get_bytes(in, maxs.data(), d * 4ull, "quantizer");
    try {
      s.quantizer = ScalarQuantizer(std::move(mins), std::move(maxs));
    } catch (const InvalidArgument& e) {
      throw ParseError(e.what());
    }
    s.codes.resize(static_cast<std::size_t>(n) * d);
    detail::get_bytes(in, s.codes.data(), s.codes.size(), "payload");
  } else {
    s.vectors = Matrix(n, d);
    detail::get_bytes(in, s.vectors.data.data(), s.vectors.data.size() * sizeof(float), "payload");
  }
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(e.what());
  }
  return s;
}

inline void write_store(const std::string& path, const EmbeddingStore& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_store(out, s);
}

inline EmbeddingStore read_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  auto s = read_store(in);
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after payload in " + path);
  return s;
}

// --- transforms ----------------------------------------------------------

struct PcaTransform {
  Eigen::VectorXd mean;        // d
  Eigen::MatrixXd components;  // out_dim x d, orthonormal rows
  Eigen::VectorXd explained;   // variance per component, non-increasing

  std::size_t in_dim() const { return static_cast<std::size_t>(components.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(components.rows()); }
};

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(r, c) = m.data[r * m.cols + c];
  return out;
}

inline PcaTransform fit_pca(const Matrix& vectors, std::size_t out_dim) {
  if (out_dim == 0 || out_dim > vectors.cols) throw InvalidArgument("out_dim must be in [1, d]");
  if (vectors.rows < out_dim) throw InvalidArgument("PCA needs at least out_dim vectors");
  const Eigen::MatrixXd x = to_eigen(vectors);
  PcaTransform pca;
  pca.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - pca.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<std::size_t>(1, vectors.rows - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("PCA eigen decomposition failed");
  // Eigen returns ascending eigenvalues.
  const auto d = static_cast<Eigen::Index>(vectors.cols);
  pca.components.resize(static_cast<Eigen::Index>(out_dim), d);
  pca.explained.resize(static_cast<Eigen::Index>(out_dim));
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(out_dim); ++k) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;  // deterministic sign
    pca.components.row(k) = v.transpose();
    pca.explained(k) = std::max(0.0, eig.eigenvalues()(d - 1 - k));
  }
  return pca;
}

struct RandomRotation {
  std::uint64_t seed = 0;
  Eigen::MatrixXd matrix;  // orthogonal

  static RandomRotation identity(std::size_t dim) {
    return {0, Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  }

  // QR of a seeded Gaussian matrix, with R's diagonal forced positive so the
  // result is unique (and Haar-distributed).
  static RandomRotation generate(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
      if (r(j, j) < 0) q.col(j) = -q.col(j);
    return {seed, q};
  }
};

// PCA projection, rotation, then optional L2 normalization.
struct Transform {
  PcaTransform pca;
  RandomRotation rotation;
  bool normalize = true;

  std::vector<float> apply(std::span<const float> x) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < x.size(); ++i) v(static_cast<Eigen::Index>(i)) = x[i];
    Eigen::VectorXd y = rotation.matrix * (pca.components * (v - pca.mean));
    if (normalize) {
      const double norm = y.norm();
      if (norm > 0) y /= norm;
    }
    std::vector<float> out(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] = static_cast<float>(y(i));
    return out;
  }

  Matrix apply(const Matrix& m) const {
    Matrix out(m.rows, pca.out_dim());
    for (std::size_t r = 0; r < m.rows; ++r) {
      auto y = apply(m.row(r));
      std::copy(y.begin(), y.end(), out.row(r).begin());
    }
    return out;
  }
};

inline std::vector<float> apply_transform(const PcaTransform& pca, const RandomRotation& rot,
                                          std::span<const float> x) {
  if (x.size() != pca.in_dim()) throw InvalidArgument("vector dimension does not match the PCA input");
  return Transform{pca, rot, false}.apply(x);
}

inline constexpr std::array<char, 8> kTransformMagic = {'P', 'M', 'T', 'R', '0', '0', '0', '1'};

// "PMTR0001", u32 in_dim, u32 out_dim, u8 normalize, 3 zero bytes, u64 seed,
// then f64 mean[in], components[out x in], rotation[out x out], explained[out]
// (all row-major).
inline void write_transform(std::ostream& out, const Transform& t) {
  out.write(kTransformMagic.data(), 8);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.pca.in_dim()));
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.pca.out_dim()));
  detail::put<std::uint8_t>(out, t.normalize ? 1 : 0);
  const char pad[3] = {0, 0, 0};
  out.write(pad, 3);
  detail::put<std::uint64_t>(out, t.rotation.seed);
  auto put_matrix = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put<double>(out, m(r, c));
  };
  put_matrix(t.pca.mean.transpose());
  put_matrix(t.pca.components);
  put_matrix(t.rotation.matrix);
  put_matrix(t.pca.explained.transpose());
  if (!out) throw std::runtime_error("failed writing transform");
}

inline Transform read_transform(std::istream& in) {
  std::array<char, 8> magic{};
  detail::get_bytes(in, magic.data(), 8, "header");
  if (magic != kTransformMagic) throw ParseError("bad transform magic (expected PMTR0001)");
  const auto in_dim = detail::get<std::uint32_t>(in, "header");
  const auto out_dim = detail::get<std::uint32_t>(in, "header");
  Transform t;
  t.normalize = detail::get<std::uint8_t>(in, "header") != 0;
  char pad[3];
  detail::get_bytes(in, pad, 3, "header");
  t.rotation.seed = detail::get<std::uint64_t>(in, "header");
  auto get_matrix = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail::get<double>(in, "transform body");
    return m;
  };
  t.pca.mean = get_matrix(1, in_dim).transpose();
  t.pca.components = get_matrix(out_dim, in_dim);
  t.rotation.matrix = get_matrix(out_dim, out_dim);
  t.pca.explained = get_matrix(1, out_dim).transpose();
  return t;
}

inline void write_transform(const std::string& path, const Transform& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_transform(out, t);
}

inline Transform read_transform(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_transform(in);
}

}  // namespace paramine::embed
