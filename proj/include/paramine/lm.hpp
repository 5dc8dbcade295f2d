#pragma once

// Interpolated Kneser-Ney n-gram language model with one discount per order,
// stored directly in ARPA back-off form so that a trained model and a model
// read back from disk share a single scoring path.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paramine/error.hpp"
#include "paramine/text.hpp"
#include "paramine/unicode.hpp"

namespace paramine::lm {

inline const std::string kBos = "<s>";
inline const std::string kEos = "</s>";
inline const std::string kUnk = "<unk>";

// ARPA files use -99 for "log of zero".
inline constexpr double kLogZero = -99.0;

// Lowercases, splits on whitespace and separates every punctuation character
// into its own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char32_t c : unicode::decode(text)) {
    if (unicode::is_space(c)) {
      flush();
    } else if (unicode::is_punct(c)) {
      flush();
      unicode::append_utf8(cur, c);
      flush();
    } else {
      unicode::append_utf8(cur, unicode::lower(c));
    }
  }
  flush();
  return tokens;
}

// Raw n-gram counts for orders 1..order. Keys are tokens joined by a single
// space (tokens never contain whitespace).
struct NgramCounts {
  int order = 0;
  std::vector<std::map<std::string, std::uint64_t>> counts;  // counts[k - 1]

  bool empty() const {
    return std::all_of(counts.begin(), counts.end(), [](const auto& m) { return m.empty(); });
  }

  // Sums another shard into this one; both must share the order.
  void merge(const NgramCounts& other) {
    if (other.order != order) throw InvalidArgument("cannot merge counts of different order");
    for (int k = 0; k < order; ++k)
      for (const auto& [g, c] : other.counts[k]) counts[k][g] += c;
  }

  // Number of distinct left extensions x g observed at order |g| + 1.
  std::map<std::string, std::uint64_t> continuation_counts(int k) const {
    std::map<std::string, std::uint64_t> out;
    if (k >= order) return out;
    for (const auto& [g, c] : counts[k]) {
      (void)c;
      auto space = g.find(' ');
      ++out[g.substr(space + 1)];
    }
    return out;
  }
};

inline NgramCounts count_ngrams(const std::vector<std::vector<std::string>>& sentences, int order) {
  if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
  NgramCounts nc;
  nc.order = order;
  nc.counts.resize(static_cast<std::size_t>(order));
  std::vector<std::string> seq;
  for (const auto& sent : sentences) {
    if (sent.empty()) continue;
    seq.clear();
    seq.push_back(kBos);
    seq.insert(seq.end(), sent.begin(), sent.end());
    seq.push_back(kEos);
    for (int k = 1; k <= order; ++k) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= seq.size(); ++i) {
        std::string key = seq[i];
        for (int j = 1; j < k; ++j) {
          key += ' ';
          key += seq[i + static_cast<std::size_t>(j)];
        }
        ++nc.counts[static_cast<std::size_t>(k - 1)][key];
      }
    }
  }
  return nc;
}

inline NgramCounts count_ngrams_text(const std::vector<std::string>& lines, int order) {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(lines.size());
  for (const auto& l : lines) sentences.push_back(tokenize(l));
  return count_ngrams(sentences, order);
}

class KneserNeyModel {
 public:
  struct Entry {
    double logprob = kLogZero;  // log10
    double backoff = 0.0;       // log10
  };

  KneserNeyModel() = default;
  explicit KneserNeyModel(int order) : order_(order), tables_(static_cast<std::size_t>(order)) {}

  int order() const { return order_; }
  const std::vector<double>& discounts() const { return discounts_; }
  const std::map<std::string, Entry>& table(int k) const { return tables_.at(static_cast<std::size_t>(k - 1)); }
  std::map<std::string, Entry>& mutable_table(int k) { return tables_.at(static_cast<std::size_t>(k - 1)); }
  void set_discounts(std::vector<double> d) { discounts_ = std::move(d); }

  bool in_vocab(const std::string& w) const { return tables_.at(0).count(w) > 0; }

  // Vocabulary that can be predicted: every unigram except <s>.
  std::vector<std::string> predictable_vocab() const {
    std::vector<std::string> v;
    for (const auto& [w, e] : tables_.at(0))
      if (w != kBos) v.push_back(w);
    return v;
  }

  // log10 P(word | context); context is in natural order (oldest first).
  // Words outside the vocabulary are scored as <unk>.
  double log_prob(const std::vector<std::string>& context, const std::string& word) const {
    const std::string& w = in_vocab(word) ? word : kUnk;
    const std::size_t max_len = std::min(context.size(), static_cast<std::size_t>(order_ - 1));
    double backoff = 0.0;
    for (std::size_t len = max_len + 1; len-- > 0;) {
      std::string ctx;
      for (std::size_t i = context.size() - len; i < context.size(); ++i) {
        ctx += context[i];
        ctx += ' ';
      }
      const auto& tbl = tables_[len];
      auto it = tbl.find(ctx + w);
      if (it != tbl.end()) return backoff + it->second.logprob;
      if (len > 0) {
        ctx.pop_back();
        const auto& ctbl = tables_[len - 1];
        auto c = ctbl.find(ctx);
        if (c != ctbl.end()) backoff += c->second.backoff;
      }
    }
    return backoff + kLogZero;
  }

  // Mean log10 probability per scored token, including the end marker.
  double score(std::string_view text) const { return score_tokens(tokenize(text)); }

  double score_tokens(const std::vector<std::string>& tokens) const {
    std::vector<std::string> context{kBos};
    double total = 0.0;
    for (const auto& t : tokens) {
      total += log_prob(context, t);
      context.push_back(in_vocab(t) ? t : kUnk);
    }
    total += log_prob(context, kEos);
    return total / static_cast<double>(tokens.size() + 1);
  }

 private:
  int order_ = 0;
  std::vector<std::map<std::string, Entry>> tables_;
  std::vector<double> discounts_;
};

namespace detail {

inline std::string drop_first(const std::string& g) {
  auto p = g.find(' ');
  return p == std::string::npos ? std::string() : g.substr(p + 1);
}

inline std::string context_of(const std::string& g) {
  auto p = g.rfind(' ');
  return p == std::string::npos ? std::string() : g.substr(0, p);
}

inline std::string last_word(const std::string& g) {
  auto p = g.rfind(' ');
  return p == std::string::npos ? g : g.substr(p + 1);
}

inline std::vector<std::string> split_key(const std::string& g) {
  return text::split_whitespace(g);
}

}  // namespace detail

inline KneserNeyModel train_kn(const NgramCounts& counts, std::ostream* warn = &std::cerr) {
  if (counts.order < 1 || counts.empty()) throw InvalidArgument("cannot train a language model on empty counts");
  const int order = counts.order;

  // Adjusted counts: raw at the top order and for <s>-initial n-grams,
  // continuation counts elsewhere.
  std::vector<std::map<std::string, std::uint64_t>> adjusted(static_cast<std::size_t>(order));
  for (int k = 1; k <= order; ++k) {
    auto& adj = adjusted[static_cast<std::size_t>(k - 1)];
    if (k == order) {
      adj = counts.counts[static_cast<std::size_t>(k - 1)];
    } else {
      adj = counts.continuation_counts(k);
      for (const auto& [g, c] : counts.counts[static_cast<std::size_t>(k - 1)])
        if (g == kBos || g.rfind(kBos + " ", 0) == 0) adj[g] = c;
    }
    adj.erase(kBos);  // never predicted
  }

  std::vector<double> discounts(static_cast<std::size_t>(order));
  for (int k = 1; k <= order; ++k) {
    std::uint64_t n1 = 0, n2 = 0;
    for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
      if (c == 1) ++n1;
      if (c == 2) ++n2;
    }
    double d;
    if (n1 + 2 * n2 == 0) {
      d = 0.5;
      if (warn) *warn << "warning: degenerate counts-of-counts at order " << k << ", using D = 0.5\n";
    } else {
      d = static_cast<double>(n1) / static_cast<double>(n1 + 2 * n2);
    }
    discounts[static_cast<std::size_t>(k - 1)] = std::clamp(d, 0.01, 0.99);
  }

  KneserNeyModel model(order);
  model.set_discounts(discounts);

  // Per-context totals and type counts for each order.
  struct ContextStats {
    double total = 0;
    double types = 0;
  };
  std::vector<std::map<std::string, ContextStats>> ctx_stats(static_cast<std::size_t>(order));
  for (int k = 1; k <= order; ++k)
    for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
      auto& s = ctx_stats[static_cast<std::size_t>(k - 1)][detail::context_of(g)];
      s.total += static_cast<double>(c);
      s.types += 1;
    }
  auto gamma = [&](int k, const std::string& ctx) {
    const auto& m = ctx_stats[static_cast<std::size_t>(k - 1)];
    auto it = m.find(ctx);
    if (it == m.end() || it->second.total == 0) return 1.0;
    return discounts[static_cast<std::size_t>(k - 1)] * it->second.types / it->second.total;
  };

  // Unigrams interpolate with the uniform distribution over the predictable
  // vocabulary (all seen words, </s> and <unk>).
  auto& unigrams = model.mutable_table(1);
  std::map<std::string, std::uint64_t> uni = adjusted[0];
  uni.emplace(kUnk, 0);
  uni.emplace(kEos, 0);
  const double vocab_size = static_cast<double>(uni.size());
  const ContextStats root = ctx_stats[0][""];
  const double root_gamma = gamma(1, "");
  for (const auto& [w, c] : uni) {
    double p = std::max(static_cast<double>(c) - discounts[0], 0.0) / root.total + root_gamma / vocab_size;
    unigrams[w].logprob = std::log10(p);
  }
  unigrams[kBos].logprob = kLogZero;

  for (int k = 2; k <= order; ++k) {
    auto& tbl = model.mutable_table(k);
    const double d = discounts[static_cast<std::size_t>(k - 1)];
    for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
      const std::string ctx = detail::context_of(g);
      const auto& s = ctx_stats[static_cast<std::size_t>(k - 1)].at(ctx);
      const auto ctx_tokens = detail::split_key(ctx);
      // Lower-order estimate comes from the already-built tables.
      std::vector<std::string> shorter(ctx_tokens.begin() + 1, ctx_tokens.end());
      const double lower = std::pow(10.0, model.log_prob(shorter, detail::last_word(g)));
      const double p = (static_cast<double>(c) - d) / s.total + (d * s.types / s.total) * lower;
      tbl[g].logprob = std::log10(p);
    }
  }
  // Back-off weights for every n-gram that acts as a context.
  for (int k = 1; k < order; ++k)
    for (auto& [g, e] : model.mutable_table(k)) e.backoff = std::log10(gamma(k + 1, g));
  return model;
}

inline void write_arpa(const KneserNeyModel& model, std::ostream& out) {
  out << "\n\\data\\\n";
  for (int k = 1; k <= model.order(); ++k) out << "ngram " << k << "=" << model.table(k).size() << "\n";
  out << std::fixed << std::setprecision(6);
  for (int k = 1; k <= model.order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& [g, e] : model.table(k)) {
      out << e.logprob << '\t' << g;
      if (k < model.order()) out << '\t' << e.backoff;
      out << '\n';
    }
  }
  out << "\n\\end\\\n";
}

inline void write_arpa(const KneserNeyModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_arpa(model, out);
}

inline KneserNeyModel read_arpa(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  while (next() && text::trim(line) != "\\data\\") {
  }
  if (!in && text::trim(line) != "\\data\\") throw ParseError("missing \\data\\ header", lineno);

  std::vector<std::size_t> expected;
  while (next()) {
    auto t = text::trim(line);
    if (t.empty()) {
      if (!expected.empty()) break;
      continue;
    }
    if (t.rfind("ngram ", 0) != 0) throw ParseError("expected 'ngram N=count'", lineno);
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'ngram N=count'", lineno);
    try {
      const auto k = std::stoul(std::string(t.substr(6, eq - 6)));
      if (k != expected.size() + 1) throw ParseError("n-gram orders out of sequence", lineno);
      expected.push_back(std::stoul(std::string(t.substr(eq + 1))));
    } catch (const std::logic_error&) {
      throw ParseError("bad n-gram count", lineno);
    }
  }
  if (expected.empty()) throw ParseError("no n-gram counts in header", lineno);

  KneserNeyModel model(static_cast<int>(expected.size()));
  int current = 0;
  bool ended = false;
  while (next()) {
    auto t = text::trim(line);
    if (t.empty()) continue;
    if (t == "\\end\\") {
      ended = true;
      break;
    }
    if (t.front() == '\\') {
      const std::string head(t);
      if (head.size() < 9 || head.substr(head.size() - 7) != "-grams:") throw ParseError("bad section header", lineno);
      try {
        current = std::stoi(head.substr(1, head.size() - 8));
      } catch (const std::logic_error&) {
        throw ParseError("bad section header", lineno);
      }
      if (current < 1 || current > model.order()) throw ParseError("section order out of range", lineno);
      continue;
    }
    if (current == 0) throw ParseError("n-gram entry before any section", lineno);
    auto fields = text::split_whitespace(t);
    const auto k = static_cast<std::size_t>(current);
    if (fields.size() != k + 1 && fields.size() != k + 2) throw ParseError("wrong number of fields", lineno);
    KneserNeyModel::Entry e;
    try {
      std::size_t used = 0;
      e.logprob = std::stod(fields[0], &used);
      if (used != fields[0].size()) throw std::invalid_argument("trailing");
      if (fields.size() == k + 2) {
        e.backoff = std::stod(fields.back(), &used);
        if (used != fields.back().size()) throw std::invalid_argument("trailing");
      }
    } catch (const std::logic_error&) {
      throw ParseError("bad number", lineno);
    }
    std::string key = fields[1];
    for (std::size_t i = 2; i <= k; ++i) key += ' ' + fields[i];
    model.mutable_table(current)[key] = e;
  }
  if (!ended) throw ParseError("missing \\end\\ marker", lineno);
  for (int k = 1; k <= model.order(); ++k)
    if (model.table(k).size() != expected[static_cast<std::size_t>(k - 1)])
      throw ParseError("section " + std::to_string(k) + " size disagrees with header", lineno);
  return model;
}

inline KneserNeyModel read_arpa(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_arpa(in);
}

// Percentile (linear interpolation, p in [0, 100]) of per-token scores over a
// clean sample; used as the default filtering threshold.
inline double calibrate_threshold(const KneserNeyModel& model, const std::vector<std::string>& sample,
                                  double percentile = 10.0) {
  if (sample.empty()) throw InvalidArgument("calibration sample is empty");
  std::vector<double> s;
  s.reserve(sample.size());
  for (const auto& t : sample) s.push_back(model.score(t));
  std::sort(s.begin(), s.end());
  const double pos = std::clamp(percentile, 0.0, 100.0) / 100.0 * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace paramine::lm
