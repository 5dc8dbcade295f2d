#pragma once

// Simplification metrics. SARI follows the corpus-level formulation of the
// EASSE toolkit (n-gram statistics summed over the corpus, F1 per order then
// averaged); BLEU follows sacreBLEU (13a tokenization, exponential
// smoothing); FKGL pools word, sentence and syllable counts over the corpus.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "paramine/corpus.hpp"
#include "paramine/error.hpp"
#include "paramine/text.hpp"
#include "paramine/unicode.hpp"

namespace paramine::eval {

inline constexpr int kNgramOrder = 4;

// sacreBLEU's "13a" (mteval-v13a) tokenizer.
inline std::string tokenize_13a(std::string_view input) {
  std::string line(input);
  auto replace_all = [&](std::string_view from, std::string_view to) {
    std::size_t pos = 0;
    while ((pos = line.find(from, pos)) != std::string::npos) {
      line.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("<skipped>", "");
  replace_all("-\n", "");
  replace_all("\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all("&quot;", "\"");
    replace_all("&amp;", "&");
    replace_all("&lt;", "<");
    replace_all("&gt;", ">");
  }
  std::u32string s = U" " + unicode::decode(line) + U" ";

  auto is_symbol = [](char32_t c) {
    return (c >= U'{' && c <= U'~') || (c >= U'[' && c <= U'`') || (c >= U' ' && c <= U'&') ||
           (c >= U'(' && c <= U'+') || (c >= U':' && c <= U'@') || c == U'/';
  };
  auto is_digit = [](char32_t c) { return c >= U'0' && c <= U'9'; };
  auto is_dot_comma = [](char32_t c) { return c == U'.' || c == U','; };

  std::u32string t;
  for (char32_t c : s) {
    if (is_symbol(c)) {
      t += U' ';
      t += c;
      t += U' ';
    } else {
      t += c;
    }
  }
  // Two-character patterns, applied like a left-to-right non-overlapping
  // regex substitution.
  auto sub2 = [](const std::u32string& in, auto first, auto second, auto emit) {
    std::u32string out;
    std::size_t i = 0;
    while (i < in.size()) {
      if (i + 1 < in.size() && first(in[i]) && second(in[i + 1])) {
        emit(out, in[i], in[i + 1]);
        i += 2;
      } else {
        out += in[i++];
      }
    }
    return out;
  };
  t = sub2(t, [&](char32_t c) { return !is_digit(c); }, is_dot_comma,
           [](std::u32string& o, char32_t a, char32_t b) { o += a; o += U' '; o += b; o += U' '; });
  t = sub2(t, is_dot_comma, [&](char32_t c) { return !is_digit(c); },
           [](std::u32string& o, char32_t a, char32_t b) { o += U' '; o += a; o += U' '; o += b; });
  t = sub2(t, is_digit, [](char32_t c) { return c == U'-'; },
           [](std::u32string& o, char32_t a, char32_t b) { o += a; o += U' '; o += b; o += U' '; });
  // Python's str.split(): any Unicode whitespace.
  std::string out;
  bool pending = false;
  for (char32_t c : t) {
    if (unicode::is_space(c) || c == U'\x1c' || c == U'\x1d' || c == U'\x1e' || c == U'\x1f') {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    unicode::append_utf8(out, c);
  }
  return out;
}

// Shared SARI/BLEU normalization: lowercase then 13a.
inline std::string normalize_for_metrics(std::string_view sentence, bool lowercase = true) {
  return lowercase ? tokenize_13a(unicode::to_lower(sentence)) : tokenize_13a(sentence);
}

using NgramCounter = std::map<std::string, std::int64_t>;

inline std::array<NgramCounter, kNgramOrder> extract_ngrams(const std::string& normalized) {
  const auto tokens = text::split_whitespace(normalized);
  std::array<NgramCounter, kNgramOrder> out;
  for (int n = 1; n <= kNgramOrder; ++n)
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
      std::string g = tokens[i];
      for (int j = 1; j < n; ++j) g += ' ' + tokens[i + static_cast<std::size_t>(j)];
      ++out[static_cast<std::size_t>(n - 1)][g];
    }
  return out;
}

// sys/ref totals and matches for one operation at one n-gram order.
struct OpCounts {
  double sys_correct = 0;
  double sys_total = 0;
  double ref_total = 0;

  OpCounts& operator+=(const OpCounts& o) {
    sys_correct += o.sys_correct;
    sys_total += o.sys_total;
    ref_total += o.ref_total;
    return *this;
  }
};

struct NgramStats {
  std::array<OpCounts, kNgramOrder> add, keep, del;

  NgramStats& operator+=(const NgramStats& o) {
    for (int n = 0; n < kNgramOrder; ++n) {
      add[n] += o.add[n];
      keep[n] += o.keep[n];
      del[n] += o.del[n];
    }
    return *this;
  }
};

namespace detail {

inline NgramCounter scaled(const NgramCounter& c, std::int64_t k) {
  NgramCounter out;
  for (const auto& [g, v] : c) out[g] = v * k;
  return out;
}

inline NgramCounter intersect(const NgramCounter& a, const NgramCounter& b) {
  NgramCounter out;
  for (const auto& [g, v] : a) {
    auto it = b.find(g);
    if (it != b.end()) {
      const auto m = std::min(v, it->second);
      if (m > 0) out[g] = m;
    }
  }
  return out;
}

inline NgramCounter subtract(const NgramCounter& a, const NgramCounter& b) {
  NgramCounter out;
  for (const auto& [g, v] : a) {
    auto it = b.find(g);
    const auto r = v - (it == b.end() ? 0 : it->second);
    if (r > 0) out[g] = r;
  }
  return out;
}

inline double total(const NgramCounter& c) {
  double s = 0;
  for (const auto& [g, v] : c) s += static_cast<double>(v);
  return s;
}

}  // namespace detail

// Operation statistics for one sample. Inputs must already be normalized.
// Keep and delete use source counts replicated once per reference against the
// pooled reference counts; add is set based.
inline NgramStats sample_ngram_stats(const std::string& source, const std::string& prediction,
                                     const std::vector<std::string>& references) {
  const auto src = extract_ngrams(source);
  const auto sys = extract_ngrams(prediction);
  std::array<NgramCounter, kNgramOrder> refs;
  for (const auto& r : references) {
    auto rn = extract_ngrams(r);
    for (int n = 0; n < kNgramOrder; ++n)
      for (const auto& [g, v] : rn[n]) refs[n][g] += v;
  }
  const auto num_refs = static_cast<std::int64_t>(references.size());
  NgramStats st;
  for (int n = 0; n < kNgramOrder; ++n) {
    std::set<std::string> sys_not_src, ref_not_src;
    for (const auto& [g, v] : sys[n])
      if (!src[n].count(g)) sys_not_src.insert(g);
    for (const auto& [g, v] : refs[n])
      if (!src[n].count(g)) ref_not_src.insert(g);
    double add_correct = 0;
    for (const auto& g : sys_not_src)
      if (refs[n].count(g)) add_correct += 1;
    st.add[n] = {add_correct, static_cast<double>(sys_not_src.size()), static_cast<double>(ref_not_src.size())};

    const auto src_rep = detail::scaled(src[n], num_refs);
    const auto sys_rep = detail::scaled(sys[n], num_refs);
    const auto src_and_sys = detail::intersect(src_rep, sys_rep);
    const auto src_and_ref = detail::intersect(src_rep, refs[n]);
    st.keep[n] = {detail::total(detail::intersect(src_and_sys, src_and_ref)), detail::total(src_and_sys),
                  detail::total(src_and_ref)};

    const auto src_not_sys = detail::subtract(src_rep, sys_rep);
    const auto src_not_ref = detail::subtract(src_rep, refs[n]);
    st.del[n] = {detail::total(detail::intersect(src_not_sys, src_not_ref)), detail::total(src_not_sys),
                 detail::total(src_not_ref)};
  }
  return st;
}

struct PrecisionRecall {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline double f1_score(double p, double r) { return (p > 0 || r > 0) ? 2 * p * r / (p + r) : 0.0; }

// degenerate_as_one: 0/0 precision (recall) counts as 1 when the reference
// side is also empty; otherwise any zero denominator yields 0.
inline PrecisionRecall precision_recall(const OpCounts& c, bool degenerate_as_one) {
  PrecisionRecall pr;
  if (c.sys_total > 0)
    pr.precision = c.sys_correct / c.sys_total;
  else
    pr.precision = (degenerate_as_one && c.ref_total == 0) ? 1.0 : 0.0;
  if (c.ref_total > 0)
    pr.recall = c.sys_correct / c.ref_total;
  else
    pr.recall = (degenerate_as_one && c.sys_total == 0) ? 1.0 : 0.0;
  pr.f1 = f1_score(pr.precision, pr.recall);
  return pr;
}

enum class SariAggregation {
  corpus,      // sum statistics over samples, then score (EASSE default)
  per_sample,  // score each sample, then average
};

enum class SariAveraging {
  f1_per_order,           // F1 for each order, averaged (EASSE default)
  precision_recall_mean,  // average P and R over orders, then F1
};

struct SariOptions {
  SariAggregation aggregation = SariAggregation::corpus;
  SariAveraging averaging = SariAveraging::f1_per_order;
  bool f1_for_deletion = true;
  bool lowercase = true;
};

struct OpScore {
  double score = 0;  // in [0, 1]
  std::array<PrecisionRecall, kNgramOrder> per_order{};
};

struct SariResult {
  double sari = 0;  // in [0, 100]
  OpScore add, keep, del;
};

inline OpScore score_operation(const std::array<OpCounts, kNgramOrder>& counts, bool degenerate_as_one,
                               SariAveraging averaging, bool use_f1) {
  OpScore s;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (int n = 0; n < kNgramOrder; ++n) {
    s.per_order[n] = precision_recall(counts[n], degenerate_as_one);
    p_sum += s.per_order[n].precision;
    r_sum += s.per_order[n].recall;
    f_sum += use_f1 ? s.per_order[n].f1 : s.per_order[n].precision;
  }
  if (averaging == SariAveraging::f1_per_order)
    s.score = f_sum / kNgramOrder;
  else
    s.score = use_f1 ? f1_score(p_sum / kNgramOrder, r_sum / kNgramOrder) : p_sum / kNgramOrder;
  return s;
}

inline SariResult score_stats(const NgramStats& st, const SariOptions& opt, bool degenerate_as_one) {
  SariResult r;
  r.add = score_operation(st.add, degenerate_as_one, opt.averaging, true);
  r.keep = score_operation(st.keep, degenerate_as_one, opt.averaging, true);
  r.del = score_operation(st.del, degenerate_as_one, opt.averaging, opt.f1_for_deletion);
  r.sari = 100.0 * (r.add.score + r.keep.score + r.del.score) / 3.0;
  return r;
}

inline SariResult sari(const std::vector<std::string>& sources, const std::vector<std::string>& predictions,
                       const std::vector<std::vector<std::string>>& references, const SariOptions& opt = {}) {
  if (sources.size() != predictions.size() || sources.size() != references.size())
    throw InvalidArgument("sources, predictions and references must be aligned");
  if (sources.empty()) throw InvalidArgument("SARI needs at least one sample");
  std::vector<NgramStats> per(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (references[i].empty()) throw InvalidArgument("every source needs at least one reference");
    std::vector<std::string> refs;
    refs.reserve(references[i].size());
    for (const auto& r : references[i]) refs.push_back(normalize_for_metrics(r, opt.lowercase));
    per[i] = sample_ngram_stats(normalize_for_metrics(sources[i], opt.lowercase),
                                normalize_for_metrics(predictions[i], opt.lowercase), refs);
  }
  if (opt.aggregation == SariAggregation::corpus) {
    NgramStats total;
    for (const auto& s : per) total += s;
    return score_stats(total, opt, false);
  }
  SariResult mean;
  const double n = static_cast<double>(per.size());
  for (const auto& s : per) {
    const auto r = score_stats(s, opt, true);
    mean.sari += r.sari / n;
    mean.add.score += r.add.score / n;
    mean.keep.score += r.keep.score / n;
    mean.del.score += r.del.score / n;
    for (int k = 0; k < kNgramOrder; ++k) {
      for (auto [dst, src] : {std::pair{&mean.add, &r.add}, std::pair{&mean.keep, &r.keep}, std::pair{&mean.del, &r.del}}) {
        dst->per_order[k].precision += src->per_order[k].precision / n;
        dst->per_order[k].recall += src->per_order[k].recall / n;
        dst->per_order[k].f1 += src->per_order[k].f1 / n;
      }
    }
  }
  return mean;
}

// --- FKGL -------------------------------------------------------------------

// Vowel groups (a e i o u y), at least one, minus a silent final "e" when more
// than one group was found.
inline int count_syllables(std::string_view word) {
  std::string letters;
  for (char32_t c : unicode::decode(word)) {
    const char32_t l = unicode::lower(c);
    if (l < 0x80 && std::isalpha(static_cast<int>(l))) letters += static_cast<char>(l);
  }
  if (letters.empty()) return 1;
  auto vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y'; };
  int groups = 0;
  bool prev = false;
  for (char c : letters) {
    const bool v = vowel(c);
    if (v && !prev) ++groups;
    prev = v;
  }
  if (groups > 1 && letters.back() == 'e' && letters.size() > 1 && !vowel(letters[letters.size() - 2])) --groups;
  return std::max(groups, 1);
}

inline bool is_fkgl_word(std::string_view token) {
  for (char32_t c : unicode::decode(token))
    if (unicode::is_alnum(c)) return true;
  return false;
}

struct FkglCounts {
  double words = 0;
  double sentences = 0;
  double syllables = 0;
};

// Each text counts as one sentence unless split_sentences is set.
inline FkglCounts fkgl_counts(const std::vector<std::string>& texts, bool split_sentences = false) {
  FkglCounts c;
  for (const auto& t : texts) {
    std::size_t words = 0;
    for (const auto& tok : text::split_whitespace(t)) {
      if (!is_fkgl_word(tok)) continue;
      ++words;
      c.syllables += count_syllables(tok);
    }
    c.words += static_cast<double>(words);
    if (split_sentences)
      c.sentences += static_cast<double>(std::max<std::size_t>(1, corpus::split_sentences(t).size()));
    else
      c.sentences += 1;
  }
  return c;
}

inline double fkgl(const std::vector<std::string>& texts, bool split_sentences = false) {
  if (texts.empty()) throw InvalidArgument("FKGL of an empty corpus is undefined");
  const auto c = fkgl_counts(texts, split_sentences);
  if (c.words == 0) throw InvalidArgument("FKGL needs at least one word");
  return 0.39 * (c.words / c.sentences) + 11.8 * (c.syllables / c.words) - 15.59;
}

// --- BLEU -------------------------------------------------------------------

struct BleuResult {
  double score = 0;
  std::array<double, kNgramOrder> precisions{};
  double brevity_penalty = 1;
  double sys_len = 0;
  double ref_len = 0;
};

// Corpus BLEU over normalized text; ragged reference counts allowed.
inline BleuResult bleu(const std::vector<std::string>& predictions,
                       const std::vector<std::vector<std::string>>& references, bool lowercase = true) {
  if (predictions.empty()) throw InvalidArgument("BLEU of an empty corpus is undefined");
  if (predictions.size() != references.size()) throw InvalidArgument("predictions and references must be aligned");
  std::array<double, kNgramOrder> correct{}, totals{};
  double sys_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (references[i].empty()) throw InvalidArgument("every prediction needs at least one reference");
    const auto hyp = normalize_for_metrics(predictions[i], lowercase);
    const auto hyp_len = static_cast<double>(text::split_whitespace(hyp).size());
    const auto hyp_ngrams = extract_ngrams(hyp);
    std::array<NgramCounter, kNgramOrder> max_ref;
    double closest_len = -1, closest_diff = 0;
    for (const auto& r : references[i]) {
      const auto ref = normalize_for_metrics(r, lowercase);
      const auto len = static_cast<double>(text::split_whitespace(ref).size());
      const double diff = std::abs(len - hyp_len);
      if (closest_len < 0 || diff < closest_diff || (diff == closest_diff && len < closest_len)) {
        closest_len = len;
        closest_diff = diff;
      }
      const auto rn = extract_ngrams(ref);
      for (int n = 0; n < kNgramOrder; ++n)
        for (const auto& [g, v] : rn[n]) max_ref[n][g] = std::max(max_ref[n][g], v);
    }
    sys_len += hyp_len;
    ref_len += closest_len;
    for (int n = 0; n < kNgramOrder; ++n) {
      totals[n] += std::max(0.0, hyp_len - n);
      for (const auto& [g, v] : hyp_ngrams[n]) {
        auto it = max_ref[n].find(g);
        if (it != max_ref[n].end()) correct[n] += static_cast<double>(std::min(v, it->second));
      }
    }
  }
  BleuResult res;
  res.sys_len = sys_len;
  res.ref_len = ref_len;
  double smooth = 1.0;
  for (int n = 0; n < kNgramOrder; ++n) {
    if (totals[n] == 0) break;
    if (correct[n] == 0) {
      smooth *= 2;
      res.precisions[n] = 100.0 / (smooth * totals[n]);
    } else {
      res.precisions[n] = 100.0 * correct[n] / totals[n];
    }
  }
  res.brevity_penalty = sys_len < ref_len ? (sys_len > 0 ? std::exp(1.0 - ref_len / sys_len) : 0.0) : 1.0;
  double log_sum = 0;
  for (double p : res.precisions) log_sum += p > 0 ? std::log(p) : -9999999999.0;
  res.score = res.brevity_penalty * std::exp(log_sum / kNgramOrder);
  return res;
}

// --- baselines --------------------------------------------------------------

inline std::string identity_baseline(std::string_view source) { return std::string(source); }

enum class TruncationTokenizer { whitespace, tok13a };

// First floor(0.8 * n) words (at least one), joined by single spaces.
inline std::string truncate_baseline(std::string_view source, TruncationTokenizer tok = TruncationTokenizer::whitespace,
                                     double keep = 0.8) {
  const auto words = tok == TruncationTokenizer::whitespace ? text::split_whitespace(source)
                                                            : text::split_whitespace(tokenize_13a(source));
  if (words.empty()) return {};
  std::size_t n = keep == 0.8 ? words.size() * 4 / 5 : static_cast<std::size_t>(std::floor(keep * static_cast<double>(words.size())));
  n = std::clamp<std::size_t>(n, 1, words.size());
  return text::join(std::vector<std::string>(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(n)));
}

// --- corpus & report ----------------------------------------------------------

struct EvalCorpus {
  std::vector<std::string> sources;
  std::vector<std::vector<std::string>> references;  // per source, ragged

  void validate() const {
    if (sources.size() != references.size()) throw InvalidArgument("references not aligned with sources");
    for (const auto& r : references)
      if (r.empty()) throw InvalidArgument("every source needs at least one reference");
  }

  std::size_t min_references() const {
    std::size_t m = references.empty() ? 0 : references.front().size();
    for (const auto& r : references) m = std::min(m, r.size());
    return m;
  }
};

// Reads a source file and N aligned reference files (one sentence per line).
inline EvalCorpus read_eval_corpus(const std::string& sources_path, const std::vector<std::string>& reference_paths) {
  EvalCorpus c;
  c.sources = text::read_lines(sources_path);
  c.references.resize(c.sources.size());
  for (const auto& p : reference_paths) {
    const auto refs = text::read_lines(p);
    if (refs.size() != c.sources.size())
      throw InvalidArgument("reference file " + p + " has " + std::to_string(refs.size()) + " lines, expected " +
                            std::to_string(c.sources.size()));
    for (std::size_t i = 0; i < refs.size(); ++i) c.references[i].push_back(refs[i]);
  }
  c.validate();
  return c;
}

struct EvalReport {
  SariResult sari;
  double fkgl = 0;
  BleuResult bleu;
  std::size_t samples = 0;

  nlohmann::json to_json() const {
    auto op = [](const OpScore& s) {
      nlohmann::json orders = nlohmann::json::array();
      for (int n = 0; n < kNgramOrder; ++n)
        orders.push_back({{"n", n + 1},
                          {"precision", s.per_order[n].precision},
                          {"recall", s.per_order[n].recall},
                          {"f1", s.per_order[n].f1}});
      return nlohmann::json{{"score", s.score}, {"per_order", orders}};
    };
    return {{"samples", samples},
            {"sari", sari.sari},
            {"sari_add", op(sari.add)},
            {"sari_keep", op(sari.keep)},
            {"sari_delete", op(sari.del)},
            {"fkgl", fkgl},
            {"bleu", bleu.score},
            {"bleu_detail",
             {{"precisions", bleu.precisions}, {"brevity_penalty", bleu.brevity_penalty}, {"sys_len", bleu.sys_len},
              {"ref_len", bleu.ref_len}}}};
  }
};

inline EvalReport evaluate(const EvalCorpus& corpus, const std::vector<std::string>& predictions,
                           const SariOptions& opt = {}) {
  corpus.validate();
  if (predictions.size() != corpus.sources.size()) throw InvalidArgument("predictions not aligned with sources");
  EvalReport r;
  r.samples = predictions.size();
  r.sari = sari(corpus.sources, predictions, corpus.references, opt);
  r.fkgl = fkgl(predictions);
  r.bleu = bleu(predictions, corpus.references, opt.lowercase);
  return r;
}

struct GoldResult {
  double sari = 0;
  double fkgl = 0;
  double bleu = 0;
  std::vector<double> sari_per_slot;
};

// Leave-one-out: for every reference slot r, reference r is the prediction and
// is scored against the other references plus one of them duplicated at random
// so the reference count is unchanged. Scores are averaged over slots.
inline GoldResult gold_reference_loo(const EvalCorpus& corpus, std::uint64_t seed, const SariOptions& opt = {}) {
  corpus.validate();
  const std::size_t slots = corpus.min_references();
  if (slots < 2) throw InvalidArgument("leave-one-out needs at least two references per source");
  std::mt19937_64 rng(seed);
  GoldResult g;
  for (std::size_t slot = 0; slot < slots; ++slot) {
    std::vector<std::string> preds;
    std::vector<std::vector<std::string>> refs;
    preds.reserve(corpus.sources.size());
    refs.reserve(corpus.sources.size());
    for (const auto& sample_refs : corpus.references) {
      preds.push_back(sample_refs[slot]);
      std::vector<std::string> others;
      for (std::size_t k = 0; k < sample_refs.size(); ++k)
        if (k != slot) others.push_back(sample_refs[k]);
      std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
      others.push_back(others[pick(rng)]);
      refs.push_back(std::move(others));
    }
    const double s = sari(corpus.sources, preds, refs, opt).sari;
    g.sari_per_slot.push_back(s);
    g.sari += s / static_cast<double>(slots);
    g.fkgl += fkgl(preds) / static_cast<double>(slots);
    g.bleu += bleu(preds, refs, opt.lowercase).score / static_cast<double>(slots);
  }
  return g;
}

}  // namespace paramine::eval
