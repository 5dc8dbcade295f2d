#pragma once

// Nearest-neighbour candidates -> filtered paraphrase (or simplification)
// pairs.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "paramine/access.hpp"
#include "paramine/corpus.hpp"
#include "paramine/embed.hpp"
#include "paramine/error.hpp"
#include "paramine/index.hpp"
#include "paramine/levenshtein.hpp"
#include "paramine/lm.hpp"
#include "paramine/parallel.hpp"
#include "paramine/text.hpp"

namespace paramine::mine {

using corpus::Sequence;

enum class MarginMode { mean, max };
enum class Mode { paraphrase, simplification };

struct MiningConfig {
  double dist_max = 0.05;
  double margin_max = 0.6;
  std::size_t top_k = 8;
  double lev_min = 0.20;
  MarginMode margin_mode = MarginMode::mean;
  Mode mode = Mode::paraphrase;
  std::size_t nprobe = 16;
  bool dedupe = true;  // paraphrase mode: keep one direction of each pair

  void validate() const {
    if (!(dist_max > 0) || !(margin_max > 0)) throw InvalidArgument("dist_max and margin_max must be positive");
    if (top_k == 0) throw InvalidArgument("top_k must be >= 1");
    if (nprobe == 0) throw InvalidArgument("nprobe must be >= 1");
    if (lev_min < 0 || lev_min > 1) throw InvalidArgument("lev_min must be in [0, 1]");
  }
};

struct Candidate {
  Sequence sequence;
  double distance = 0.0;
};

struct CandidateSet {
  Sequence query;
  std::vector<Candidate> candidates;  // ascending distance
};

struct ParaphrasePair {
  Sequence query;
  Sequence candidate;
  double distance = 0.0;
  double margin = 0.0;
};

// Keeps candidates closer than dist_max whose distance relative to the
// candidate set's mean (or max) distance is below margin_max.
inline std::vector<ParaphrasePair> margin_filter(const CandidateSet& set, const MiningConfig& cfg) {
  if (set.candidates.empty()) throw InvalidArgument("empty candidate set");
  double denom = 0.0;
  for (const auto& c : set.candidates) {
    if (cfg.margin_mode == MarginMode::mean)
      denom += c.distance;
    else
      denom = std::max(denom, c.distance);
  }
  if (cfg.margin_mode == MarginMode::mean) denom /= static_cast<double>(set.candidates.size());
  std::vector<ParaphrasePair> out;
  for (const auto& c : set.candidates) {
    const double margin = denom > 0 ? c.distance / denom : 0.0;
    if (c.distance < cfg.dist_max && margin < cfg.margin_max) out.push_back({set.query, c.sequence, c.distance, margin});
  }
  return out;
}

inline bool levenshtein_distinct(const ParaphrasePair& p, double lev_min) {
  return levenshtein::distance_ratio_ci(p.query.text, p.candidate.text) >= lev_min;
}

// Drops containment (case-insensitive) and any pair drawn from one document,
// which covers overlapping windows.
inline bool structurally_valid(const ParaphrasePair& p) {
  if (p.query.doc_id == p.candidate.doc_id) return false;
  const auto a = unicode::case_fold(p.query.text);
  const auto b = unicode::case_fold(p.candidate.text);
  if (a.find(b) != std::string::npos || b.find(a) != std::string::npos) return false;
  return true;
}

inline bool sequence_ranges_overlap(const Sequence& a, const Sequence& b) {
  return a.doc_id == b.doc_id && a.sent_start <= b.sent_end && b.sent_start <= a.sent_end;
}

// Sentence split, shorter text, or simpler vocabulary.
inline bool looks_simpler(const ParaphrasePair& p, const access::FrequencyTable* table) {
  const auto split = [](const std::string& t) { return corpus::split_sentences(t).size(); };
  if (split(p.candidate.text) > split(p.query.text)) return true;
  if (unicode::length(p.candidate.text) < unicode::length(p.query.text)) return true;
  if (table && access::word_freq_ratio(p.query.text, p.candidate.text, *table) < 1.0) return true;
  return false;
}

inline std::vector<ParaphrasePair> simplification_heuristics(const std::vector<ParaphrasePair>& pairs,
                                                             const access::FrequencyTable* table) {
  std::vector<ParaphrasePair> out;
  for (const auto& p : pairs)
    if (looks_simpler(p, table)) out.push_back(p);
  return out;
}

inline std::string decontamination_key(std::string_view s) {
  return unicode::case_fold(text::normalize_whitespace(s));
}

class Decontaminator {
 public:
  Decontaminator() = default;
  explicit Decontaminator(const std::vector<std::vector<std::string>>& eval_sets) {
    for (const auto& set : eval_sets)
      for (const auto& s : set) add(s);
  }

  void add(std::string_view sentence) { keys_.insert(decontamination_key(sentence)); }
  bool contaminated(std::string_view text) const { return keys_.count(decontamination_key(text)) > 0; }
  bool contaminated(const ParaphrasePair& p) const { return contaminated(p.query.text) || contaminated(p.candidate.text); }
  std::size_t size() const { return keys_.size(); }

 private:
  std::unordered_set<std::string> keys_;
};

inline std::vector<ParaphrasePair> decontaminate(const std::vector<ParaphrasePair>& pairs,
                                                 const Decontaminator& eval) {
  std::vector<ParaphrasePair> out;
  for (const auto& p : pairs)
    if (!eval.contaminated(p)) out.push_back(p);
  return out;
}

struct MiningStats {
  std::size_t queries = 0;
  std::size_t after_margin = 0;
  std::size_t after_structural = 0;
  std::size_t after_heuristics = 0;    // simplification mode
  std::size_t after_distinctness = 0;  // paraphrase mode
  std::size_t after_decontamination = 0;
  std::size_t output = 0;
};

struct MiningInputs {
  const std::vector<Sequence>* sequences = nullptr;  // looked up by seq_id
  const embed::EmbeddingStore* queries = nullptr;    // f32 rows, ids = seq_ids, row r = index id r
  const index::IvfIndex* index = nullptr;
  const access::FrequencyTable* freq = nullptr;      // simplification mode (optional)
  const Decontaminator* eval = nullptr;              // optional
};

// Full pipeline: search, margin, then structural + distinctness filters
// (paraphrase mode) or simplicity rules + structural filters (simplification
// mode), decontamination, symmetric dedupe. Output is in
// query-row order regardless of thread count.
inline std::vector<ParaphrasePair> mine_pairs(const MiningInputs& in, const MiningConfig& cfg, unsigned threads = 1,
                                              MiningStats* stats = nullptr) {
  cfg.validate();
  if (!in.sequences || !in.queries || !in.index) throw InvalidArgument("mining needs sequences, embeddings and an index");
  const auto& store = *in.queries;
  if (store.dtype != embed::Dtype::f32) throw InvalidArgument("query embeddings must be f32");
  if (store.size() != in.index->size()) throw InvalidArgument("index and embedding store sizes differ");
  std::unordered_map<std::string, const Sequence*> by_id;
  for (const auto& s : *in.sequences) by_id.emplace(s.seq_id, &s);
  std::vector<const Sequence*> row_seq(store.size());
  for (std::size_t r = 0; r < store.size(); ++r) {
    auto it = by_id.find(store.ids[r]);
    if (it == by_id.end()) throw InvalidArgument("embedding id without a sequence: " + store.ids[r]);
    row_seq[r] = it->second;
  }

  index::SearchParams params{cfg.top_k + 1, std::min(cfg.nprobe, in.index->cell_count())};
  struct Local {
    std::vector<ParaphrasePair> pairs;
    MiningStats stats;
  };
  std::vector<Local> per_query(store.size());
  parallel_for(store.size(), threads, [&](std::size_t r) {
    auto& local = per_query[r];
    local.stats.queries = 1;
    auto hits = in.index->search(store.vectors.row(r), params);
    CandidateSet set{*row_seq[r], {}};
    for (const auto& h : hits) {
      if (h.id == r || set.candidates.size() == cfg.top_k) continue;
      set.candidates.push_back({*row_seq[h.id], h.distance});
    }
    if (set.candidates.empty()) return;
    auto pairs = margin_filter(set, cfg);
    local.stats.after_margin = pairs.size();
    if (cfg.mode == Mode::paraphrase) {
      std::erase_if(pairs, [](const auto& p) { return !structurally_valid(p); });
      local.stats.after_structural = pairs.size();
      std::erase_if(pairs, [&](const auto& p) { return !levenshtein_distinct(p, cfg.lev_min); });
      local.stats.after_distinctness = pairs.size();
    } else {
      // No distinctness constraint; the simplicity rules run first.
      pairs = simplification_heuristics(pairs, in.freq);
      local.stats.after_heuristics = pairs.size();
      std::erase_if(pairs, [](const auto& p) { return !structurally_valid(p); });
      local.stats.after_structural = pairs.size();
    }
    if (in.eval) pairs = decontaminate(pairs, *in.eval);
    local.stats.after_decontamination = pairs.size();
    local.pairs = std::move(pairs);
  });

  std::vector<ParaphrasePair> out;
  MiningStats total;
  std::set<std::pair<std::string, std::string>> seen;
  for (auto& local : per_query) {
    total.queries += local.stats.queries;
    total.after_margin += local.stats.after_margin;
    total.after_structural += local.stats.after_structural;
    total.after_heuristics += local.stats.after_heuristics;
    total.after_distinctness += local.stats.after_distinctness;
    total.after_decontamination += local.stats.after_decontamination;
    for (auto& p : local.pairs) {
      if (cfg.mode == Mode::paraphrase && cfg.dedupe) {
        auto key = std::minmax(p.query.seq_id, p.candidate.seq_id);
        if (!seen.emplace(key.first, key.second).second) continue;
      }
      out.push_back(std::move(p));
    }
  }
  total.output = out.size();
  if (stats) *stats = total;
  return out;
}

// --- corpus statistics ------------------------------------------------------

struct Histogram {
  static constexpr double kWidth = 0.05;
  static constexpr double kUpper = 2.0;
  std::vector<std::size_t> counts = std::vector<std::size_t>(40, 0);
  std::size_t overflow = 0;  // values >= 2.0
  std::size_t total = 0;

  void add(double v) {
    ++total;
    if (!(v < kUpper)) {
      ++overflow;
      return;
    }
    auto bin = static_cast<std::size_t>(std::floor(std::max(v, 0.0) / kWidth));
    counts[std::min(bin, counts.size() - 1)] += 1;
  }

  nlohmann::json to_json() const {
    std::vector<double> density;
    for (auto c : counts)
      density.push_back(total ? static_cast<double>(c) / (static_cast<double>(total) * kWidth) : 0.0);
    return {{"bin_width", kWidth}, {"range", {0.0, kUpper}}, {"counts", counts}, {"density", density},
            {"overflow", overflow}, {"total", total}};
  }
};

struct CorpusStats {
  std::size_t pairs = 0;
  double mean_query_tokens = 0.0;
  double mean_candidate_tokens = 0.0;
  Histogram compression;
  Histogram levsim;
  std::optional<Histogram> wordrank;

  nlohmann::json to_json() const {
    nlohmann::json j = {{"pairs", pairs},
                        {"mean_query_tokens", mean_query_tokens},
                        {"mean_candidate_tokens", mean_candidate_tokens},
                        {"compression_ratio", compression.to_json()},
                        {"replace_only_levsim", levsim.to_json()}};
    if (wordrank) j["wordrank_ratio"] = wordrank->to_json();
    return j;
  }
};

inline CorpusStats corpus_stats(const std::vector<access::TextPair>& pairs, const access::FrequencyTable* table) {
  CorpusStats s;
  s.pairs = pairs.size();
  if (table) s.wordrank.emplace();
  double q = 0, c = 0;
  for (const auto& p : pairs) {
    q += static_cast<double>(lm::tokenize(p.source).size());
    c += static_cast<double>(lm::tokenize(p.target).size());
    if (unicode::length(p.source) > 0) s.compression.add(access::char_ratio(p.source, p.target));
    s.levsim.add(access::replace_only_levsim(p.source, p.target));
    if (table) s.wordrank->add(access::word_freq_ratio(p.source, p.target, *table));
  }
  if (!pairs.empty()) {
    s.mean_query_tokens = q / static_cast<double>(pairs.size());
    s.mean_candidate_tokens = c / static_cast<double>(pairs.size());
  }
  return s;
}

// --- I/O ------------------------------------------------------------------

inline void write_pairs(std::ostream& out, const std::vector<ParaphrasePair>& pairs) {
  out << "query_id\tcandidate_id\tquery_text\tcandidate_text\tdistance\tmargin\n";
  out << std::fixed << std::setprecision(6);
  for (const auto& p : pairs)
    out << text::tsv_escape(p.query.seq_id) << '\t' << text::tsv_escape(p.candidate.seq_id) << '\t'
        << text::tsv_escape(p.query.text) << '\t' << text::tsv_escape(p.candidate.text) << '\t' << p.distance << '\t'
        << p.margin << '\n';
}

inline void write_pairs(const std::string& path, const std::vector<ParaphrasePair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_pairs(out, pairs);
}

struct PairRow {
  std::string query_id;
  std::string candidate_id;
  std::string query_text;
  std::string candidate_text;
  double distance = 0;
  double margin = 0;
};

inline std::vector<PairRow> read_pairs(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  std::vector<PairRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("query_id\t", 0) == 0)) continue;
    auto cells = text::split_tabs(line);
    if (cells.size() != 6) throw ParseError("pair rows need 6 columns", lineno);
    PairRow r;
    r.query_id = text::tsv_unescape(cells[0]);
    r.candidate_id = text::tsv_unescape(cells[1]);
    r.query_text = text::tsv_unescape(cells[2]);
    r.candidate_text = text::tsv_unescape(cells[3]);
    try {
      r.distance = std::stod(cells[4]);
      r.margin = std::stod(cells[5]);
    } catch (const std::logic_error&) {
      throw ParseError("bad distance or margin", lineno);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// Flat key=value file; '#' starts a comment. Unknown keys are rejected.
inline MiningConfig parse_mining_config(std::istream& in, MiningConfig cfg = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto t = text::trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key=value", lineno);
    const std::string key(text::trim(t.substr(0, eq)));
    const std::string value(text::trim(t.substr(eq + 1)));
    try {
      if (key == "dist_max") cfg.dist_max = std::stod(value);
      else if (key == "margin_max") cfg.margin_max = std::stod(value);
      else if (key == "top_k") cfg.top_k = std::stoul(value);
      else if (key == "lev_min") cfg.lev_min = std::stod(value);
      else if (key == "nprobe") cfg.nprobe = std::stoul(value);
      else if (key == "margin_mode") {
        if (value == "mean") cfg.margin_mode = MarginMode::mean;
        else if (value == "max") cfg.margin_mode = MarginMode::max;
        else throw ParseError("margin_mode must be mean or max", lineno);
      } else if (key == "mode") {
        if (value == "paraphrase") cfg.mode = Mode::paraphrase;
        else if (value == "simplification") cfg.mode = Mode::simplification;
        else throw ParseError("mode must be paraphrase or simplification", lineno);
      } else if (key == "dedupe") cfg.dedupe = value == "true" || value == "1";
      else throw ParseError("unknown mining config key " + key, lineno);
    } catch (const std::logic_error&) {
      throw ParseError("bad value for " + key, lineno);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace paramine::mine
