#pragma once

// ACCESS control values (length, replace-only Levenshtein similarity, word
// frequency, dependency depth), their token rendering, and corpus
// preprocessing.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paramine/error.hpp"
#include "paramine/levenshtein.hpp"
#include "paramine/lm.hpp"
#include "paramine/process.hpp"
#include "paramine/text.hpp"
#include "paramine/unicode.hpp"

namespace paramine::access {

enum class Control { NumChars, LevSim, WordFreq, DepTreeDepth };

inline constexpr std::array<Control, 4> kControls = {Control::NumChars, Control::LevSim, Control::WordFreq,
                                                     Control::DepTreeDepth};

inline std::string_view control_name(Control c) {
  switch (c) {
    case Control::NumChars: return "NumChars";
    case Control::LevSim: return "LevSim";
    case Control::WordFreq: return "WordFreq";
    case Control::DepTreeDepth: return "DepTreeDepth";
  }
  return "";
}

struct ControlValues {
  double num_chars = 1.0;
  double lev_sim = 1.0;
  double word_freq = 1.0;
  double dep_tree_depth = 1.0;

  double get(Control c) const {
    switch (c) {
      case Control::NumChars: return num_chars;
      case Control::LevSim: return lev_sim;
      case Control::WordFreq: return word_freq;
      case Control::DepTreeDepth: return dep_tree_depth;
    }
    return 0;
  }

  void set(Control c, double v) {
    switch (c) {
      case Control::NumChars: num_chars = v; break;
      case Control::LevSim: lev_sim = v; break;
      case Control::WordFreq: word_freq = v; break;
      case Control::DepTreeDepth: dep_tree_depth = v; break;
    }
  }

  static ControlValues uniform(double v) { return {v, v, v, v}; }
  bool operator==(const ControlValues&) const = default;
};

inline constexpr double kTokenMin = 0.2;
inline constexpr double kTokenMax = 2.0;

// --- individual controls --------------------------------------------------

inline double char_ratio(std::string_view source, std::string_view target) {
  const auto src = unicode::length(source);
  if (src == 0) throw InvalidArgument("char_ratio needs a non-empty source");
  return static_cast<double>(unicode::length(target)) / static_cast<double>(src);
}

inline double replace_only_levsim(std::string_view source, std::string_view target) {
  return levenshtein::replace_only_similarity(source, target);
}

// word -> rank, 1 = most frequent.
class FrequencyTable {
 public:
  FrequencyTable() = default;
  explicit FrequencyTable(std::string source) : source_(std::move(source)) {}

  void add(std::string word, std::uint64_t rank) {
    if (rank == 0) throw InvalidArgument("ranks must be positive");
    if (!ranks_.emplace(std::move(word), rank).second) throw InvalidArgument("duplicate word in frequency table");
  }

  // Rank of a lowercased word; unseen words get size() + 1.
  std::uint64_t rank(const std::string& word) const {
    auto it = ranks_.find(word);
    return it == ranks_.end() ? ranks_.size() + 1 : it->second;
  }

  bool contains(const std::string& word) const { return ranks_.count(word) > 0; }
  std::size_t size() const { return ranks_.size(); }
  const std::string& source() const { return source_; }

  // Builds ranks from token counts in a corpus (ties broken alphabetically).
  static FrequencyTable from_corpus(const std::vector<std::string>& lines, std::string source = "corpus") {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& l : lines)
      for (auto& t : lm::tokenize(l))
        if (std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isalpha(c) || c >= 0x80; }))
          ++counts[t];
    std::vector<std::pair<std::string, std::uint64_t>> v(counts.begin(), counts.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    FrequencyTable t(std::move(source));
    for (std::size_t i = 0; i < v.size(); ++i) t.add(v[i].first, i + 1);
    return t;
  }

 private:
  std::string source_;
  std::unordered_map<std::string, std::uint64_t> ranks_;
};

// "word<TAB>rank" per line.
inline FrequencyTable read_frequency_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  FrequencyTable table(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = text::split_tabs(line);
    if (cells.size() != 2) throw ParseError("expected word<TAB>rank", lineno);
    std::uint64_t rank = 0;
    try {
      rank = std::stoull(cells[1]);
      table.add(unicode::to_lower(cells[0]), rank);
    } catch (const std::logic_error& e) {
      throw ParseError(std::string("bad frequency entry: ") + e.what(), lineno);
    }
  }
  return table;
}

inline void write_frequency_table(const std::string& path, const FrequencyTable& table,
                                  const std::vector<std::string>& words_in_rank_order) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& w : words_in_rank_order) out << w << '\t' << table.rank(w) << '\n';
}

inline const std::set<std::string>& stop_words() {
  static const std::set<std::string> kWords = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are", "as", "at",
      "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could",
      "did", "do", "does", "doing", "down", "during", "each", "few", "for", "from", "further", "had", "has",
      "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if",
      "in", "into", "is", "it", "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor",
      "not", "now", "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
      "over", "own", "s", "same", "she", "should", "so", "some", "such", "t", "than", "that", "the", "their",
      "theirs", "them", "themselves", "then", "there", "these", "they", "this", "those", "through", "to",
      "too", "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which", "while",
      "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself", "yourselves"};
  return kWords;
}

enum class FreqAggregation { quartile3, mean, max };

namespace detail {

inline bool is_number(const std::string& t) {
  bool digit = false;
  for (char32_t c : unicode::decode(t)) {
    if (unicode::is_digit(c)) {
      digit = true;
    } else if (c != U'.' && c != U',') {
      return false;
    }
  }
  return digit;
}

inline bool is_word(const std::string& t) {
  for (char32_t c : unicode::decode(t))
    if (unicode::is_alnum(c)) return true;
  return false;
}

// Linear-interpolated quantile of sorted values.
inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

// Aggregate of log(rank) over content words; falls back to all words when the
// text has only stop-words or numbers, and to 0 when it has no words at all.
inline double word_freq_aggregate(std::string_view text, const FrequencyTable& table,
                                  FreqAggregation agg = FreqAggregation::quartile3) {
  std::vector<std::string> words, content;
  for (auto& t : lm::tokenize(text)) {
    if (!detail::is_word(t)) continue;
    if (!stop_words().count(t) && !detail::is_number(t)) content.push_back(t);
    words.push_back(std::move(t));
  }
  const auto& used = content.empty() ? words : content;
  if (used.empty()) return 0.0;
  std::vector<double> logs;
  logs.reserve(used.size());
  for (const auto& w : used) logs.push_back(std::log(static_cast<double>(table.rank(w))));
  switch (agg) {
    case FreqAggregation::quartile3: return detail::quantile(std::move(logs), 0.75);
    case FreqAggregation::mean: {
      double s = 0;
      for (double x : logs) s += x;
      return s / static_cast<double>(logs.size());
    }
    case FreqAggregation::max: return *std::max_element(logs.begin(), logs.end());
  }
  return 0.0;
}

inline double word_freq_ratio(std::string_view source, std::string_view target, const FrequencyTable& table,
                              FreqAggregation agg = FreqAggregation::quartile3) {
  const double src = word_freq_aggregate(source, table, agg);
  const double tgt = word_freq_aggregate(target, table, agg);
  if (src == 0.0) return tgt == 0.0 ? 1.0 : kTokenMax;
  return tgt / src;
}

// Reports a syntactic tree depth for a sentence, or nothing on failure.
class DepthParser {
 public:
  virtual ~DepthParser() = default;
  virtual std::optional<int> depth(std::string_view text) = 0;
};

inline const std::vector<std::string>& default_subordinators() {
  static const std::vector<std::string> kList = {
      "after", "although", "as", "because", "before", "if", "once", "since", "though", "unless", "until",
      "when", "whenever", "where", "whereas", "wherever", "whether", "while", "who", "whom", "whose", "which",
      "that"};
  return kList;
}

// Nesting-depth estimate: starts at 1, each subordinating marker or opening
// bracket nests one level deeper, closing brackets pop a level, and ; : . ! ?
// return to the top level. Reports the deepest level reached.
class ProxyDepthParser : public DepthParser {
 public:
  ProxyDepthParser() : markers_(default_subordinators().begin(), default_subordinators().end()) {}
  explicit ProxyDepthParser(const std::vector<std::string>& markers) : markers_(markers.begin(), markers.end()) {}

  std::optional<int> depth(std::string_view text) override {
    const auto tokens = lm::tokenize(text);
    if (tokens.empty()) return std::nullopt;
    int cur = 1, best = 1;
    for (const auto& t : tokens) {
      if (markers_.count(t) || t == "(" || t == "[") {
        best = std::max(best, ++cur);
      } else if (t == ")" || t == "]") {
        cur = std::max(1, cur - 1);
      } else if (t == ";" || t == ":" || t == "." || t == "!" || t == "?") {
        cur = 1;
      }
    }
    return best;
  }

 private:
  std::set<std::string> markers_;
};

// Depths from an external parser process: request {"id", "text"}, response
// {"id", "depth"}. Results are cached per text.
class ExternalDepthParser : public DepthParser {
 public:
  explicit ExternalDepthParser(std::vector<std::string> argv, std::ostream* warn = &std::cerr)
      : proc_(std::move(argv)), warn_(warn) {}

  std::optional<int> depth(std::string_view text) override {
    std::string key(text);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::optional<int> result;
    try {
      auto resp = proc_.exchange({{{"id", std::to_string(next_id_++)}, {"text", key}}});
      const auto& j = resp.begin()->second;
      if (j.contains("depth") && j["depth"].is_number_integer()) result = j["depth"].get<int>();
    } catch (const ProtocolError& e) {
      if (warn_) *warn_ << "warning: dependency parser failed: " << e.what() << '\n';
    }
    cache_[key] = result;
    return result;
  }

 private:
  process::JsonLinesProcess proc_;
  std::ostream* warn_;
  std::uint64_t next_id_ = 0;
  std::map<std::string, std::optional<int>> cache_;
};

inline std::optional<double> dep_depth_ratio(std::string_view source, std::string_view target, DepthParser& parser) {
  if (text::trim(target).empty() || text::trim(source).empty()) return std::nullopt;
  const auto s = parser.depth(source);
  const auto t = parser.depth(target);
  if (!s || !t || *s <= 0) return std::nullopt;
  return static_cast<double>(*t) / static_cast<double>(*s);
}

// --- tokens ---------------------------------------------------------------

// Clamps to [0.2, 2.0], rounds to the nearest bin and renders an integer
// percentage: <NumChars_80%>.
inline std::string format_token(Control name, double value, double bin = 0.05) {
  if (!(bin > 0)) throw InvalidArgument("bin width must be positive");
  if (!std::isfinite(value)) value = 1.0;
  const double clamped = std::clamp(value, kTokenMin, kTokenMax);
  const double rounded = std::round(clamped / bin) * bin;
  const auto percent = static_cast<long>(std::llround(rounded * 100.0));
  return "<" + std::string(control_name(name)) + "_" + std::to_string(percent) + "%>";
}

inline std::string render_tokens(const ControlValues& v, double bin = 0.05) {
  std::string out;
  for (auto c : kControls) {
    if (!out.empty()) out += ' ';
    out += format_token(c, v.get(c), bin);
  }
  return out;
}

inline std::string prepend_inference_tokens(std::string_view source, const ControlValues& controls,
                                            double bin = 0.05) {
  return render_tokens(controls, bin) + " " + std::string(source);
}

struct ParsedSource {
  ControlValues controls;
  std::vector<Control> present;
  std::string text;
};

// Splits leading control tokens (each followed by one space) off a line.
inline ParsedSource strip_tokens(std::string_view line) {
  static const std::regex kToken(R"(^<(NumChars|LevSim|WordFreq|DepTreeDepth)_(\d+)%> )");
  ParsedSource out;
  std::string rest(line);
  std::smatch m;
  while (std::regex_search(rest, m, kToken)) {
    const auto name = m[1].str();
    Control c = Control::NumChars;
    for (auto k : kControls)
      if (control_name(k) == name) c = k;
    out.controls.set(c, std::stod(m[2].str()) / 100.0);
    out.present.push_back(c);
    rest.erase(0, static_cast<std::size_t>(m.length(0)));
  }
  out.text = std::move(rest);
  return out;
}

inline std::optional<ControlValues> compute_controls(std::string_view source, std::string_view target,
                                                     const FrequencyTable& table, DepthParser& parser,
                                                     FreqAggregation agg = FreqAggregation::quartile3) {
  if (unicode::length(source) == 0 || unicode::length(target) == 0) return std::nullopt;
  auto depth = dep_depth_ratio(source, target, parser);
  if (!depth) return std::nullopt;
  ControlValues v;
  v.num_chars = char_ratio(source, target);
  v.lev_sim = replace_only_levsim(source, target);
  v.word_freq = word_freq_ratio(source, target, table, agg);
  v.dep_tree_depth = *depth;
  return v;
}

struct TextPair {
  std::string source;
  std::string target;
};

struct PreprocessedCorpus {
  std::vector<std::string> sources;  // with tokens prepended
  std::vector<std::string> targets;
  std::size_t skipped = 0;
};

inline PreprocessedCorpus preprocess_corpus(const std::vector<TextPair>& pairs, const FrequencyTable& table,
                                            DepthParser& parser, double bin = 0.05,
                                            FreqAggregation agg = FreqAggregation::quartile3,
                                            std::ostream* warn = &std::cerr) {
  PreprocessedCorpus out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    auto controls = compute_controls(p.source, p.target, table, parser, agg);
    if (!controls) {
      ++out.skipped;
      if (warn) *warn << "warning: skipping pair " << i << ": controls undefined\n";
      continue;
    }
    out.sources.push_back(prepend_inference_tokens(p.source, *controls, bin));
    out.targets.push_back(p.target);
  }
  return out;
}

}  // namespace paramine::access
