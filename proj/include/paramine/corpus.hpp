#pragma once

// Documents -> sentences -> windows of adjacent sentences ("sequences"), plus
// the noise filters applied before mining.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "paramine/error.hpp"
#include "paramine/lm.hpp"
#include "paramine/text.hpp"
#include "paramine/unicode.hpp"

namespace paramine::corpus {

struct Document {
  std::string doc_id;
  std::string text;
};

struct Sentence {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
};

struct Sequence {
  std::string seq_id;
  std::string doc_id;
  std::size_t sent_start = 0;
  std::size_t sent_end = 0;  // inclusive
  std::string text;
  std::size_t char_len = 0;

  std::size_t sentence_count() const { return sent_end - sent_start + 1; }
  bool operator==(const Sequence&) const = default;
};

inline std::string make_seq_id(std::string_view doc_id, std::size_t start, std::size_t end) {
  return std::string(doc_id) + ":" + std::to_string(start) + "-" + std::to_string(end);
}

// Splits text into sentences. Pluggable so an external tokenizer can stand in.
class SentenceSplitter {
 public:
  virtual ~SentenceSplitter() = default;
  virtual std::vector<std::string> split(std::string_view text) const = 0;
};

inline const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> kList = {
      "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "Mt.", "Ft.", "Gen.", "Gov.",
      "Lt.", "Col.", "Capt.", "Sgt.", "Rev.", "Hon.", "vs.", "etc.", "e.g.", "i.e.", "cf.",
      "al.", "Inc.", "Ltd.", "Co.", "Corp.", "No.", "Nos.", "Vol.", "pp.", "approx.", "Jan.",
      "Feb.", "Mar.", "Apr.", "Jun.", "Jul.", "Aug.", "Sep.", "Sept.", "Oct.", "Nov.", "Dec.",
      "U.S.", "U.K.", "a.m.", "p.m."};
  return kList;
}

// Boundary after a run of . ! ? optionally followed by closing quotes or
// brackets, when whitespace or the end of text follows, unless the word that
// ends in the period is a listed abbreviation.
class RuleSentenceSplitter : public SentenceSplitter {
 public:
  RuleSentenceSplitter() : abbreviations_(default_abbreviations().begin(), default_abbreviations().end()) {}
  explicit RuleSentenceSplitter(std::vector<std::string> abbreviations)
      : abbreviations_(abbreviations.begin(), abbreviations.end()) {}

  std::vector<std::string> split(std::string_view text) const override {
    const std::u32string s = unicode::decode(text);
    std::vector<std::string> out;
    std::size_t start = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t end) {
      auto sentence = text::normalize_whitespace(unicode::encode(std::u32string_view(s).substr(start, end - start)));
      if (!sentence.empty()) out.push_back(std::move(sentence));
      start = end;
    };
    while (i < s.size()) {
      if (!is_terminal(s[i])) {
        ++i;
        continue;
      }
      const std::size_t punct_begin = i;
      while (i < s.size() && is_terminal(s[i])) ++i;
      while (i < s.size() && is_closing(s[i])) ++i;
      if (i < s.size() && !unicode::is_space(s[i])) continue;
      if (s[punct_begin] == U'.' && is_abbreviation(s, punct_begin)) continue;
      emit(i);
    }
    emit(s.size());
    return out;
  }

 private:
  static bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

  static bool is_closing(char32_t c) {
    switch (c) {
      case U'"': case U'\'': case U')': case U']': case U'}':
      case U'”': case U'’': case U'»': case U'›':
        return true;
      default:
        return false;
    }
  }

  // The whitespace-delimited word ending at the terminal run starting at `dot`.
  bool is_abbreviation(const std::u32string& s, std::size_t dot) const {
    std::size_t b = dot;
    while (b > 0 && !unicode::is_space(s[b - 1])) --b;
    std::size_t e = dot;
    while (e < s.size() && s[e] == U'.') ++e;
    if (e - dot != 1) return false;
    auto word = unicode::encode(std::u32string_view(s).substr(b, e - b));
    while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) word.erase(0, 1);
    return abbreviations_.count(word) > 0;
  }

  std::set<std::string> abbreviations_;
};

inline std::vector<Sentence> split_sentences(const Document& doc, const SentenceSplitter& splitter) {
  std::vector<Sentence> out;
  for (auto& t : splitter.split(doc.text)) out.push_back({doc.doc_id, out.size(), std::move(t)});
  return out;
}

inline std::vector<Sentence> split_sentences(std::string_view text) {
  return split_sentences(Document{"", std::string(text)}, RuleSentenceSplitter{});
}

// Every contiguous window of sentences whose single-space join is at most
// max_chars long, ordered by start then end. Sentences longer than max_chars
// are dropped and no window crosses them.
inline std::vector<Sequence> extract_sequences(const std::vector<Sentence>& sentences, std::size_t max_chars = 300) {
  if (max_chars < 1) throw InvalidArgument("max_chars must be >= 1");
  std::vector<std::size_t> lens;
  lens.reserve(sentences.size());
  for (const auto& s : sentences) lens.push_back(unicode::length(s.text));
  std::vector<Sequence> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (lens[i] > max_chars) continue;
    std::size_t len = 0;
    std::string joined;
    for (std::size_t j = i; j < sentences.size(); ++j) {
      len += lens[j] + (j > i ? 1 : 0);
      if (lens[j] > max_chars || len > max_chars) break;
      if (j > i) joined += ' ';
      joined += sentences[j].text;
      const auto& doc_id = sentences[i].doc_id;
      const auto start = sentences[i].index;
      const auto end = sentences[j].index;
      out.push_back({make_seq_id(doc_id, start, end), doc_id, start, end, joined, len});
    }
  }
  return out;
}

inline std::vector<Sequence> extract_sequences(const Document& doc, std::size_t max_chars = 300,
                                               const SentenceSplitter& splitter = RuleSentenceSplitter{}) {
  return extract_sequences(split_sentences(doc, splitter), max_chars);
}

// Unicode punctuation characters over non-whitespace characters.
inline double punctuation_ratio(std::string_view text) {
  std::size_t punct = 0, visible = 0;
  for (char32_t c : unicode::decode(text)) {
    if (unicode::is_space(c)) continue;
    ++visible;
    if (unicode::is_punct(c)) ++punct;
  }
  return visible == 0 ? 0.0 : static_cast<double>(punct) / static_cast<double>(visible);
}

inline double punctuation_ratio(const Sequence& seq) { return punctuation_ratio(seq.text); }

struct FilterConfig {
  double punct_max = 0.10;
  double logprob_min = -std::numeric_limits<double>::infinity();
};

inline bool keep_sequence(const Sequence& seq, const lm::KneserNeyModel& lm, const FilterConfig& cfg) {
  if (punctuation_ratio(seq) > cfg.punct_max) return false;
  return lm.score(seq.text) >= cfg.logprob_min;
}

inline std::vector<Sequence> filter_sequences(const std::vector<Sequence>& seqs, const lm::KneserNeyModel& lm,
                                              const FilterConfig& cfg) {
  if (lm.order() < 1) throw InvalidArgument("language model is not trained");
  std::vector<Sequence> out;
  for (const auto& s : seqs)
    if (keep_sequence(s, lm, cfg)) out.push_back(s);
  return out;
}

// --- I/O -------------------------------------------------------------------

// Newline-delimited JSON documents with "doc_id" and "text".
inline std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!j.is_object() || !j.contains("doc_id") || !j.contains("text") || !j["text"].is_string())
      throw ParseError("document needs string fields doc_id and text", lineno);
    Document d;
    d.doc_id = j["doc_id"].is_string() ? j["doc_id"].get<std::string>() : j["doc_id"].dump();
    d.text = j["text"].get<std::string>();
    if (d.doc_id.empty()) throw ParseError("empty doc_id", lineno);
    if (!seen.insert(d.doc_id).second) throw ParseError("duplicate doc_id " + d.doc_id, lineno);
    docs.push_back(std::move(d));
  }
  return docs;
}

inline std::vector<Document> read_documents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_documents(in);
}

inline void write_sequences(std::ostream& out, const std::vector<Sequence>& seqs) {
  out << "seq_id\tdoc_id\tsent_start\tsent_end\ttext\n";
  for (const auto& s : seqs)
    out << text::tsv_escape(s.seq_id) << '\t' << text::tsv_escape(s.doc_id) << '\t' << s.sent_start << '\t'
        << s.sent_end << '\t' << text::tsv_escape(s.text) << '\n';
}

inline void write_sequences(const std::string& path, const std::vector<Sequence>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_sequences(out, seqs);
}

inline std::vector<Sequence> read_sequences(std::istream& in) {
  std::vector<Sequence> seqs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("seq_id\t", 0) == 0) continue;
    if (line.empty()) continue;
    auto cells = text::split_tabs(line);
    if (cells.size() != 5) throw ParseError("sequence rows need 5 columns", lineno);
    Sequence s;
    s.seq_id = text::tsv_unescape(cells[0]);
    s.doc_id = text::tsv_unescape(cells[1]);
    try {
      s.sent_start = std::stoul(cells[2]);
      s.sent_end = std::stoul(cells[3]);
    } catch (const std::logic_error&) {
      throw ParseError("bad sentence index", lineno);
    }
    if (s.sent_start > s.sent_end) throw ParseError("sent_start > sent_end", lineno);
    s.text = text::tsv_unescape(cells[4]);
    s.char_len = unicode::length(s.text);
    seqs.push_back(std::move(s));
  }
  return seqs;
}

inline std::vector<Sequence> read_sequences(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_sequences(in);
}

}  // namespace paramine::corpus
