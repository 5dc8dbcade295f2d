#pragma once

// Control-value selection: a (1+1) evolution strategy over the four ACCESS
// controls, plus the model-client side of the JSON-lines simplifier protocol.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "paramine/access.hpp"
#include "paramine/error.hpp"
#include "paramine/eval.hpp"
#include "paramine/process.hpp"
#include "paramine/text.hpp"
#include "paramine/unicode.hpp"

namespace paramine::tune {

inline constexpr std::size_t kDims = 4;
using Point = std::array<double, kDims>;

struct SearchSpace {
  double lower = 0.2;
  double upper = 1.5;

  void validate() const {
    if (!(lower < upper)) throw InvalidArgument("search space needs lower < upper");
  }
  double range() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
  Point clamp(Point p) const {
    for (auto& x : p) x = std::clamp(x, lower, upper);
    return p;
  }
};

struct OnePlusOneState {
  Point current{};
  double value = -std::numeric_limits<double>::infinity();
  double sigma = 0;
  std::size_t evaluations = 0;
  std::uint64_t seed = 0;
};

struct Evaluation {
  Point point{};
  double value = 0;
  bool accepted = false;
};

struct TuneResult {
  Point best{};
  double best_value = -std::numeric_limits<double>::infinity();
  OnePlusOneState final_state;
  std::vector<Evaluation> history;
};

using Objective = std::function<double(const Point&)>;

inline TuneResult one_plus_one(const Objective& objective, const SearchSpace& space = {}, std::size_t budget = 64,
                               std::uint64_t seed = 0) {
  space.validate();
  if (budget < 1) throw InvalidArgument("budget must be at least 1");
  auto eval = [&](const Point& p) {
    const double v = objective(p);
    return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
  };
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  OnePlusOneState st;
  st.seed = seed;
  st.current.fill(space.midpoint());
  st.sigma = 0.3 * space.range();
  st.value = eval(st.current);
  st.evaluations = 1;

  TuneResult res;
  res.history.push_back({st.current, st.value, true});
  res.best = st.current;
  res.best_value = st.value;
  while (st.evaluations < budget) {
    Point child = st.current;
    for (auto& x : child) x += st.sigma * gauss(rng);
    child = space.clamp(child);
    const double v = eval(child);
    ++st.evaluations;
    const bool accept = v >= st.value;
    if (accept) {
      st.current = child;
      st.value = v;
      st.sigma *= 1.5;
    } else {
      st.sigma *= 0.84;
    }
    st.sigma = std::clamp(st.sigma, 1e-3, space.range());
    res.history.push_back({child, v, accept});
    if (v > res.best_value) {
      res.best = child;
      res.best_value = v;
    }
  }
  res.final_state = st;
  return res;
}

inline access::ControlValues to_controls(const Point& p) { return {p[0], p[1], p[2], p[3]}; }

// --- model clients -------------------------------------------------------------

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  // One simplification per source, aligned.
  virtual std::vector<std::string> simplify(const std::vector<std::string>& sources) = 0;
};

// A child process speaking the JSON-lines protocol:
//   > {"id": "...", "source": "..."}
//   < {"id": "...", "simplification": "..."}
class ProcessModelClient : public ModelClient {
 public:
  explicit ProcessModelClient(std::vector<std::string> argv) : proc_(std::move(argv)) {}

  std::vector<std::string> simplify(const std::vector<std::string>& sources) override {
    std::vector<nlohmann::json> reqs;
    reqs.reserve(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i)
      reqs.push_back({{"id", std::to_string(i)}, {"source", sources[i]}});
    auto responses = proc_.exchange(reqs);
    std::vector<std::string> out(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const auto& r = responses.at(std::to_string(i));
      if (!r.contains("simplification") || !r["simplification"].is_string())
        throw ProtocolError("response " + std::to_string(i) + " has no simplification string", proc_.transcript());
      out[i] = r["simplification"].get<std::string>();
    }
    return out;
  }

  const std::string& transcript() const { return proc_.transcript(); }

 private:
  process::JsonLinesProcess proc_;
};

// Rule-based stand-in for a trained model. Reads the NumChars and WordFreq
// tokens: words listed in the synonym table are swapped for their simpler
// form when their frequency rank is above a cutoff scaled by WordFreq, then
// the text is cut to NumChars times the source length (whole words, at least
// one). LevSim and DepTreeDepth are ignored.
class ToySimplifier : public ModelClient {
 public:
  ToySimplifier() = default;
  ToySimplifier(std::map<std::string, std::string> synonyms, const access::FrequencyTable* table = nullptr,
                double rank_cutoff = 1000)
      : synonyms_(std::move(synonyms)), table_(table), rank_cutoff_(rank_cutoff) {}

  std::string simplify_one(std::string_view line) const {
    const auto parsed = access::strip_tokens(line);
    const auto& c = parsed.controls;
    auto words = text::split_whitespace(parsed.text);
    for (auto& w : words) {
      const auto key = unicode::to_lower(w);
      auto it = synonyms_.find(key);
      if (it == synonyms_.end()) continue;
      const bool swap = table_ ? static_cast<double>(table_->rank(key)) > c.word_freq * rank_cutoff_
                               : c.word_freq < 1.0;
      if (swap) w = it->second;
    }
    const double budget = c.num_chars * static_cast<double>(unicode::length(parsed.text));
    std::vector<std::string> kept;
    double len = 0;
    for (const auto& w : words) {
      const double add = static_cast<double>(unicode::length(w)) + (kept.empty() ? 0 : 1);
      if (!kept.empty() && len + add > budget + 1e-9) break;
      kept.push_back(w);
      len += add;
    }
    return text::join(kept);
  }

  std::vector<std::string> simplify(const std::vector<std::string>& sources) override {
    std::vector<std::string> out;
    out.reserve(sources.size());
    for (const auto& s : sources) out.push_back(simplify_one(s));
    return out;
  }

 private:
  std::map<std::string, std::string> synonyms_;
  const access::FrequencyTable* table_ = nullptr;
  double rank_cutoff_ = 1000;
};

// Echo server: returns the source with control tokens removed.
class EchoSimplifier : public ModelClient {
 public:
  std::vector<std::string> simplify(const std::vector<std::string>& sources) override {
    std::vector<std::string> out;
    for (const auto& s : sources) out.push_back(access::strip_tokens(s).text);
    return out;
  }
};

// Tab-separated "complex<TAB>simple" lines.
inline std::map<std::string, std::string> read_synonyms(const std::string& path) {
  std::map<std::string, std::string> out;
  std::size_t n = 0;
  for (const auto& line : text::read_lines(path)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    const auto f = text::split_tabs(line);
    if (f.size() != 2) throw ParseError("expected complex<TAB>simple", n);
    out[unicode::to_lower(f[0])] = f[1];
  }
  return out;
}

// --- control tuning ------------------------------------------------------------

struct ControlTuneResult {
  access::ControlValues controls;
  double sari = 0;
  double midpoint_sari = 0;
  TuneResult search;
};

// Maximizes corpus SARI of the model's outputs over the validation set, with
// every source prefixed by the tokens of the candidate point.
inline ControlTuneResult tune_controls(ModelClient& model, const eval::EvalCorpus& valid, std::size_t budget = 64,
                                       std::uint64_t seed = 0, const SearchSpace& space = {},
                                       const eval::SariOptions& opt = {}) {
  valid.validate();
  if (valid.sources.empty()) throw InvalidArgument("empty validation corpus");
  auto objective = [&](const Point& p) {
    const auto controls = to_controls(p);
    std::vector<std::string> inputs;
    inputs.reserve(valid.sources.size());
    for (const auto& s : valid.sources) inputs.push_back(access::prepend_inference_tokens(s, controls));
    const auto outputs = model.simplify(inputs);
    if (outputs.size() != inputs.size()) throw ProtocolError("model returned the wrong number of outputs", "");
    return eval::sari(valid.sources, outputs, valid.references, opt).sari;
  };
  ControlTuneResult r;
  r.search = one_plus_one(objective, space, budget, seed);
  r.controls = to_controls(r.search.best);
  r.sari = r.search.best_value;
  r.midpoint_sari = r.search.history.front().value;
  return r;
}

inline double mean_char_length(const std::vector<std::string>& lines) {
  if (lines.empty()) throw InvalidArgument("empty sample");
  double total = 0;
  for (const auto& l : lines) total += static_cast<double>(unicode::length(l));
  return total / static_cast<double>(lines.size());
}

// All four controls set to the ratio of mean character lengths, rounded to 0.05.
inline access::ControlValues prior_knowledge_controls(const std::vector<std::string>& sample_sources,
                                                      const std::vector<std::string>& sample_simple) {
  const double src = mean_char_length(sample_sources);
  if (src == 0) throw InvalidArgument("source sample has zero mean length");
  const double ratio = mean_char_length(sample_simple) / src;
  return access::ControlValues::uniform(static_cast<double>(std::llround(ratio * 20.0)) / 20.0);
}

}  // namespace paramine::tune
