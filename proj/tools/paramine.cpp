// paramine: command line front end for the mining / ACCESS / evaluation tools.
//
// Exit codes: 0 ok, 2 usage or validation error, 1 anything else.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "paramine/paramine.hpp"

using namespace paramine;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// What a subcommand touched, for the manifest.
struct Io {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

// Whitespace-separated words; double quotes group (no shell expansion).
std::vector<std::string> split_command(const std::string& cmd) {
  std::istringstream in(cmd);
  std::vector<std::string> argv;
  for (std::string w; in >> std::quoted(w);) argv.push_back(w);
  if (argv.empty()) throw InvalidArgument("empty model command");
  return argv;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> read_lines_or_stdin(const std::string& path) {
  if (path != "-") return text::read_lines(path);
  std::vector<std::string> lines;
  for (std::string l; std::getline(std::cin, l);) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
    lines.push_back(l);
  }
  return lines;
}

void write_lines_or_stdout(const std::string& path, const std::vector<std::string>& lines) {
  if (path.empty() || path == "-") {
    for (const auto& l : lines) std::cout << l << '\n';
    return;
  }
  text::write_lines(path, lines);
}

std::map<std::string, std::string> resolved_config(const CLI::App& sub) {
  std::map<std::string, std::string> cfg;
  for (const auto* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    cfg[name] = value;
  }
  return cfg;
}

struct ModelOptions {
  std::string command;
  bool toy = false;
  bool echo = false;
  std::string synonyms;
  std::string freq;
  double rank_cutoff = 1000;

  void add(CLI::App* sub) {
    sub->add_option("--model-command", command, "simplifier process speaking the JSON-lines protocol");
    sub->add_flag("--toy", toy, "use the built-in rule-based simplifier");
    sub->add_flag("--echo", echo, "use the echo simplifier (source without tokens)");
    sub->add_option("--synonyms", synonyms, "toy simplifier synonym table (complex<TAB>simple)")->check(CLI::ExistingFile);
    sub->add_option("--freq", freq, "frequency rank table (word<TAB>rank)")->check(CLI::ExistingFile);
    sub->add_option("--rank-cutoff", rank_cutoff, "toy simplifier rank cutoff at WordFreq 1.0");
  }

  bool any() const { return !command.empty() || toy || echo; }

  struct Built {
    std::unique_ptr<access::FrequencyTable> table;
    std::unique_ptr<tune::ModelClient> client;
  };

  Built build(Io& io) const {
    const int chosen = (!command.empty()) + toy + echo;
    if (chosen != 1) throw InvalidArgument("choose exactly one of --model-command, --toy, --echo");
    Built b;
    if (!command.empty()) {
      b.client = std::make_unique<tune::ProcessModelClient>(split_command(command));
    } else if (echo) {
      b.client = std::make_unique<tune::EchoSimplifier>();
    } else {
      std::map<std::string, std::string> syn;
      if (!synonyms.empty()) {
        syn = tune::read_synonyms(synonyms);
        io.inputs.push_back(synonyms);
      }
      if (!freq.empty()) {
        b.table = std::make_unique<access::FrequencyTable>(access::read_frequency_table(freq));
        io.inputs.push_back(freq);
      }
      b.client = std::make_unique<tune::ToySimplifier>(std::move(syn), b.table.get(), rank_cutoff);
    }
    return b;
  }
};

eval::SariOptions sari_options(const std::string& aggregation) {
  eval::SariOptions o;
  if (aggregation == "per-sample") o.aggregation = eval::SariAggregation::per_sample;
  return o;
}

eval::EvalCorpus load_corpus(const std::string& sources, const std::vector<std::string>& refs, Io& io) {
  io.inputs.push_back(sources);
  for (const auto& r : refs) io.inputs.push_back(r);
  return eval::read_eval_corpus(sources, refs);
}

std::string format_controls(const access::ControlValues& c) {
  std::ostringstream s;
  s << c.num_chars << ',' << c.lev_sim << ',' << c.word_freq << ',' << c.dep_tree_depth;
  return s.str();
}

json controls_json(const access::ControlValues& c) {
  return {{"NumChars", c.num_chars}, {"LevSim", c.lev_sim}, {"WordFreq", c.word_freq}, {"DepTreeDepth", c.dep_tree_depth}};
}

access::ControlValues controls_from_json(const json& j) {
  const auto& c = j.contains("controls") ? j["controls"] : j;
  return {c.at("NumChars").get<double>(), c.at("LevSim").get<double>(), c.at("WordFreq").get<double>(),
          c.at("DepTreeDepth").get<double>()};
}

int serve(bool echo, const std::string& synonyms, const std::string& freq, double rank_cutoff) {
  std::unique_ptr<access::FrequencyTable> table;
  if (!freq.empty()) table = std::make_unique<access::FrequencyTable>(access::read_frequency_table(freq));
  tune::ToySimplifier toy(synonyms.empty() ? std::map<std::string, std::string>{} : tune::read_synonyms(synonyms),
                          table.get(), rank_cutoff);
  for (std::string line; std::getline(std::cin, line);) {
    if (line.empty()) continue;
    json resp;
    try {
      const auto req = json::parse(line);
      if (!req.is_object() || !req.contains("id") || !req["id"].is_string())
        throw InvalidArgument("request needs a string id");
      const auto id = req["id"].get<std::string>();
      resp["id"] = id;
      if (!req.contains("source") || !req["source"].is_string()) throw InvalidArgument("request needs a string source");
      const auto src = req["source"].get<std::string>();
      resp["simplification"] = echo ? access::strip_tokens(src).text : toy.simplify_one(src);
    } catch (const std::exception& e) {
      json err{{"error", e.what()}};
      err["id"] = resp.contains("id") ? resp["id"] : json(nullptr);
      resp = err;
    }
    std::cout << resp.dump() << '\n' << std::flush;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paraphrase mining, ACCESS preprocessing and simplification evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(PARAMINE_VERSION));
  // Config files are TOML/INI with one [subcommand] section; flags win.
  auto* config_opt = app.set_config("--config", "", "TOML/INI file, one [subcommand] section of option defaults");
  app.allow_config_extras(CLI::config_extras_mode::error);

  Common common;
  std::map<CLI::App*, std::function<Io()>> actions;

  auto add = [&](const std::string& name, const std::string& help) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();  // --config belongs to the parent
    sub->add_option("--seed", common.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", common.threads, "worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));
    return sub;
  };

  // extract ------------------------------------------------------------------
  struct {
    std::string input, output, text_out;
    std::size_t max_chars = 300;
  } ex;
  {
    auto* s = add("extract", "split documents into sentences and enumerate sequences");
    s->add_option("--input", ex.input, "documents, one JSON object per line")->required()->check(CLI::ExistingFile);
    s->add_option("--output", ex.output, "sequences TSV")->required();
    s->add_option("--text-out", ex.text_out, "also write sequence texts one per line (for an embedder)");
    s->add_option("--max-chars", ex.max_chars, "maximum sequence length")->capture_default_str();
    actions[s] = [&] {
      const auto docs = corpus::read_documents(ex.input);
      std::vector<corpus::Sequence> seqs;
      for (const auto& d : docs) {
        auto part = corpus::extract_sequences(d, ex.max_chars);
        seqs.insert(seqs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      }
      corpus::write_sequences(ex.output, seqs);
      Io io{{ex.input}, {ex.output}};
      if (!ex.text_out.empty()) {
        std::vector<std::string> lines;
        for (const auto& q : seqs) lines.push_back(q.text);
        text::write_lines(ex.text_out, lines);
        io.outputs.push_back(ex.text_out);
      }
      std::cerr << "extract: " << docs.size() << " documents, " << seqs.size() << " sequences\n";
      return io;
    };
  }

  // train-lm -----------------------------------------------------------------
  struct {
    std::string input, output;
    int order = 3;
    bool sequences = false;
  } tl;
  {
    auto* s = add("train-lm", "train an interpolated Kneser-Ney model and write ARPA");
    s->add_option("--input", tl.input, "training text, one sentence per line")->required()->check(CLI::ExistingFile);
    s->add_option("--output", tl.output, "ARPA file")->required();
    s->add_option("--order", tl.order, "n-gram order")->capture_default_str()->check(CLI::Range(1, 10));
    s->add_flag("--sequences", tl.sequences, "input is a sequences TSV");
    actions[s] = [&] {
      std::vector<std::string> lines;
      if (tl.sequences) {
        for (const auto& q : corpus::read_sequences(tl.input)) lines.push_back(q.text);
      } else {
        lines = text::read_lines(tl.input);
      }
      const auto model = lm::train_kn(lm::count_ngrams_text(lines, tl.order));
      lm::write_arpa(model, tl.output);
      return Io{{tl.input}, {tl.output}};
    };
  }

  // filter -------------------------------------------------------------------
  struct {
    std::string input, lm, output, calibration;
    double punct_max = 0.10;
    double logprob_min = -std::numeric_limits<double>::infinity();
    double percentile = 10;
  } fl;
  {
    auto* s = add("filter", "drop noisy sequences by punctuation ratio and LM score");
    s->add_option("--input", fl.input, "sequences TSV")->required()->check(CLI::ExistingFile);
    s->add_option("--lm", fl.lm, "ARPA model")->required()->check(CLI::ExistingFile);
    s->add_option("--output", fl.output, "kept sequences TSV")->required();
    s->add_option("--punct-max", fl.punct_max, "maximum punctuation ratio")->capture_default_str();
    auto* lp = s->add_option("--logprob-min", fl.logprob_min, "minimum per-token log10 probability");
    s->add_option("--calibration", fl.calibration, "clean sample; threshold = its score percentile")
        ->check(CLI::ExistingFile)
        ->excludes(lp);
    s->add_option("--percentile", fl.percentile, "calibration percentile")->capture_default_str();
    actions[s] = [&] {
      Io io{{fl.input, fl.lm}, {fl.output}};
      const auto model = lm::read_arpa(fl.lm);
      corpus::FilterConfig cfg{fl.punct_max, fl.logprob_min};
      if (!fl.calibration.empty()) {
        cfg.logprob_min = lm::calibrate_threshold(model, text::read_lines(fl.calibration), fl.percentile);
        io.inputs.push_back(fl.calibration);
        std::cerr << "filter: calibrated logprob_min = " << cfg.logprob_min << '\n';
      }
      const auto in = corpus::read_sequences(fl.input);
      const auto kept = corpus::filter_sequences(in, model, cfg);
      corpus::write_sequences(fl.output, kept);
      std::cerr << "filter: kept " << kept.size() << " of " << in.size() << '\n';
      return io;
    };
  }

  // transform ----------------------------------------------------------------
  struct {
    std::string input, output, apply, save;
    std::size_t dim = 0;
    bool quantize = false, no_normalize = false, no_rotation = false;
  } tr;
  {
    auto* s = add("transform", "fit or apply PCA + random rotation (+ scalar quantization)");
    s->add_option("--input", tr.input, "embedding store (PMEB)")->required()->check(CLI::ExistingFile);
    s->add_option("--output", tr.output, "transformed store")->required();
    auto* ap = s->add_option("--transform", tr.apply, "apply a saved transform instead of fitting")->check(CLI::ExistingFile);
    s->add_option("--save-transform", tr.save, "write the fitted transform here")->excludes(ap);
    s->add_option("--dim", tr.dim, "output dimension (default: input dimension)")->excludes(ap);
    s->add_flag("--quantize", tr.quantize, "write 8-bit codes instead of f32");
    s->add_flag("--no-normalize", tr.no_normalize, "skip L2 normalization")->excludes(ap);
    s->add_flag("--no-rotation", tr.no_rotation, "identity rotation")->excludes(ap);
    actions[s] = [&] {
      Io io{{tr.input}, {tr.output}};
      const auto store = embed::read_store(tr.input);
      const auto m = store.to_f32();
      embed::Transform t;
      if (!tr.apply.empty()) {
        t = embed::read_transform(tr.apply);
        io.inputs.push_back(tr.apply);
      } else {
        const std::size_t d = tr.dim ? tr.dim : m.cols;
        t.pca = embed::fit_pca(m, d);
        t.rotation = tr.no_rotation ? embed::RandomRotation::identity(d) : embed::RandomRotation::generate(d, common.seed);
        t.normalize = !tr.no_normalize;
        if (!tr.save.empty()) {
          embed::write_transform(tr.save, t);
          io.outputs.push_back(tr.save);
        }
      }
      auto out = t.apply(m);
      if (tr.quantize) {
        auto q = embed::fit_quantizer(out);
        embed::write_store(tr.output, embed::EmbeddingStore::quantized(store.ids, out, std::move(q)));
      } else {
        embed::write_store(tr.output, embed::EmbeddingStore::from_f32(store.ids, std::move(out)));
      }
      return io;
    };
  }

  // build-index --------------------------------------------------------------
  struct {
    std::string input, output;
    index::BuildConfig cfg;
  } bi;
  {
    auto* s = add("build-index", "train an IVF index with 8-bit scalar quantization");
    s->add_option("--input", bi.input, "embedding store (PMEB)")->required()->check(CLI::ExistingFile);
    s->add_option("--output", bi.output, "index file (PMIX)")->required();
    s->add_option("--cells", bi.cfg.cells, "number of cells (0: one per 100 vectors)")->capture_default_str();
    s->add_option("--iters", bi.cfg.max_iters, "k-means iterations")->capture_default_str();
    s->add_option("--train-sample", bi.cfg.train_sample, "vectors used for training")->capture_default_str();
    actions[s] = [&] {
      bi.cfg.seed = common.seed;
      bi.cfg.threads = common.threads;
      const auto store = embed::read_store(bi.input);
      index::write_index(bi.output, index::build_index(store.to_f32(), bi.cfg));
      return Io{{bi.input}, {bi.output}};
    };
  }

  // mine ---------------------------------------------------------------------
  struct {
    std::string sequences, embeddings, index, output, freq, stats, mode = "paraphrase", margin_mode = "mean";
    std::vector<std::string> eval;
    bool line_ids = false, no_dedupe = false;
    mine::MiningConfig cfg;
  } mn;
  {
    auto* s = add("mine", "mine paraphrase (or simplification) pairs");
    s->add_option("--sequences", mn.sequences, "sequences TSV")->required()->check(CLI::ExistingFile);
    s->add_option("--embeddings", mn.embeddings, "f32 query embeddings, ids = seq_ids")->required()->check(CLI::ExistingFile);
    s->add_option("--index", mn.index, "index built from the same embeddings")->required()->check(CLI::ExistingFile);
    s->add_option("--output", mn.output, "pairs TSV")->required();
    s->add_option("--mode", mn.mode, "paraphrase | simplification")
        ->capture_default_str()
        ->check(CLI::IsMember({"paraphrase", "simplification"}));
    s->add_option("--margin-mode", mn.margin_mode, "mean | max")->capture_default_str()->check(CLI::IsMember({"mean", "max"}));
    s->add_option("--dist-max", mn.cfg.dist_max, "maximum L2 distance")->capture_default_str();
    s->add_option("--margin-max", mn.cfg.margin_max, "maximum margin ratio")->capture_default_str();
    s->add_option("--top-k", mn.cfg.top_k, "neighbours per query")->capture_default_str();
    s->add_option("--lev-min", mn.cfg.lev_min, "minimum case-insensitive edit ratio")->capture_default_str();
    s->add_option("--nprobe", mn.cfg.nprobe, "cells probed per query")->capture_default_str();
    s->add_option("--freq", mn.freq, "frequency table for the simplicity rules")->check(CLI::ExistingFile);
    s->add_option("--eval", mn.eval, "evaluation sentences to decontaminate against")->check(CLI::ExistingFile);
    s->add_option("--stats", mn.stats, "write per-stage counts as JSON");
    s->add_flag("--line-ids", mn.line_ids, "embedding ids are 1-based line numbers of the sequences file");
    s->add_flag("--no-dedupe", mn.no_dedupe, "keep both directions of each pair");
    actions[s] = [&] {
      Io io{{mn.sequences, mn.embeddings, mn.index}, {mn.output}};
      mn.cfg.mode = mn.mode == "simplification" ? mine::Mode::simplification : mine::Mode::paraphrase;
      mn.cfg.margin_mode = mn.margin_mode == "max" ? mine::MarginMode::max : mine::MarginMode::mean;
      mn.cfg.dedupe = !mn.no_dedupe;
      const auto seqs = corpus::read_sequences(mn.sequences);
      auto store = embed::read_store(mn.embeddings);
      if (store.dtype != embed::Dtype::f32) store = embed::EmbeddingStore::from_f32(store.ids, store.to_f32());
      if (mn.line_ids) {
        for (auto& id : store.ids) {
          const auto k = std::stoul(id);
          if (k < 1 || k > seqs.size()) throw InvalidArgument("line id out of range: " + id);
          id = seqs[k - 1].seq_id;
        }
      }
      const auto idx = index::read_index(mn.index);
      std::unique_ptr<access::FrequencyTable> table;
      if (!mn.freq.empty()) {
        table = std::make_unique<access::FrequencyTable>(access::read_frequency_table(mn.freq));
        io.inputs.push_back(mn.freq);
      }
      mine::Decontaminator decon;
      for (const auto& e : mn.eval) {
        for (const auto& l : text::read_lines(e)) decon.add(l);
        io.inputs.push_back(e);
      }
      mine::MiningInputs in{&seqs, &store, &idx, table.get(), mn.eval.empty() ? nullptr : &decon};
      mine::MiningStats st;
      const auto pairs = mine::mine_pairs(in, mn.cfg, common.threads, &st);
      mine::write_pairs(mn.output, pairs);
      const json sj{{"queries", st.queries},
                    {"after_margin", st.after_margin},
                    {"after_structural", st.after_structural},
                    {"after_heuristics", st.after_heuristics},
                    {"after_distinctness", st.after_distinctness},
                    {"after_decontamination", st.after_decontamination},
                    {"output", st.output}};
      std::cerr << "mine: " << sj.dump() << '\n';
      if (!mn.stats.empty()) {
        write_json(mn.stats, sj);
        io.outputs.push_back(mn.stats);
      }
      return io;
    };
  }

  // preprocess-access --------------------------------------------------------
  struct {
    std::string pairs, source, target, freq, out_source, out_target, parser_command;
    double bin = 0.05;
  } pa;
  {
    auto* s = add("preprocess-access", "prepend ACCESS control tokens to training pairs");
    auto* p = s->add_option("--pairs", pa.pairs, "mined pairs TSV")->check(CLI::ExistingFile);
    auto* so = s->add_option("--source", pa.source, "source side, one per line")->check(CLI::ExistingFile)->excludes(p);
    s->add_option("--target", pa.target, "target side, aligned")->check(CLI::ExistingFile)->needs(so);
    s->add_option("--freq", pa.freq, "frequency rank table (default: ranks from the pairs)")->check(CLI::ExistingFile);
    s->add_option("--out-source", pa.out_source, "tokenized sources")->required();
    s->add_option("--out-target", pa.out_target, "targets")->required();
    s->add_option("--bin", pa.bin, "token bin width")->capture_default_str();
    s->add_option("--parser-command", pa.parser_command, "external dependency parser process");
    actions[s] = [&] {
      Io io{{}, {pa.out_source, pa.out_target}};
      std::vector<access::TextPair> pairs;
      if (!pa.pairs.empty()) {
        for (const auto& r : mine::read_pairs(pa.pairs)) pairs.push_back({r.query_text, r.candidate_text});
        io.inputs.push_back(pa.pairs);
      } else if (!pa.source.empty() && !pa.target.empty()) {
        const auto a = text::read_lines(pa.source), b = text::read_lines(pa.target);
        if (a.size() != b.size()) throw InvalidArgument("source and target line counts differ");
        for (std::size_t i = 0; i < a.size(); ++i) pairs.push_back({a[i], b[i]});
        io.inputs.push_back(pa.source);
        io.inputs.push_back(pa.target);
      } else {
        throw InvalidArgument("need --pairs or --source and --target");
      }
      access::FrequencyTable table("pairs");
      if (!pa.freq.empty()) {
        table = access::read_frequency_table(pa.freq);
        io.inputs.push_back(pa.freq);
      } else {
        std::vector<std::string> lines;
        for (const auto& p2 : pairs) {
          lines.push_back(p2.source);
          lines.push_back(p2.target);
        }
        table = access::FrequencyTable::from_corpus(lines);
      }
      std::unique_ptr<access::DepthParser> parser;
      if (pa.parser_command.empty())
        parser = std::make_unique<access::ProxyDepthParser>();
      else
        parser = std::make_unique<access::ExternalDepthParser>(split_command(pa.parser_command));
      const auto out = access::preprocess_corpus(pairs, table, *parser, pa.bin);
      text::write_lines(pa.out_source, out.sources);
      text::write_lines(pa.out_target, out.targets);
      std::cerr << "preprocess-access: " << out.sources.size() << " pairs, " << out.skipped << " skipped\n";
      return io;
    };
  }

  // evaluate -----------------------------------------------------------------
  struct {
    std::string sources, predictions, output, aggregation = "corpus", controls_file, predictions_out;
    std::vector<std::string> references;
    std::vector<double> controls;
    ModelOptions model;
  } ev;
  {
    auto* s = add("evaluate", "SARI, FKGL and BLEU of predictions (or of a simplifier's outputs)");
    s->add_option("--sources", ev.sources, "sources, one per line")->required()->check(CLI::ExistingFile);
    s->add_option("--predictions", ev.predictions, "predictions, aligned")->check(CLI::ExistingFile);
    s->add_option("--references", ev.references, "reference files, aligned")->required()->check(CLI::ExistingFile);
    s->add_option("--output", ev.output, "JSON report (default: standard output)");
    s->add_option("--aggregation", ev.aggregation, "SARI aggregation: corpus | per-sample")
        ->capture_default_str()
        ->check(CLI::IsMember({"corpus", "per-sample"}));
    s->add_option("--controls", ev.controls, "NumChars LevSim WordFreq DepTreeDepth for the model")->expected(4);
    s->add_option("--controls-file", ev.controls_file, "tune output whose controls to use")->check(CLI::ExistingFile);
    s->add_option("--predictions-out", ev.predictions_out, "write the model's outputs here");
    ev.model.add(s);
    actions[s] = [&] {
      Io io;
      const auto corpus = load_corpus(ev.sources, ev.references, io);
      std::vector<std::string> preds;
      if (!ev.predictions.empty()) {
        if (ev.model.any()) throw InvalidArgument("--predictions and a model are mutually exclusive");
        preds = text::read_lines(ev.predictions);
        io.inputs.push_back(ev.predictions);
      } else {
        auto built = ev.model.build(io);
        std::vector<std::string> inputs = corpus.sources;
        std::optional<access::ControlValues> c;
        if (!ev.controls_file.empty()) {
          c = controls_from_json(json::parse(text::read_file(ev.controls_file)));
          io.inputs.push_back(ev.controls_file);
        } else if (ev.controls.size() == 4) {
          c = access::ControlValues{ev.controls[0], ev.controls[1], ev.controls[2], ev.controls[3]};
        }
        if (c)
          for (auto& s2 : inputs) s2 = access::prepend_inference_tokens(s2, *c);
        preds = built.client->simplify(inputs);
        if (!ev.predictions_out.empty()) {
          text::write_lines(ev.predictions_out, preds);
          io.outputs.push_back(ev.predictions_out);
        }
      }
      const auto report = eval::evaluate(corpus, preds, sari_options(ev.aggregation));
      write_json(ev.output, report.to_json());
      if (!ev.output.empty() && ev.output != "-") io.outputs.push_back(ev.output);
      return io;
    };
  }

  // tune ---------------------------------------------------------------------
  struct {
    std::string sources, output, aggregation = "corpus", prior_sources, prior_simple;
    std::vector<std::string> references;
    std::size_t budget = 64;
    ModelOptions model;
  } tn;
  {
    auto* s = add("tune", "choose control values by maximizing validation SARI");
    s->add_option("--sources", tn.sources, "validation sources")->check(CLI::ExistingFile);
    s->add_option("--references", tn.references, "validation reference files")->check(CLI::ExistingFile);
    s->add_option("--budget", tn.budget, "objective evaluations")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--output", tn.output, "JSON result (default: standard output)");
    s->add_option("--aggregation", tn.aggregation, "SARI aggregation")->capture_default_str()->check(CLI::IsMember({"corpus", "per-sample"}));
    auto* ps = s->add_option("--prior-sources", tn.prior_sources, "complex sample (no model needed)")->check(CLI::ExistingFile);
    s->add_option("--prior-simple", tn.prior_simple, "unaligned simple sample")->check(CLI::ExistingFile)->needs(ps);
    tn.model.add(s);
    actions[s] = [&] {
      Io io;
      json out;
      if (!tn.prior_sources.empty()) {
        if (tn.prior_simple.empty()) throw InvalidArgument("--prior-sources needs --prior-simple");
        io.inputs = {tn.prior_sources, tn.prior_simple};
        const auto c = tune::prior_knowledge_controls(text::read_lines(tn.prior_sources), text::read_lines(tn.prior_simple));
        out = {{"controls", controls_json(c)}, {"method", "prior"}};
      } else {
        if (tn.sources.empty() || tn.references.empty()) throw InvalidArgument("tune needs --sources and --references");
        const auto corpus = load_corpus(tn.sources, tn.references, io);
        auto built = tn.model.build(io);
        const auto r = tune::tune_controls(*built.client, corpus, tn.budget, common.seed, {}, sari_options(tn.aggregation));
        json hist = json::array();
        for (const auto& h : r.search.history)
          hist.push_back({{"point", h.point}, {"sari", h.value}, {"accepted", h.accepted}});
        out = {{"controls", controls_json(r.controls)},
               {"method", "one_plus_one"},
               {"sari", r.sari},
               {"midpoint_sari", r.midpoint_sari},
               {"evaluations", r.search.final_state.evaluations},
               {"history", hist}};
        std::cerr << "tune: controls " << format_controls(r.controls) << " SARI " << r.sari << '\n';
      }
      write_json(tn.output, out);
      if (!tn.output.empty() && tn.output != "-") io.outputs.push_back(tn.output);
      return io;
    };
  }

  // stats --------------------------------------------------------------------
  struct {
    std::string pairs, source, target, freq, output;
  } stt;
  {
    auto* s = add("stats", "corpus statistics and control-value densities of a pair corpus");
    auto* p = s->add_option("--pairs", stt.pairs, "mined pairs TSV")->check(CLI::ExistingFile);
    auto* so = s->add_option("--source", stt.source, "source side")->check(CLI::ExistingFile)->excludes(p);
    s->add_option("--target", stt.target, "target side")->check(CLI::ExistingFile)->needs(so);
    s->add_option("--freq", stt.freq, "frequency rank table (enables WordRank density)")->check(CLI::ExistingFile);
    s->add_option("--output", stt.output, "JSON (default: standard output)");
    actions[s] = [&] {
      Io io;
      std::vector<access::TextPair> pairs;
      if (!stt.pairs.empty()) {
        for (const auto& r : mine::read_pairs(stt.pairs)) pairs.push_back({r.query_text, r.candidate_text});
        io.inputs.push_back(stt.pairs);
      } else if (!stt.source.empty() && !stt.target.empty()) {
        const auto a = text::read_lines(stt.source), b = text::read_lines(stt.target);
        if (a.size() != b.size()) throw InvalidArgument("source and target line counts differ");
        for (std::size_t i = 0; i < a.size(); ++i) pairs.push_back({a[i], b[i]});
        io.inputs = {stt.source, stt.target};
      } else {
        throw InvalidArgument("need --pairs or --source and --target");
      }
      std::unique_ptr<access::FrequencyTable> table;
      if (!stt.freq.empty()) {
        table = std::make_unique<access::FrequencyTable>(access::read_frequency_table(stt.freq));
        io.inputs.push_back(stt.freq);
      }
      write_json(stt.output, mine::corpus_stats(pairs, table.get()).to_json());
      if (!stt.output.empty() && stt.output != "-") io.outputs.push_back(stt.output);
      return io;
    };
  }

  // baseline -----------------------------------------------------------------
  struct {
    bool identity = false, truncate = false;
    std::string input = "-", output, tokenizer = "whitespace";
  } bl;
  {
    auto* s = add("baseline", "identity or truncation baseline");
    auto* id = s->add_flag("--identity", bl.identity, "copy the source");
    s->add_flag("--truncate", bl.truncate, "keep the first 80% of the words")->excludes(id);
    s->add_option("--input", bl.input, "sources (default: standard input)");
    s->add_option("--output", bl.output, "output (default: standard output)");
    s->add_option("--tokenizer", bl.tokenizer, "word split for --truncate: whitespace | 13a")
        ->capture_default_str()
        ->check(CLI::IsMember({"whitespace", "13a"}));
    actions[s] = [&] {
      if (bl.identity == bl.truncate) throw InvalidArgument("choose one of --identity or --truncate");
      if (bl.input != "-" && !std::filesystem::exists(bl.input)) throw InvalidArgument("missing input " + bl.input);
      const auto src = read_lines_or_stdin(bl.input);
      std::vector<std::string> out;
      const auto tok = bl.tokenizer == "13a" ? eval::TruncationTokenizer::tok13a : eval::TruncationTokenizer::whitespace;
      for (const auto& l : src) out.push_back(bl.identity ? eval::identity_baseline(l) : eval::truncate_baseline(l, tok));
      write_lines_or_stdout(bl.output, out);
      Io io;
      if (bl.input != "-") io.inputs.push_back(bl.input);
      if (!bl.output.empty() && bl.output != "-") io.outputs.push_back(bl.output);
      return io;
    };
  }

  // gold-loo -----------------------------------------------------------------
  struct {
    std::string sources, output, aggregation = "corpus";
    std::vector<std::string> references;
    std::size_t runs = 1;
  } gl;
  {
    auto* s = add("gold-loo", "leave-one-out gold reference scores");
    s->add_option("--sources", gl.sources, "sources")->required()->check(CLI::ExistingFile);
    s->add_option("--references", gl.references, "at least two reference files")->required()->check(CLI::ExistingFile);
    s->add_option("--runs", gl.runs, "seeds seed .. seed+runs-1, averaged")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--output", gl.output, "JSON (default: standard output)");
    s->add_option("--aggregation", gl.aggregation, "SARI aggregation")->capture_default_str()->check(CLI::IsMember({"corpus", "per-sample"}));
    actions[s] = [&] {
      Io io;
      const auto corpus = load_corpus(gl.sources, gl.references, io);
      json runs = json::array();
      double sari = 0, fk = 0, bleu = 0;
      for (std::size_t k = 0; k < gl.runs; ++k) {
        const auto g = eval::gold_reference_loo(corpus, common.seed + k, sari_options(gl.aggregation));
        runs.push_back({{"seed", common.seed + k}, {"sari", g.sari}, {"fkgl", g.fkgl}, {"bleu", g.bleu}});
        sari += g.sari / static_cast<double>(gl.runs);
        fk += g.fkgl / static_cast<double>(gl.runs);
        bleu += g.bleu / static_cast<double>(gl.runs);
      }
      write_json(gl.output, {{"sari", sari}, {"fkgl", fk}, {"bleu", bleu}, {"runs", runs}});
      if (!gl.output.empty() && gl.output != "-") io.outputs.push_back(gl.output);
      return io;
    };
  }

  // serve-toy ----------------------------------------------------------------
  struct {
    bool echo = false;
    std::string synonyms, freq;
    double rank_cutoff = 1000;
  } sv;
  CLI::App* serve_cmd = nullptr;
  {
    serve_cmd = add("serve-toy", "serve the built-in simplifier over the JSON-lines protocol on stdin/stdout");
    serve_cmd->add_flag("--echo", sv.echo, "return sources with control tokens removed");
    serve_cmd->add_option("--synonyms", sv.synonyms, "synonym table")->check(CLI::ExistingFile);
    serve_cmd->add_option("--freq", sv.freq, "frequency rank table")->check(CLI::ExistingFile);
    serve_cmd->add_option("--rank-cutoff", sv.rank_cutoff, "rank cutoff at WordFreq 1.0")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (serve_cmd->parsed()) return serve(sv.echo, sv.synonyms, sv.freq, sv.rank_cutoff);
    for (auto& [sub, action] : actions) {
      if (!sub->parsed()) continue;
      const auto t0 = std::chrono::steady_clock::now();
      const Io io = action();
      const auto t1 = std::chrono::steady_clock::now();
      if (!io.outputs.empty()) {
        manifest::RunManifest m;
        m.subcommand = sub->get_name();
        m.config = resolved_config(*sub);
        m.inputs = io.inputs;
        if (config_opt->count() > 0) m.inputs.push_back(config_opt->as<std::string>());
        m.outputs = io.outputs;
        m.seed = common.seed;
        m.version = PARAMINE_VERSION;
        m.duration_seconds = std::chrono::duration<double>(t1 - t0).count();
        m.write_all();
      }
      return 0;
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ProtocolError& e) {
    std::cerr << "error: " << e.what() << "\ntranscript:\n" << e.transcript() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
