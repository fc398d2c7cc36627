#pragma once

// Pipeline configuration and corpus-level driver: preprocess, tokenize,
// label, extract, in input order with an optional worker pool.

#include <atomic>
#include <filesystem>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "polyrec/annotate.hpp"
#include "polyrec/corpus.hpp"
#include "polyrec/error.hpp"
#include "polyrec/extract.hpp"
#include "polyrec/store.hpp"
#include "polyrec/tag.hpp"
#include "polyrec/tokenize.hpp"
#include "polyrec/units.hpp"

namespace polyrec {

struct PipelineConfig {
  std::string corpus;
  std::string vocab;
  std::string gazetteers;
  std::string normalization;
  std::string units;
  std::optional<std::string> predictions;  // absent: label with the gazetteer tagger
  std::string output;
  std::optional<std::string> unicode_map;
  std::optional<std::string> abbreviations;
  std::size_t property_window = 10;
  std::size_t amount_window = 10;
  CorefConfig coref;
  std::size_t workers = 1;
  std::map<std::string, std::vector<std::string>> keyword_sets;

  /// Relative paths resolve against `base_dir`. Every input file must exist.
  static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    auto path_of = [&](const std::string& p) {
      std::filesystem::path fp(p);
      return (fp.is_absolute() ? fp : base_dir / fp).lexically_normal().string();
    };
    auto required = [&](const char* key) {
      if (!j.contains(key) || !j.at(key).is_string()) throw ConfigError(std::string("config: missing path '") + key + "'");
      return path_of(j.at(key).get<std::string>());
    };
    auto optional_path = [&](const char* key) -> std::optional<std::string> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      if (!j.at(key).is_string()) throw ConfigError(std::string("config: '") + key + "' must be a path");
      return path_of(j.at(key).get<std::string>());
    };
    auto count = [&](const char* key, std::size_t fallback) -> std::size_t {
      if (!j.contains(key)) return fallback;
      const auto& v = j.at(key);
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(std::string("config: '") + key + "' must be a non-negative integer");
      return v.get<std::size_t>();
    };
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    c.corpus = required("corpus");
    c.vocab = required("vocab");
    c.gazetteers = required("gazetteers");
    c.normalization = required("normalization");
    c.units = required("units");
    c.output = required("output");
    c.predictions = optional_path("predictions");
    c.unicode_map = optional_path("unicode_map");
    c.abbreviations = optional_path("abbreviations");
    c.property_window = count("property_window", c.property_window);
    c.amount_window = count("amount_window", c.amount_window);
    c.workers = count("workers", c.workers);
    if (j.contains("coref")) {
      const auto& cj = j.at("coref");
      if (cj.contains("max_levenshtein")) c.coref.max_levenshtein = cj.at("max_levenshtein").get<std::size_t>();
      if (cj.contains("use_abbreviations")) c.coref.use_abbreviations = cj.at("use_abbreviations").get<bool>();
    }
    if (j.contains("keyword_sets")) {
      try {
        c.keyword_sets = j.at("keyword_sets").get<std::map<std::string, std::vector<std::string>>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: keyword_sets must map names to string arrays");
      }
    }
    c.validate();
    return c;
  }

  static PipelineConfig load(const std::string& path) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config " + path + ": " + e.what());
    }
    return from_json(j, std::filesystem::path(path).parent_path());
  }

  void validate() const {
    if (workers < 1) throw ConfigError("config: workers must be >= 1");
    auto must_exist = [](const std::string& p, const char* what) {
      if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string("config: ") + what + " file not found: " + p);
    };
    must_exist(corpus, "corpus");
    must_exist(vocab, "vocab");
    must_exist(gazetteers, "gazetteers");
    must_exist(normalization, "normalization");
    must_exist(units, "units");
    if (predictions) must_exist(*predictions, "predictions");
    if (unicode_map) must_exist(*unicode_map, "unicode_map");
    if (abbreviations) must_exist(*abbreviations, "abbreviations");
  }
};

/// Immutable shared inputs loaded from a config.
struct PipelineResources {
  UnicodeMap unicode_map = UnicodeMap::builtin();
  std::vector<std::string> abbreviations = default_abbreviations();
  Vocabulary vocab;
  Gazetteer gazetteer;
  PropertyRegistry registry;
  NormalizationDictionary normalization;
  UnitLexicon lexicon;

  static PipelineResources load(const PipelineConfig& c) {
    PipelineResources r{
        c.unicode_map ? UnicodeMap::load(*c.unicode_map) : UnicodeMap::builtin(),
        c.abbreviations ? load_abbreviations(*c.abbreviations) : default_abbreviations(),
        Vocabulary::load(c.vocab),
        Gazetteer::load(c.gazetteers),
        PropertyRegistry::load(c.units),
        NormalizationDictionary::load(c.normalization),
        {}};
    r.lexicon = lexicon_from(r.registry);
    return r;
  }

  static UnitLexicon lexicon_from(const PropertyRegistry& registry) {
    UnitLexicon lex;
    for (const auto& u : registry.value_unit_keys()) lex.add_value_unit(u);
    for (const auto& u : registry.amount_units()) lex.add_amount_unit(u);
    return lex;
  }

  PreprocessOptions preprocess_options() const { return {&unicode_map, &abbreviations}; }

  ExtractConfig extract_config(const PipelineConfig& c) const {
    ExtractConfig e;
    e.registry = &registry;
    e.normalization = &normalization;
    e.coref = c.coref;
    e.property_window = c.property_window;
    e.amount_window = c.amount_window;
    e.keyword_sets = c.keyword_sets;
    return e;
  }
};

struct TaggedDocument {
  Document doc;
  std::vector<TokenSpan> tokens;
  std::vector<EntityLabel> labels;
};

struct CorpusExtraction {
  std::vector<MaterialPropertyRecord> records;
  std::vector<Diagnostic> diagnostics;
  std::size_t documents_in = 0;
  std::size_t passed_filter = 0;
  std::size_t parse_failures = 0;

  std::string summary() const {
    return std::to_string(documents_in) + " in / " + std::to_string(passed_filter) + " passed filter / " +
           std::to_string(records.size()) + " records / " + std::to_string(parse_failures) + " parse failures";
  }
};

/// Calls fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Polymer keyword filter, then per-document extraction. Output order
/// follows input order regardless of `workers`.
inline CorpusExtraction extract_corpus(std::span<const TaggedDocument> docs, const ExtractConfig& config,
                                       std::size_t workers = 1) {
  std::vector<ExtractionResult> per_doc(docs.size());
  std::vector<char> relevant(docs.size(), 0);
  parallel_for(docs.size(), workers, [&](std::size_t i) {
    const auto& d = docs[i];
    if (!is_polymer_relevant(d.doc)) return;
    relevant[i] = 1;
    per_doc[i] = extract_records(d.doc, d.tokens, d.labels, config);
  });
  CorpusExtraction out;
  out.documents_in = docs.size();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!relevant[i]) {
      out.diagnostics.push_back({docs[i].doc.doc_id, "is_polymer_relevant", "no polymer keyword"});
      continue;
    }
    auto& r = per_doc[i];
    if (r.passed_filter) ++out.passed_filter;
    out.parse_failures += r.parse_failures;
    for (auto& rec : r.records) out.records.push_back(std::move(rec));
    for (auto& d : r.diagnostics) out.diagnostics.push_back(std::move(d));
  }
  return out;
}

/// Preprocessing and tokenization of a raw corpus.
inline std::vector<TaggedDocument> prepare_corpus(std::span<const RawDocument> raw, const PipelineResources& res,
                                                  std::size_t workers = 1) {
  std::vector<TaggedDocument> docs(raw.size());
  const WordpieceTokenizer tokenizer(res.vocab);
  const auto opts = res.preprocess_options();
  parallel_for(raw.size(), workers, [&](std::size_t i) {
    docs[i].doc = preprocess(raw[i], opts);
    docs[i].tokens = tokenizer.tokenize(docs[i].doc.text);
  });
  return docs;
}

/// Labels from the gazetteer tagger.
inline void tag_corpus(std::vector<TaggedDocument>& docs, const PipelineResources& res, std::size_t workers = 1) {
  const GazetteerTagger tagger(res.gazetteer, res.lexicon);
  parallel_for(docs.size(), workers,
               [&](std::size_t i) { docs[i].labels = tagger.tag(docs[i].doc.text, docs[i].tokens); });
}

/// Labels from an external predictions file. Documents without a prediction
/// keep all-OTHER labels.
inline void attach_corpus_predictions(std::vector<TaggedDocument>& docs, const std::string& path) {
  std::map<std::string, std::vector<TokenSpan>> tokens_by_doc;
  for (const auto& d : docs) tokens_by_doc.emplace(d.doc.doc_id, d.tokens);
  auto labels = load_predictions(path, tokens_by_doc);
  for (auto& d : docs) {
    auto it = labels.find(d.doc.doc_id);
    d.labels = it == labels.end() ? std::vector<EntityLabel>(d.tokens.size(), EntityLabel::Other) : std::move(it->second);
  }
}

inline std::vector<AnnotatedDocument> to_annotated(std::span<const TaggedDocument> docs) {
  std::vector<AnnotatedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.doc.doc_id, d.tokens, d.labels});
  return out;
}

/// Full run from a config: corpus file to records (not written).
inline CorpusExtraction run_extraction(const PipelineConfig& config, const PipelineResources& res) {
  const auto raw = load_corpus(config.corpus);
  auto docs = prepare_corpus(raw, res, config.workers);
  if (config.predictions)
    attach_corpus_predictions(docs, *config.predictions);
  else
    tag_corpus(docs, res, config.workers);
  return extract_corpus(docs, res.extract_config(config), config.workers);
}

inline std::string diagnostics_to_jsonl(std::span<const Diagnostic> diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) out += diagnostic_to_json(d).dump() + "\n";
  return out;
}

}  // namespace polyrec
