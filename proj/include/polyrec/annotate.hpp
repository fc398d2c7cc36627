#pragma once

// Annotated corpus IO, dataset splitting, inter-annotator agreement and
// strict entity-level NER evaluation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "polyrec/error.hpp"
#include "polyrec/labels.hpp"
#include "polyrec/text.hpp"
#include "polyrec/tokenize.hpp"

namespace polyrec {

struct AnnotatedDocument {
  std::string doc_id;
  std::vector<TokenSpan> tokens;
  std::vector<EntityLabel> labels;

  void validate() const {
    if (tokens.size() != labels.size())
      throw SchemaError("doc " + doc_id + ": " + std::to_string(tokens.size()) + " tokens but " +
                        std::to_string(labels.size()) + " labels");
  }
};

// ---------------------------------------------------------------------------
// JSON-lines IO. The same layout carries gold annotations and external
// tagger predictions.

inline nlohmann::ordered_json annotated_to_json(const AnnotatedDocument& doc) {
  doc.validate();
  nlohmann::ordered_json j;
  j["doc_id"] = doc.doc_id;
  auto tokens = nlohmann::ordered_json::array();
  for (const auto& t : doc.tokens) {
    nlohmann::ordered_json tj;
    tj["surface"] = t.surface;
    tj["start"] = t.start;
    tj["end"] = t.end;
    tokens.push_back(std::move(tj));
  }
  j["tokens"] = std::move(tokens);
  auto labels = nlohmann::ordered_json::array();
  for (auto l : doc.labels) labels.push_back(std::string(to_string(l)));
  j["labels"] = std::move(labels);
  return j;
}

inline AnnotatedDocument annotated_from_json(const nlohmann::json& j) {
  AnnotatedDocument doc;
  if (!j.is_object() || !j.contains("doc_id") || !j.at("doc_id").is_string())
    throw SchemaError("annotated record lacks a string doc_id");
  doc.doc_id = j.at("doc_id").get<std::string>();
  if (!j.contains("tokens") || !j.at("tokens").is_array() || !j.contains("labels") || !j.at("labels").is_array())
    throw SchemaError("doc " + doc.doc_id + ": tokens and labels must be arrays");
  for (const auto& tj : j.at("tokens")) {
    TokenSpan t;
    try {
      t.surface = tj.at("surface").get<std::string>();
      t.start = tj.at("start").get<std::size_t>();
      t.end = tj.at("end").get<std::size_t>();
    } catch (const nlohmann::json::exception&) {
      throw SchemaError("doc " + doc.doc_id + ": malformed token entry");
    }
    if (t.start >= t.end) throw SchemaError("doc " + doc.doc_id + ": token with start >= end");
    t.is_continuation = t.surface.starts_with(kContinuationPrefix) && t.surface.size() > kContinuationPrefix.size();
    doc.tokens.push_back(std::move(t));
  }
  for (const auto& lj : j.at("labels")) {
    if (!lj.is_string()) throw SchemaError("doc " + doc.doc_id + ": label is not a string");
    auto label = parse_label(lj.get<std::string>());
    if (!label) throw SchemaError("doc " + doc.doc_id + ": unknown label '" + lj.get<std::string>() + "'");
    doc.labels.push_back(*label);
  }
  doc.validate();
  return doc;
}

inline std::vector<AnnotatedDocument> load_annotated(const std::string& path) {
  std::vector<AnnotatedDocument> docs;
  std::size_t line_no = 0;
  for (const auto& line : read_jsonl_lines(path)) {
    ++line_no;
    try {
      docs.push_back(annotated_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

inline std::string annotated_to_jsonl(std::span<const AnnotatedDocument> docs) {
  std::string out;
  for (const auto& d : docs) out += annotated_to_json(d).dump() + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Dataset split

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> validation;
  std::vector<T> test;
};

/// Seeded Fisher-Yates shuffle followed by floor allocation of the
/// validation and test sizes; the remainder goes to train.
template <typename T>
DatasetSplit<T> split_dataset(std::vector<T> items, std::array<double, 3> ratios, std::uint64_t seed) {
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw InvalidArgument("split ratios must sum to 1");
  for (double r : ratios)
    if (r < 0.0) throw InvalidArgument("split ratios must be non-negative");
  if (items.size() < ratios.size()) throw InvalidArgument("fewer documents than partitions");

  std::mt19937_64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(items[i - 1], items[j]);
  }
  const auto n = static_cast<double>(items.size());
  const auto n_val = static_cast<std::size_t>(std::floor(n * ratios[1] + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(n * ratios[2] + 1e-9));
  const std::size_t n_train = items.size() - n_val - n_test;

  DatasetSplit<T> out;
  auto it = std::make_move_iterator(items.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(it + static_cast<std::ptrdiff_t>(n_train),
                        it + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val), std::make_move_iterator(items.end()));
  return out;
}

// ---------------------------------------------------------------------------
// Agreement

struct KappaTerms {
  double observed = 0.0;  // p_o
  double expected = 0.0;  // p_e
  double kappa = 0.0;
};

/// Cohen's kappa with chance agreement from each annotator's own marginals.
template <typename Label>
KappaTerms cohen_kappa_terms(std::span<const Label> a, std::span<const Label> b) {
  if (a.size() != b.size()) throw InvalidArgument("cohen_kappa: label sequences differ in length");
  if (a.empty()) throw InvalidArgument("cohen_kappa: empty input");
  std::map<Label, std::size_t> count_a;
  std::map<Label, std::size_t> count_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++count_a[a[i]];
    ++count_b[b[i]];
    if (a[i] == b[i]) ++agree;
  }
  const auto n = static_cast<double>(a.size());
  KappaTerms t;
  t.observed = static_cast<double>(agree) / n;
  for (const auto& [label, ca] : count_a) {
    auto it = count_b.find(label);
    if (it != count_b.end()) t.expected += (static_cast<double>(ca) / n) * (static_cast<double>(it->second) / n);
  }
  t.kappa = agree == a.size() ? 1.0 : (t.observed - t.expected) / (1.0 - t.expected);
  return t;
}

template <typename Label>
double cohen_kappa(std::span<const Label> a, std::span<const Label> b) {
  return cohen_kappa_terms(a, b).kappa;
}

template <typename Label>
double cohen_kappa(const std::vector<Label>& a, const std::vector<Label>& b) {
  return cohen_kappa_terms(std::span<const Label>(a), std::span<const Label>(b)).kappa;
}

/// Fleiss' kappa over an items x categories count matrix where every row
/// sums to `raters`. Returns 1.0 when chance agreement is total (p_e = 1).
inline KappaTerms fleiss_kappa_terms(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters) {
  if (raters < 2) throw InvalidArgument("fleiss_kappa: need at least two raters");
  if (counts.empty()) throw InvalidArgument("fleiss_kappa: empty input");
  const std::size_t k = counts.front().size();
  std::vector<double> column_totals(k, 0.0);
  double sum_p_i = 0.0;
  const auto n = static_cast<double>(raters);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != k) throw InvalidArgument("fleiss_kappa: ragged count matrix");
    std::size_t row_sum = 0;
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      row_sum += row[j];
      column_totals[j] += static_cast<double>(row[j]);
      sq += static_cast<double>(row[j]) * static_cast<double>(row[j]);
    }
    if (row_sum != raters)
      throw InvalidArgument("fleiss_kappa: row " + std::to_string(i) + " sums to " + std::to_string(row_sum) +
                            ", expected " + std::to_string(raters));
    sum_p_i += (sq - n) / (n * (n - 1.0));
  }
  const auto items = static_cast<double>(counts.size());
  KappaTerms t;
  t.observed = sum_p_i / items;
  for (double total : column_totals) {
    const double p_j = total / (items * n);
    t.expected += p_j * p_j;
  }
  t.kappa = t.expected >= 1.0 ? 1.0 : (t.observed - t.expected) / (1.0 - t.expected);
  return t;
}

inline double fleiss_kappa(const std::vector<std::vector<std::size_t>>& counts, std::size_t raters) {
  return fleiss_kappa_terms(counts, raters).kappa;
}

struct AgreementReport {
  std::map<std::pair<std::string, std::string>, double> cohen_pairwise;
  double fleiss = 0.0;
  double p_o = 0.0;
  double p_e = 0.0;
  std::size_t items = 0;
};

/// Token-level agreement of several annotators over their common documents.
/// `annotators` maps annotator name to that annotator's documents; only
/// doc_ids present for every annotator are used, and their tokens must match.
inline AgreementReport compute_agreement(const std::map<std::string, std::vector<AnnotatedDocument>>& annotators) {
  if (annotators.size() < 2) throw InvalidArgument("agreement needs at least two annotators");
  std::map<std::string, std::vector<const AnnotatedDocument*>> by_doc;
  for (const auto& [name, docs] : annotators)
    for (const auto& d : docs) by_doc[d.doc_id].push_back(&d);

  std::vector<std::vector<EntityLabel>> sequences(annotators.size());
  for (const auto& [doc_id, versions] : by_doc) {
    if (versions.size() != annotators.size()) continue;
    for (std::size_t a = 1; a < versions.size(); ++a)
      if (versions[a]->tokens != versions[0]->tokens)
        throw SchemaError("doc " + doc_id + ": annotators disagree on tokenization");
    for (std::size_t a = 0; a < versions.size(); ++a)
      sequences[a].insert(sequences[a].end(), versions[a]->labels.begin(), versions[a]->labels.end());
  }
  if (sequences.front().empty()) throw InvalidArgument("annotators share no common documents");

  AgreementReport report;
  std::vector<std::string> names;
  for (const auto& [name, _] : annotators) names.push_back(name);
  for (std::size_t a = 0; a < names.size(); ++a)
    for (std::size_t b = a + 1; b < names.size(); ++b)
      report.cohen_pairwise[{names[a], names[b]}] = cohen_kappa(sequences[a], sequences[b]);

  std::vector<std::vector<std::size_t>> counts(sequences.front().size(), std::vector<std::size_t>(kAllLabels.size(), 0));
  for (const auto& seq : sequences)
    for (std::size_t i = 0; i < seq.size(); ++i) ++counts[i][static_cast<std::size_t>(seq[i])];
  const auto terms = fleiss_kappa_terms(counts, names.size());
  report.fleiss = terms.kappa;
  report.p_o = terms.observed;
  report.p_e = terms.expected;
  report.items = counts.size();
  return report;
}

// ---------------------------------------------------------------------------
// Strict entity-level evaluation

/// A labeled entity as a half-open token index range.
struct TokenEntity {
  std::size_t begin = 0;
  std::size_t end = 0;
  EntityLabel label = EntityLabel::Other;
  auto operator<=>(const TokenEntity&) const = default;
};

/// Maximal runs of one non-OTHER label (IO scheme: adjacent same-label
/// entities merge).
inline std::vector<TokenEntity> io_entities(std::span<const EntityLabel> labels) {
  std::vector<TokenEntity> out;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (labels[i] == EntityLabel::Other) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    out.push_back({i, j, labels[i]});
    i = j;
  }
  return out;
}

struct MatchCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const MatchCounts&, const MatchCounts&) = default;
};

/// Percent scores; precision/recall are empty when their denominator is 0.
struct Scores {
  MatchCounts counts;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;

  static Scores from_counts(MatchCounts c) {
    Scores s;
    s.counts = c;
    if (c.tp + c.fp > 0) s.precision = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    if (c.tp + c.fn > 0) s.recall = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    if (s.precision && s.recall) {
      const double sum = *s.precision + *s.recall;
      s.f1 = sum > 0.0 ? 2.0 * *s.precision * *s.recall / sum : 0.0;
    } else if (s.precision || s.recall) {
      s.f1 = 0.0;
    }
    return s;
  }
};

struct EvaluationReport {
  std::map<EntityLabel, Scores> per_label;
  Scores overall;
};

inline std::map<EntityLabel, MatchCounts> match_entities(const AnnotatedDocument& pred, const AnnotatedDocument& gold) {
  pred.validate();
  gold.validate();
  if (pred.tokens != gold.tokens) throw SchemaError("doc " + gold.doc_id + ": predicted and gold tokens differ");
  const auto p = io_entities(pred.labels);
  const auto g = io_entities(gold.labels);
  std::map<EntityLabel, MatchCounts> counts;
  std::size_t i = 0;
  std::size_t j = 0;
  // Both lists are sorted by position; strict match needs equal begin, end and label.
  std::vector<bool> gold_hit(g.size(), false);
  for (const auto& e : p) {
    while (j < g.size() && g[j] < e) ++j;
    if (j < g.size() && g[j] == e) {
      ++counts[e.label].tp;
      gold_hit[j] = true;
    } else {
      ++counts[e.label].fp;
    }
  }
  for (i = 0; i < g.size(); ++i)
    if (!gold_hit[i]) ++counts[g[i].label].fn;
  return counts;
}

inline EvaluationReport make_report(const std::map<EntityLabel, MatchCounts>& counts) {
  EvaluationReport report;
  MatchCounts total;
  for (const auto& [label, c] : counts) {
    report.per_label[label] = Scores::from_counts(c);
    total += c;
  }
  report.overall = Scores::from_counts(total);
  return report;
}

inline EvaluationReport evaluate_ner(const AnnotatedDocument& pred, const AnnotatedDocument& gold) {
  return make_report(match_entities(pred, gold));
}

/// Corpus-level evaluation; documents are paired by doc_id.
inline EvaluationReport evaluate_ner(std::span<const AnnotatedDocument> pred, std::span<const AnnotatedDocument> gold) {
  std::map<std::string, const AnnotatedDocument*> pred_by_id;
  for (const auto& d : pred) pred_by_id[d.doc_id] = &d;
  std::map<EntityLabel, MatchCounts> counts;
  for (const auto& g : gold) {
    auto it = pred_by_id.find(g.doc_id);
    if (it == pred_by_id.end()) throw SchemaError("no prediction for gold doc " + g.doc_id);
    for (const auto& [label, c] : match_entities(*it->second, g)) counts[label] += c;
  }
  return make_report(counts);
}

inline nlohmann::ordered_json scores_to_json(const Scores& s) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["tp"] = s.counts.tp;
  j["fp"] = s.counts.fp;
  j["fn"] = s.counts.fn;
  j["precision"] = opt(s.precision);
  j["recall"] = opt(s.recall);
  j["f1"] = opt(s.f1);
  return j;
}

inline nlohmann::ordered_json report_to_json(const EvaluationReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json per_label = nlohmann::ordered_json::object();
  for (const auto& [label, s] : r.per_label) per_label[std::string(to_string(label))] = scores_to_json(s);
  j["per_label"] = std::move(per_label);
  j["overall"] = scores_to_json(r.overall);
  return j;
}

// ---------------------------------------------------------------------------
// Dictionary pre-annotation

/// Surface strings per entity label, matched case-insensitively.
class Gazetteer {
 public:
  Gazetteer() = default;
  explicit Gazetteer(const std::map<EntityLabel, std::vector<std::string>>& entries) {
    for (const auto& [label, surfaces] : entries) {
      if (label == EntityLabel::Other) continue;
      for (const auto& s : surfaces) add(label, s);
    }
  }

  /// JSON object: label name -> array of surface strings.
  static Gazetteer from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("gazetteer file must be a JSON object");
    std::map<EntityLabel, std::vector<std::string>> entries;
    for (const auto& [key, value] : j.items()) {
      auto label = parse_label(key);
      if (!label) throw ConfigError("gazetteer: unknown label '" + key + "'");
      if (!value.is_array()) throw ConfigError("gazetteer: entries for " + key + " must be an array");
      for (const auto& s : value) entries[*label].push_back(s.get<std::string>());
    }
    return Gazetteer(entries);
  }

  static Gazetteer load(const std::string& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("gazetteer " + path + ": " + e.what());
    }
  }

  void add(EntityLabel label, std::string_view surface) {
    auto key = text::lookup_key(surface);
    if (key.empty()) return;
    max_bytes_ = std::max(max_bytes_, key.size());
    index_.emplace(std::move(key), label);
  }

  std::optional<EntityLabel> find(std::string_view surface) const {
    auto it = index_.find(text::fold_case(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool empty() const noexcept { return index_.empty(); }
  std::size_t max_bytes() const noexcept { return max_bytes_; }

 private:
  std::unordered_map<std::string, EntityLabel> index_;
  std::size_t max_bytes_ = 0;
};

/// Longest-match, non-overlapping dictionary spans. Matches start at a word
/// start and end at a word end; longer matches are accepted first.
inline std::vector<TokenEntity> gazetteer_spans(std::string_view text, std::span<const TokenSpan> tokens,
                                                const Gazetteer& gazetteer) {
  struct Candidate {
    std::size_t begin, end, bytes;
    EntityLabel label;
  };
  std::vector<Candidate> candidates;
  if (gazetteer.empty()) return {};
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_continuation) continue;
    for (std::size_t j = i; j < tokens.size(); ++j) {
      const std::size_t bytes = tokens[j].end - tokens[i].start;
      if (bytes > gazetteer.max_bytes()) break;
      const bool word_end = j + 1 == tokens.size() || !tokens[j + 1].is_continuation;
      if (!word_end) continue;
      if (auto label = gazetteer.find(text.substr(tokens[i].start, bytes)))
        candidates.push_back({i, j + 1, bytes, *label});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.bytes, a.begin) < std::tie(a.bytes, b.begin);
  });
  std::vector<bool> taken(tokens.size(), false);
  std::vector<TokenEntity> accepted;
  for (const auto& c : candidates) {
    bool free = true;
    for (std::size_t k = c.begin; k < c.end && free; ++k) free = !taken[k];
    if (!free) continue;
    for (std::size_t k = c.begin; k < c.end; ++k) taken[k] = true;
    accepted.push_back({c.begin, c.end, c.label});
  }
  std::sort(accepted.begin(), accepted.end());
  return accepted;
}

inline AnnotatedDocument dictionary_preannotate(std::string doc_id, std::string_view text,
                                                std::vector<TokenSpan> tokens, const Gazetteer& gazetteer) {
  AnnotatedDocument doc;
  doc.doc_id = std::move(doc_id);
  doc.labels.assign(tokens.size(), EntityLabel::Other);
  for (const auto& e : gazetteer_spans(text, tokens, gazetteer))
    for (std::size_t k = e.begin; k < e.end; ++k) doc.labels[k] = e.label;
  doc.tokens = std::move(tokens);
  return doc;
}

}  // namespace polyrec
