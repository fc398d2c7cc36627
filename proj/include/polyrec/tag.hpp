#pragma once

// Entity labels for documents: the built-in gazetteer tagger, ingestion of
// external predictions, and assembly of labeled tokens into mentions.

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "polyrec/annotate.hpp"
#include "polyrec/corpus.hpp"
#include "polyrec/labels.hpp"
#include "polyrec/quantity.hpp"
#include "polyrec/tokenize.hpp"

namespace polyrec {

struct EntityMention {
  std::string doc_id;
  EntityLabel label = EntityLabel::Other;
  std::string surface;
  std::size_t start = 0;  // byte offsets into Document::text
  std::size_t end = 0;
  std::size_t token_begin = 0;  // half-open token index range
  std::size_t token_end = 0;
  std::size_t sentence_index = 0;
  std::optional<int> cluster_id;
  std::optional<std::string> normalized_name;

  friend bool operator==(const EntityMention&, const EntityMention&) = default;
};

/// Units that turn a number into a PROPERTY_VALUE or MATERIAL_AMOUNT.
/// Keys are stored normalized (see normalize_unit).
struct UnitLexicon {
  std::set<std::string> value_units;
  std::set<std::string> amount_units;

  void add_value_unit(std::string_view unit) { value_units.insert(normalize_unit(unit)); }
  void add_amount_unit(std::string_view unit) { amount_units.insert(normalize_unit(unit)); }
};

namespace detail {

struct ValueSpan {
  std::size_t start;
  std::size_t end;
  bool is_amount;
};

/// Number expression (with optional ± error or range) followed by a known unit.
inline std::optional<ValueSpan> match_value_at(std::string_view text, std::size_t pos,
                                               std::span<const WordSpan> words, const UnitLexicon& lexicon) {
  auto first = scan_number(text, pos);
  if (!first) return std::nullopt;
  std::size_t end = first->end;
  if (auto after = scan_error_separator(text, end)) {
    if (auto err = scan_number(text, *after)) end = err->end;
  } else if (auto after_sep = scan_range_separator(text, end)) {
    if (auto second = scan_number(text, *after_sep)) end = second->end;
  }
  auto it = std::lower_bound(words.begin(), words.end(), end,
                             [](const WordSpan& w, std::size_t p) { return w.start < p; });
  if (it == words.end()) return std::nullopt;
  // The unit may follow directly ("105°C") or after a single space.
  const std::size_t gap_end = it->start;
  for (std::size_t k = end; k < gap_end; ++k)
    if (!text::is_space(text[k])) return std::nullopt;
  if (gap_end - end > 1) return std::nullopt;
  constexpr std::size_t kMaxUnitWords = 6;
  const auto available = static_cast<std::size_t>(words.end() - it);
  for (std::size_t n = std::min(kMaxUnitWords, available); n >= 1; --n) {
    const std::size_t unit_end = (it + static_cast<std::ptrdiff_t>(n - 1))->end;
    const std::string key = normalize_unit(text.substr(gap_end, unit_end - gap_end));
    if (lexicon.amount_units.count(key)) return ValueSpan{first->begin, unit_end, true};
    if (lexicon.value_units.count(key)) return ValueSpan{first->begin, unit_end, false};
  }
  return std::nullopt;
}

}  // namespace detail

/// Deterministic tagger: gazetteer spans first, then number+unit spans on
/// tokens still labeled OTHER.
class GazetteerTagger {
 public:
  GazetteerTagger(Gazetteer gazetteer, UnitLexicon lexicon)
      : gazetteer_(std::move(gazetteer)), lexicon_(std::move(lexicon)) {}

  std::vector<EntityLabel> tag(std::string_view text, std::span<const TokenSpan> tokens) const {
    std::vector<EntityLabel> labels(tokens.size(), EntityLabel::Other);
    for (const auto& e : gazetteer_spans(text, tokens, gazetteer_))
      for (std::size_t k = e.begin; k < e.end; ++k) labels[k] = e.label;

    const auto words = pre_tokenize(text);
    std::size_t i = 0;
    while (i < tokens.size()) {
      const auto& tok = tokens[i];
      const char c = text[tok.start];
      const bool numeric_start = text::is_ascii_digit(c) || ((c == '-' || c == '.') && tok.end < text.size() &&
                                                             text::is_ascii_digit(text[tok.end]));
      if (tok.is_continuation || labels[i] != EntityLabel::Other || !numeric_start) {
        ++i;
        continue;
      }
      auto span = detail::match_value_at(text, tok.start, words, lexicon_);
      if (!span) {
        ++i;
        continue;
      }
      std::size_t j = i;
      bool free = true;
      while (j < tokens.size() && tokens[j].end <= span->end) {
        free = free && labels[j] == EntityLabel::Other;
        ++j;
      }
      if (free && j > i && tokens[j - 1].end == span->end) {
        const auto label = span->is_amount ? EntityLabel::MaterialAmount : EntityLabel::PropertyValue;
        for (std::size_t k = i; k < j; ++k) labels[k] = label;
        i = j;
      } else {
        ++i;
      }
    }
    return labels;
  }

  const Gazetteer& gazetteer() const noexcept { return gazetteer_; }
  const UnitLexicon& lexicon() const noexcept { return lexicon_; }

 private:
  Gazetteer gazetteer_;
  UnitLexicon lexicon_;
};

inline std::vector<EntityLabel> gazetteer_tag(std::string_view text, std::span<const TokenSpan> tokens,
                                              const Gazetteer& gazetteer, const UnitLexicon& lexicon) {
  return GazetteerTagger(gazetteer, lexicon).tag(text, tokens);
}

/// Reads predictions in the annotated-corpus layout and checks each one
/// against the pipeline's own tokenization of the referenced document.
/// `tokens_by_doc` holds that tokenization for every corpus document.
inline std::map<std::string, std::vector<EntityLabel>> attach_predictions(
    std::span<const AnnotatedDocument> predictions,
    const std::map<std::string, std::vector<TokenSpan>>& tokens_by_doc) {
  std::map<std::string, std::vector<EntityLabel>> out;
  for (const auto& p : predictions) {
    auto it = tokens_by_doc.find(p.doc_id);
    if (it == tokens_by_doc.end()) throw SchemaError("predictions reference unknown doc_id: " + p.doc_id);
    const auto& expected = it->second;
    if (p.tokens.size() != expected.size())
      throw SchemaError("doc " + p.doc_id + ": prediction has " + std::to_string(p.tokens.size()) +
                        " tokens, tokenizer produced " + std::to_string(expected.size()));
    for (std::size_t k = 0; k < expected.size(); ++k) {
      if (p.tokens[k].start != expected[k].start || p.tokens[k].end != expected[k].end)
        throw SchemaError("doc " + p.doc_id + ": token " + std::to_string(k) + " offsets differ from tokenizer");
    }
    if (!out.emplace(p.doc_id, p.labels).second)
      throw SchemaError("duplicate predictions for doc " + p.doc_id);
  }
  return out;
}

inline std::map<std::string, std::vector<EntityLabel>> load_predictions(
    const std::string& path, const std::map<std::string, std::vector<TokenSpan>>& tokens_by_doc) {
  const auto predictions = load_annotated(path);
  return attach_predictions(predictions, tokens_by_doc);
}

/// Maximal runs of one non-OTHER label become mentions. Runs are cut at
/// sentence boundaries.
inline std::vector<EntityMention> assemble_mentions(const Document& doc, std::span<const TokenSpan> tokens,
                                                    std::span<const EntityLabel> labels) {
  if (tokens.size() != labels.size())
    throw InvalidArgument("doc " + doc.doc_id + ": tokens and labels differ in length");
  std::vector<EntityMention> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    if (labels[i] == EntityLabel::Other) {
      ++i;
      continue;
    }
    const std::size_t sentence = doc.sentence_of(tokens[i].start);
    std::size_t j = i + 1;
    while (j < tokens.size() && labels[j] == labels[i] && doc.sentence_of(tokens[j].start) == sentence) ++j;
    EntityMention m;
    m.doc_id = doc.doc_id;
    m.label = labels[i];
    m.start = tokens[i].start;
    m.end = tokens[j - 1].end;
    m.surface = doc.text.substr(m.start, m.end - m.start);
    m.token_begin = i;
    m.token_end = j;
    m.sentence_index = doc.sentence_of(m.start + (m.end - m.start) / 2);
    out.push_back(std::move(m));
    i = j;
  }
  return out;
}

/// Inverse of assemble_mentions: labels painted back onto `n_tokens` tokens.
inline std::vector<EntityLabel> paint_labels(std::span<const EntityMention> mentions, std::size_t n_tokens) {
  std::vector<EntityLabel> labels(n_tokens, EntityLabel::Other);
  for (const auto& m : mentions)
    for (std::size_t k = m.token_begin; k < m.token_end && k < n_tokens; ++k) labels[k] = m.label;
  return labels;
}

}  // namespace polyrec
