#pragma once

// Material property record extraction from a tagged abstract:
// entity filter, abbreviation detection, coreference, name normalization,
// value parsing, unit conversion, property/amount association and the
// material-to-property relation heuristics.

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

#include "polyrec/corpus.hpp"
#include "polyrec/labels.hpp"
#include "polyrec/quantity.hpp"
#include "polyrec/tag.hpp"
#include "polyrec/text.hpp"
#include "polyrec/units.hpp"

namespace polyrec {

// ---------------------------------------------------------------------------
// Record types

enum class RelationMode { SameSentence, WholeAbstract };

constexpr std::string_view to_string(RelationMode m) noexcept {
  return m == RelationMode::SameSentence ? "SAME_SENTENCE" : "WHOLE_ABSTRACT";
}

/// One coreference cluster as it appears in a record.
struct RecordMaterial {
  std::string surface;  // cluster representative
  EntityLabel label = EntityLabel::Polymer;
  std::optional<std::string> normalized;
  int cluster = 0;
  friend bool operator==(const RecordMaterial&, const RecordMaterial&) = default;
};

struct AmountLink {
  int material_cluster = 0;
  std::string material_surface;
  std::string surface;
  ParsedValue value;
  friend bool operator==(const AmountLink&, const AmountLink&) = default;
};

struct MaterialPropertyRecord {
  std::string doc_id;
  std::optional<int> year;
  std::optional<std::string> doi;
  std::vector<RecordMaterial> materials;
  std::string property_raw;
  std::string property_canonical;
  std::string value_surface;
  ParsedValue value;
  std::optional<AmountLink> amount;
  RelationMode relation_mode = RelationMode::SameSentence;
  std::vector<std::string> keywords;
  friend bool operator==(const MaterialPropertyRecord&, const MaterialPropertyRecord&) = default;
};

struct Diagnostic {
  std::string doc_id;
  std::string stage;
  std::string reason;
  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

inline nlohmann::ordered_json diagnostic_to_json(const Diagnostic& d) {
  nlohmann::ordered_json j;
  j["doc_id"] = d.doc_id;
  j["stage"] = d.stage;
  j["reason"] = d.reason;
  return j;
}

// ---------------------------------------------------------------------------
// Entity filter

/// Passes abstracts with a polymer-family material, a property name and a
/// property value.
inline bool filter_by_entities(std::span<const EntityMention> mentions) {
  bool material = false;
  bool name = false;
  bool value = false;
  for (const auto& m : mentions) {
    material = material || is_polymer_family(m.label);
    name = name || m.label == EntityLabel::PropertyName;
    value = value || m.label == EntityLabel::PropertyValue;
  }
  return material && name && value;
}

// ---------------------------------------------------------------------------
// Levenshtein distance

/// Edit distance over codepoints.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::u32string ua;
  std::u32string ub;
  for (std::size_t p = 0; p < a.size();) ua.push_back(text::decode_utf8(a, p));
  for (std::size_t p = 0; p < b.size();) ub.push_back(text::decode_utf8(b, p));
  if (ua.size() < ub.size()) std::swap(ua, ub);
  std::vector<std::size_t> prev(ub.size() + 1);
  std::vector<std::size_t> cur(ub.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= ua.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= ub.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ua[i - 1] == ub[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[ub.size()];
}

// ---------------------------------------------------------------------------
// Abbreviation detection (Schwartz-Hearst character matching)

/// Byte ranges in the searched text: the parenthesized short form and the
/// long form it abbreviates.
struct AbbreviationCandidate {
  std::size_t short_begin = 0;
  std::size_t short_end = 0;
  std::size_t long_begin = 0;
  std::size_t long_end = 0;
  friend bool operator==(const AbbreviationCandidate&, const AbbreviationCandidate&) = default;
};

namespace detail {

inline bool valid_short_form(std::string_view sf) {
  const std::size_t chars = text::codepoint_offsets(sf).size() - 1;
  if (chars < 2 || chars > 10) return false;
  if (!text::contains_ascii_letter(sf)) return false;
  return text::is_ascii_alnum(sf.front()) || static_cast<unsigned char>(sf.front()) >= 0x80;
}

/// Start offset (within `lf`) of the shortest suffix of `lf` that
/// abbreviates to `sf`, or npos.
inline std::size_t best_long_form_start(std::string_view sf, std::string_view lf) {
  std::ptrdiff_t s = static_cast<std::ptrdiff_t>(sf.size()) - 1;
  std::ptrdiff_t l = static_cast<std::ptrdiff_t>(lf.size()) - 1;
  while (s >= 0) {
    const char c = text::ascii_lower(sf[static_cast<std::size_t>(s)]);
    if (!text::is_ascii_alnum(c) && static_cast<unsigned char>(c) < 0x80) {
      --s;
      continue;
    }
    while (l >= 0) {
      const bool same = text::ascii_lower(lf[static_cast<std::size_t>(l)]) == c;
      const bool needs_word_start = s == 0 && l > 0 && text::is_ascii_alnum(lf[static_cast<std::size_t>(l) - 1]);
      if (same && !needs_word_start) break;
      --l;
    }
    if (l < 0) return std::string_view::npos;
    --l;
    --s;
  }
  const std::size_t from = static_cast<std::size_t>(l + 1);
  const auto space = from == 0 ? std::string_view::npos : lf.rfind(' ', from - 1);
  return space == std::string_view::npos ? 0 : space + 1;
}

}  // namespace detail

/// All (short form, long form) candidates within `sentence`. Offsets are
/// relative to `sentence`.
inline std::vector<AbbreviationCandidate> find_abbreviations(std::string_view sentence) {
  std::vector<AbbreviationCandidate> out;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (sentence[i] == '(') {
      stack.push_back(i);
      continue;
    }
    if (sentence[i] != ')' || stack.empty()) continue;
    const std::size_t open = stack.back();
    stack.pop_back();
    if (!stack.empty()) continue;  // only outermost parentheses hold short forms

    std::string_view inner = sentence.substr(open + 1, i - open - 1);
    std::size_t sf_begin = open + 1;
    if (auto cut = inner.find_first_of(";,"); cut != std::string_view::npos) inner = inner.substr(0, cut);
    const auto trimmed = text::trim(inner);
    if (trimmed.empty()) continue;
    sf_begin += static_cast<std::size_t>(trimmed.data() - inner.data());
    if (!detail::valid_short_form(trimmed)) continue;

    // Long-form window: at most min(|sf| + 5, 2|sf|) words before the parenthesis.
    std::string_view before = sentence.substr(0, open);
    while (!before.empty() && text::is_space(before.back())) before.remove_suffix(1);
    if (before.empty()) continue;
    const std::size_t sf_chars = text::codepoint_offsets(trimmed).size() - 1;
    const std::size_t max_words = std::min(sf_chars + 5, sf_chars * 2);
    std::size_t lf_begin = before.size();
    std::size_t words = 0;
    while (lf_begin > 0 && words < max_words) {
      while (lf_begin > 0 && text::is_space(before[lf_begin - 1])) --lf_begin;
      while (lf_begin > 0 && !text::is_space(before[lf_begin - 1])) --lf_begin;
      ++words;
    }
    const std::string_view window = before.substr(lf_begin);
    const std::size_t rel = detail::best_long_form_start(trimmed, window);
    if (rel == std::string_view::npos) continue;
    const std::size_t long_begin = lf_begin + rel;
    const std::size_t long_end = before.size();
    if (long_end - long_begin <= trimmed.size()) continue;
    out.push_back({sf_begin, sf_begin + trimmed.size(), long_begin, long_end});
  }
  return out;
}

struct AbbreviationPair {
  std::size_t long_mention = 0;  // indices into the mention list
  std::size_t short_mention = 0;
  friend bool operator==(const AbbreviationPair&, const AbbreviationPair&) = default;
};

/// Links long-form and short-form material mentions of one sentence. The
/// short-form mention must overlap the parenthesized text and the long-form
/// mention must overlap the matched long form; the latter nearest the
/// parenthesis wins.
inline std::vector<AbbreviationPair> detect_abbreviations(std::string_view text, const SentenceSpan& sentence,
                                                          std::span<const EntityMention> mentions) {
  std::vector<AbbreviationPair> out;
  const std::string_view sent = text.substr(sentence.start, sentence.end - sentence.start);
  auto overlaps = [](const EntityMention& m, std::size_t b, std::size_t e) { return m.start < e && b < m.end; };
  for (const auto& c : find_abbreviations(sent)) {
    const std::size_t sb = sentence.start + c.short_begin;
    const std::size_t se = sentence.start + c.short_end;
    const std::size_t lb = sentence.start + c.long_begin;
    const std::size_t le = sentence.start + c.long_end;
    std::optional<std::size_t> short_idx;
    std::optional<std::size_t> long_idx;
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      const auto& m = mentions[i];
      if (!is_material(m.label)) continue;
      if (overlaps(m, sb, se) && (!short_idx || m.start < mentions[*short_idx].start)) short_idx = i;
      if (overlaps(m, lb, le) && m.end <= sb &&
          (!long_idx || std::tie(m.end, m.start) > std::tie(mentions[*long_idx].end, mentions[*long_idx].start)))
        long_idx = i;
    }
    if (short_idx && long_idx && *short_idx != *long_idx) out.push_back({*long_idx, *short_idx});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Coreference

struct CorefConfig {
  std::size_t max_levenshtein = 1;
  bool use_abbreviations = true;
};

struct MaterialCluster {
  int id = 0;
  std::vector<std::size_t> members;  // indices into the mention list, by position
  std::string representative;
  std::size_t representative_mention = 0;
  EntityLabel label = EntityLabel::Polymer;
  std::optional<std::string> normalized_name;
};

struct CorefResult {
  std::vector<int> cluster_of;  // per mention
  std::vector<MaterialCluster> clusters;
};

namespace detail {

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
  std::vector<std::size_t> parent;
};

inline auto position_key(const EntityMention& m) {
  return std::make_tuple(m.start, m.end, static_cast<int>(m.label), std::string_view(m.surface));
}

}  // namespace detail

/// Connected components of the graph linking mentions whose whitespace-
/// collapsed surfaces are within `max_levenshtein` edits, plus abbreviation
/// pairs. Cluster ids follow the position of each cluster's first mention.
/// The representative is the most frequent surface (ties: longest, then
/// lexicographically smallest).
inline CorefResult coreference(std::span<const EntityMention> mentions, std::span<const AbbreviationPair> abbreviations,
                               const CorefConfig& config) {
  const std::size_t n = mentions.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::position_key(mentions[a]) < detail::position_key(mentions[b]);
  });

  std::vector<std::string> surfaces(n);
  for (std::size_t i = 0; i < n; ++i) surfaces[i] = text::collapse_whitespace(mentions[i].surface);

  detail::DisjointSets sets(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (sets.find(a) == sets.find(b)) continue;
      if (surfaces[a] == surfaces[b] || levenshtein(surfaces[a], surfaces[b]) <= config.max_levenshtein)
        sets.unite(a, b);
    }
  }
  if (config.use_abbreviations)
    for (const auto& p : abbreviations) sets.unite(p.long_mention, p.short_mention);

  CorefResult result;
  result.cluster_of.assign(n, -1);
  std::map<std::size_t, int> root_to_id;
  for (std::size_t idx : order) {
    const std::size_t root = sets.find(idx);
    auto [it, inserted] = root_to_id.emplace(root, static_cast<int>(result.clusters.size()));
    if (inserted) {
      MaterialCluster c;
      c.id = it->second;
      result.clusters.push_back(std::move(c));
    }
    result.cluster_of[idx] = it->second;
    result.clusters[static_cast<std::size_t>(it->second)].members.push_back(idx);
  }
  for (auto& c : result.clusters) {
    std::map<std::string, std::size_t> freq;
    for (std::size_t idx : c.members) ++freq[surfaces[idx]];
    const auto best = std::min_element(freq.begin(), freq.end(), [](const auto& x, const auto& y) {
      if (x.second != y.second) return x.second > y.second;
      if (x.first.size() != y.first.size()) return x.first.size() > y.first.size();
      return x.first < y.first;
    });
    c.representative = best->first;
    for (std::size_t idx : c.members) {
      if (surfaces[idx] == c.representative) {
        c.representative_mention = idx;
        break;
      }
    }
    c.label = mentions[c.representative_mention].label;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Name normalization

/// Variant (case-folded) -> canonical polymer name.
class NormalizationDictionary {
 public:
  NormalizationDictionary() = default;

  void add(std::string_view variant, std::string canonical) {
    index_[text::lookup_key(variant)] = std::move(canonical);
  }

  std::optional<std::string> find(std::string_view surface) const {
    auto it = index_.find(text::lookup_key(surface));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// {"<canonical>": ["<variant>", ...], ...}; the canonical name maps to itself.
  static NormalizationDictionary from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("normalization dictionary must be a JSON object");
    NormalizationDictionary d;
    for (const auto& [canonical, variants] : j.items()) {
      d.add(canonical, canonical);
      for (const auto& v : variants) d.add(v.get<std::string>(), canonical);
    }
    return d;
  }

  static NormalizationDictionary load(const std::string& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("normalization dictionary " + path + ": " + e.what());
    }
  }

  std::size_t size() const noexcept { return index_.size(); }

 private:
  std::map<std::string, std::string> index_;
};

struct NormalizedName {
  std::string name;
  bool normalized = false;
  friend bool operator==(const NormalizedName&, const NormalizedName&) = default;
};

inline NormalizedName normalize_name(std::string_view surface, const NormalizationDictionary& dictionary) {
  if (auto hit = dictionary.find(surface)) return {*hit, true};
  return {std::string(surface), false};
}

// ---------------------------------------------------------------------------
// Association by token distance

/// Tokens strictly between two mentions; 0 when adjacent or overlapping.
inline std::size_t token_distance(std::size_t a_begin, std::size_t a_end, std::size_t b_begin, std::size_t b_end) {
  if (a_end <= b_begin) return b_begin - a_end;
  if (b_end <= a_begin) return a_begin - b_end;
  return 0;
}

inline std::size_t token_distance(const EntityMention& a, const EntityMention& b) {
  return token_distance(a.token_begin, a.token_end, b.token_begin, b.token_end);
}

struct PropertyPair {
  std::size_t name = 0;   // index into the mention list
  std::size_t value = 0;
  friend bool operator==(const PropertyPair&, const PropertyPair&) = default;
};

struct PairingOutcome {
  std::vector<PropertyPair> pairs;
  std::vector<std::size_t> unpaired_values;
  std::vector<std::size_t> shared_names;  // names consumed by more than one value
};

/// Each PROPERTY_VALUE pairs with the nearest PROPERTY_NAME of its sentence
/// within `window` tokens (ties: the preceding name).
inline PairingOutcome pair_property(std::span<const EntityMention> mentions, std::size_t window) {
  PairingOutcome out;
  std::map<std::size_t, std::size_t> uses;
  for (std::size_t v = 0; v < mentions.size(); ++v) {
    if (mentions[v].label != EntityLabel::PropertyValue) continue;
    std::optional<std::size_t> best;
    std::size_t best_dist = 0;
    for (std::size_t n = 0; n < mentions.size(); ++n) {
      const auto& name = mentions[n];
      if (name.label != EntityLabel::PropertyName || name.sentence_index != mentions[v].sentence_index) continue;
      const std::size_t d = token_distance(name, mentions[v]);
      if (d > window) continue;
      const bool precedes = name.token_end <= mentions[v].token_begin;
      if (!best || d < best_dist ||
          (d == best_dist && precedes && mentions[*best].token_end > mentions[v].token_begin)) {
        best = n;
        best_dist = d;
      }
    }
    if (!best) {
      out.unpaired_values.push_back(v);
      continue;
    }
    out.pairs.push_back({*best, v});
    if (++uses[*best] == 2) out.shared_names.push_back(*best);
  }
  return out;
}

struct AmountAssociation {
  std::size_t amount = 0;    // index into the mention list
  std::size_t material = 0;
  friend bool operator==(const AmountAssociation&, const AmountAssociation&) = default;
};

struct AmountOutcome {
  std::vector<AmountAssociation> links;
  std::vector<std::size_t> unlinked;
};

/// Each MATERIAL_AMOUNT links to the nearest material mention within
/// `window` tokens (ties: the preceding material).
inline AmountOutcome associate_amount(std::span<const EntityMention> mentions, std::size_t window) {
  AmountOutcome out;
  for (std::size_t a = 0; a < mentions.size(); ++a) {
    if (mentions[a].label != EntityLabel::MaterialAmount) continue;
    std::optional<std::size_t> best;
    std::size_t best_dist = 0;
    for (std::size_t m = 0; m < mentions.size(); ++m) {
      if (!is_material(mentions[m].label)) continue;
      const std::size_t d = token_distance(mentions[m], mentions[a]);
      if (d > window) continue;
      const bool precedes = mentions[m].token_end <= mentions[a].token_begin;
      if (!best || d < best_dist ||
          (d == best_dist && precedes && mentions[*best].token_end > mentions[a].token_begin)) {
        best = m;
        best_dist = d;
      }
    }
    if (best)
      out.links.push_back({a, *best});
    else
      out.unlinked.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Relation heuristics

struct RelatedPair {
  PropertyPair pair;
  std::vector<int> clusters;  // record materials, by cluster id
  RelationMode mode = RelationMode::SameSentence;
};

/// Closest material of the value's sentence (its whole cluster), or every
/// material cluster of the abstract when the sentence has none.
inline std::vector<RelatedPair> relate(std::span<const EntityMention> mentions, const CorefResult& coref,
                                       std::span<const PropertyPair> pairs) {
  std::vector<RelatedPair> out;
  std::vector<int> all_clusters;
  for (const auto& c : coref.clusters) all_clusters.push_back(c.id);
  for (const auto& p : pairs) {
    const auto& name = mentions[p.name];
    const auto& value = mentions[p.value];
    const std::size_t span_begin = std::min(name.token_begin, value.token_begin);
    const std::size_t span_end = std::max(name.token_end, value.token_end);
    std::optional<std::size_t> best;
    std::size_t best_dist = 0;
    for (std::size_t m = 0; m < mentions.size(); ++m) {
      if (!is_material(mentions[m].label) || coref.cluster_of[m] < 0) continue;
      if (mentions[m].sentence_index != value.sentence_index) continue;
      const std::size_t d = token_distance(mentions[m].token_begin, mentions[m].token_end, span_begin, span_end);
      const bool precedes = mentions[m].token_end <= span_begin;
      if (!best || d < best_dist || (d == best_dist && precedes && mentions[*best].token_end > span_begin)) {
        best = m;
        best_dist = d;
      }
    }
    if (best) {
      out.push_back({p, {coref.cluster_of[*best]}, RelationMode::SameSentence});
    } else if (!all_clusters.empty()) {
      out.push_back({p, all_clusters, RelationMode::WholeAbstract});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full per-document extraction

struct ExtractConfig {
  const PropertyRegistry* registry = nullptr;
  const NormalizationDictionary* normalization = nullptr;
  CorefConfig coref;
  std::size_t property_window = 10;
  std::size_t amount_window = 10;
  /// Named keyword sets; a record lists the sets whose phrases occur in its abstract.
  std::map<std::string, std::vector<std::string>> keyword_sets;
};

struct ExtractionResult {
  std::vector<MaterialPropertyRecord> records;
  std::vector<Diagnostic> diagnostics;
  std::vector<EntityMention> mentions;  // with cluster ids and normalized names
  bool passed_filter = false;
  std::size_t parse_failures = 0;
};

inline std::vector<std::string> matching_keyword_sets(std::string_view text,
                                                      const std::map<std::string, std::vector<std::string>>& sets) {
  std::vector<std::string> out;
  const std::string folded = text::fold_case(text);
  for (const auto& [name, phrases] : sets) {
    for (const auto& phrase : phrases) {
      if (folded.find(text::lookup_key(phrase)) != std::string::npos) {
        out.push_back(name);
        break;
      }
    }
  }
  return out;
}

/// Runs every extraction stage over one tagged document. Stage failures
/// become diagnostics; nothing here throws for content problems.
inline ExtractionResult extract_records(const Document& doc, std::span<const TokenSpan> tokens,
                                        std::span<const EntityLabel> labels, const ExtractConfig& config) {
  static const PropertyRegistry kEmptyRegistry;
  static const NormalizationDictionary kEmptyDictionary;
  const PropertyRegistry& registry = config.registry ? *config.registry : kEmptyRegistry;
  const NormalizationDictionary& dictionary = config.normalization ? *config.normalization : kEmptyDictionary;

  ExtractionResult result;
  auto diag = [&](std::string stage, std::string reason) {
    result.diagnostics.push_back({doc.doc_id, std::move(stage), std::move(reason)});
  };

  result.mentions = assemble_mentions(doc, tokens, labels);
  auto& mentions = result.mentions;
  if (!filter_by_entities(mentions)) {
    diag("filter_by_entities", "missing polymer-family material, property name or property value");
    return result;
  }
  result.passed_filter = true;

  // Coreference over material mentions.
  std::vector<std::size_t> material_idx;
  for (std::size_t i = 0; i < mentions.size(); ++i)
    if (is_material(mentions[i].label)) material_idx.push_back(i);
  std::vector<EntityMention> materials;
  for (std::size_t i : material_idx) materials.push_back(mentions[i]);

  std::vector<AbbreviationPair> abbreviations;
  if (config.coref.use_abbreviations) {
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      for (const auto& p : detect_abbreviations(doc.text, doc.sentences[s], materials)) {
        if (materials[p.long_mention].sentence_index == s) abbreviations.push_back(p);
      }
    }
  }
  CorefResult coref_local = coreference(materials, abbreviations, config.coref);

  // Normalize each cluster: representative first, then members by position.
  for (auto& c : coref_local.clusters) {
    auto n = normalize_name(c.representative, dictionary);
    if (!n.normalized) {
      for (std::size_t idx : c.members) {
        auto m = normalize_name(materials[idx].surface, dictionary);
        if (m.normalized) {
          n = m;
          break;
        }
      }
    }
    if (n.normalized) c.normalized_name = n.name;
  }
  // Lift cluster ids back onto the full mention list.
  CorefResult coref;
  coref.clusters = coref_local.clusters;
  coref.cluster_of.assign(mentions.size(), -1);
  for (std::size_t k = 0; k < material_idx.size(); ++k) {
    const int cid = coref_local.cluster_of[k];
    coref.cluster_of[material_idx[k]] = cid;
    mentions[material_idx[k]].cluster_id = cid;
    mentions[material_idx[k]].normalized_name = coref.clusters[static_cast<std::size_t>(cid)].normalized_name;
  }
  for (auto& c : coref.clusters) {
    for (auto& idx : c.members) idx = material_idx[idx];
    c.representative_mention = material_idx[c.representative_mention];
  }

  // Parse values; failures drop the mention from pairing.
  std::map<std::size_t, ParsedValue> parsed;
  std::vector<EntityMention> pairable;
  std::vector<std::size_t> pairable_idx;
  for (std::size_t i = 0; i < mentions.size(); ++i) {
    const auto& m = mentions[i];
    if (m.label == EntityLabel::PropertyValue || m.label == EntityLabel::MaterialAmount) {
      auto r = parse_property_value(m.surface);
      if (auto* f = std::get_if<ParseFailure>(&r)) {
        if (m.label == EntityLabel::PropertyValue) ++result.parse_failures;
        diag("parse_property_value", f->reason);
        continue;
      }
      parsed.emplace(i, std::get<ParsedValue>(std::move(r)));
    }
    pairable.push_back(m);
    pairable_idx.push_back(i);
  }

  PairingOutcome pairing = pair_property(pairable, config.property_window);
  for (auto& p : pairing.pairs) {
    p.name = pairable_idx[p.name];
    p.value = pairable_idx[p.value];
  }
  for (std::size_t v : pairing.unpaired_values)
    diag("pair_property", "no property name within window for '" + pairable[v].surface + "'");
  for (std::size_t n : pairing.shared_names)
    diag("pair_property", "multi_consumption: '" + pairable[n].surface + "' paired with several values");

  AmountOutcome amounts = associate_amount(pairable, config.amount_window);
  for (std::size_t a : amounts.unlinked)
    diag("associate_amount", "no material within window for '" + pairable[a].surface + "'");

  const auto keywords = matching_keyword_sets(doc.text, config.keyword_sets);

  for (const auto& rel : relate(mentions, coref, pairing.pairs)) {
    const auto& name = mentions[rel.pair.name];
    const auto& value_mention = mentions[rel.pair.value];
    MaterialPropertyRecord rec;
    rec.doc_id = doc.doc_id;
    rec.year = doc.year;
    rec.doi = doc.doi;
    rec.relation_mode = rel.mode;
    rec.property_raw = name.surface;
    rec.value_surface = value_mention.surface;
    rec.keywords = keywords;
    for (int cid : rel.clusters) {
      const auto& c = coref.clusters[static_cast<std::size_t>(cid)];
      rec.materials.push_back({c.representative, c.label, c.normalized_name, c.id});
    }

    ParsedValue value = parsed.at(rel.pair.value);
    if (const PropertySpec* spec = registry.resolve(name.surface, value.unit_raw)) {
      rec.property_canonical = spec->canonical_name;
      auto converted = convert_units(value, *spec);
      if (auto* u = std::get_if<UnconvertedUnit>(&converted)) {
        diag("convert_units", "unconverted unit '" + u->unit + "' for " + spec->canonical_name);
      } else {
        value = std::get<ParsedValue>(std::move(converted));
      }
    } else {
      rec.property_canonical = text::lookup_key(name.surface);
      diag("convert_units", "unknown property '" + name.surface + "'");
    }
    rec.value = std::move(value);

    // Amount linked to one of the record's clusters, nearest to the value.
    std::optional<std::size_t> best;
    std::size_t best_dist = 0;
    for (const auto& link : amounts.links) {
      const std::size_t a_idx = pairable_idx[link.amount];
      const std::size_t m_idx = pairable_idx[link.material];
      if (!parsed.count(a_idx)) continue;
      const int cid = coref.cluster_of[m_idx];
      if (std::find(rel.clusters.begin(), rel.clusters.end(), cid) == rel.clusters.end()) continue;
      const std::size_t d = token_distance(mentions[a_idx], value_mention);
      const bool precedes = mentions[a_idx].token_end <= value_mention.token_begin;
      if (!best || d < best_dist ||
          (d == best_dist && precedes && mentions[pairable_idx[amounts.links[*best].amount]].token_end >
                                             value_mention.token_begin)) {
        best = static_cast<std::size_t>(&link - amounts.links.data());
        best_dist = d;
      }
    }
    if (best) {
      const auto& link = amounts.links[*best];
      const std::size_t a_idx = pairable_idx[link.amount];
      const std::size_t m_idx = pairable_idx[link.material];
      const int cid = coref.cluster_of[m_idx];
      rec.amount = AmountLink{cid, coref.clusters[static_cast<std::size_t>(cid)].representative,
                              mentions[a_idx].surface, parsed.at(a_idx)};
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace polyrec
