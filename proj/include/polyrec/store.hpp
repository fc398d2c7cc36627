#pragma once

// Record persistence (JSON lines), composition classes, aggregate views and
// indexed queries over extracted material property records.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "json.hpp"

#include "polyrec/error.hpp"
#include "polyrec/extract.hpp"
#include "polyrec/labels.hpp"
#include "polyrec/text.hpp"

namespace polyrec {

enum class CompositionClass { Neat, Blend, Composite };

constexpr std::string_view to_string(CompositionClass c) noexcept {
  switch (c) {
    case CompositionClass::Neat: return "NEAT";
    case CompositionClass::Blend: return "BLEND";
    case CompositionClass::Composite: return "COMPOSITE";
  }
  return "NEAT";
}

inline std::optional<CompositionClass> parse_composition_class(std::string_view s) {
  const auto key = text::fold_case(s);
  if (key == "neat") return CompositionClass::Neat;
  if (key == "blend") return CompositionClass::Blend;
  if (key == "composite") return CompositionClass::Composite;
  return std::nullopt;
}

/// COMPOSITE if any material cluster is not POLYMER/POLYMER_CLASS, BLEND
/// if two or more clusters are POLYMER, NEAT otherwise.
inline CompositionClass classify_record(const MaterialPropertyRecord& record) {
  std::size_t polymers = 0;
  for (const auto& m : record.materials) {
    if (m.label != EntityLabel::Polymer && m.label != EntityLabel::PolymerClass) return CompositionClass::Composite;
    if (m.label == EntityLabel::Polymer) ++polymers;
  }
  return polymers >= 2 ? CompositionClass::Blend : CompositionClass::Neat;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using ojson = nlohmann::ordered_json;

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

inline ojson range_json(const std::optional<ValueRange>& r) {
  return r ? ojson::array({r->lo, r->hi}) : ojson(nullptr);
}

inline ojson value_json(const ParsedValue& v) {
  ojson j;
  j["numeric"] = v.numeric;
  j["unit_raw"] = v.unit_raw;
  j["canonical_numeric"] = optional_json(v.canonical_numeric);
  j["unit_canonical"] = optional_json(v.unit_canonical);
  j["error"] = optional_json(v.error);
  j["range"] = range_json(v.range);
  j["canonical_error"] = optional_json(v.canonical_error);
  j["canonical_range"] = range_json(v.canonical_range);
  return j;
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline std::optional<ValueRange> range_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw SchemaError(std::string("range field '") + key + "' must be [lo, hi]");
  return ValueRange{a.at(0).get<double>(), a.at(1).get<double>()};
}

inline ParsedValue value_from(const nlohmann::json& j) {
  ParsedValue v;
  v.numeric = j.at("numeric").get<double>();
  v.unit_raw = j.at("unit_raw").get<std::string>();
  v.canonical_numeric = optional_from<double>(j, "canonical_numeric");
  v.unit_canonical = optional_from<std::string>(j, "unit_canonical");
  v.error = optional_from<double>(j, "error");
  v.range = range_from(j, "range");
  v.canonical_error = optional_from<double>(j, "canonical_error");
  v.canonical_range = range_from(j, "canonical_range");
  return v;
}

}  // namespace detail

inline nlohmann::ordered_json record_to_json(const MaterialPropertyRecord& r) {
  using detail::ojson;
  ojson j;
  j["doc_id"] = r.doc_id;
  j["year"] = detail::optional_json(r.year);
  j["doi"] = detail::optional_json(r.doi);
  auto materials = ojson::array();
  for (const auto& m : r.materials) {
    ojson mj;
    mj["surface"] = m.surface;
    mj["label"] = std::string(to_string(m.label));
    mj["normalized"] = detail::optional_json(m.normalized);
    mj["cluster"] = m.cluster;
    materials.push_back(std::move(mj));
  }
  j["materials"] = std::move(materials);
  j["property_raw"] = r.property_raw;
  j["property_canonical"] = r.property_canonical;
  j["value_surface"] = r.value_surface;
  j["value"] = detail::value_json(r.value);
  if (r.amount) {
    ojson aj;
    aj["material_cluster"] = r.amount->material_cluster;
    aj["material_surface"] = r.amount->material_surface;
    aj["surface"] = r.amount->surface;
    aj["value"] = detail::value_json(r.amount->value);
    j["amount"] = std::move(aj);
  } else {
    j["amount"] = nullptr;
  }
  j["relation_mode"] = std::string(to_string(r.relation_mode));
  j["composition_class"] = std::string(to_string(classify_record(r)));
  j["keywords"] = r.keywords;
  return j;
}

inline MaterialPropertyRecord record_from_json(const nlohmann::json& j) {
  MaterialPropertyRecord r;
  try {
    r.doc_id = j.at("doc_id").get<std::string>();
    r.year = detail::optional_from<int>(j, "year");
    r.doi = detail::optional_from<std::string>(j, "doi");
    for (const auto& mj : j.at("materials")) {
      RecordMaterial m;
      m.surface = mj.at("surface").get<std::string>();
      m.label = parse_label_or_throw(mj.at("label").get<std::string>());
      m.normalized = detail::optional_from<std::string>(mj, "normalized");
      m.cluster = mj.at("cluster").get<int>();
      r.materials.push_back(std::move(m));
    }
    r.property_raw = j.at("property_raw").get<std::string>();
    r.property_canonical = j.at("property_canonical").get<std::string>();
    if (j.contains("value_surface")) r.value_surface = j.at("value_surface").get<std::string>();
    r.value = detail::value_from(j.at("value"));
    if (j.contains("amount") && !j.at("amount").is_null()) {
      const auto& aj = j.at("amount");
      r.amount = AmountLink{aj.at("material_cluster").get<int>(), aj.at("material_surface").get<std::string>(),
                            aj.at("surface").get<std::string>(), detail::value_from(aj.at("value"))};
    }
    const auto mode = j.at("relation_mode").get<std::string>();
    if (mode == "SAME_SENTENCE")
      r.relation_mode = RelationMode::SameSentence;
    else if (mode == "WHOLE_ABSTRACT")
      r.relation_mode = RelationMode::WholeAbstract;
    else
      throw SchemaError("unknown relation_mode '" + mode + "'");
    if (j.contains("keywords"))
      for (const auto& k : j.at("keywords")) r.keywords.push_back(k.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed record: ") + e.what());
  }
  if (r.materials.empty()) throw SchemaError("record for doc " + r.doc_id + " has no materials");
  return r;
}

inline std::string records_to_jsonl(std::span<const MaterialPropertyRecord> records) {
  std::string out;
  for (const auto& r : records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline std::vector<MaterialPropertyRecord> load_records(const std::string& path) {
  std::vector<MaterialPropertyRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : read_jsonl_lines(path)) {
    ++line_no;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregates

/// Distinct normalized polymer names plus distinct case-folded raw names of
/// polymers without a normalized name, over NEAT records.
inline std::size_t count_unique_polymers(std::span<const MaterialPropertyRecord> records) {
  std::set<std::string> normalized;
  std::set<std::string> raw;
  for (const auto& r : records) {
    if (classify_record(r) != CompositionClass::Neat) continue;
    for (const auto& m : r.materials) {
      if (m.label != EntityLabel::Polymer) continue;
      if (m.normalized)
        normalized.insert(*m.normalized);
      else
        raw.insert(text::lookup_key(m.surface));
    }
  }
  return normalized.size() + raw.size();
}

struct PropertyCount {
  std::string property;
  std::size_t count = 0;
  friend bool operator==(const PropertyCount&, const PropertyCount&) = default;
};

/// Records per canonical property, most frequent first (ties by name),
/// keeping properties with at least `min_count` records.
inline std::vector<PropertyCount> property_histogram(std::span<const MaterialPropertyRecord> records,
                                                     std::size_t min_count = 0) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.property_canonical];
  std::vector<PropertyCount> out;
  for (const auto& [p, c] : counts)
    if (c >= min_count) out.push_back({p, c});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.count > b.count; });
  return out;
}

struct CompositionCounts {
  std::size_t neat = 0;
  std::size_t blend = 0;
  std::size_t composite = 0;
  std::size_t total() const noexcept { return neat + blend + composite; }
  friend bool operator==(const CompositionCounts&, const CompositionCounts&) = default;
};

inline CompositionCounts composition_counts(std::span<const MaterialPropertyRecord> records) {
  CompositionCounts c;
  for (const auto& r : records) {
    switch (classify_record(r)) {
      case CompositionClass::Neat: ++c.neat; break;
      case CompositionClass::Blend: ++c.blend; break;
      case CompositionClass::Composite: ++c.composite; break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Query

struct RecordFilter {
  std::optional<std::string> property;  // canonical name, case-insensitive
  std::optional<std::string> material;  // normalized or surface name, case-insensitive
  std::optional<ValueRange> value_range;  // on canonical_numeric
  std::optional<int> year_min;
  std::optional<int> year_max;
  std::optional<CompositionClass> composition;
  std::optional<std::string> keyword;  // keyword set name, case-insensitive

  void validate() const {
    if (value_range && value_range->lo > value_range->hi) throw InvalidArgument("value range has lo > hi");
    if (year_min && year_max && *year_min > *year_max) throw InvalidArgument("year range has min > max");
  }

  bool empty() const noexcept {
    return !property && !material && !value_range && !year_min && !year_max && !composition && !keyword;
  }
};

inline std::vector<std::string> material_keys(const MaterialPropertyRecord& r) {
  std::vector<std::string> keys;
  for (const auto& m : r.materials) {
    keys.push_back(text::lookup_key(m.surface));
    if (m.normalized) keys.push_back(text::lookup_key(*m.normalized));
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

/// The predicate every query path must agree with.
inline bool matches(const MaterialPropertyRecord& r, const RecordFilter& f) {
  if (f.property && text::lookup_key(r.property_canonical) != text::lookup_key(*f.property)) return false;
  if (f.material) {
    const auto keys = material_keys(r);
    if (!std::binary_search(keys.begin(), keys.end(), text::lookup_key(*f.material))) return false;
  }
  if (f.value_range) {
    if (!r.value.canonical_numeric) return false;
    const double v = *r.value.canonical_numeric;
    if (v < f.value_range->lo || v > f.value_range->hi) return false;
  }
  if (f.year_min && (!r.year || *r.year < *f.year_min)) return false;
  if (f.year_max && (!r.year || *r.year > *f.year_max)) return false;
  if (f.composition && classify_record(r) != *f.composition) return false;
  if (f.keyword) {
    const auto want = text::lookup_key(*f.keyword);
    bool hit = false;
    for (const auto& k : r.keywords) hit = hit || text::lookup_key(k) == want;
    if (!hit) return false;
  }
  return true;
}

/// Result order: year descending (unknown years last), then doc_id, then
/// insertion order.
inline bool result_order_less(const MaterialPropertyRecord& a, std::size_t ia, const MaterialPropertyRecord& b,
                              std::size_t ib) {
  const int ya = a.year.value_or(-1);
  const int yb = b.year.value_or(-1);
  if (ya != yb) return ya > yb;
  if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
  return ia < ib;
}

struct QueryPage {
  std::size_t total = 0;
  std::size_t page = 1;
  std::size_t page_size = 0;
  std::vector<const MaterialPropertyRecord*> records;
};

inline void validate_paging(std::size_t page, std::size_t page_size) {
  if (page_size < 1 || page_size > 1000) throw InvalidArgument("page_size must be in [1, 1000]");
  if (page < 1) throw InvalidArgument("page must be >= 1");
}

/// Immutable record set with indexes by canonical property, material name
/// and year. Build once; share across readers.
class RecordStore {
 public:
  RecordStore() = default;
  explicit RecordStore(std::vector<MaterialPropertyRecord> records) { append(std::move(records)); }

  static RecordStore load(const std::string& path) { return RecordStore(load_records(path)); }

  /// Appends a batch and rebuilds the indexes.
  void append(std::vector<MaterialPropertyRecord> batch) {
    for (auto& r : batch) records_.push_back(std::move(r));
    rebuild();
  }

  const std::vector<MaterialPropertyRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  /// Positions (in result order) of records matching `filter`.
  std::vector<std::size_t> select(const RecordFilter& filter) const {
    filter.validate();
    const std::vector<std::size_t>* candidates = &all_ranks_;
    std::vector<std::size_t> year_candidates;
    auto consider = [&](const std::vector<std::size_t>* c) {
      if (c->size() < candidates->size()) candidates = c;
    };
    static const std::vector<std::size_t> kNone;
    if (filter.property) {
      auto it = by_property_.find(text::lookup_key(*filter.property));
      consider(it == by_property_.end() ? &kNone : &it->second);
    }
    if (filter.material) {
      auto it = by_material_.find(text::lookup_key(*filter.material));
      consider(it == by_material_.end() ? &kNone : &it->second);
    }
    if (filter.year_min || filter.year_max) {
      auto lo = filter.year_min ? by_year_.lower_bound(*filter.year_min) : by_year_.begin();
      auto hi = filter.year_max ? by_year_.upper_bound(*filter.year_max) : by_year_.end();
      for (auto it = lo; it != hi; ++it) year_candidates.insert(year_candidates.end(), it->second.begin(), it->second.end());
      std::sort(year_candidates.begin(), year_candidates.end());
      consider(&year_candidates);
    }
    std::vector<std::size_t> out;
    for (std::size_t rank : *candidates)
      if (matches(records_[order_[rank]], filter)) out.push_back(rank);
    return out;
  }

  QueryPage query(const RecordFilter& filter, std::size_t page, std::size_t page_size) const {
    validate_paging(page, page_size);
    const auto ranks = select(filter);
    QueryPage result;
    result.total = ranks.size();
    result.page = page;
    result.page_size = page_size;
    const std::size_t first = (page - 1) * page_size;
    for (std::size_t k = first; k < ranks.size() && k < first + page_size; ++k)
      result.records.push_back(&records_[order_[ranks[k]]]);
    return result;
  }

  std::vector<MaterialPropertyRecord> filtered(const RecordFilter& filter) const {
    std::vector<MaterialPropertyRecord> out;
    for (std::size_t rank : select(filter)) out.push_back(records_[order_[rank]]);
    return out;
  }

  bool has_property(std::string_view canonical_name) const {
    return by_property_.count(text::lookup_key(canonical_name)) > 0;
  }

 private:
  void rebuild() {
    order_.resize(records_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return result_order_less(records_[a], a, records_[b], b);
    });
    all_ranks_.resize(records_.size());
    std::iota(all_ranks_.begin(), all_ranks_.end(), std::size_t{0});
    by_property_.clear();
    by_material_.clear();
    by_year_.clear();
    for (std::size_t rank = 0; rank < order_.size(); ++rank) {
      const auto& r = records_[order_[rank]];
      by_property_[text::lookup_key(r.property_canonical)].push_back(rank);
      for (const auto& key : material_keys(r)) by_material_[key].push_back(rank);
      if (r.year) by_year_[*r.year].push_back(rank);
    }
  }

  std::vector<MaterialPropertyRecord> records_;
  std::vector<std::size_t> order_;      // rank -> record index
  std::vector<std::size_t> all_ranks_;  // 0..n-1
  std::map<std::string, std::vector<std::size_t>> by_property_;
  std::map<std::string, std::vector<std::size_t>> by_material_;
  std::map<int, std::vector<std::size_t>> by_year_;
};

/// Records per publication year; records without a year are counted under
/// std::nullopt ("unknown").
inline std::map<std::optional<int>, std::size_t> yearly_counts(std::span<const MaterialPropertyRecord> records,
                                                               const RecordFilter& filter = {}) {
  filter.validate();
  std::map<std::optional<int>, std::size_t> out;
  for (const auto& r : records)
    if (matches(r, filter)) ++out[r.year];
  return out;
}

// ---------------------------------------------------------------------------
// Scatter pairs

enum class ScatterScope { SameRecordMaterials, SameDocument };

inline std::optional<ScatterScope> parse_scatter_scope(std::string_view s) {
  const auto key = text::fold_case(s);
  if (key == "same_record_materials") return ScatterScope::SameRecordMaterials;
  if (key == "same_document") return ScatterScope::SameDocument;
  return std::nullopt;
}

constexpr std::string_view to_string(ScatterScope s) noexcept {
  return s == ScatterScope::SameRecordMaterials ? "SAME_RECORD_MATERIALS" : "SAME_DOCUMENT";
}

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string doc_id;
  std::optional<int> year;
  friend bool operator==(const ScatterPoint&, const ScatterPoint&) = default;
};

class UnknownProperty : public Error {
 public:
  using Error::Error;
};

/// One (x, y) point per scope key holding canonical values of both
/// properties; the first record of each property (insertion order) is used.
inline std::vector<ScatterPoint> scatter_pairs(std::span<const MaterialPropertyRecord> records,
                                               std::string_view prop_x, std::string_view prop_y, ScatterScope scope) {
  const auto key_x = text::lookup_key(prop_x);
  const auto key_y = text::lookup_key(prop_y);
  bool seen_x = false;
  bool seen_y = false;
  for (const auto& r : records) {
    const auto k = text::lookup_key(r.property_canonical);
    seen_x = seen_x || k == key_x;
    seen_y = seen_y || k == key_y;
  }
  if (!seen_x) throw UnknownProperty("unknown property: " + std::string(prop_x));
  if (!seen_y) throw UnknownProperty("unknown property: " + std::string(prop_y));

  using Key = std::pair<std::string, std::vector<int>>;
  struct Slot {
    std::optional<std::size_t> x;
    std::optional<std::size_t> y;
    std::size_t first_seen = 0;
  };
  std::map<Key, Slot> slots;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.value.canonical_numeric) continue;
    const auto k = text::lookup_key(r.property_canonical);
    const bool is_x = k == key_x;
    const bool is_y = k == key_y;
    if (!is_x && !is_y) continue;
    Key key{r.doc_id, {}};
    if (scope == ScatterScope::SameRecordMaterials) {
      for (const auto& m : r.materials) key.second.push_back(m.cluster);
      std::sort(key.second.begin(), key.second.end());
    }
    auto [it, inserted] = slots.try_emplace(std::move(key));
    if (inserted) it->second.first_seen = i;
    if (is_x && !it->second.x) it->second.x = i;
    if (is_y && !it->second.y && !(is_x && key_x == key_y && it->second.x == i)) it->second.y = i;
  }
  std::vector<std::pair<std::size_t, ScatterPoint>> ordered;
  for (const auto& [key, slot] : slots) {
    if (!slot.x || !slot.y) continue;
    const auto& rx = records[*slot.x];
    const auto& ry = records[*slot.y];
    ordered.push_back({slot.first_seen, {*rx.value.canonical_numeric, *ry.value.canonical_numeric, rx.doc_id, rx.year}});
  }
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<ScatterPoint> out;
  for (auto& [_, p] : ordered) out.push_back(std::move(p));
  return out;
}

// ---------------------------------------------------------------------------
// CSV exports (header row first)

namespace detail {
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string csv_number(double v) {
  nlohmann::json j = v;
  return j.dump();
}
}  // namespace detail

inline std::string histogram_csv(std::span<const PropertyCount> histogram) {
  std::string out = "property,count\n";
  for (const auto& h : histogram) out += detail::csv_field(h.property) + "," + std::to_string(h.count) + "\n";
  return out;
}

inline std::string yearly_csv(const std::map<std::optional<int>, std::size_t>& counts) {
  std::string out = "year,count\n";
  for (const auto& [year, count] : counts)
    out += (year ? std::to_string(*year) : std::string("unknown")) + "," + std::to_string(count) + "\n";
  return out;
}

inline std::string scatter_csv(std::span<const ScatterPoint> points) {
  std::string out = "x,y,doc_id,year\n";
  for (const auto& p : points)
    out += detail::csv_number(p.x) + "," + detail::csv_number(p.y) + "," + detail::csv_field(p.doc_id) + "," +
           (p.year ? std::to_string(*p.year) : std::string()) + "\n";
  return out;
}

}  // namespace polyrec
