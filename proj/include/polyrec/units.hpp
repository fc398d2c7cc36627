#pragma once

// Property registry: canonical property names, their synonyms, canonical
// units and the affine conversions into them.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "polyrec/error.hpp"
#include "polyrec/quantity.hpp"
#include "polyrec/text.hpp"

namespace polyrec {

/// canonical = scale * value + offset
struct AffineTransform {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double v) const noexcept { return scale * v + offset; }
  double invert(double v) const noexcept { return (v - offset) / scale; }
  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

struct PropertySpec {
  std::string canonical_name;
  std::set<std::string> synonyms;  // lookup keys (case-folded, collapsed)
  std::string canonical_unit;
  std::map<std::string, AffineTransform> conversions;  // normalized unit key -> transform

  const AffineTransform* find_conversion(std::string_view raw_unit) const {
    auto it = conversions.find(normalize_unit(raw_unit));
    return it == conversions.end() ? nullptr : &it->second;
  }
};

struct UnconvertedUnit {
  std::string unit;
};

using ConversionResult = std::variant<ParsedValue, UnconvertedUnit>;

/// Fills the canonical fields of `parsed` using `spec`.
inline ConversionResult convert_units(ParsedValue parsed, const PropertySpec& spec) {
  const AffineTransform* t = spec.find_conversion(parsed.unit_raw);
  if (!t) return UnconvertedUnit{parsed.unit_raw};
  parsed.unit_canonical = spec.canonical_unit;
  parsed.canonical_numeric = t->apply(parsed.numeric);
  if (parsed.error) parsed.canonical_error = std::fabs(t->scale) * *parsed.error;
  if (parsed.range) {
    double lo = t->apply(parsed.range->lo);
    double hi = t->apply(parsed.range->hi);
    if (lo > hi) std::swap(lo, hi);
    parsed.canonical_range = ValueRange{lo, hi};
  }
  return parsed;
}

class PropertyRegistry {
 public:
  PropertyRegistry() = default;

  void add(PropertySpec spec) {
    const std::string canonical_key = normalize_unit(spec.canonical_unit);
    std::map<std::string, AffineTransform> normalized;
    for (const auto& [unit, t] : spec.conversions) {
      if (t.scale == 0.0) throw ConfigError("property '" + spec.canonical_name + "': zero scale for unit " + unit);
      normalized[normalize_unit(unit)] = t;
    }
    auto it = normalized.find(canonical_key);
    if (it == normalized.end()) {
      normalized[canonical_key] = AffineTransform{};
    } else if (!(it->second == AffineTransform{})) {
      throw ConfigError("property '" + spec.canonical_name + "': canonical unit must convert with (1, 0)");
    }
    spec.conversions = std::move(normalized);
    std::set<std::string> keys;
    for (const auto& s : spec.synonyms) keys.insert(text::lookup_key(s));
    keys.insert(text::lookup_key(spec.canonical_name));
    spec.synonyms = std::move(keys);
    const std::size_t index = specs_.size();
    for (const auto& k : spec.synonyms) synonym_index_[k].push_back(index);
    specs_.push_back(std::move(spec));
  }

  /// Specs whose synonyms include `property_name`, in registry order.
  std::vector<const PropertySpec*> lookup(std::string_view property_name) const {
    std::vector<const PropertySpec*> out;
    auto it = synonym_index_.find(text::lookup_key(property_name));
    if (it == synonym_index_.end()) return out;
    for (std::size_t i : it->second) out.push_back(&specs_[i]);
    return out;
  }

  /// The spec that names this property and understands the unit; falls back
  /// to the first spec for the name when none converts the unit.
  const PropertySpec* resolve(std::string_view property_name, std::string_view raw_unit) const {
    const auto candidates = lookup(property_name);
    if (candidates.empty()) return nullptr;
    for (const auto* spec : candidates)
      if (spec->find_conversion(raw_unit)) return spec;
    return candidates.front();
  }

  const PropertySpec* by_canonical_name(std::string_view name) const {
    for (const auto& s : specs_)
      if (s.canonical_name == name) return &s;
    return nullptr;
  }

  const std::vector<PropertySpec>& specs() const noexcept { return specs_; }
  const std::vector<std::string>& amount_units() const noexcept { return amount_units_; }
  void add_amount_unit(std::string unit) { amount_units_.push_back(std::move(unit)); }

  /// Every raw unit spelling listed in the registry (for the tagger lexicon).
  std::set<std::string> value_unit_keys() const {
    std::set<std::string> out;
    for (const auto& s : specs_)
      for (const auto& [key, _] : s.conversions) out.insert(key);
    return out;
  }

  /// Layout:
  /// {"properties": [{"name", "synonyms": [...], "canonical_unit",
  ///                  "conversions": {"<unit>": {"scale", "offset"}}}],
  ///  "amount_units": [...]}
  static PropertyRegistry from_json(const nlohmann::json& j) {
    PropertyRegistry reg;
    try {
      for (const auto& pj : j.at("properties")) {
        PropertySpec spec;
        spec.canonical_name = pj.at("name").get<std::string>();
        spec.canonical_unit = pj.at("canonical_unit").get<std::string>();
        if (pj.contains("synonyms"))
          for (const auto& s : pj.at("synonyms")) spec.synonyms.insert(s.get<std::string>());
        if (pj.contains("conversions")) {
          for (const auto& [unit, tj] : pj.at("conversions").items()) {
            AffineTransform t;
            t.scale = tj.at("scale").get<double>();
            t.offset = tj.contains("offset") ? tj.at("offset").get<double>() : 0.0;
            spec.conversions[unit] = t;
          }
        }
        reg.add(std::move(spec));
      }
      if (j.contains("amount_units"))
        for (const auto& u : j.at("amount_units")) reg.add_amount_unit(u.get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("unit registry: ") + e.what());
    }
    return reg;
  }

  static PropertyRegistry load(const std::string& path) {
    try {
      return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("unit registry " + path + ": " + e.what());
    }
  }

 private:
  std::vector<PropertySpec> specs_;
  std::map<std::string, std::vector<std::size_t>> synonym_index_;
  std::vector<std::string> amount_units_;
};

}  // namespace polyrec
