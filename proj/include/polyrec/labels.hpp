#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "polyrec/error.hpp"

namespace polyrec {

/// Entity ontology. OTHER is the default for untagged tokens.
enum class EntityLabel {
  Other,
  Polymer,
  PolymerClass,
  Monomer,
  OrganicMaterial,
  InorganicMaterial,
  MaterialAmount,
  PropertyName,
  PropertyValue,
};

inline constexpr std::array<EntityLabel, 9> kAllLabels = {
    EntityLabel::Other,           EntityLabel::Polymer,           EntityLabel::PolymerClass,
    EntityLabel::Monomer,         EntityLabel::OrganicMaterial,   EntityLabel::InorganicMaterial,
    EntityLabel::MaterialAmount,  EntityLabel::PropertyName,      EntityLabel::PropertyValue,
};

constexpr std::string_view to_string(EntityLabel label) noexcept {
  switch (label) {
    case EntityLabel::Other: return "OTHER";
    case EntityLabel::Polymer: return "POLYMER";
    case EntityLabel::PolymerClass: return "POLYMER_CLASS";
    case EntityLabel::Monomer: return "MONOMER";
    case EntityLabel::OrganicMaterial: return "ORGANIC_MATERIAL";
    case EntityLabel::InorganicMaterial: return "INORGANIC_MATERIAL";
    case EntityLabel::MaterialAmount: return "MATERIAL_AMOUNT";
    case EntityLabel::PropertyName: return "PROPERTY_NAME";
    case EntityLabel::PropertyValue: return "PROPERTY_VALUE";
  }
  return "OTHER";
}

/// Accepts the canonical names plus the POLYMER_FAMILY alias.
inline std::optional<EntityLabel> parse_label(std::string_view name) noexcept {
  if (name == "POLYMER_FAMILY") return EntityLabel::PolymerClass;
  for (auto label : kAllLabels) {
    if (to_string(label) == name) return label;
  }
  return std::nullopt;
}

inline EntityLabel parse_label_or_throw(std::string_view name) {
  if (auto label = parse_label(name)) return *label;
  throw SchemaError("unknown entity label: " + std::string(name));
}

constexpr bool is_material(EntityLabel label) noexcept {
  switch (label) {
    case EntityLabel::Polymer:
    case EntityLabel::PolymerClass:
    case EntityLabel::Monomer:
    case EntityLabel::OrganicMaterial:
    case EntityLabel::InorganicMaterial:
      return true;
    default:
      return false;
  }
}

/// Labels that let an abstract through the entity filter on the material side.
constexpr bool is_polymer_family(EntityLabel label) noexcept {
  return label == EntityLabel::Polymer || label == EntityLabel::PolymerClass ||
         label == EntityLabel::Monomer;
}

}  // namespace polyrec
