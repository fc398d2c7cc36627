#pragma once

// Seeded generators for synthetic records and pre-tagged abstracts.

#include <array>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "marked_text.hpp"
#include "polyrec/polyrec.hpp"

namespace synth {

struct MaterialName {
  const char* surface;
  polyrec::EntityLabel label;
  const char* normalized;  // may be null
};

inline const std::vector<MaterialName>& material_pool() {
  using L = polyrec::EntityLabel;
  static const std::vector<MaterialName> pool = {
      {"polystyrene", L::Polymer, "polystyrene"},
      {"PS", L::Polymer, "polystyrene"},
      {"PMMA", L::Polymer, "poly(methyl methacrylate)"},
      {"polyethylene", L::Polymer, "polyethylene"},
      {"HDPE", L::Polymer, nullptr},
      {"PHA", L::Polymer, nullptr},
      {"pha", L::Polymer, nullptr},
      {"Nafion", L::Polymer, nullptr},
      {"PEO", L::Polymer, "poly(ethylene oxide)"},
      {"P3HT", L::Polymer, "poly(3-hexylthiophene)"},
      {"polyimide", L::PolymerClass, nullptr},
      {"epoxy", L::PolymerClass, nullptr},
      {"styrene", L::Monomer, nullptr},
      {"PCBM", L::OrganicMaterial, nullptr},
      {"SiO2", L::InorganicMaterial, nullptr},
      {"graphene", L::InorganicMaterial, nullptr},
  };
  return pool;
}

inline const std::vector<std::string>& property_pool() {
  static const std::vector<std::string> props = {
      "glass transition temperature", "melting temperature", "tensile strength", "elongation at break",
      "conductivity", "power conversion efficiency", "molecular weight", "fill factor"};
  return props;
}

inline const std::array<const char*, 3>& keyword_pool() {
  static const std::array<const char*, 3> k = {"fuel_cells", "solar_cells", "supercapacitors"};
  return k;
}

inline std::vector<polyrec::MaterialPropertyRecord> records(std::size_t n, std::uint64_t seed,
                                                            std::size_t n_docs = 0) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };
  if (n_docs == 0) n_docs = std::max<std::size_t>(1, n / 3);
  std::vector<polyrec::MaterialPropertyRecord> out;
  out.reserve(n);
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    polyrec::MaterialPropertyRecord r;
    const std::size_t doc = pick(n_docs);
    std::snprintf(id, sizeof id, "d%05zu", doc);
    r.doc_id = id;
    if (pick(10) != 0) r.year = 1995 + static_cast<int>(doc % 30);
    r.doi = "10.1/" + r.doc_id;
    const std::size_t n_mat = 1 + pick(pick(4) == 0 ? 3 : 1);
    for (std::size_t m = 0; m < n_mat; ++m) {
      const auto& name = material_pool()[pick(material_pool().size())];
      polyrec::RecordMaterial rm;
      rm.surface = name.surface;
      rm.label = name.label;
      if (name.normalized) rm.normalized = name.normalized;
      rm.cluster = static_cast<int>(m + pick(2));
      r.materials.push_back(rm);
    }
    r.property_canonical = property_pool()[pick(property_pool().size())];
    r.property_raw = r.property_canonical;
    r.value.numeric = static_cast<double>(pick(100000)) / 100.0;
    r.value.unit_raw = "u";
    if (pick(10) != 0) {
      r.value.canonical_numeric = r.value.numeric;
      r.value.unit_canonical = "u";
    }
    r.value_surface = std::to_string(r.value.numeric) + " u";
    r.relation_mode = r.materials.size() == 1 ? polyrec::RelationMode::SameSentence
                                              : polyrec::RelationMode::WholeAbstract;
    for (const char* k : keyword_pool())
      if (pick(4) == 0) r.keywords.push_back(k);
    out.push_back(std::move(r));
  }
  return out;
}

inline polyrec::RecordFilter random_filter(std::mt19937_64& rng) {
  auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };
  polyrec::RecordFilter f;
  if (pick(2)) f.property = property_pool()[pick(property_pool().size())];
  if (pick(3) == 0) {
    const auto& m = material_pool()[pick(material_pool().size())];
    f.material = (m.normalized && pick(2)) ? m.normalized : m.surface;
    if (pick(3) == 0) f.material = polyrec::text::fold_case(*f.material);
  }
  if (pick(3) == 0) {
    double a = static_cast<double>(pick(1000));
    double b = static_cast<double>(pick(1000));
    if (a > b) std::swap(a, b);
    f.value_range = polyrec::ValueRange{a, b};
  }
  if (pick(3) == 0) f.year_min = 1995 + static_cast<int>(pick(30));
  if (pick(3) == 0) f.year_max = std::max(f.year_min.value_or(1995), 1995 + static_cast<int>(pick(30)));
  if (pick(4) == 0) f.composition = static_cast<polyrec::CompositionClass>(pick(3));
  if (pick(4) == 0) f.keyword = keyword_pool()[pick(3)];
  return f;
}

// Abstracts in inline marker form; every word is in data/vocab.txt.
inline std::string marked_abstract(std::mt19937_64& rng) {
  auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };
  static const char* polymers[] = {"polystyrene", "PMMA", "polyethylene", "polypropylene", "PEO", "polyaniline"};
  static const char* fillers[] = {"SiO2", "graphene", "TiO2"};
  struct Prop {
    const char* name;
    const char* values[3];
  };
  static const Prop props[] = {
      {"glass transition temperature", {"105 °C", "378 K", "95 ± 2 °C"}},
      {"tensile strength", {"45 MPa", "0.1 GPa", "30 ± 3 MPa"}},
      {"melting temperature", {"150–165 °C", "433.15 K", "135 °C"}},
      {"elongation at break", {"120 %", "15 %", "300 %"}},
  };
  std::string s;
  const std::size_t sentences = 2 + pick(3);
  for (std::size_t i = 0; i < sentences; ++i) {
    const auto& p = props[pick(4)];
    const char* poly = polymers[pick(6)];
    switch (pick(3)) {
      case 0:
        s += std::string("The [[PN|") + p.name + "]] of [[P|" + poly + "]] was [[PV|" + p.values[pick(3)] + "]]. ";
        break;
      case 1:
        s += std::string("[[P|") + poly + "]] films with [[AMT|5 wt%]] [[IM|" + fillers[pick(3)] + "]] reached a [[PN|" +
             p.name + "]] of [[PV|" + p.values[pick(3)] + "]]. ";
        break;
      default:
        s += std::string("A [[PN|") + p.name + "]] of [[PV|" + p.values[pick(3)] + "]] was studied. ";
        break;
    }
  }
  s.pop_back();
  return s;
}

inline std::vector<polyrec::TaggedDocument> tagged_corpus(std::size_t n, std::uint64_t seed,
                                                          const polyrec::Vocabulary& vocab) {
  std::mt19937_64 rng(seed);
  const polyrec::WordpieceTokenizer tokenizer(vocab);
  std::vector<polyrec::TaggedDocument> docs;
  docs.reserve(n);
  char id[32];
  for (std::size_t i = 0; i < n; ++i) {
    const auto marked = fixture::parse_marked(marked_abstract(rng));
    std::snprintf(id, sizeof id, "s%05zu", i);
    polyrec::RawDocument raw{id, "", marked.markup, 2000 + static_cast<int>(i % 25), std::nullopt};
    polyrec::TaggedDocument d;
    d.doc = polyrec::preprocess(raw);
    d.tokens = tokenizer.tokenize(d.doc.text);
    d.labels = fixture::label_tokens(marked, d.tokens);
    docs.push_back(std::move(d));
  }
  return docs;
}

}  // namespace synth
