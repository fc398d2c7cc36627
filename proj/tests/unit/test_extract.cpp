#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "fixtures.hpp"
#include "marked_text.hpp"
#include "oracles.hpp"
#include "polyrec/polyrec.hpp"
#include "synth.hpp"

using namespace polyrec;
using L = EntityLabel;

namespace {

struct Resources {
  Vocabulary vocab = Vocabulary::load(fixture::data_path("vocab.txt"));
  PropertyRegistry registry = PropertyRegistry::load(fixture::data_path("units.json"));
  NormalizationDictionary normalization = NormalizationDictionary::load(fixture::data_path("normalization.json"));

  ExtractConfig config() const {
    ExtractConfig c;
    c.registry = &registry;
    c.normalization = &normalization;
    return c;
  }
};

const Resources& res() {
  static const Resources r;
  return r;
}

struct Tagged {
  Document doc;
  std::vector<TokenSpan> tokens;
  std::vector<L> labels;
  std::vector<EntityMention> mentions;
};

Tagged tag_marked(const std::string& marked) {
  const auto m = fixture::parse_marked(marked);
  Tagged t;
  t.doc = preprocess(RawDocument{"d", "", m.markup, 2020, std::nullopt});
  t.tokens = wordpiece_tokenize(t.doc.text, res().vocab);
  t.labels = fixture::label_tokens(m, t.tokens);
  t.mentions = assemble_mentions(t.doc, t.tokens, t.labels);
  return t;
}

ExtractionResult extract(const std::string& marked) {
  const auto t = tag_marked(marked);
  return extract_records(t.doc, t.tokens, t.labels, res().config());
}

EntityMention mention(L label, std::string surface, std::size_t start) {
  EntityMention m;
  m.label = label;
  m.surface = std::move(surface);
  m.start = start;
  m.end = start + m.surface.size();
  m.token_begin = start;
  m.token_end = start + 1;
  return m;
}

std::string sub(const std::string& s, std::size_t b, std::size_t e) { return s.substr(b, e - b); }

}  // namespace

// ---------------------------------------------------------------------------
// Filter

TEST(FilterByEntities, Rule) {
  auto ms = [](std::initializer_list<L> ls) {
    std::vector<EntityMention> out;
    for (auto l : ls) out.push_back(mention(l, "x", out.size() * 2));
    return out;
  };
  EXPECT_TRUE(filter_by_entities(ms({L::Polymer, L::PropertyName, L::PropertyValue})));
  EXPECT_TRUE(filter_by_entities(ms({L::Monomer, L::PropertyName, L::PropertyValue})));
  EXPECT_TRUE(filter_by_entities(ms({L::PolymerClass, L::PropertyName, L::PropertyValue})));
  EXPECT_FALSE(filter_by_entities(ms({L::Polymer})));
  EXPECT_FALSE(filter_by_entities(ms({L::InorganicMaterial, L::PropertyName, L::PropertyValue})));
  EXPECT_FALSE(filter_by_entities(ms({L::Polymer, L::PropertyValue})));
}

// ---------------------------------------------------------------------------
// Levenshtein and abbreviations

TEST(Levenshtein, Examples) {
  EXPECT_EQ(levenshtein("PLA", "PLAs"), 1u);
  EXPECT_EQ(levenshtein("polyethylene", "polypropylene"), 4u);
  EXPECT_EQ(levenshtein("", "abc"), 3u);
  EXPECT_EQ(levenshtein("PS", "ps"), 2u);
  EXPECT_EQ(levenshtein("α-PS", "β-PS"), 1u);
}

TEST(Levenshtein, MatchesRecursiveOracle) {
  std::mt19937_64 rng(31);
  for (int i = 0; i < 400; ++i) {
    std::string a, b;
    for (std::size_t k = rng() % 6; k > 0; --k) a += "abc"[rng() % 3];
    for (std::size_t k = rng() % 6; k > 0; --k) b += "abc"[rng() % 3];
    EXPECT_EQ(levenshtein(a, b), oracle::levenshtein(a, b)) << a << " / " << b;
    EXPECT_EQ(levenshtein(a, b), levenshtein(b, a));
  }
}

TEST(FindAbbreviations, NestedParenthesesLongForm) {
  const std::string s = "films of poly(vinyl alcohol) (PVA) were cast";
  const auto c = find_abbreviations(s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(sub(s, c[0].short_begin, c[0].short_end), "PVA");
  EXPECT_EQ(sub(s, c[0].long_begin, c[0].long_end), "poly(vinyl alcohol)");
}

TEST(FindAbbreviations, WordStartMatching) {
  const std::string s = "solid polyethylene oxide (PEO) electrolytes";
  const auto c = find_abbreviations(s);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(sub(s, c[0].long_begin, c[0].long_end), "polyethylene oxide");
  const std::string t = "we used high density polyethylene (HDPE)";
  const auto d = find_abbreviations(t);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(sub(t, d[0].long_begin, d[0].long_end), "high density polyethylene");
}

TEST(FindAbbreviations, NoLettersNoPair) { EXPECT_TRUE(find_abbreviations("was reported (2021) for films").empty()); }

TEST(FindAbbreviations, NothingBeforeNoPair) {
  EXPECT_TRUE(find_abbreviations("(PVA) films were cast").empty());
  EXPECT_TRUE(find_abbreviations("the sample (PVA) was cast").empty());
}

TEST(DetectAbbreviations, LinksMentions) {
  const auto t = tag_marked("Films of [[P|poly(vinyl alcohol)]] ([[P|PVA]]) were cast.");
  const auto pairs = detect_abbreviations(t.doc.text, t.doc.sentences[0], t.mentions);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(t.mentions[pairs[0].long_mention].surface, "poly(vinyl alcohol)");
  EXPECT_EQ(t.mentions[pairs[0].short_mention].surface, "PVA");
}

// ---------------------------------------------------------------------------
// Coreference

TEST(Coreference, PluralJoins) {
  const std::vector<EntityMention> ms{mention(L::Polymer, "PLA", 0), mention(L::Polymer, "PLAs", 10)};
  const auto r = coreference(ms, {}, {});
  EXPECT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.cluster_of[0], r.cluster_of[1]);
}

TEST(Coreference, DistantNamesStayApart) {
  const std::vector<EntityMention> ms{mention(L::Polymer, "polyethylene", 0), mention(L::Polymer, "polypropylene", 20)};
  EXPECT_EQ(coreference(ms, {}, {}).clusters.size(), 2u);
}

TEST(Coreference, AbbreviationPairJoins) {
  const std::vector<EntityMention> ms{mention(L::Polymer, "poly(vinyl alcohol)", 0), mention(L::Polymer, "PVA", 21),
                                      mention(L::Polymer, "PVA", 40)};
  const std::vector<AbbreviationPair> pairs{{0, 1}};
  const auto r = coreference(ms, pairs, {});
  ASSERT_EQ(r.clusters.size(), 1u);
  EXPECT_EQ(r.clusters[0].representative, "PVA");  // most frequent
  CorefConfig off;
  off.use_abbreviations = false;
  EXPECT_EQ(coreference(ms, pairs, off).clusters.size(), 2u);
}

TEST(Coreference, RepresentativeTieBreaks) {
  const std::vector<EntityMention> ms{mention(L::Polymer, "PLA", 0), mention(L::Polymer, "PLAs", 10)};
  EXPECT_EQ(coreference(ms, {}, {}).clusters[0].representative, "PLAs");  // longest
  const std::vector<EntityMention> ns{mention(L::Polymer, "PLB", 0), mention(L::Polymer, "PLA", 10)};
  EXPECT_EQ(coreference(ns, {}, {}).clusters[0].representative, "PLA");  // lexicographic
}

TEST(Coreference, ThresholdZero) {
  const std::vector<EntityMention> ms{mention(L::Polymer, "PLA", 0), mention(L::Polymer, "PLAs", 10),
                                      mention(L::Polymer, "PLA", 20)};
  CorefConfig c;
  c.max_levenshtein = 0;
  const auto r = coreference(ms, {}, c);
  EXPECT_EQ(r.clusters.size(), 2u);
  EXPECT_EQ(r.cluster_of[0], r.cluster_of[2]);
}

TEST(Coreference, OrderInvariantPartition) {
  const std::vector<std::string> pool{"PLA",  "PLAs",         "PS",            "PMMA",   "PMMA films", "polystyrene",
                                      "PE",   "polyethylene", "polypropylene", "PEO",    "P E",        "PVA",
                                      "PVAc", "poly(vinyl alcohol)"};
  std::mt19937_64 rng(37);
  int shuffles = 0;
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<EntityMention> ms;
    const std::size_t n = 2 + rng() % 10;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ms.push_back(mention(i % 4 == 3 ? L::InorganicMaterial : L::Polymer, pool[rng() % pool.size()], pos));
      pos += ms.back().surface.size() + 1 + rng() % 5;
    }
    std::vector<AbbreviationPair> pairs;
    for (std::size_t i = 0; i + 1 < n; ++i)
      if (rng() % 4 == 0) pairs.push_back({i, i + 1});
    const auto base = coreference(ms, pairs, {});

    // partition: every mention in exactly one cluster
    std::vector<int> seen(n, 0);
    for (const auto& c : base.clusters)
      for (auto idx : c.members) ++seen[idx];
    EXPECT_EQ(seen, std::vector<int>(n, 1));

    for (int s = 0; s < 10; ++s, ++shuffles) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<std::size_t> where(n);
      std::vector<EntityMention> shuffled(n);
      for (std::size_t k = 0; k < n; ++k) {
        shuffled[k] = ms[perm[k]];
        where[perm[k]] = k;
      }
      std::vector<AbbreviationPair> moved;
      for (const auto& p : pairs) moved.push_back({where[p.long_mention], where[p.short_mention]});
      std::shuffle(moved.begin(), moved.end(), rng);
      const auto r = coreference(shuffled, moved, {});
      ASSERT_EQ(r.clusters.size(), base.clusters.size());
      for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(r.cluster_of[where[i]], base.cluster_of[i]);
      for (std::size_t c = 0; c < r.clusters.size(); ++c) {
        EXPECT_EQ(r.clusters[c].representative, base.clusters[c].representative);
        EXPECT_EQ(r.clusters[c].label, base.clusters[c].label);
      }
    }
  }
  EXPECT_GE(shuffles, 500);
}

// ---------------------------------------------------------------------------
// Normalization

TEST(NormalizeName, Variants) {
  EXPECT_EQ(normalize_name("poly(ethylene)", res().normalization), (NormalizedName{"polyethylene", true}));
  EXPECT_EQ(normalize_name("poly-ethylene", res().normalization), (NormalizedName{"polyethylene", true}));
  EXPECT_EQ(normalize_name("novel-copolymer-X", res().normalization), (NormalizedName{"novel-copolymer-X", false}));
}

// ---------------------------------------------------------------------------
// Pairing and amounts

TEST(PairProperty, Nearest) {
  const auto t = tag_marked("The [[PN|Tg]] of [[PV|100 °C]] was found.");
  const auto p = pair_property(t.mentions, 10);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(t.mentions[p.pairs[0].name].surface, "Tg");
}

TEST(PairProperty, NearerNameWins) {
  const auto t = tag_marked("Both [[PN|Tg]] and [[PN|Tm]] of [[PV|100 °C]] were found.");
  const auto p = pair_property(t.mentions, 10);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(t.mentions[p.pairs[0].name].surface, "Tm");
}

TEST(PairProperty, TieGoesToPrecedingName) {
  const auto t = tag_marked("[[PN|Tg]] [[PV|100 °C]] [[PN|Tm]]");
  const auto p = pair_property(t.mentions, 10);
  ASSERT_EQ(p.pairs.size(), 1u);
  EXPECT_EQ(t.mentions[p.pairs[0].name].surface, "Tg");
}

TEST(PairProperty, OutsideWindowOrSentenceDropped) {
  const auto t = tag_marked("The [[PN|Tg]] was measured with a very careful and slow method at a rate of [[PV|100 °C]].");
  const auto p = pair_property(t.mentions, 10);
  EXPECT_TRUE(p.pairs.empty());
  EXPECT_EQ(p.unpaired_values.size(), 1u);
  const auto u = tag_marked("The [[PN|Tg]] was measured. It was [[PV|100 °C]].");
  EXPECT_TRUE(pair_property(u.mentions, 10).pairs.empty());
}

TEST(PairProperty, SharedNameFlagged) {
  const auto t = tag_marked("The [[PN|Tg]] values were [[PV|100 °C]] and [[PV|105 °C]].");
  const auto p = pair_property(t.mentions, 10);
  EXPECT_EQ(p.pairs.size(), 2u);
  EXPECT_EQ(p.shared_names.size(), 1u);
}

TEST(AssociateAmount, Nearest) {
  const auto t = tag_marked("[[P|PS]] films with [[AMT|5 wt%]] [[IM|SiO2]] were cast.");
  const auto a = associate_amount(t.mentions, 10);
  ASSERT_EQ(a.links.size(), 1u);
  EXPECT_EQ(t.mentions[a.links[0].material].surface, "SiO2");
}

TEST(AssociateAmount, TieGoesToPreceding) {
  const auto t = tag_marked("[[P|PS]] [[AMT|5 wt%]] [[P|PMMA]]");
  const auto a = associate_amount(t.mentions, 10);
  ASSERT_EQ(a.links.size(), 1u);
  EXPECT_EQ(t.mentions[a.links[0].material].surface, "PS");
}

TEST(AssociateAmount, NothingInWindow) {
  const auto t = tag_marked("[[AMT|5 wt%]] of filler was added and then the films were dried overnight under vacuum before [[P|PS]]");
  const auto a = associate_amount(t.mentions, 10);
  EXPECT_TRUE(a.links.empty());
  EXPECT_EQ(a.unlinked.size(), 1u);
}

TEST(TokenDistance, Symmetric) {
  EXPECT_EQ(token_distance(0, 2, 5, 6), 3u);
  EXPECT_EQ(token_distance(5, 6, 0, 2), 3u);
  EXPECT_EQ(token_distance(0, 3, 2, 4), 0u);
}

// ---------------------------------------------------------------------------
// Relation and full extraction

TEST(Relate, SameSentence) {
  const auto r = extract("[[P|Polystyrene]] shows a [[PN|Tg]] of [[PV|100 °C]].");
  ASSERT_EQ(r.records.size(), 1u);
  const auto& rec = r.records[0];
  EXPECT_EQ(rec.relation_mode, RelationMode::SameSentence);
  ASSERT_EQ(rec.materials.size(), 1u);
  EXPECT_EQ(rec.materials[0].surface, "Polystyrene");
  EXPECT_EQ(rec.materials[0].normalized, "polystyrene");
  EXPECT_EQ(rec.property_canonical, "glass transition temperature");
  EXPECT_EQ(rec.value.canonical_numeric, 100.0);
}

TEST(Relate, WholeAbstract) {
  const auto r = extract("[[P|PS]] and [[P|PMMA]] were blended. The [[PN|Tg]] was [[PV|100 °C]].");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].relation_mode, RelationMode::WholeAbstract);
  ASSERT_EQ(r.records[0].materials.size(), 2u);
  EXPECT_EQ(r.records[0].materials[0].surface, "PS");
  EXPECT_EQ(r.records[0].materials[1].surface, "PMMA");
}

TEST(Relate, ClosestMaterialWins) {
  const auto r = extract("[[P|PS]] and [[P|PMMA]] have a [[PN|Tg]] of [[PV|100 °C]].");
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.records[0].materials.size(), 1u);
  EXPECT_EQ(r.records[0].materials[0].surface, "PMMA");
}

TEST(Relate, ClusterCarriesAllMentions) {
  const auto r = extract("[[P|PLA]] films were made. [[P|PLAs]] show a [[PN|Tm]] of [[PV|433.15 K]].");
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.records[0].materials.size(), 1u);
  EXPECT_EQ(r.records[0].materials[0].surface, "PLAs");
  EXPECT_NEAR(*r.records[0].value.canonical_numeric, 160.0, 1e-9);
  EXPECT_EQ(r.records[0].value.unit_canonical, "°C");
}

TEST(ExtractRecords, FilterFailureIsDiagnosed) {
  const auto r = extract("[[P|PS]] films were cast.");
  EXPECT_TRUE(r.records.empty());
  EXPECT_FALSE(r.passed_filter);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].stage, "filter_by_entities");
}

TEST(ExtractRecords, UnparseableValueCounted) {
  const auto r = extract("[[P|PS]] has a [[PN|tensile strength]] of [[PV|a few MPa]].");
  EXPECT_TRUE(r.passed_filter);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.parse_failures, 1u);
}

TEST(ExtractRecords, AmountAttached) {
  const auto r = extract("[[P|PS]] films with [[AMT|5 wt%]] [[IM|SiO2]] reached a [[PN|tensile strength]] of [[PV|45 MPa]].");
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_TRUE(r.records[0].amount);
  EXPECT_EQ(r.records[0].amount->surface, "5 wt%");
  EXPECT_EQ(r.records[0].amount->material_surface, "SiO2");
  EXPECT_EQ(r.records[0].amount->value.numeric, 5.0);
}

TEST(ExtractRecords, UnknownPropertyKeptUnconverted) {
  const auto r = extract("[[P|PS]] has a [[PN|crystallinity]] of [[PV|65 %]].");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.records[0].property_canonical, "crystallinity");
  EXPECT_FALSE(r.records[0].value.canonical_numeric);
  EXPECT_EQ(r.records[0].value.numeric, 65.0);
}

TEST(ExtractRecords, InvariantsOnSyntheticCorpus) {
  const auto docs = synth::tagged_corpus(300, 41, res().vocab);
  for (const auto& d : docs) {
    const auto r = extract_records(d.doc, d.tokens, d.labels, res().config());
    const auto again = extract_records(d.doc, d.tokens, d.labels, res().config());
    EXPECT_EQ(r.records, again.records);
    for (const auto& rec : r.records) {
      EXPECT_FALSE(rec.materials.empty());
      if (rec.relation_mode == RelationMode::SameSentence) EXPECT_EQ(rec.materials.size(), 1u);
    }
    for (const auto& m : r.mentions)
      if (is_material(m.label)) EXPECT_TRUE(m.cluster_id.has_value());
  }
}
