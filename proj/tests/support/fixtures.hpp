#pragma once

// Paths and loaders for the checked-in fixture files.

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "polyrec/polyrec.hpp"

#ifndef POLYREC_SOURCE_DIR
#error "POLYREC_SOURCE_DIR must be defined"
#endif

namespace fixture {

inline std::string source_path(const std::string& rel) { return std::string(POLYREC_SOURCE_DIR) + "/" + rel; }
inline std::string data_path(const std::string& rel) { return source_path("data/" + rel); }
inline std::string golden_path(const std::string& rel) { return source_path("tests/data/golden/" + rel); }

// ---------------------------------------------------------------------------
// NER fixture: label code strings over synthetic tokens

struct NerCase {
  polyrec::AnnotatedDocument gold;
  polyrec::AnnotatedDocument pred;
};

struct NerFixture {
  std::vector<NerCase> cases;
  std::map<std::string, polyrec::MatchCounts> expected;  // label name or "overall"
};

inline NerFixture load_ner_fixture() {
  const auto j = nlohmann::json::parse(polyrec::read_file(golden_path("ner_fixture.json")));
  std::map<std::string, polyrec::EntityLabel> codes;
  for (const auto& [code, name] : j.at("codes").items())
    codes[code] = polyrec::parse_label_or_throw(name.get<std::string>());
  auto split = [](const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
  };
  NerFixture f;
  for (const auto& d : j.at("documents")) {
    const auto gold = split(d.at("gold").get<std::string>());
    const auto pred = split(d.at("pred").get<std::string>());
    std::vector<std::string> words = d.contains("words") ? split(d.at("words").get<std::string>())
                                                         : std::vector<std::string>{};
    std::vector<polyrec::TokenSpan> tokens;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < gold.size(); ++k) {
      const std::string w = k < words.size() ? words[k] : "w" + std::to_string(k);
      tokens.push_back({w, pos, pos + w.size(), false});
      pos += w.size() + 1;
    }
    NerCase c;
    c.gold.doc_id = c.pred.doc_id = d.at("id").get<std::string>();
    c.gold.tokens = c.pred.tokens = tokens;
    for (const auto& g : gold) c.gold.labels.push_back(codes.at(g));
    for (const auto& p : pred) c.pred.labels.push_back(codes.at(p));
    f.cases.push_back(std::move(c));
  }
  for (const auto& [name, v] : j.at("expected").items())
    f.expected[name] = {v[0].get<std::size_t>(), v[1].get<std::size_t>(), v[2].get<std::size_t>()};
  return f;
}

// ---------------------------------------------------------------------------
// Markup and value golden lines

struct MarkupCase {
  std::string input;
  std::string expected;
};

inline std::vector<MarkupCase> load_markup_cases() {
  std::vector<MarkupCase> out;
  for (const auto& line : polyrec::read_jsonl_lines(golden_path("markup_cases.jsonl"))) {
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("input").get<std::string>(), j.at("expected").get<std::string>()});
  }
  return out;
}

struct ValueCase {
  std::string surface;
  double numeric = 0.0;
  std::string unit;
  std::optional<double> error;
  std::optional<polyrec::ValueRange> range;
};

inline std::vector<ValueCase> load_value_cases() {
  std::vector<ValueCase> out;
  for (const auto& line : polyrec::read_jsonl_lines(golden_path("value_cases.jsonl"))) {
    const auto j = nlohmann::json::parse(line);
    ValueCase c;
    c.surface = j.at("surface").get<std::string>();
    c.numeric = j.at("numeric").get<double>();
    c.unit = j.at("unit").get<std::string>();
    if (j.contains("error")) c.error = j.at("error").get<double>();
    if (j.contains("range")) c.range = polyrec::ValueRange{j.at("range")[0].get<double>(), j.at("range")[1].get<double>()};
    out.push_back(std::move(c));
  }
  return out;
}

inline bool close_rel(double got, double want, double tol) {
  if (want == 0.0) return std::fabs(got) <= tol;
  return std::fabs(got - want) <= tol * std::fabs(want);
}

/// Empty string when `surface` parses to the expected value, else a reason.
inline std::string check_value_case(const ValueCase& c, double tol = 1e-12) {
  const auto r = polyrec::parse_property_value(c.surface);
  if (const auto* f = std::get_if<polyrec::ParseFailure>(&r)) return "parse failure: " + f->reason;
  const auto& v = std::get<polyrec::ParsedValue>(r);
  std::ostringstream why;
  if (!close_rel(v.numeric, c.numeric, tol)) why << "numeric " << v.numeric << " != " << c.numeric << "; ";
  if (v.unit_raw != c.unit) why << "unit '" << v.unit_raw << "' != '" << c.unit << "'; ";
  if (v.error.has_value() != c.error.has_value() || (c.error && !close_rel(*v.error, *c.error, tol)))
    why << "error mismatch; ";
  if (v.range.has_value() != c.range.has_value() ||
      (c.range && (!close_rel(v.range->lo, c.range->lo, tol) || !close_rel(v.range->hi, c.range->hi, tol))))
    why << "range mismatch; ";
  return why.str();
}

// ---------------------------------------------------------------------------
// End-to-end golden corpus

inline std::string e2e_path(const std::string& rel) { return golden_path("e2e/" + rel); }

/// Compares records with the compact hand-worked expectations. Returns the
/// list of mismatches (empty on success).
inline std::vector<std::string> compare_expected_records(const std::vector<polyrec::MaterialPropertyRecord>& records,
                                                         const nlohmann::json& expected) {
  std::vector<std::string> bad;
  const auto& want = expected.at("records");
  if (want.size() != records.size()) {
    bad.push_back("record count " + std::to_string(records.size()) + " != " + std::to_string(want.size()));
    return bad;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& w = want[i];
    const std::string where = "record " + std::to_string(i) + " (" + r.doc_id + "): ";
    auto fail = [&](const std::string& what) { bad.push_back(where + what); };
    if (r.doc_id != w.at("doc_id").get<std::string>()) fail("doc_id");
    const auto& mats = w.at("materials");
    if (mats.size() != r.materials.size()) {
      fail("material count");
    } else {
      for (std::size_t m = 0; m < mats.size(); ++m) {
        const auto& rm = r.materials[m];
        if (rm.surface != mats[m][0].get<std::string>()) fail("material surface " + rm.surface);
        if (polyrec::to_string(rm.label) != mats[m][1].get<std::string>()) fail("material label " + rm.surface);
        const std::optional<std::string> norm =
            mats[m][2].is_null() ? std::nullopt : std::optional<std::string>(mats[m][2].get<std::string>());
        if (rm.normalized != norm) fail("material normalized " + rm.surface);
      }
    }
    if (r.property_canonical != w.at("property").get<std::string>()) fail("property " + r.property_canonical);
    if (w.at("value").is_null()) {
      if (r.value.canonical_numeric) fail("expected no canonical value");
      if (w.contains("raw_value") && !close_rel(r.value.numeric, w.at("raw_value").get<double>(), 1e-12))
        fail("raw value");
    } else if (!r.value.canonical_numeric ||
               !close_rel(*r.value.canonical_numeric, w.at("value").get<double>(), 1e-9)) {
      fail("value");
    }
    const std::optional<std::string> unit =
        w.at("unit").is_null() ? std::nullopt : std::optional<std::string>(w.at("unit").get<std::string>());
    if (r.value.unit_canonical != unit) fail("unit");
    if (w.contains("error") != r.value.canonical_error.has_value() ||
        (w.contains("error") && !close_rel(*r.value.canonical_error, w.at("error").get<double>(), 1e-9)))
      fail("error");
    if (w.contains("range") != r.value.canonical_range.has_value() ||
        (w.contains("range") && (!close_rel(r.value.canonical_range->lo, w.at("range")[0].get<double>(), 1e-9) ||
                                 !close_rel(r.value.canonical_range->hi, w.at("range")[1].get<double>(), 1e-9))))
      fail("range");
    if (polyrec::to_string(r.relation_mode) != w.at("mode").get<std::string>()) fail("relation mode");
    if (polyrec::to_string(polyrec::classify_record(r)) != w.at("class").get<std::string>()) fail("class");
    if (w.contains("amount") != r.amount.has_value()) {
      fail("amount presence");
    } else if (r.amount) {
      if (r.amount->material_surface != w.at("amount")[0].get<std::string>() ||
          r.amount->surface != w.at("amount")[1].get<std::string>())
        fail("amount");
    }
    const auto kw = w.contains("keywords") ? w.at("keywords").get<std::vector<std::string>>() : std::vector<std::string>{};
    if (r.keywords != kw) fail("keywords");
  }
  return bad;
}

}  // namespace fixture
