#pragma once

// Reference implementations written independently of the library, used to
// cross-check it. Deliberately naive.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "polyrec/polyrec.hpp"

namespace oracle {

// Contingency-table Cohen kappa over integer labels in [0, k).
inline double cohen(const std::vector<int>& a, const std::vector<int>& b, int k) {
  std::vector<std::vector<double>> table(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) table[a[i]][b[i]] += 1.0;
  const double n = static_cast<double>(a.size());
  double diag = 0.0;
  for (int i = 0; i < k; ++i) diag += table[i][i];
  const double po = diag / n;
  double pe = 0.0;
  for (int c = 0; c < k; ++c) {
    double row = 0.0;
    double col = 0.0;
    for (int j = 0; j < k; ++j) {
      row += table[c][j];
      col += table[j][c];
    }
    pe += row * col;
  }
  pe /= n * n;
  if (po == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

// Fleiss (1971): P_i = sum_j n_ij (n_ij - 1) / (n (n - 1)).
inline double fleiss(const std::vector<std::vector<std::size_t>>& m, std::size_t raters) {
  const double n = static_cast<double>(raters);
  const double items = static_cast<double>(m.size());
  const std::size_t k = m[0].size();
  double p_bar = 0.0;
  std::vector<double> p(k, 0.0);
  for (const auto& row : m) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(row[j]);
      s += c * (c - 1.0);
      p[j] += c;
    }
    p_bar += s / (n * (n - 1.0));
  }
  p_bar /= items;
  double pe = 0.0;
  for (double v : p) pe += (v / (items * n)) * (v / (items * n));
  if (pe == 1.0) return 1.0;
  return (p_bar - pe) / (1.0 - pe);
}

// Greedy longest-prefix segmentation by linear scan of the vocabulary list.
// ASCII words only.
inline std::vector<std::string> greedy_wordpiece(const std::string& word, const std::vector<std::string>& vocab,
                                                 const std::string& unk = "[UNK]") {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t best = 0;
    for (const auto& entry : vocab) {
      std::string piece = entry;
      const bool cont = piece.size() > 2 && piece.compare(0, 2, "##") == 0;
      if (cont != (i > 0)) continue;
      if (cont) piece = piece.substr(2);
      if (piece.empty() || piece.size() <= best) continue;
      if (word.compare(i, piece.size(), piece) == 0) best = piece.size();
    }
    if (best == 0) return {unk};
    out.push_back((i > 0 ? "##" : "") + word.substr(i, best));
    i += best;
  }
  return out;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::size_t sub = levenshtein(a.substr(1), b.substr(1)) + (a[0] == b[0] ? 0 : 1);
  return std::min({sub, levenshtein(a.substr(1), b) + 1, levenshtein(a, b.substr(1)) + 1});
}

// Linear-scan query: same filter semantics, written out field by field.
inline std::string fold(const std::string& s) { return polyrec::text::lookup_key(s); }

inline bool keep(const polyrec::MaterialPropertyRecord& r, const polyrec::RecordFilter& f) {
  if (f.property && fold(r.property_canonical) != fold(*f.property)) return false;
  if (f.material) {
    bool hit = false;
    for (const auto& m : r.materials) {
      if (fold(m.surface) == fold(*f.material)) hit = true;
      if (m.normalized && fold(*m.normalized) == fold(*f.material)) hit = true;
    }
    if (!hit) return false;
  }
  if (f.value_range) {
    if (!r.value.canonical_numeric) return false;
    if (*r.value.canonical_numeric < f.value_range->lo) return false;
    if (*r.value.canonical_numeric > f.value_range->hi) return false;
  }
  if (f.year_min && (!r.year || *r.year < *f.year_min)) return false;
  if (f.year_max && (!r.year || *r.year > *f.year_max)) return false;
  if (f.composition) {
    bool other = false;
    int polymers = 0;
    for (const auto& m : r.materials) {
      if (m.label == polyrec::EntityLabel::Polymer) ++polymers;
      else if (m.label != polyrec::EntityLabel::PolymerClass) other = true;
    }
    const auto cls = other ? polyrec::CompositionClass::Composite
                           : (polymers >= 2 ? polyrec::CompositionClass::Blend : polyrec::CompositionClass::Neat);
    if (cls != *f.composition) return false;
  }
  if (f.keyword) {
    bool hit = false;
    for (const auto& k : r.keywords) hit = hit || fold(k) == fold(*f.keyword);
    if (!hit) return false;
  }
  return true;
}

inline std::vector<std::size_t> scan(const std::vector<polyrec::MaterialPropertyRecord>& records,
                                     const polyrec::RecordFilter& f) {
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep(records[i], f)) hits.push_back(i);
  std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
    const int ya = records[a].year ? *records[a].year : -1;
    const int yb = records[b].year ? *records[b].year : -1;
    return std::make_tuple(-ya, records[a].doc_id, a) < std::make_tuple(-yb, records[b].doc_id, b);
  });
  return hits;
}

}  // namespace oracle
