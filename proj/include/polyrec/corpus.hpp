#pragma once

// Document ingestion: markup stripping, Unicode normalization, sentence
// splitting and the corpus-level relevance filters.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "polyrec/error.hpp"
#include "polyrec/quantity.hpp"
#include "polyrec/text.hpp"

namespace polyrec {

struct RawDocument {
  std::string doc_id;
  std::string title;
  std::string abstract_markup;
  std::optional<int> year;
  std::optional<std::string> doi;
};

struct SentenceSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const SentenceSpan&, const SentenceSpan&) = default;
};

struct Document {
  std::string doc_id;
  std::string text;
  std::vector<SentenceSpan> sentences;
  std::optional<int> year;
  std::optional<std::string> doi;

  std::string_view sentence_text(std::size_t i) const {
    const auto& s = sentences.at(i);
    return std::string_view(text).substr(s.start, s.end - s.start);
  }

  /// Index of the sentence containing byte offset `pos`; offsets in the gap
  /// between two sentences belong to the following one.
  std::size_t sentence_of(std::size_t pos) const {
    if (sentences.empty()) return 0;
    auto it = std::upper_bound(sentences.begin(), sentences.end(), pos,
                               [](std::size_t p, const SentenceSpan& s) { return p < s.end; });
    if (it == sentences.end()) return sentences.size() - 1;
    return static_cast<std::size_t>(it - sentences.begin());
  }
};

// ---------------------------------------------------------------------------
// Unicode map

/// Codepoint substitution table. An empty replacement deletes the codepoint.
class UnicodeMap {
 public:
  UnicodeMap() = default;
  explicit UnicodeMap(std::map<char32_t, std::u32string> entries) : entries_(std::move(entries)) {}

  /// The table shipped as data/unicode_map.tsv.
  static const UnicodeMap& builtin();

  /// Parses the TSV layout: `U+XXXX<TAB>U+YYYY [U+ZZZZ...]` or `U+XXXX<TAB>-`
  /// for deletion; `#` starts a comment.
  static UnicodeMap parse(std::string_view tsv);
  static UnicodeMap load(const std::string& path) { return parse(read_file(path)); }

  std::string apply(std::string_view s) const {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
      const std::size_t begin = pos;
      const char32_t cp = text::decode_utf8(s, pos);
      auto it = entries_.find(cp);
      if (it == entries_.end()) {
        out.append(s.substr(begin, pos - begin));
        continue;
      }
      for (char32_t r : it->second) text::append_utf8(out, r);
    }
    return out;
  }

  const std::map<char32_t, std::u32string>& entries() const noexcept { return entries_; }
  friend bool operator==(const UnicodeMap&, const UnicodeMap&) = default;

 private:
  std::map<char32_t, std::u32string> entries_;
};

inline const UnicodeMap& UnicodeMap::builtin() {
  static const UnicodeMap table = [] {
    std::map<char32_t, std::u32string> m;
    // Space-like codepoints.
    for (char32_t cp : {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0xA0, 0x1680, 0x2028, 0x2029, 0x202F, 0x205F, 0x3000})
      m[cp] = U" ";
    for (char32_t cp = 0x2000; cp <= 0x200A; ++cp) m[cp] = U" ";
    // Invisible characters.
    for (char32_t cp : {0xAD, 0x200B, 0x200C, 0x200D, 0x2060, 0xFEFF}) m[cp] = U"";
    // Minus and hyphen variants. En/em dashes stay: they separate ranges.
    for (char32_t cp : {0x02D7, 0x2010, 0x2011, 0x2012, 0x2212, 0x2796, 0xFE63, 0xFF0D}) m[cp] = U"-";
    // Multiplication sign variants.
    for (char32_t cp : {0x2715, 0x2716, 0x2A09, 0x2A2F}) m[cp] = U"×";
    // Micro sign to Greek mu.
    m[0xB5] = U"μ";
    // Degree variants.
    for (char32_t cp : {0xBA, 0x02DA, 0x2218}) m[cp] = U"°";
    m[0x2103] = U"°C";
    m[0x2109] = U"°F";
    m[0x212A] = U"K";
    m[0x212B] = U"Å";
    // Tilde and quote variants.
    for (char32_t cp : {0x223C, 0xFF5E}) m[cp] = U"~";
    for (char32_t cp : {0x2018, 0x2019, 0x201B, 0x2032}) m[cp] = U"'";
    for (char32_t cp : {0x201C, 0x201D, 0x201F, 0x2033}) m[cp] = U"\"";
    // Superscript digits used in units.
    m[0xB2] = U"^{2}";
    m[0xB3] = U"^{3}";
    return UnicodeMap(std::move(m));
  }();
  return table;
}

inline UnicodeMap UnicodeMap::parse(std::string_view tsv) {
  auto parse_cp = [](std::string_view tok, std::size_t line_no) -> char32_t {
    if (!tok.starts_with("U+") || tok.size() < 3)
      throw ConfigError("unicode map line " + std::to_string(line_no) + ": bad codepoint '" +
                        std::string(tok) + "'");
    return static_cast<char32_t>(std::stoul(std::string(tok.substr(2)), nullptr, 16));
  };
  std::map<char32_t, std::u32string> m;
  std::size_t line_no = 0;
  for (const auto& raw_line : text::split_lines(tsv)) {
    ++line_no;
    std::string_view line = raw_line;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos)
      throw ConfigError("unicode map line " + std::to_string(line_no) + ": expected a tab");
    const char32_t from = parse_cp(text::trim(line.substr(0, tab)), line_no);
    std::string_view rhs = text::trim(line.substr(tab + 1));
    std::u32string to;
    if (rhs != "-") {
      std::size_t pos = 0;
      while (pos < rhs.size()) {
        auto sp = rhs.find(' ', pos);
        auto tok = rhs.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos);
        if (!tok.empty()) to.push_back(parse_cp(tok, line_no));
        if (sp == std::string_view::npos) break;
        pos = sp + 1;
      }
    }
    if (!m.emplace(from, std::move(to)).second)
      throw ConfigError("unicode map line " + std::to_string(line_no) + ": duplicate codepoint");
  }
  return UnicodeMap(std::move(m));
}

// ---------------------------------------------------------------------------
// Markup stripping

namespace detail {

inline const std::map<std::string, char32_t, std::less<>>& html_entities() {
  // &lt; &gt; &amp; are left encoded: decoding them could re-create markup.
  static const std::map<std::string, char32_t, std::less<>> entities = {
      {"nbsp", 0xA0},   {"deg", 0xB0},     {"plusmn", 0xB1}, {"times", 0xD7},  {"minus", 0x2212},
      {"micro", 0xB5},  {"ndash", 0x2013}, {"mdash", 0x2014}, {"le", 0x2264},   {"ge", 0x2265},
      {"asymp", 0x2248}, {"sim", 0x223C},  {"middot", 0xB7}, {"quot", 0x22},   {"apos", 0x27},
      {"thinsp", 0x2009}, {"ensp", 0x2002}, {"emsp", 0x2003}, {"Aring", 0xC5},  {"prime", 0x2032},
      {"alpha", 0x3B1}, {"beta", 0x3B2},   {"gamma", 0x3B3}, {"delta", 0x3B4},  {"epsilon", 0x3B5},
      {"eta", 0x3B7},   {"theta", 0x3B8},  {"kappa", 0x3BA}, {"lambda", 0x3BB}, {"mu", 0x3BC},
      {"nu", 0x3BD},    {"pi", 0x3C0},     {"rho", 0x3C1},   {"sigma", 0x3C3},  {"tau", 0x3C4},
      {"phi", 0x3C6},   {"chi", 0x3C7},    {"psi", 0x3C8},   {"omega", 0x3C9},  {"Delta", 0x394},
      {"Omega", 0x3A9}, {"sup2", 0xB2},    {"sup3", 0xB3},
  };
  return entities;
}

inline bool is_block_tag(std::string_view name) {
  static constexpr std::string_view kBlock[] = {"p",  "br", "div", "li", "ul", "ol", "h1", "h2", "h3",
                                                "h4", "h5", "h6",  "tr", "td", "th", "table", "title",
                                                "section", "abstract", "para", "sec", "hr"};
  return std::find(std::begin(kBlock), std::end(kBlock), name) != std::end(kBlock);
}

/// Decodes `&name;` / `&#N;` / `&#xH;` at pos. Returns bytes consumed or 0.
inline std::size_t decode_entity(std::string_view s, std::size_t pos, std::string& out) {
  auto semi = s.find(';', pos);
  if (semi == std::string_view::npos || semi - pos > 10 || semi == pos + 1) return 0;
  std::string_view body = s.substr(pos + 1, semi - pos - 1);
  char32_t cp = 0;
  if (body.starts_with('#')) {
    const bool hex = body.size() > 1 && (body[1] == 'x' || body[1] == 'X');
    std::string_view digits = body.substr(hex ? 2 : 1);
    if (digits.empty()) return 0;
    for (char c : digits) {
      const bool ok = hex ? std::isxdigit(static_cast<unsigned char>(c)) != 0 : text::is_ascii_digit(c);
      if (!ok) return 0;
    }
    cp = static_cast<char32_t>(std::stoul(std::string(digits), nullptr, hex ? 16 : 10));
    if (cp == '<' || cp == '>' || cp == '&' || cp == 0 || cp > 0x10FFFF) return 0;
  } else {
    auto it = html_entities().find(body);
    if (it == html_entities().end()) return 0;
    cp = it->second;
  }
  text::append_utf8(out, cp);
  return semi - pos + 1;
}

/// Tag and entity pass. `<sup>`/`<sub>` become `^{`/`_{` groups.
inline std::string strip_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::vector<char> open;  // 'p' for sup, 'b' for sub
  std::size_t pos = 0;
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == '&') {
      if (std::size_t used = decode_entity(s, pos, out)) {
        pos += used;
        continue;
      }
      out.push_back(c);
      ++pos;
      continue;
    }
    if (c != '<') {
      out.push_back(c);
      ++pos;
      continue;
    }
    const bool tag_like =
        pos + 1 < s.size() && (text::is_ascii_alpha(s[pos + 1]) || s[pos + 1] == '/' || s[pos + 1] == '!');
    if (!tag_like) {
      out.push_back(c);
      ++pos;
      continue;
    }
    const auto close = s.find('>', pos + 1);
    const auto next_open = s.find('<', pos + 1);
    if (close == std::string_view::npos || (next_open != std::string_view::npos && next_open < close)) {
      // Malformed: drop the bracket, keep the text.
      ++pos;
      continue;
    }
    std::string_view body = s.substr(pos + 1, close - pos - 1);
    pos = close + 1;
    const bool closing = body.starts_with('/');
    if (closing) body.remove_prefix(1);
    std::size_t name_end = 0;
    while (name_end < body.size() && text::is_ascii_alnum(body[name_end])) ++name_end;
    const std::string name = text::fold_case(body.substr(0, name_end));
    if (name == "sup" || name == "sub") {
      const char kind = name == "sup" ? 'p' : 'b';
      if (!closing) {
        if (body.ends_with('/')) continue;  // <sup/>
        out += kind == 'p' ? "^{" : "_{";
        open.push_back(kind);
      } else {
        auto it = std::find(open.rbegin(), open.rend(), kind);
        if (it == open.rend()) continue;
        const auto depth = static_cast<std::size_t>(it - open.rbegin()) + 1;
        for (std::size_t i = 0; i < depth; ++i) out.push_back('}');
        open.resize(open.size() - depth);
      }
      continue;
    }
    if (is_block_tag(name)) out.push_back(' ');
  }
  for (std::size_t i = 0; i < open.size(); ++i) out.push_back('}');
  return out;
}

/// Drops the brace of any `^{` / `_{` that has no matching `}`.
inline std::string balance_groups(std::string_view s) {
  std::vector<std::pair<std::size_t, bool>> stack;  // (brace offset, is group)
  std::vector<bool> drop(s.size(), false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '{') {
      stack.emplace_back(i, i > 0 && (s[i - 1] == '^' || s[i - 1] == '_'));
    } else if (s[i] == '}') {
      if (!stack.empty()) stack.pop_back();
    }
  }
  for (auto [offset, group] : stack)
    if (group) drop[offset] = true;
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    if (!drop[i]) out.push_back(s[i]);
  return out;
}

inline std::string strip_markup_once(std::string_view s, const UnicodeMap& map) {
  return text::collapse_whitespace(balance_groups(map.apply(strip_tags(s))));
}

}  // namespace detail

/// Plain text of a markup fragment: tags removed, sup/sub rewritten as
/// `^{...}`/`_{...}`, the Unicode map applied and whitespace collapsed.
/// Iterated to a fixpoint, so the result is stable under reapplication.
inline std::string strip_markup(std::string_view markup, const UnicodeMap& map = UnicodeMap::builtin()) {
  std::string current = detail::strip_markup_once(markup, map);
  for (int i = 0; i < 16; ++i) {
    std::string next = detail::strip_markup_once(current, map);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

// ---------------------------------------------------------------------------
// Sentence splitting

inline const std::vector<std::string>& default_abbreviations() {
  static const std::vector<std::string> list = {
      "Fig.", "Figs.", "et al.", "wt.", "approx.", "e.g.", "i.e.", "vs.", "ca.", "Ref.",  "Refs.", "Eq.",
      "Eqs.", "No.",  "cf.",    "resp.", "ref.",   "vol.", "mol.", "Dr.", "Prof.", "Inc.", "Ltd.",  "Co.",
      "St.",  "viz.", "etc.",   "Tab.",  "Sect.",  "Ch.",  "al.",
  };
  return list;
}

inline std::vector<std::string> load_abbreviations(const std::string& path) {
  std::vector<std::string> out;
  for (auto& line : text::split_lines(read_file(path))) {
    auto t = text::trim(line);
    if (!t.empty() && !t.starts_with('#')) out.emplace_back(t);
  }
  return out;
}

/// Rule-based splitter. A sentence ends at `.`, `?` or `!` followed by
/// whitespace and then an uppercase ASCII letter or digit, unless the period
/// closes a protected abbreviation.
inline std::vector<SentenceSpan> split_sentences(std::string_view text,
                                                 const std::vector<std::string>& abbreviations =
                                                     default_abbreviations()) {
  std::vector<SentenceSpan> spans;
  const std::size_t n = text.size();
  std::size_t start = 0;
  while (start < n && text::is_space(text[start])) ++start;
  if (start >= n) return spans;

  auto protected_period = [&](std::size_t i) {
    const std::string_view head = text.substr(0, i + 1);
    for (const auto& abbr : abbreviations) {
      if (!head.ends_with(abbr)) continue;
      const std::size_t b = head.size() - abbr.size();
      if (b == 0 || text::is_space(text[b - 1]) || text[b - 1] == '(') return true;
    }
    return false;
  };

  for (std::size_t i = start; i + 1 < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') continue;
    if (!text::is_space(text[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < n && text::is_space(text[j])) ++j;
    if (j >= n) break;
    if (!text::is_ascii_upper(text[j]) && !text::is_ascii_digit(text[j])) continue;
    if (c == '.' && protected_period(i)) continue;
    spans.push_back({start, i + 1});
    start = j;
    i = j - 1;
  }
  std::size_t end = n;
  while (end > start && text::is_space(text[end - 1])) --end;
  if (end > start) spans.push_back({start, end});
  return spans;
}

// ---------------------------------------------------------------------------
// Filters

/// Polymer relevance proxy: the text mentions "poly" in any case.
inline bool is_polymer_relevant(std::string_view text) {
  return text::fold_case(text).find("poly") != std::string::npos;
}
inline bool is_polymer_relevant(const Document& doc) { return is_polymer_relevant(doc.text); }

/// True when some number (plain, decimal, aE±b, a × 10^{b}) starting at a
/// word boundary is followed within two whitespace-delimited tokens by a
/// token containing a letter.
inline bool has_numeric_info(std::string_view text) {
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    const bool starts_number =
        text::is_ascii_digit(c) || ((c == '-' || c == '+' || c == '.') && i + 1 < n && text::is_ascii_digit(text[i + 1]));
    if (!starts_number) continue;
    if (i > 0) {
      const char prev = text[i - 1];
      if (text::is_ascii_alnum(prev) || prev == '.' || prev == '_' || prev == '^' || prev == '{' ||
          static_cast<unsigned char>(prev) >= 0x80)
        continue;
    }
    auto num = scan_number(text, i);
    if (!num) continue;
    std::size_t pos = num->end;
    int tokens_seen = 0;
    while (tokens_seen < 2 && pos < n) {
      std::size_t tok_begin = pos;
      if (text::is_space(text[pos])) {
        while (tok_begin < n && text::is_space(text[tok_begin])) ++tok_begin;
      }
      std::size_t tok_end = tok_begin;
      while (tok_end < n && !text::is_space(text[tok_end])) ++tok_end;
      if (tok_end == tok_begin) break;
      if (text::contains_ascii_letter(text.substr(tok_begin, tok_end - tok_begin))) return true;
      ++tokens_seen;
      pos = tok_end;
    }
    i = num->end == i ? i : num->end - 1;
  }
  return false;
}
inline bool has_numeric_info(const Document& doc) { return has_numeric_info(doc.text); }

// ---------------------------------------------------------------------------
// Preprocessing and JSON-lines IO

struct PreprocessOptions {
  const UnicodeMap* unicode_map = &UnicodeMap::builtin();
  const std::vector<std::string>* abbreviations = &default_abbreviations();
};

inline Document preprocess(const RawDocument& raw, const PreprocessOptions& opts = {}) {
  Document doc;
  doc.doc_id = raw.doc_id;
  doc.text = strip_markup(raw.abstract_markup, *opts.unicode_map);
  doc.sentences = split_sentences(doc.text, *opts.abbreviations);
  doc.year = raw.year;
  doc.doi = raw.doi;
  return doc;
}

inline RawDocument raw_document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("corpus line is not a JSON object");
  RawDocument raw;
  auto require_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j.at(key).is_string())
      throw SchemaError(std::string("corpus record missing string field '") + key + "'");
    return j.at(key).get<std::string>();
  };
  raw.doc_id = require_string("doc_id");
  if (raw.doc_id.empty()) throw SchemaError("corpus record has empty doc_id");
  raw.abstract_markup = require_string("abstract");
  if (j.contains("title") && j.at("title").is_string()) raw.title = j.at("title").get<std::string>();
  if (j.contains("year") && !j.at("year").is_null()) {
    if (!j.at("year").is_number_integer()) throw SchemaError("doc " + raw.doc_id + ": year is not an integer");
    const int year = j.at("year").get<int>();
    if (year < 1800 || year > 2100) throw SchemaError("doc " + raw.doc_id + ": year out of range");
    raw.year = year;
  }
  if (j.contains("doi") && j.at("doi").is_string()) raw.doi = j.at("doi").get<std::string>();
  return raw;
}

inline std::vector<RawDocument> load_corpus(const std::string& path) {
  std::vector<RawDocument> docs;
  std::map<std::string, std::size_t, std::less<>> seen;
  std::size_t line_no = 0;
  for (const auto& line : read_jsonl_lines(path)) {
    ++line_no;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto raw = raw_document_from_json(j);
    if (!seen.emplace(raw.doc_id, line_no).second) throw SchemaError("duplicate doc_id: " + raw.doc_id);
    docs.push_back(std::move(raw));
  }
  return docs;
}

/// Preprocessed corpus line: the input fields plus `text` and `sentences`.
inline nlohmann::ordered_json document_to_json(const RawDocument& raw, const Document& doc) {
  nlohmann::ordered_json j;
  j["doc_id"] = doc.doc_id;
  j["title"] = raw.title;
  j["abstract"] = raw.abstract_markup;
  j["year"] = doc.year ? nlohmann::ordered_json(*doc.year) : nlohmann::ordered_json(nullptr);
  j["doi"] = doc.doi ? nlohmann::ordered_json(*doc.doi) : nlohmann::ordered_json(nullptr);
  j["text"] = doc.text;
  auto sentences = nlohmann::ordered_json::array();
  for (const auto& s : doc.sentences) sentences.push_back({s.start, s.end});
  j["sentences"] = std::move(sentences);
  return j;
}

}  // namespace polyrec
