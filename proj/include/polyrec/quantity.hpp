#pragma once

// Number and unit grammar for property values reported in abstracts.
//
// Accepted number forms (after preprocessing):
//   123   -4.5   .5   12,000   1.2e-3   3.5 × 10^{-6}   3.5 x 10^{-6}   10^{5}
// Accepted value forms:
//   <num> [unit]   <num> ± <num> [unit]   <num> (-|–|—|to) <num> [unit]
// Units are written in any of the common abstract styles ("S cm^{-1}",
// "S/cm", "S·cm-1", "cm2/s") and reduce to one key via normalize_unit().

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "polyrec/text.hpp"

namespace polyrec {

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

/// Numeric value separated from its unit. Canonical fields are filled by
/// unit conversion; they stay empty when the unit is not recognized.
struct ParsedValue {
  double numeric = 0.0;
  std::string unit_raw;
  std::optional<double> error;
  std::optional<ValueRange> range;
  std::optional<std::string> unit_canonical;
  std::optional<double> canonical_numeric;
  std::optional<double> canonical_error;
  std::optional<ValueRange> canonical_range;

  bool is_canonical() const noexcept { return canonical_numeric.has_value(); }
  friend bool operator==(const ParsedValue&, const ParsedValue&) = default;
};

struct ParseFailure {
  std::string reason;
};

using ParseResult = std::variant<ParsedValue, ParseFailure>;

namespace detail {

inline bool starts_with_at(std::string_view s, std::size_t pos, std::string_view prefix) noexcept {
  return s.substr(pos, prefix.size()) == prefix;
}

inline std::size_t skip_spaces(std::string_view s, std::size_t pos) noexcept {
  while (pos < s.size() && text::is_space(s[pos])) ++pos;
  return pos;
}

inline std::optional<double> to_double(const std::string& repr) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(repr.data(), repr.data() + repr.size(), value);
  if (ec != std::errc() || ptr != repr.data() + repr.size()) return std::nullopt;
  return value;
}

/// Parses "^{[+-]digits}" at pos. Returns the exponent text and advances pos.
inline std::optional<std::string> scan_brace_exponent(std::string_view s, std::size_t& pos) {
  if (!starts_with_at(s, pos, "^{")) return std::nullopt;
  std::size_t p = pos + 2;
  std::string exp;
  if (p < s.size() && (s[p] == '-' || s[p] == '+')) exp.push_back(s[p++]);
  std::size_t digits = 0;
  while (p < s.size() && text::is_ascii_digit(s[p])) {
    exp.push_back(s[p++]);
    ++digits;
  }
  if (digits == 0 || p >= s.size() || s[p] != '}') return std::nullopt;
  pos = p + 1;
  return exp;
}

}  // namespace detail

/// One number recognized in text. `mantissa` holds the plain decimal digits
/// (commas removed), `exponent` the power of ten when one was written.
struct NumberMatch {
  double value = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string mantissa;
  std::optional<std::string> exponent;

  bool has_exponent() const noexcept { return exponent.has_value(); }
};

/// Recognizes a number starting exactly at `pos`.
inline std::optional<NumberMatch> scan_number(std::string_view s, std::size_t pos) {
  using detail::starts_with_at;
  NumberMatch m;
  m.begin = pos;
  std::size_t p = pos;
  if (p < s.size() && (s[p] == '-' || s[p] == '+')) {
    if (s[p] == '-') m.mantissa.push_back('-');
    ++p;
  }
  std::size_t int_digits = 0;
  while (p < s.size() && text::is_ascii_digit(s[p])) {
    m.mantissa.push_back(s[p++]);
    ++int_digits;
  }
  // Thousands separators: 12,000 and 1,234,567 (exactly three digits per group).
  auto is_group = [&](std::size_t q) {
    if (q + 3 >= s.size() || s[q] != ',') return false;
    for (std::size_t k = 1; k <= 3; ++k)
      if (!text::is_ascii_digit(s[q + k])) return false;
    return q + 4 >= s.size() || !text::is_ascii_digit(s[q + 4]);
  };

  if (int_digits >= 1 && int_digits <= 3) {
    while (p < s.size() && is_group(p)) {
      m.mantissa.append(s.substr(p + 1, 3));
      p += 4;
    }
  }
  if (p + 1 < s.size() && s[p] == '.' && text::is_ascii_digit(s[p + 1])) {
    m.mantissa.push_back('.');
    ++p;
    while (p < s.size() && text::is_ascii_digit(s[p])) m.mantissa.push_back(s[p++]);
  }
  if (m.mantissa.find_first_of("0123456789") == std::string::npos) return std::nullopt;

  // 1.2e-3 / 1.2E+3
  if (p < s.size() && (s[p] == 'e' || s[p] == 'E')) {
    std::size_t q = p + 1;
    std::string exp;
    if (q < s.size() && (s[q] == '-' || s[q] == '+')) exp.push_back(s[q++]);
    std::size_t digits = 0;
    while (q < s.size() && text::is_ascii_digit(s[q])) {
      exp.push_back(s[q++]);
      ++digits;
    }
    if (digits > 0 && (q >= s.size() || !text::is_ascii_alpha(s[q]))) {
      m.exponent = exp;
      p = q;
    }
  }
  // 10^{b} written alone.
  if (!m.exponent) {
    std::size_t q = p;
    if ((m.mantissa == "10" || m.mantissa == "-10") && s.substr(q, 2) == "^{") {
      if (auto exp = detail::scan_brace_exponent(s, q)) {
        m.mantissa = m.mantissa.starts_with('-') ? "-1" : "1";
        m.exponent = *exp;
        p = q;
      }
    }
  }
  // a × 10^{b}
  if (!m.exponent) {
    std::size_t q = detail::skip_spaces(s, p);
    std::size_t after_op = std::string_view::npos;
    for (std::string_view op : {std::string_view("×"), std::string_view("x"), std::string_view("*"),
                                std::string_view("·"), std::string_view("⋅")}) {
      if (starts_with_at(s, q, op)) {
        after_op = q + op.size();
        break;
      }
    }
    if (after_op != std::string_view::npos) {
      q = detail::skip_spaces(s, after_op);
      if (starts_with_at(s, q, "10^{")) {
        q += 2;
        if (auto exp = detail::scan_brace_exponent(s, q)) {
          m.exponent = *exp;
          p = q;
        }
      }
    }
  }
  std::string repr = m.mantissa;
  if (m.exponent) repr += "e" + (m.exponent->starts_with('+') ? m.exponent->substr(1) : *m.exponent);
  auto value = detail::to_double(repr);
  if (!value) return std::nullopt;
  m.value = *value;
  m.end = p;
  return m;
}

namespace detail {

/// Value of `base` rescaled by the power of ten carried by `exponent_source`.
inline double rescale(const NumberMatch& base, const NumberMatch& exponent_source) {
  std::string repr = base.mantissa;
  const auto& exp = *exponent_source.exponent;
  repr += "e" + (exp.starts_with('+') ? exp.substr(1) : exp);
  return to_double(repr).value_or(base.value);
}

inline std::size_t skip_qualifiers(std::string_view s, std::size_t pos) {
  static constexpr std::string_view kQualifiers[] = {
      "~", "≈", "∼", "<", ">", "≤", "≥", "ca.", "about", "approximately", "approx.", "up to", "over",
  };
  bool advanced = true;
  while (advanced) {
    advanced = false;
    pos = skip_spaces(s, pos);
    for (auto q : kQualifiers) {
      if (starts_with_at(s, pos, q)) {
        pos += q.size();
        advanced = true;
        break;
      }
    }
  }
  return pos;
}

inline std::optional<std::size_t> scan_range_separator(std::string_view s, std::size_t pos) {
  std::size_t p = skip_spaces(s, pos);
  for (std::string_view sep : {std::string_view("–"), std::string_view("—"), std::string_view("-"),
                               std::string_view("to ")}) {
    if (starts_with_at(s, p, sep)) return skip_spaces(s, p + sep.size());
  }
  return std::nullopt;
}

inline std::optional<std::size_t> scan_error_separator(std::string_view s, std::size_t pos) {
  std::size_t p = skip_spaces(s, pos);
  for (std::string_view sep : {std::string_view("±"), std::string_view("+/-"), std::string_view("+-")}) {
    if (starts_with_at(s, p, sep)) return skip_spaces(s, p + sep.size());
  }
  return std::nullopt;
}

}  // namespace detail

/// Splits a PROPERTY_VALUE / MATERIAL_AMOUNT surface into number, optional
/// error or range, and the raw unit text. Canonical fields stay empty.
inline ParseResult parse_property_value(std::string_view surface) {
  const std::string_view s = text::trim(surface);
  std::size_t pos = detail::skip_qualifiers(s, 0);
  auto first = scan_number(s, pos);
  if (!first) return ParseFailure{"no parseable number in '" + std::string(s) + "'"};
  pos = first->end;

  ParsedValue value;
  value.numeric = first->value;

  if (auto after = detail::scan_error_separator(s, pos)) {
    auto err = scan_number(s, *after);
    if (!err) return ParseFailure{"dangling ± in '" + std::string(s) + "'"};
    double err_value = std::fabs(err->value);
    if (err->has_exponent() && !first->has_exponent()) value.numeric = detail::rescale(*first, *err);
    if (first->has_exponent() && !err->has_exponent()) err_value = std::fabs(detail::rescale(*err, *first));
    value.error = err_value;
    pos = err->end;
  } else if (auto after_sep = detail::scan_range_separator(s, pos)) {
    if (auto second = scan_number(s, *after_sep)) {
      double lo = first->value;
      double hi = second->value;
      if (second->has_exponent() && !first->has_exponent()) lo = detail::rescale(*first, *second);
      if (first->has_exponent() && !second->has_exponent()) hi = detail::rescale(*second, *first);
      if (lo > hi) std::swap(lo, hi);
      value.range = ValueRange{lo, hi};
      value.numeric = lo + (hi - lo) / 2.0;
      pos = second->end;
    }
  }
  value.unit_raw = std::string(text::trim(s.substr(pos)));
  return value;
}

namespace detail {

struct UnitFactor {
  std::string symbol;
  int exponent = 1;
};

inline bool is_unit_separator(std::string_view s, std::size_t pos, std::size_t& len) {
  for (std::string_view sep : {std::string_view(" "), std::string_view("·"), std::string_view("⋅"),
                               std::string_view("*"), std::string_view("×")}) {
    if (starts_with_at(s, pos, sep)) {
      len = sep.size();
      return true;
    }
  }
  return false;
}

/// Splits a raw factor such as "cm^{-1}", "cm-1", "cm2" into symbol + exponent.
inline UnitFactor parse_factor(std::string_view raw) {
  UnitFactor f;
  if (auto caret = raw.find("^{"); caret != std::string_view::npos && raw.ends_with("}")) {
    std::size_t p = caret;
    if (auto exp = scan_brace_exponent(raw, p); exp && p == raw.size()) {
      f.symbol = std::string(raw.substr(0, caret));
      f.exponent = std::stoi(*exp);
      return f;
    }
  }
  // Trailing signed digits after a letter: "cm-1", "cm2", "m^-2".
  std::size_t end = raw.size();
  std::size_t p = end;
  while (p > 0 && text::is_ascii_digit(raw[p - 1])) --p;
  if (p < end && p > 0) {
    std::size_t sym_end = p;
    bool negative = false;
    if (raw[sym_end - 1] == '-' || raw[sym_end - 1] == '+') {
      negative = raw[sym_end - 1] == '-';
      --sym_end;
    }
    if (sym_end > 0 && raw[sym_end - 1] == '^') --sym_end;
    if (sym_end > 0 && text::is_ascii_alpha(raw[sym_end - 1]) && end - p <= 2) {
      f.symbol = std::string(raw.substr(0, sym_end));
      f.exponent = std::stoi(std::string(raw.substr(p)));
      if (negative) f.exponent = -f.exponent;
      return f;
    }
  }
  f.symbol = std::string(raw);
  return f;
}

inline std::string format_factor(const UnitFactor& f) {
  int e = std::abs(f.exponent);
  return e == 1 ? f.symbol : f.symbol + "^{" + std::to_string(e) + "}";
}

}  // namespace detail

/// Reduces a raw unit string to a normalized key: numerator factors, then
/// "/" and denominator factors, exponents in ^{n} form.
///   "S cm^{-1}" -> "S/cm", "cm2 s-1" -> "cm^{2}/s", "° C" -> "°C".
inline std::string normalize_unit(std::string_view raw_unit) {
  const std::string collapsed = text::collapse_whitespace(raw_unit);
  std::string_view s = collapsed;
  std::vector<detail::UnitFactor> numerator;
  std::vector<detail::UnitFactor> denominator;
  bool in_denominator = false;
  std::size_t pos = 0;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    auto f = detail::parse_factor(current);
    current.clear();
    if (f.symbol.empty()) return;
    bool den = in_denominator != (f.exponent < 0);
    f.exponent = std::abs(f.exponent);
    (den ? denominator : numerator).push_back(std::move(f));
  };
  while (pos < s.size()) {
    std::size_t len = 0;
    if (s[pos] == '/') {
      flush();
      in_denominator = true;
      ++pos;
      continue;
    }
    if (s[pos] == '(' || s[pos] == ')') {
      flush();
      ++pos;
      continue;
    }
    if (detail::is_unit_separator(s, pos, len)) {
      flush();
      pos += len;
      continue;
    }
    // Keep ^{...} groups attached to their factor.
    if (detail::starts_with_at(s, pos, "^{")) {
      auto close = s.find('}', pos);
      if (close != std::string_view::npos) {
        current.append(s.substr(pos, close + 1 - pos));
        pos = close + 1;
        continue;
      }
    }
    current.push_back(s[pos++]);
  }
  flush();

  // A bare degree sign belongs to the following symbol ("° C").
  auto merge_degree = [](std::vector<detail::UnitFactor>& factors) {
    for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
      if (factors[i].symbol == "°" && factors[i].exponent == 1) {
        factors[i + 1].symbol = "°" + factors[i + 1].symbol;
        factors.erase(factors.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
  };
  merge_degree(numerator);

  std::string key;
  for (std::size_t i = 0; i < numerator.size(); ++i) {
    if (i) key.push_back(' ');
    key += detail::format_factor(numerator[i]);
  }
  if (!denominator.empty()) {
    if (key.empty()) key = "1";
    key.push_back('/');
    for (std::size_t i = 0; i < denominator.size(); ++i) {
      if (i) key.push_back(' ');
      key += detail::format_factor(denominator[i]);
    }
  }
  return key;
}

}  // namespace polyrec
