#pragma once

// Wordpiece tokenization with byte-offset tracking.
//
// Text is first split into words (see pre_tokenize), then each word is
// segmented greedily: the longest vocabulary prefix is taken, and the rest
// of the word is matched the same way against "##"-prefixed continuation
// pieces. A word with any unmatched position becomes the unknown token.

#include <algorithm>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "polyrec/error.hpp"
#include "polyrec/text.hpp"

namespace polyrec {

inline constexpr std::string_view kContinuationPrefix = "##";

class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> entries, std::string unk_token = "[UNK]")
      : entries_(std::move(entries)), unk_token_(std::move(unk_token)) {
    if (entries_.empty()) throw ConfigError("vocabulary is empty");
    index_.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (!index_.emplace(entries_[i], i).second)
        throw ConfigError("duplicate vocabulary entry: '" + entries_[i] + "'");
    }
    if (!contains(unk_token_)) throw ConfigError("vocabulary lacks unknown token '" + unk_token_ + "'");
  }

  /// One token per line, insertion order preserved.
  static Vocabulary load(const std::string& path, std::string unk_token = "[UNK]") {
    std::string contents;
    try {
      contents = read_file(path);
    } catch (const ConfigError&) {
      throw ConfigError("vocabulary file not found: " + path);
    }
    std::vector<std::string> entries;
    for (auto& line : text::split_lines(contents)) {
      if (line.empty()) continue;
      entries.push_back(std::move(line));
    }
    if (entries.empty()) throw ConfigError("vocabulary file is empty: " + path);
    return Vocabulary(std::move(entries), std::move(unk_token));
  }

  bool contains(std::string_view piece) const { return index_.find(std::string(piece)) != index_.end(); }
  std::size_t id(std::string_view piece) const { return index_.at(std::string(piece)); }
  const std::vector<std::string>& entries() const noexcept { return entries_; }
  const std::string& unk_token() const noexcept { return unk_token_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<std::string> entries_;
  std::string unk_token_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// One wordpiece. `surface` carries the "##" prefix for continuations;
/// [start, end) are byte offsets of the covered text.
struct TokenSpan {
  std::string surface;
  std::size_t start = 0;
  std::size_t end = 0;
  bool is_continuation = false;

  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

struct WordSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const WordSpan&, const WordSpan&) = default;
};

namespace detail {

/// Non-ASCII codepoints treated as punctuation/symbols rather than letters.
inline bool is_symbol_codepoint(char32_t cp) noexcept {
  if (cp < 0x80) return false;
  if (cp >= 0x80 && cp <= 0xBF) return true;    // Latin-1 punctuation, °, ±, µ, ², ·
  if (cp == 0xD7 || cp == 0xF7) return true;    // × ÷
  if (cp >= 0x2000 && cp <= 0x2BFF) return true;  // general punctuation, arrows, math operators
  if (cp >= 0x3000 && cp <= 0x303F) return true;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE6F) return true;
  if (cp >= 0xFF00 && cp <= 0xFF0F) return true;
  return false;
}

/// End offset of a balanced `^{...}`/`_{...}` group starting at pos, or 0.
inline std::size_t group_end(std::string_view s, std::size_t pos) noexcept {
  if (pos + 1 >= s.size() || (s[pos] != '^' && s[pos] != '_') || s[pos + 1] != '{') return 0;
  int depth = 0;
  for (std::size_t i = pos + 1; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i + 1;
  }
  return 0;
}

}  // namespace detail

/// Splits text into words: runs of word characters (ASCII alnum and
/// non-ASCII letters), each `^{...}`/`_{...}` group as a whole, and every
/// other non-space character on its own.
inline std::vector<WordSpan> pre_tokenize(std::string_view s) {
  std::vector<WordSpan> words;
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  auto close_word = [&](std::size_t end) {
    if (word_start != std::string_view::npos) words.push_back({word_start, end});
    word_start = std::string_view::npos;
  };
  while (pos < s.size()) {
    const char c = s[pos];
    if (text::is_space(c)) {
      close_word(pos);
      ++pos;
      continue;
    }
    if (std::size_t g = detail::group_end(s, pos)) {
      close_word(pos);
      words.push_back({pos, g});
      pos = g;
      continue;
    }
    std::size_t next = pos;
    const char32_t cp = text::decode_utf8(s, next);
    const bool word_char = cp < 0x80 ? text::is_ascii_alnum(c) : !detail::is_symbol_codepoint(cp);
    if (word_char) {
      if (word_start == std::string_view::npos) word_start = pos;
    } else {
      close_word(pos);
      words.push_back({pos, next});
    }
    pos = next;
  }
  close_word(s.size());
  return words;
}

class WordpieceTokenizer {
 public:
  static constexpr std::size_t kMaxWordChars = 100;

  explicit WordpieceTokenizer(const Vocabulary& vocab) : vocab_(&vocab) {
    for (const auto& e : vocab.entries()) {
      const bool cont = e.starts_with(kContinuationPrefix) && e.size() > kContinuationPrefix.size();
      auto& set = cont ? continuations_ : initials_;
      std::string piece = cont ? e.substr(kContinuationPrefix.size()) : e;
      max_piece_bytes_ = std::max(max_piece_bytes_, piece.size());
      set.insert(std::move(piece));
    }
  }

  /// Pieces of one word located at [offset, offset + word.size()).
  std::vector<TokenSpan> tokenize_word(std::string_view word, std::size_t offset = 0) const {
    std::vector<TokenSpan> out;
    const auto cps = text::codepoint_offsets(word);
    const std::size_t n_chars = cps.size() - 1;
    if (n_chars == 0) return out;
    if (n_chars > kMaxWordChars) {
      out.push_back({vocab_->unk_token(), offset, offset + word.size(), false});
      return out;
    }
    std::size_t ci = 0;
    while (ci < n_chars) {
      const bool cont = ci > 0;
      const auto& pieces = cont ? continuations_ : initials_;
      std::size_t found = 0;
      for (std::size_t cj = n_chars; cj > ci; --cj) {
        const std::size_t bytes = cps[cj] - cps[ci];
        if (bytes > max_piece_bytes_) continue;
        if (pieces.count(std::string(word.substr(cps[ci], bytes)))) {
          found = cj;
          break;
        }
      }
      if (found == 0) {
        out.clear();
        out.push_back({vocab_->unk_token(), offset, offset + word.size(), false});
        return out;
      }
      std::string surface = cont ? std::string(kContinuationPrefix) : std::string();
      surface.append(word.substr(cps[ci], cps[found] - cps[ci]));
      out.push_back({std::move(surface), offset + cps[ci], offset + cps[found], cont});
      ci = found;
    }
    return out;
  }

  std::vector<TokenSpan> tokenize(std::string_view text) const {
    std::vector<TokenSpan> out;
    for (const auto& w : pre_tokenize(text)) {
      auto pieces = tokenize_word(text.substr(w.start, w.end - w.start), w.start);
      out.insert(out.end(), std::make_move_iterator(pieces.begin()), std::make_move_iterator(pieces.end()));
    }
    return out;
  }

  const Vocabulary& vocabulary() const noexcept { return *vocab_; }

 private:
  const Vocabulary* vocab_;
  std::unordered_set<std::string> initials_;
  std::unordered_set<std::string> continuations_;
  std::size_t max_piece_bytes_ = 0;
};

inline std::vector<TokenSpan> wordpiece_tokenize(std::string_view text, const Vocabulary& vocab) {
  return WordpieceTokenizer(vocab).tokenize(text);
}

}  // namespace polyrec
