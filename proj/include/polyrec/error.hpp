#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "polyrec/text.hpp"

namespace polyrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or invalid configuration/data files (vocabulary, registries, config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input file violates its documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Caller passed arguments outside an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path);
  out << contents;
}

/// Non-empty lines of a JSON-lines file.
inline std::vector<std::string> read_jsonl_lines(const std::string& path) {
  std::vector<std::string> lines;
  for (auto& line : text::split_lines(read_file(path))) {
    if (!text::trim(line).empty()) lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace polyrec
