#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace gnnrisk::cli {

class TomlError : public std::runtime_error {
 public:
  TomlError(const std::string& what, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Parses the TOML subset used by run configs into a JSON object tree:
/// comments, [table] and [dotted.table] headers, bare or quoted keys, basic
/// and literal strings, integers, floats, booleans and (multi-line) arrays of
/// those. Inline tables, arrays of tables and date-times are rejected.
nlohmann::json parse_toml(const std::string& text);

/// Inverse of parse_toml for JSON trees holding objects of scalars and scalar
/// arrays. Scalar keys come before sub-tables, each in tree order.
std::string to_toml(const nlohmann::json& root);

}  // namespace gnnrisk::cli
