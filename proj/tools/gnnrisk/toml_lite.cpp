#include "toml_lite.hpp"

#include <cctype>
#include <charconv>
#include <cstdint>
#include <set>
#include <sstream>
#include <vector>

#include "gnnrisk/io.hpp"

namespace gnnrisk::cli {
namespace {

class Parser {
 public:
  explicit Parser(const std::string& text) : s_(text) {}

  nlohmann::json run() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = &open_table(root);
      } else {
        parse_pair(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  [[noreturn]] void fail(const std::string& what) const { throw TomlError(what, line_); }

  void advance() {
    if (s_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void skip_space() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) advance();
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!eof() && peek() != '\n') advance();
    }
  }

  void skip_blank_lines() {
    while (!eof()) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  /// Whitespace, comments and newlines, as allowed inside arrays.
  void skip_all() {
    while (!eof()) {
      skip_space();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        advance();
      } else {
        break;
      }
    }
  }

  void end_of_line() {
    skip_space();
    skip_comment();
    if (peek() == '\r') advance();
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    advance();
  }

  std::string parse_key_part() {
    if (peek() == '"') return parse_basic_string();
    if (peek() == '\'') return parse_literal_string();
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
      key += peek();
      advance();
    }
    if (key.empty()) fail("expected a key");
    return key;
  }

  std::vector<std::string> parse_dotted_key() {
    std::vector<std::string> parts;
    while (true) {
      skip_space();
      parts.push_back(parse_key_part());
      skip_space();
      if (peek() != '.') break;
      advance();
    }
    return parts;
  }

  nlohmann::json& open_table(nlohmann::json& root) {
    advance();  // [
    if (peek() == '[') fail("arrays of tables are not supported");
    const auto parts = parse_dotted_key();
    if (peek() != ']') fail("expected ']' after table name");
    advance();
    nlohmann::json* t = &root;
    for (const auto& p : parts) {
      if (t->contains(p) && !(*t)[p].is_object()) fail("'" + p + "' is already a value");
      t = &(*t)[p];
      if (t->is_null()) *t = nlohmann::json::object();
    }
    std::string full;
    for (const auto& p : parts) full += (full.empty() ? "" : ".") + p;
    if (!defined_.insert(full).second) fail("table [" + full + "] defined twice");
    return *t;
  }

  void parse_pair(nlohmann::json& table) {
    const auto parts = parse_dotted_key();
    if (peek() != '=') fail("expected '=' after key");
    advance();
    skip_space();
    nlohmann::json* t = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      t = &(*t)[parts[i]];
      if (t->is_null()) *t = nlohmann::json::object();
      if (!t->is_object()) fail("'" + parts[i] + "' is not a table");
    }
    if (t->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*t)[parts.back()] = parse_value();
  }

  nlohmann::json parse_value() {
    const char c = peek();
    if (c == '"') return parse_basic_string();
    if (c == '\'') return parse_literal_string();
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_scalar();
  }

  std::string parse_basic_string() {
    advance();  // "
    if (s_.compare(pos_, 2, "\"\"") == 0) fail("multi-line strings are not supported");
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      advance();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      const char e = peek();
      advance();
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  std::string parse_literal_string() {
    advance();  // '
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = peek();
      advance();
      if (c == '\'') break;
      out += c;
    }
    return out;
  }

  nlohmann::json parse_array() {
    advance();  // [
    nlohmann::json arr = nlohmann::json::array();
    while (true) {
      skip_all();
      if (peek() == ']') {
        advance();
        return arr;
      }
      arr.push_back(parse_value());
      skip_all();
      if (peek() == ',') {
        advance();
      } else if (peek() == ']') {
        advance();
        return arr;
      } else {
        fail("expected ',' or ']' in array");
      }
    }
  }

  nlohmann::json parse_scalar() {
    std::string tok;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '\n' && peek() != '\r' && peek() != '#' &&
           peek() != ' ' && peek() != '\t') {
      tok += peek();
      advance();
    }
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf" || tok == "-inf" || tok == "nan" || tok == "+nan" || tok == "-nan") {
      fail("non-finite numbers are not allowed");
    }
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits += c;
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (is_float) {
      double v = 0;
      const auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("bad number '" + tok + "'");
      return v;
    }
    if (digits[0] == '-') {
      std::int64_t v = 0;
      const auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("bad integer '" + tok + "'");
      return v;
    }
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) fail("bad value '" + tok + "'");
    return v;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<std::string> defined_;
};

bool bare_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) { return bare_key(k) ? k : quote(k); }

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return quote(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) {
    std::string s = format_double(v.get<double>());
    // Keep floats recognizable as floats on the way back in.
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].is_array() || v[i].is_object()) throw std::invalid_argument("nested arrays are not supported");
      out += (i ? ", " : "") + scalar_text(v[i]);
    }
    return out + "]";
  }
  throw std::invalid_argument("value cannot be written as TOML");
}

void emit(std::ostringstream& out, const nlohmann::json& table, const std::string& prefix) {
  for (const auto& [k, v] : table.items()) {
    if (v.is_null() || v.is_object()) continue;
    out << key_text(k) << " = " << scalar_text(v) << "\n";
  }
  for (const auto& [k, v] : table.items()) {
    if (!v.is_object()) continue;
    const std::string name = prefix.empty() ? key_text(k) : prefix + "." + key_text(k);
    out << "\n[" << name << "]\n";
    emit(out, v, name);
  }
}

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return Parser(text).run(); }

std::string to_toml(const nlohmann::json& root) {
  if (!root.is_object()) throw std::invalid_argument("TOML root must be a table");
  std::ostringstream out;
  emit(out, root, "");
  return out.str();
}

}  // namespace gnnrisk::cli
