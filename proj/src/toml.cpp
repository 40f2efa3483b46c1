#include "specloop/toml.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include "specloop/error.hpp"

namespace specloop::toml {

std::string_view Value::type_name() const {
  switch (data.index()) {
    case 0: return "string";
    case 1: return "integer";
    case 2: return "float";
    case 3: return "boolean";
    case 4: return "array";
    default: return "table";
  }
}

namespace {

bool is_bare_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
         c == '-';
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  Table run() {
    Table root;
    Table* current = &root;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        current = parse_header(root);
      } else {
        parse_key_value(*current);
      }
      skip_ws();
      if (!eof() && peek() == '#') skip_comment();
      if (!eof() && !at_newline()) fail("expected end of line after value");
    }
    return root;
  }

 private:
  std::string_view src_;
  size_t pos_ = 0;
  size_t line_ = 1;
  size_t line_start_ = 0;
  // Tables created by [header] or dotted keys; redefining one is an error.
  std::vector<const Table*> defined_;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::parse, "TOML: " + what + " at line " + std::to_string(line_) +
                                      ", column " + std::to_string(pos_ - line_start_ + 1));
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek(size_t ahead = 0) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }
  bool starts_with(std::string_view s) const { return src_.substr(pos_, s.size()) == s; }
  bool at_newline() const { return peek() == '\n' || (peek() == '\r' && peek(1) == '\n'); }

  void newline() {
    if (peek() == '\r') ++pos_;
    ++pos_;
    ++line_;
    line_start_ = pos_;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    while (!eof() && !at_newline()) ++pos_;
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_ws();
      if (peek() == '#') skip_comment();
      if (at_newline()) {
        newline();
        continue;
      }
      break;
    }
  }

  std::vector<std::string> parse_key() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      if (peek() == '"') {
        parts.push_back(parse_basic_string());
      } else if (peek() == '\'') {
        parts.push_back(parse_literal_string());
      } else {
        size_t start = pos_;
        while (!eof() && is_bare_key_char(peek())) ++pos_;
        if (start == pos_) fail("expected key");
        parts.emplace_back(src_.substr(start, pos_ - start));
      }
      skip_ws();
      if (peek() != '.') break;
      ++pos_;
    }
    return parts;
  }

  bool is_defined(const Table* t) const {
    for (auto* d : defined_) {
      if (d == t) return true;
    }
    return false;
  }

  Table* descend(Table& base, const std::string& key, bool via_header) {
    auto it = base.find(key);
    if (it == base.end()) {
      it = base.emplace(key, Value{Table{}}).first;
      return &it->second.as_table();
    }
    if (it->second.is_table()) return &it->second.as_table();
    if (it->second.is_array() && via_header && !it->second.as_array().empty() &&
        it->second.as_array().back().is_table()) {
      return &it->second.as_array().back().as_table();
    }
    fail("key '" + key + "' is not a table");
  }

  Table* parse_header(Table& root) {
    ++pos_;  // '['
    bool array_of_tables = false;
    if (peek() == '[') {
      ++pos_;
      array_of_tables = true;
    }
    auto parts = parse_key();
    skip_ws();
    if (peek() != ']') fail("expected ']' closing table header");
    ++pos_;
    if (array_of_tables) {
      if (peek() != ']') fail("expected ']]' closing array-of-tables header");
      ++pos_;
    }
    Table* t = &root;
    for (size_t i = 0; i + 1 < parts.size(); ++i) t = descend(*t, parts[i], true);
    const std::string& last = parts.back();
    if (array_of_tables) {
      auto it = t->find(last);
      if (it == t->end()) it = t->emplace(last, Value{Array{}}).first;
      if (!it->second.is_array()) fail("key '" + last + "' is not an array of tables");
      auto& arr = it->second.as_array();
      if (!arr.empty() && !arr.front().is_table()) fail("key '" + last + "' is a static array");
      arr.push_back(Value{Table{}});
      return &arr.back().as_table();
    }
    auto it = t->find(last);
    if (it != t->end()) {
      if (!it->second.is_table() || is_defined(&it->second.as_table())) {
        fail("duplicate table '" + last + "'");
      }
      defined_.push_back(&it->second.as_table());
      return &it->second.as_table();
    }
    Table* created = &t->emplace(last, Value{Table{}}).first->second.as_table();
    defined_.push_back(created);
    return created;
  }

  void parse_key_value(Table& table) {
    auto parts = parse_key();
    skip_ws();
    if (peek() != '=') fail("expected '=' after key");
    ++pos_;
    skip_ws();
    Value v = parse_value();
    Table* t = &table;
    for (size_t i = 0; i + 1 < parts.size(); ++i) {
      auto it = t->find(parts[i]);
      if (it == t->end()) {
        it = t->emplace(parts[i], Value{Table{}}).first;
        defined_.push_back(&it->second.as_table());
      } else if (!it->second.is_table()) {
        fail("key '" + parts[i] + "' is not a table");
      }
      t = &it->second.as_table();
    }
    if (!t->emplace(parts.back(), std::move(v)).second) fail("duplicate key '" + parts.back() + "'");
  }

  Value parse_value() {
    char c = peek();
    if (c == '"') {
      if (starts_with("\"\"\"")) return Value{parse_ml_basic_string()};
      return Value{parse_basic_string()};
    }
    if (c == '\'') {
      if (starts_with("'''")) return Value{parse_ml_literal_string()};
      return Value{parse_literal_string()};
    }
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    if (starts_with("true")) {
      pos_ += 4;
      return Value{true};
    }
    if (starts_with("false")) {
      pos_ += 5;
      return Value{false};
    }
    return parse_number();
  }

  std::uint32_t parse_hex(size_t digits) {
    std::uint32_t cp = 0;
    for (size_t i = 0; i < digits; ++i) {
      char h = peek();
      cp <<= 4;
      if (h >= '0' && h <= '9') cp |= static_cast<std::uint32_t>(h - '0');
      else if (h >= 'a' && h <= 'f') cp |= static_cast<std::uint32_t>(h - 'a' + 10);
      else if (h >= 'A' && h <= 'F') cp |= static_cast<std::uint32_t>(h - 'A' + 10);
      else fail("invalid unicode escape");
      ++pos_;
    }
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) fail("invalid unicode scalar value");
    return cp;
  }

  void parse_escape(std::string& out) {
    ++pos_;  // backslash
    char e = peek();
    ++pos_;
    switch (e) {
      case 'b': out.push_back('\b'); break;
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'f': out.push_back('\f'); break;
      case 'r': out.push_back('\r'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'u': append_utf8(out, parse_hex(4)); break;
      case 'U': append_utf8(out, parse_hex(8)); break;
      default: --pos_; fail("invalid escape sequence");
    }
  }

  std::string parse_basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || at_newline()) fail("unterminated string");
      char c = peek();
      if (c == '"') {
        ++pos_;
        return out;
      }
      if (c == '\\') {
        parse_escape(out);
        continue;
      }
      out.push_back(c);
      ++pos_;
    }
  }

  std::string parse_literal_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (eof() || at_newline()) fail("unterminated literal string");
      char c = peek();
      ++pos_;
      if (c == '\'') return out;
      out.push_back(c);
    }
  }

  std::string parse_ml_basic_string() {
    pos_ += 3;
    if (at_newline()) newline();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated multi-line string");
      if (starts_with("\"\"\"")) {
        pos_ += 3;
        // Up to two quotes may directly precede the closing delimiter.
        for (int extra = 0; extra < 2 && peek() == '"'; ++extra) {
          out.push_back('"');
          ++pos_;
        }
        return out;
      }
      if (at_newline()) {
        out.push_back('\n');
        newline();
        continue;
      }
      if (peek() == '\\') {
        // Line-ending backslash trims the newline and following whitespace.
        size_t look = pos_ + 1;
        while (look < src_.size() && (src_[look] == ' ' || src_[look] == '\t')) ++look;
        if (look < src_.size() && (src_[look] == '\n' || src_[look] == '\r')) {
          pos_ = look;
          while (!eof() && (peek() == ' ' || peek() == '\t' || at_newline())) {
            if (at_newline()) newline();
            else ++pos_;
          }
          continue;
        }
        parse_escape(out);
        continue;
      }
      out.push_back(peek());
      ++pos_;
    }
  }

  std::string parse_ml_literal_string() {
    pos_ += 3;
    if (at_newline()) newline();
    std::string out;
    while (true) {
      if (eof()) fail("unterminated multi-line literal string");
      if (starts_with("'''")) {
        pos_ += 3;
        for (int extra = 0; extra < 2 && peek() == '\''; ++extra) {
          out.push_back('\'');
          ++pos_;
        }
        return out;
      }
      if (at_newline()) {
        out.push_back('\n');
        newline();
        continue;
      }
      out.push_back(peek());
      ++pos_;
    }
  }

  void skip_array_ws() {
    while (!eof()) {
      skip_ws();
      if (peek() == '#') skip_comment();
      if (at_newline()) {
        newline();
        continue;
      }
      break;
    }
  }

  Value parse_array() {
    ++pos_;
    Array arr;
    while (true) {
      skip_array_ws();
      if (peek() == ']') {
        ++pos_;
        return Value{std::move(arr)};
      }
      arr.push_back(parse_value());
      skip_array_ws();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == ']') {
        ++pos_;
        return Value{std::move(arr)};
      }
      fail("expected ',' or ']' in array");
    }
  }

  Value parse_inline_table() {
    ++pos_;
    Table t;
    skip_ws();
    if (peek() == '}') {
      ++pos_;
      return Value{std::move(t)};
    }
    while (true) {
      parse_key_value(t);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
        skip_ws();
        continue;
      }
      if (peek() == '}') {
        ++pos_;
        return Value{std::move(t)};
      }
      fail("expected ',' or '}' in inline table");
    }
  }

  Value parse_number() {
    size_t start = pos_;
    while (!eof()) {
      char c = peek();
      if (is_bare_key_char(c) || c == '+' || c == '.' || c == ':') {
        ++pos_;
      } else {
        break;
      }
    }
    std::string tok(src_.substr(start, pos_ - start));
    if (tok.empty()) fail("expected a value");
    if (tok == "inf" || tok == "+inf") return Value{std::numeric_limits<double>::infinity()};
    if (tok == "-inf") return Value{-std::numeric_limits<double>::infinity()};
    if (tok == "nan" || tok == "+nan" || tok == "-nan") return Value{std::numeric_limits<double>::quiet_NaN()};
    if (tok.find(':') != std::string::npos ||
        (tok.size() >= 10 && tok[4] == '-' && tok[7] == '-')) {
      pos_ = start;
      fail("date-time values are not supported");
    }
    std::string digits;
    for (size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] == '_') {
        bool ok = i > 0 && i + 1 < tok.size() && std::isalnum(static_cast<unsigned char>(tok[i - 1])) &&
                  std::isalnum(static_cast<unsigned char>(tok[i + 1]));
        if (!ok) {
          pos_ = start;
          fail("misplaced underscore in number");
        }
        continue;
      }
      digits.push_back(tok[i]);
    }
    int base = 10;
    if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'o' || digits[1] == 'b')) {
      base = digits[1] == 'x' ? 16 : digits[1] == 'o' ? 8 : 2;
      digits = digits.substr(2);
    }
    bool is_float = base == 10 && digits.find_first_of(".eE") != std::string::npos;
    try {
      size_t used = 0;
      if (is_float) {
        double d = std::stod(digits, &used);
        if (used != digits.size()) throw std::invalid_argument("trailing");
        return Value{d};
      }
      std::int64_t v = std::stoll(digits, &used, base);
      if (used != digits.size()) throw std::invalid_argument("trailing");
      if (base == 10) {
        std::string_view body = digits;
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) body.remove_prefix(1);
        if (body.size() > 1 && body[0] == '0') throw std::invalid_argument("leading zero");
      }
      return Value{v};
    } catch (const std::exception&) {
      pos_ = start;
      fail("invalid value '" + tok + "'");
    }
  }
};

}  // namespace

Table parse(std::string_view document) { return Parser(document).run(); }

const Value* find(const Table& root, std::string_view dotted_path) {
  const Table* t = &root;
  while (true) {
    auto dot = dotted_path.find('.');
    auto key = dotted_path.substr(0, dot);
    auto it = t->find(key);
    if (it == t->end()) return nullptr;
    if (dot == std::string_view::npos) return &it->second;
    if (!it->second.is_table()) return nullptr;
    t = &it->second.as_table();
    dotted_path.remove_prefix(dot + 1);
  }
}

std::string quote(std::string_view text) {
  std::string out = "\"";
  for (unsigned char c : text) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out.push_back('"');
  return out;
}

std::string quote_block(std::string_view text) {
  if (text.find('\n') == std::string_view::npos) return quote(text);
  // Multi-line basic string; the newline after the opening delimiter is trimmed
  // by the reader, so it is always emitted.
  std::string out = "\"\"\"\n";
  for (size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out.push_back('\n'); break;
      case '\t': out.push_back('\t'); break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out.push_back(static_cast<char>(c));
        }
    }
  }
  out += "\"\"\"";
  return out;
}

}  // namespace specloop::toml
