#pragma once

// Subset TOML reader/writer: the value types and table forms needed for
// problem specifications and tool configuration. Date-time values are not
// supported and are reported as parse errors.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace specloop::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value, std::less<>>;

struct Value {
  std::variant<std::string, std::int64_t, double, bool, Array, Table> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_integer() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }
  bool is_table() const { return std::holds_alternative<Table>(data); }

  const std::string& as_string() const { return std::get<std::string>(data); }
  std::int64_t as_integer() const { return std::get<std::int64_t>(data); }
  double as_float() const { return std::get<double>(data); }
  bool as_bool() const { return std::get<bool>(data); }
  const Array& as_array() const { return std::get<Array>(data); }
  const Table& as_table() const { return std::get<Table>(data); }
  Array& as_array() { return std::get<Array>(data); }
  Table& as_table() { return std::get<Table>(data); }

  std::string_view type_name() const;

  bool operator==(const Value&) const = default;
};

/// Throws specloop::Error{parse} with "line L, column C" in the message.
Table parse(std::string_view document);

/// Lookup through dotted path ("gateway.seed"); nullptr when any segment is missing.
const Value* find(const Table& root, std::string_view dotted_path);

/// Basic-string literal with escapes, including the surrounding quotes.
std::string quote(std::string_view text);

/// Multi-line basic string ("""...""") when the text contains newlines, else quote().
std::string quote_block(std::string_view text);

}  // namespace specloop::toml
