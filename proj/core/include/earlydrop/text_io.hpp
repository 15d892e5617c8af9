// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace earlydrop {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);
/// Strict parse; throws ValidationError naming `what` on failure.
double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

/// Flat UTF-8 `key=value` lines with dotted keys. Blank lines and lines
/// starting with '#' are ignored; whitespace around keys and values is
/// trimmed. Keys keep sorted order so serialization is canonical.
class KeyValues {
public:
  static KeyValues parse(std::string_view text, std::string_view origin = "config");
  static KeyValues load(const std::string &path);

  bool has(const std::string &key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string &key) const;
  void set(const std::string &key, std::string value) { values_[key] = std::move(value); }
  void erase(const std::string &key) { values_.erase(key); }
  const std::map<std::string, std::string> &items() const noexcept { return values_; }

  std::string serialize() const;

  friend bool operator==(const KeyValues &, const KeyValues &) = default;

private:
  std::map<std::string, std::string> values_;
};

/// Comma-separated table with a header row. Values are kept as text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  static CsvTable parse(std::string_view text, std::string_view origin = "csv");
  static CsvTable load(const std::string &path);

  /// Index of `name` in the header, or nullopt.
  std::optional<std::size_t> column(std::string_view name) const;
  /// Numeric column; throws ValidationError when absent or malformed.
  std::vector<double> numbers(std::string_view name) const;
};

std::string read_text_file(const std::string &path);
void write_text_file(const std::string &path, std::string_view contents);
void append_text_file(const std::string &path, std::string_view contents);

/// 64-bit FNV-1a as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

} // namespace earlydrop
