#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace sparselab {

/// Shortest round-trip decimal form of a double ("nan"/"inf" spelled out).
std::string format_real(double v);
/// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(std::string_view field);

/// In-memory RFC 4180 table (CRLF line endings).
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  template <class... T>
  void add(const T&... fields) {
    std::vector<std::string> row;
    row.reserve(sizeof...(T));
    (row.push_back(cell(fields)), ...);
    add_row(std::move(row));
  }
  void add_row(std::vector<std::string> row);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return format_real(v); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parses RFC 4180 text (used by tests and the analyze subcommand).
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sparselab
