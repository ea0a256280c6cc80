#pragma once

#include <batauth/error.hpp>

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace batauth::detail {

/// Minimal comma-separated reader: no quoting, blank lines skipped, CRLF tolerated.
class CsvTable {
 public:
  CsvTable(std::string_view text, std::string_view module);

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name) const;

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string_view cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  /// 1-based line number in the source text, for messages.
  std::size_t line_of(std::size_t row) const { return lines_[row]; }

  double number(std::size_t row, std::size_t col) const;
  std::optional<double> optional_number(std::size_t row, std::optional<std::size_t> col) const;

 private:
  std::string_view module_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string_view>> rows_;
  std::vector<std::size_t> lines_;
};

inline std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return value;
}

}  // namespace batauth::detail
