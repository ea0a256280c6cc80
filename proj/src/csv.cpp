#include "csv.hpp"

#include <algorithm>

namespace batauth::detail {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& field : out) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
  }
  return out;
}

}  // namespace

CsvTable::CsvTable(std::string_view text, std::string_view module) : module_(module) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    auto fields = split(line);
    if (!have_header) {
      for (auto f : fields) header_.emplace_back(f);
      have_header = true;
    } else {
      if (fields.size() != header_.size()) {
        throw Error(ErrorCode::BadCsv, module_,
                    "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(header_.size()));
      }
      rows_.push_back(std::move(fields));
      lines_.push_back(line_no);
    }
    if (end == text.size()) break;
  }
  if (!have_header) throw Error(ErrorCode::BadCsv, module_, "empty input, no header");
}

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  auto it = std::find(header_.begin(), header_.end(), name);
  if (it == header_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - header_.begin());
}

std::size_t CsvTable::require_column(std::string_view name) const {
  auto col = column(name);
  if (!col) throw Error(ErrorCode::MissingColumn, module_, "missing column '" + std::string(name) + "'");
  return *col;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  auto value = parse_number(rows_[row][col]);
  if (!value) {
    throw Error(ErrorCode::BadCsv, module_,
                "line " + std::to_string(lines_[row]) + ": '" + std::string(rows_[row][col]) + "' is not a number");
  }
  if (!std::isfinite(*value)) {
    throw Error(ErrorCode::NonFiniteValue, module_,
                "line " + std::to_string(lines_[row]) + ": non-finite value in column '" + header_[col] + "'");
  }
  return *value;
}

std::optional<double> CsvTable::optional_number(std::size_t row, std::optional<std::size_t> col) const {
  if (!col || rows_[row][*col].empty()) return std::nullopt;
  return number(row, *col);
}

}  // namespace batauth::detail
