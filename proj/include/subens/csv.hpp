#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace subens {

/// Shortest decimal string that parses back to the same double
/// (std::to_chars), '.' decimal point, no locale.
std::string format_double(double value);

/// Semicolon-separated table with a header row, UTF-8, LF line endings.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row();
  CsvTable& cell(double value);
  CsvTable& cell(std::uint64_t value);

  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;

  /// Throws FormatError if the file cannot be written completely.
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace subens
