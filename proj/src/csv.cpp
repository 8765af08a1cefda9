#include "subens/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>

#include "subens/error.hpp"

namespace subens {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw FormatError("cannot format double");
  return std::string(buf.data(), ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row() {
  rows_.emplace_back();
  return *this;
}

CsvTable& CsvTable::cell(double value) {
  if (rows_.empty()) row();
  rows_.back().push_back(format_double(value));
  return *this;
}

CsvTable& CsvTable::cell(std::uint64_t value) {
  if (rows_.empty()) row();
  rows_.back().push_back(std::to_string(value));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ';';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) {
    if (r.size() != header_.size()) throw FormatError("CSV row width does not match header");
    line(r);
  }
  return out;
}

void CsvTable::write(const std::string& path) const {
  const std::string text = str();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw FormatError("write failed for " + path);
}

}  // namespace subens
