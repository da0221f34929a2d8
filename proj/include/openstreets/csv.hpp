#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace openstreets {

/// Minimal reader for the project's flat CSV schemas (no quoting, comma separated).
/// Field accessors raise BadValueError with the 1-based data row and column name.
class CsvTable {
 public:
  /// Reads the whole stream. When `expected_header` is non-empty, every listed
  /// column must be present (MissingColumn otherwise); extra columns are ignored.
  static CsvTable read(std::istream& in, const std::vector<std::string>& expected_header);
  static CsvTable read_file(const std::string& path, const std::vector<std::string>& expected_header);

  std::size_t rows() const noexcept { return rows_.size(); }
  const std::vector<std::string>& header() const noexcept { return header_; }

  std::string_view text(std::size_t row, std::string_view column) const;
  double real(std::size_t row, std::string_view column) const;
  long long integer(std::size_t row, std::string_view column) const;
  bool flag(std::size_t row, std::string_view column) const;
  /// Empty field reads as nullopt.
  std::optional<double> optional_real(std::size_t row, std::string_view column) const;

 private:
  std::size_t column_index(std::string_view column) const;

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace openstreets
