#include "openstreets/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "openstreets/error.hpp"

namespace openstreets {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::BadValue: return "BadValue";
    case ErrorCode::DuplicateSegmentId: return "DuplicateSegmentId";
    case ErrorCode::UnknownSegmentId: return "UnknownSegmentId";
    case ErrorCode::EmptyNetwork: return "EmptyNetwork";
    case ErrorCode::UnknownIntersection: return "UnknownIntersection";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::NoCarsToReroute: return "NoCarsToReroute";
    case ErrorCode::NoAlternativePath: return "NoAlternativePath";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingDay: return "MissingDay";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NoValidActions: return "NoValidActions";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ScenarioUnsupported: return "ScenarioUnsupported";
    case ErrorCode::BadCheckpoint: return "BadCheckpoint";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.size() - start
                                                                                : comma - start);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

CsvTable CsvTable::read(std::istream& in, const std::vector<std::string>& expected_header) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) {
    if (!expected_header.empty()) {
      throw Error(ErrorCode::MissingColumn, "empty input, expected header with '" +
                                                expected_header.front() + "'");
    }
    return table;
  }
  table.header_ = split_csv_line(line);
  for (const auto& column : expected_header) {
    if (std::find(table.header_.begin(), table.header_.end(), column) == table.header_.end()) {
      throw Error(ErrorCode::MissingColumn, "column '" + column + "' not found in header");
    }
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    auto fields = split_csv_line(line);
    if (fields.size() != table.header_.size()) {
      throw BadValueError(row, "*", "expected " + std::to_string(table.header_.size()) +
                                        " fields, found " + std::to_string(fields.size()));
    }
    table.rows_.push_back(std::move(fields));
  }
  return table;
}

CsvTable CsvTable::read_file(const std::string& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
  return read(in, expected_header);
}

std::size_t CsvTable::column_index(std::string_view column) const {
  auto it = std::find(header_.begin(), header_.end(), column);
  if (it == header_.end()) {
    throw Error(ErrorCode::MissingColumn, "column '" + std::string(column) + "' not found");
  }
  return static_cast<std::size_t>(it - header_.begin());
}

std::string_view CsvTable::text(std::size_t row, std::string_view column) const {
  return rows_.at(row)[column_index(column)];
}

double CsvTable::real(std::size_t row, std::string_view column) const {
  const std::string_view field = text(row, column);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw BadValueError(row + 1, std::string(column), "not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(value)) {
    throw BadValueError(row + 1, std::string(column), "not finite");
  }
  return value;
}

long long CsvTable::integer(std::size_t row, std::string_view column) const {
  const std::string_view field = text(row, column);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw BadValueError(row + 1, std::string(column), "not an integer: '" + std::string(field) + "'");
  }
  return value;
}

bool CsvTable::flag(std::size_t row, std::string_view column) const {
  const std::string_view field = text(row, column);
  if (field == "0") return false;
  if (field == "1") return true;
  throw BadValueError(row + 1, std::string(column), "flag must be 0 or 1, got '" + std::string(field) + "'");
}

std::optional<double> CsvTable::optional_real(std::size_t row, std::string_view column) const {
  if (text(row, column).empty()) return std::nullopt;
  return real(row, column);
}

}  // namespace openstreets
