#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace openstreets {

inline constexpr const char* kVersion = "0.1.0";

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);
/// Throws Error(Io) when the file cannot be read.
std::string sha256_file(const std::string& path);

/// Provenance record written next to every artifact a command produces.
struct RunManifest {
  std::string command;
  std::string config_json = "{}";  // snapshot of the effective options
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;   // path -> sha256
  std::map<std::string, std::string> output_digests;  // path -> sha256
  std::optional<std::string> normalizer_day;

  void add_input(const std::string& path) { input_digests[path] = sha256_file(path); }
  void add_output(const std::string& path) { output_digests[path] = sha256_file(path); }

  std::string to_json() const;
  /// Writes to_json() to `path`.
  void write(const std::string& path) const;
};

}  // namespace openstreets
