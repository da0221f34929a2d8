#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "openstreets/nn/tensor.hpp"

namespace openstreets::nn {

enum class CheckpointKind : std::uint32_t { Collision = 1, QNetwork = 2 };

/// Container layout (all integers little-endian u32):
///   "OSLM" | version | kind | config length | config JSON bytes | block count |
///   per block: name length | name | rows | cols | rows*cols f64 row-major (LE)
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  CheckpointKind kind = CheckpointKind::Collision;
  std::string config;  // JSON text describing layer specs and preprocessing
  std::vector<std::pair<std::string, Matrix<double>>> blocks;

  void add(std::string name, Matrix<double> value) { blocks.emplace_back(std::move(name), std::move(value)); }
  /// Throws Error(BadCheckpoint) when absent.
  const Matrix<double>& block(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws Error(Io) naming the path when it cannot be opened.
Checkpoint load_checkpoint(const std::string& path);

/// {"kind":..., "version":..., "config":{...}, "blocks":[{"name":..,"rows":..,"cols":..}]}
std::string describe_checkpoint(const Checkpoint& ckpt);

}  // namespace openstreets::nn
