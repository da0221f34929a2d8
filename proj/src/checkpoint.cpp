#include "openstreets/nn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "openstreets/error.hpp"

namespace openstreets::nn {

namespace {

constexpr char kMagic[4] = {'O', 'S', 'L', 'M'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void need(std::istream& in, const char* what) {
  if (!in) throw Error(ErrorCode::BadCheckpoint, std::string("truncated checkpoint while reading ") + what);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  need(in, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  need(in, "weights");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string get_string(std::istream& in, const char* what) {
  const std::uint32_t n = get_u32(in, what);
  if (n > (1u << 24)) throw Error(ErrorCode::BadCheckpoint, std::string("implausible length for ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  need(in, what);
  return s;
}

}  // namespace

const Matrix<double>& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, m] : blocks) {
    if (n == name) return m;
  }
  throw Error(ErrorCode::BadCheckpoint, "checkpoint has no block '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic, 4);
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.kind));
  put_u32(out, static_cast<std::uint32_t>(ckpt.config.size()));
  out.write(ckpt.config.data(), static_cast<std::streamsize>(ckpt.config.size()));
  put_u32(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, m] : ckpt.blocks) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || !std::equal(magic, magic + 4, kMagic)) throw Error(ErrorCode::BadCheckpoint, "not an OSLM checkpoint");
  const std::uint32_t version = get_u32(in, "version");
  if (version != Checkpoint::kVersion) {
    throw Error(ErrorCode::BadCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::uint32_t kind = get_u32(in, "kind");
  if (kind != 1 && kind != 2) throw Error(ErrorCode::BadCheckpoint, "unknown checkpoint kind " + std::to_string(kind));
  ckpt.kind = static_cast<CheckpointKind>(kind);
  ckpt.config = get_string(in, "config");
  const std::uint32_t count = get_u32(in, "block count");
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name = get_string(in, "block name");
    const std::uint32_t rows = get_u32(in, "rows");
    const std::uint32_t cols = get_u32(in, "cols");
    if (static_cast<std::uint64_t>(rows) * cols > (1u << 26)) {
      throw Error(ErrorCode::BadCheckpoint, "block '" + name + "' is implausibly large");
    }
    Matrix<double> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(in);
    ckpt.add(std::move(name), std::move(m));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write checkpoint " + path);
  write_checkpoint(out, ckpt);
  if (!out) throw Error(ErrorCode::Io, "failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "checkpoint not found: " + path);
  return read_checkpoint(in);
}

std::string describe_checkpoint(const Checkpoint& ckpt) {
  nlohmann::ordered_json doc;
  doc["kind"] = ckpt.kind == CheckpointKind::Collision ? "collision" : "qnetwork";
  doc["version"] = Checkpoint::kVersion;
  doc["config"] = ckpt.config.empty() ? nlohmann::ordered_json::object() : nlohmann::ordered_json::parse(ckpt.config);
  auto& blocks = doc["blocks"] = nlohmann::ordered_json::array();
  for (const auto& [name, m] : ckpt.blocks) {
    blocks.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  }
  return doc.dump(2);
}

}  // namespace openstreets::nn
