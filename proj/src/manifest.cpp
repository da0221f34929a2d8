#include "openstreets/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <iterator>
#include <memory>

#include "json.hpp"
#include "openstreets/error.hpp"

namespace openstreets {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
  return sha256_hex(std::string(std::istreambuf_iterator<char>(in), {}));
}

std::string RunManifest::to_json() const {
  using Json = nlohmann::ordered_json;
  Json j;
  j["command"] = command;
  j["config"] = Json::parse(config_json);
  j["seeds"] = seeds;
  j["inputs"] = input_digests;
  j["outputs"] = output_digests;
  j["normalizer_day"] = normalizer_day ? Json(*normalizer_day) : Json(nullptr);
  j["versions"] = {{"openstreets", kVersion}, {"checkpoint_format", 1}};
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << to_json();
}

}  // namespace openstreets
