#pragma once

// Run manifests: what produced an artifact, written atomically next to it.

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace paramine::manifest {

namespace detail {
inline std::string to_hex(const unsigned char* bytes, unsigned len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[bytes[i] >> 4];
    out += hex[bytes[i] & 15];
  }
  return out;
}
}  // namespace detail

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  return detail::to_hex(digest, len);
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  return detail::to_hex(digest, len);
}

// Write to a sibling temp file then rename over the target.
inline void write_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << contents;
    if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

struct RunManifest {
  std::string subcommand;
  std::map<std::string, std::string> config;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string version;
  double duration_seconds = 0;

  nlohmann::json to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    nlohmann::json out = nlohmann::json::array();
    for (const auto& p : outputs) out.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    return {{"subcommand", subcommand}, {"config", config},   {"inputs", in},
            {"outputs", out},           {"seed", seed},       {"version", version},
            {"duration_seconds", duration_seconds}};
  }

  // One manifest per output: <output>.manifest.json
  void write_all() const {
    const auto body = to_json().dump(2) + "\n";
    for (const auto& p : outputs) write_atomic(p + ".manifest.json", body);
  }
};

}  // namespace paramine::manifest
