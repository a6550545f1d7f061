#include "chopil/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>

#include "chopil/errors.hpp"
#include "chopil/version.hpp"

namespace chopil {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open for hashing: " + path);

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 init failed");
  }
  char buf[1 << 16];
  while (in.good()) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got)) != 1) {
      EVP_MD_CTX_free(ctx);
      throw std::runtime_error("sha256 update failed");
    }
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 final failed");
  }
  EVP_MD_CTX_free(ctx);

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

void RunManifest::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["tool_version"] = kToolVersion;
  j["format_version"] = kFormatVersion;
  j["command"] = command;
  if (!config_path.empty()) j["config"] = config_path;
  j["seeds"] = seeds;
  auto hash_list = [](const std::vector<std::string>& paths) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      arr.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    }
    return arr;
  };
  j["inputs"] = hash_list(inputs);
  j["outputs"] = hash_list(outputs);
  if (!extra.empty()) j["settings"] = extra;
  j["wall_seconds"] = wall_seconds;
  const auto now = std::chrono::system_clock::now();
  j["written_at_unix"] = std::chrono::duration_cast<std::chrono::seconds>(
                             now.time_since_epoch())
                             .count();

  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace chopil
