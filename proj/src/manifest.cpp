#include <algorithm>
#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "agshock/csv.hpp"
#include "agshock/error.hpp"
#include "agshock/pipeline.hpp"

namespace agshock {

namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoError, "SHA-256 digest failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::vector<ManifestEntry> scan_artifacts(const fs::path& dir) {
  std::vector<ManifestEntry> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    const std::string content = read_text_file(entry.path());
    out.push_back({rel, content.size(), sha256_hex(content)});
  }
  std::sort(out.begin(), out.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return out;
}

void write_manifest(const fs::path& dir) {
  nlohmann::json files = nlohmann::json::array();
  for (const auto& e : scan_artifacts(dir)) {
    files.push_back({{"path", e.path}, {"bytes", e.bytes}, {"sha256", e.sha256}});
  }
  const nlohmann::json manifest = {{"format", "agshock.manifest"}, {"version", 1}, {"files", files}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace agshock
