#pragma once

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "reboard/error.hpp"
#include "reboard/imaging/png_io.hpp"

namespace reboard::coordinator {

inline std::string sha256_hex(const std::vector<std::uint8_t>& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr)) {
    throw Error(ErrorCode::StorageFailure, "sha256 failed");
  }
  std::string hex;
  hex.reserve(len * 2);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

/// PNG payloads stored under <root>/<first two hex digits>/<sha256>.png.
/// Identical images share one file.
class ImageStore {
 public:
  explicit ImageStore(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot create image store " + root_.string());
  }

  std::string put(const std::vector<std::uint8_t>& png) {
    const std::string ref = sha256_hex(png);
    const auto path = path_for(ref);
    if (std::filesystem::exists(path)) return ref;
    std::filesystem::create_directories(path.parent_path());
    // Write beside the target, then rename, so readers never see half a file.
    auto tmp = path;
    tmp += ".tmp";
    imaging::write_file_bytes(tmp, png);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::StorageFailure, "cannot store image " + ref);
    return ref;
  }

  std::vector<std::uint8_t> get(const std::string& ref) const {
    if (!valid_ref(ref)) throw Error(ErrorCode::InvalidArgument, "malformed image reference");
    try {
      return imaging::read_file_bytes(path_for(ref));
    } catch (const Error&) {
      throw Error(ErrorCode::StorageFailure, "image " + ref + " missing from store");
    }
  }

  bool contains(const std::string& ref) const { return valid_ref(ref) && std::filesystem::exists(path_for(ref)); }

  std::filesystem::path path_for(const std::string& ref) const { return root_ / ref.substr(0, 2) / (ref + ".png"); }
  const std::filesystem::path& root() const noexcept { return root_; }

  static bool valid_ref(const std::string& ref) {
    if (ref.size() != 64) return false;
    for (char c : ref)
      if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
  }

 private:
  std::filesystem::path root_;
};

}  // namespace reboard::coordinator
