#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace atdkit {

// Streaming SHA-256; hex digests identify artifacts in run manifests.
class Sha256 {
public:
  Sha256();
  void update(const void* data, std::size_t len);
  std::string hex_digest();  // finalizes; no further updates

private:
  void process_block(const std::uint8_t* block);

  std::uint32_t state_[8];
  std::uint64_t total_ = 0;
  std::uint8_t buffer_[64];
  std::size_t buffered_ = 0;
  bool finalized_ = false;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

}  // namespace atdkit
