#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace brca {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ArrayRecord {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

/// Container for model parameters, optimizer state and run metadata.
///
/// On disk: the magic "BRCACKPT", a little-endian u32 version, a u64-length
/// prefixed block of "key=value" lines, a u32 array count, then per array its
/// u32-prefixed name, u32 rank, u64 dims, u64 byte length and float32 data,
/// and finally a CRC-32 of every preceding byte.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::map<std::string, std::string> metadata;
  std::vector<ArrayRecord> arrays;

  const ArrayRecord& array(const std::string& name) const;
  const std::string& meta(const std::string& key) const;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);

/// Throws CheckpointError on a bad magic, checksum mismatch, unknown version or
/// truncated payload.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace brca
