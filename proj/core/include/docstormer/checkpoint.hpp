#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "docstormer/params.hpp"

// Flat binary of named float tensors plus a text manifest sidecar
// (<path>.manifest) listing name, shape and byte offset of each tensor.

namespace docstormer {

inline constexpr char kCheckpointMagic[8] = {'D', 'S', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // byte offset of the tensor data in the binary
};

struct CheckpointInfo {
  std::string preset;
  std::vector<CheckpointEntry> entries;
};

std::filesystem::path manifest_path(const std::filesystem::path& checkpoint);

/// Writes both files via temp-file + rename.
void save_checkpoint(const std::filesystem::path& path, const std::vector<const ParameterSet<float>*>& sets,
                     const std::string& preset);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

/// Copies every tensor of `target` found in the checkpoint into place.
/// Throws on preset or shape mismatch, and when `require_all` is set and a
/// parameter is absent. Returns the number of tensors loaded.
std::size_t load_checkpoint(const std::filesystem::path& path, ParameterSet<float>& target,
                            const std::string& preset, bool require_all = true);

}  // namespace docstormer
