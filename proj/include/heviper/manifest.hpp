#pragma once

// Image manifests: CSV with a header naming the columns
// id,path,height_m,east_m,north_m (any order, extra columns ignored).
// Relative paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace heviper {

struct ManifestRow {
  std::uint64_t id = 0;
  std::filesystem::path path;
  float height_m = 0.0f;
  float east_m = 0.0f;
  float north_m = 0.0f;
};

/// Missing columns are Errc::schema; duplicate ids, non-positive heights and
/// malformed numbers are Errc::input.
std::vector<ManifestRow> parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
std::vector<ManifestRow> load_manifest(const std::filesystem::path& path);

/// Paths are written as given.
std::string format_manifest(std::span<const ManifestRow> rows);
void save_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows);

}  // namespace heviper
