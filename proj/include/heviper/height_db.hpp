#pragma once

// Multi-level place database D = {D^1, ..., D^L}: geo-tagged descriptors
// partitioned by capture height into half-open intervals [h_min, h_max),
// plus the compact height database queried to pick sub-databases.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "heviper/descriptor.hpp"

namespace heviper {

struct CameraIntrinsics {
  double focal_px = 0.0;
  std::size_t image_width_px = 0;

  void validate() const;
};

/// Pinhole ground footprint: h * image_width_px / focal_px.
double height_to_ground_width(double height_m, const CameraIntrinsics& camera);

struct HeightLevel {
  std::uint32_t index = 0;  // 1-based
  double h_min = 0.0;
  double h_max = 0.0;
  double ground_width_min = 0.0;
  double ground_width_max = 0.0;
};

/// Tiling of [range_min, range_max) into equal intervals. Bounds are
/// rounded to f32 on construction so they survive the file formats.
class Partition {
 public:
  Partition() = default;
  Partition(double range_min, double range_max, double interval);

  double range_min() const { return range_min_; }
  double range_max() const { return range_max_; }
  double interval() const { return interval_; }
  std::size_t level_count() const { return levels_.size(); }
  const std::vector<HeightLevel>& levels() const { return levels_; }
  const HeightLevel& level(std::uint32_t index) const { return levels_.at(index - 1); }

  /// Fills the ground-width bounds of every level.
  void attach_camera(const CameraIntrinsics& camera);

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.range_min_ == b.range_min_ && a.range_max_ == b.range_max_ && a.interval_ == b.interval_;
  }

 private:
  double range_min_ = 0.0;
  double range_max_ = 0.0;
  double interval_ = 0.0;
  std::vector<HeightLevel> levels_;
};

/// Level whose [h_min, h_max) contains the height; Errc::range otherwise.
std::uint32_t height_to_level(double height_m, const Partition& partition);

/// Same routing through the ground footprint. Agrees with height_to_level for
/// a fixed camera.
std::uint32_t ground_width_to_level(double width_m, const Partition& partition, const CameraIntrinsics& camera);

struct Position {
  float east = 0.0f;
  float north = 0.0f;
};

struct PlaceEntry {
  std::uint64_t id = 0;
  Descriptor descriptor;
  Position position;
  std::uint32_t level = 0;
};

struct HeightPartitionedDatabase {
  Partition partition;
  std::vector<std::vector<PlaceEntry>> sub_dbs;  // sub_dbs[l - 1] is D^l

  std::size_t total_count() const;
  const std::vector<PlaceEntry>& level(std::uint32_t index) const { return sub_dbs.at(index - 1); }
  std::vector<std::size_t> level_sizes() const;
};

/// An input record before routing.
struct GeoTaggedDescriptor {
  std::uint64_t id = 0;
  Descriptor descriptor;
  Position position;
  double height_m = 0.0;
};

struct PartitionBuild {
  HeightPartitionedDatabase db;
  std::vector<std::uint64_t> rejected;  // ids with out-of-range heights
};

/// Routes entries into sub-databases, preserving insertion order within each
/// level. Descriptors are L2-normalised; duplicate ids are Errc::input.
PartitionBuild build_partitioned_db(std::span<const GeoTaggedDescriptor> entries, const Partition& partition);

struct HeightEntry {
  std::uint64_t id = 0;
  Descriptor descriptor;
  Position position;
  float height_label = 0.0f;
};

struct HeightDatabase {
  Partition partition;
  std::vector<HeightEntry> entries;
};

/// Samples at most `per_level_cap` entries per level with a seeded choice,
/// keeping source order. Labels are the source heights; entries outside the
/// partition are skipped.
HeightDatabase build_height_db(std::span<const GeoTaggedDescriptor> source, const Partition& partition,
                               std::size_t per_level_cap, std::uint64_t seed);

/// Bit-level equality, including f32 patterns.
bool bit_equal(const HeightPartitionedDatabase& a, const HeightPartitionedDatabase& b);
bool bit_equal(const HeightDatabase& a, const HeightDatabase& b);

// Database file ("HEVB", version 1), little-endian:
//   header  {magic, u32 version, u32 L, f32 interval_m, f32 range_min, f32 range_max}
//   level   {u64 count, count x {u64 id, f32 east, f32 north, u32 dim, f32 x dim}}  (L times)
//   footer  {u32 CRC32 of each level section}  (L times)
// The height database ("HEVH") uses the same container, grouping entries by
// the level of their label, with an f32 height_label after each descriptor.
inline constexpr std::uint32_t kDatabaseFileVersion = 1;

void save_place_db(const std::filesystem::path& path, const HeightPartitionedDatabase& db);
HeightPartitionedDatabase load_place_db(const std::filesystem::path& path);
void save_height_db(const std::filesystem::path& path, const HeightDatabase& db);
HeightDatabase load_height_db(const std::filesystem::path& path);

}  // namespace heviper
