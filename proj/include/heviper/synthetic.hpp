#pragma once

// Seeded synthetic corpus: P places on a square grid, each with a value-noise
// base raster. Every (place, level) pair gets a database view at the level's
// center height and a query view at a jittered height; a view is the center
// crop of the raster matching the ground footprint at that height, resampled
// to a fixed image size. Low levels see a magnified center, high levels see
// wide context, and all views of a place share the same center.
//
// Ids: database view of place p (0-based) at level l (1-based) is p * L + l;
// its query is that id plus kQueryIdOffset.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "heviper/config.hpp"
#include "heviper/descriptor.hpp"
#include "heviper/image.hpp"
#include "heviper/manifest.hpp"

namespace heviper {

inline constexpr std::uint64_t kQueryIdOffset = 1'000'000;

/// Square crop of a place raster, in raster pixels.
struct CropRect {
  double center_x = 0.0;
  double center_y = 0.0;
  double side = 0.0;

  double area() const { return side * side; }
};

double overlap_area(const CropRect& a, const CropRect& b);

struct SyntheticView {
  ManifestRow row;  // path relative to the corpus directory
  std::size_t place = 0;
  std::uint32_t level = 0;
  CropRect crop;
  Image image;       // already quantised to 8 bits, equal to the file content
  Descriptor height; // separable descriptors for injection
  Descriptor place_descriptor;
};

struct SyntheticCorpus {
  std::size_t places = 0;
  std::size_t levels = 0;
  std::vector<SyntheticView> database;  // place-major, then level
  std::vector<SyntheticView> queries;   // same order as database
};

/// Deterministic in the config (seed included).
SyntheticCorpus generate_synthetic(const RunConfig& config);

// Files written under out_dir:
//   db/ and queries/        one PGM per view
//   db_manifest.csv, query_manifest.csv
//   db_place.hevd, db_height.hevd, query_place.hevd, query_height.hevd
void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir);

}  // namespace heviper
