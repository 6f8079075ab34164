#pragma once

// Run configuration, stored as TOML-style text:
//
//   seed = 42
//   [partition]
//   range_min_m = 100.0
//   ...
//
// Supported values: integers, floats, booleans, "strings" and flat arrays
// of numbers. Unknown sections or keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "heviper/descriptor.hpp"
#include "heviper/height_db.hpp"

namespace heviper {

struct RunConfig {
  std::uint64_t seed = 42;

  struct PartitionSection {
    double range_min_m = 100.0;
    double range_max_m = 1200.0;
    double interval_m = 50.0;

    friend bool operator==(const PartitionSection&, const PartitionSection&) = default;
  } partition;

  struct CameraSection {
    double focal_px = 64.0;
    std::uint64_t image_width_px = 64;

    friend bool operator==(const CameraSection&, const CameraSection&) = default;
  } camera;

  struct BackboneSection {
    std::uint64_t patch_size = 8;
    std::uint64_t pool_cells = 2;
    std::uint64_t channels = 1;

    friend bool operator==(const BackboneSection&, const BackboneSection&) = default;
  } backbone;

  struct AdapterSection {
    std::uint64_t layers = 4;
    std::uint64_t dim = 128;
    std::uint64_t bottleneck = 64;
    std::uint64_t dilation = 2;
    double init_scale = 0.02;
    bool he_mask = false;
    bool vpr_mask = true;
    std::string he_weights;  // empty: seeded synthetic weights
    std::string vpr_weights;

    friend bool operator==(const AdapterSection&, const AdapterSection&) = default;
  } adapter;

  struct RetrievalSection {
    std::uint64_t k_height = 1;
    std::uint64_t k_place = 10;
    std::string aggregator = "gem";
    double height_gem_p = 3.0;

    friend bool operator==(const RetrievalSection&, const RetrievalSection&) = default;
  } retrieval;

  struct HeightDbSection {
    std::uint64_t per_level_cap = 5;

    friend bool operator==(const HeightDbSection&, const HeightDbSection&) = default;
  } height_db;

  struct EvalSection {
    std::vector<double> thresholds_m{50.0, 100.0, 200.0};
    std::vector<double> height_thresholds_m{50.0, 100.0};
    std::vector<std::uint64_t> recall_n{1, 5, 10};
    std::vector<std::uint64_t> k_heights{1, 5, 10};
    double performance_threshold_m = 100.0;

    friend bool operator==(const EvalSection&, const EvalSection&) = default;
  } eval;

  struct SyntheticSection {
    std::uint64_t places = 25;
    std::uint64_t image_size = 64;
    double place_spacing_m = 2000.0;
    double meters_per_px = 2.0;
    double height_jitter_m = 10.0;
    std::uint64_t descriptor_dim = 64;
    double descriptor_noise = 0.05;

    friend bool operator==(const SyntheticSection&, const SyntheticSection&) = default;
  } synthetic;

  /// Throws Errc::config naming the offending field.
  void validate() const;

  Partition make_partition() const;
  CameraIntrinsics make_camera() const;
  BackboneStubConfig make_backbone() const;
  Aggregator make_aggregator() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

}  // namespace heviper
