#pragma once

// The CLI verbs as library calls. Each writes its human-readable summary to
// `out` and returns the structured result.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "heviper/config.hpp"
#include "heviper/metrics.hpp"
#include "heviper/retrieval.hpp"
#include "heviper/synthetic.hpp"

namespace heviper {

struct RunOptions {
  std::size_t threads = 1;
  bool json = false;
};

struct BuildSummary {
  std::vector<std::size_t> level_sizes;
  std::vector<std::uint64_t> rejected;  // out-of-range heights
  std::size_t total = 0;
};

/// Place descriptors come from `descriptors` (an HEVD file keyed by manifest
/// id) when given, else from the configured extractor.
BuildSummary cmd_build_db(const std::filesystem::path& manifest, const RunConfig& config,
                          const std::filesystem::path& out_path, const std::optional<std::filesystem::path>& descriptors,
                          const RunOptions& options, std::ostream& out);

/// Samples per_level_cap entries per level (seeded by config.seed), then
/// extracts height descriptors for the sample only. Warns when the result is
/// not smaller than the manifest.
BuildSummary cmd_build_height_db(const std::filesystem::path& manifest, const RunConfig& config,
                                 const std::filesystem::path& out_path,
                                 const std::optional<std::filesystem::path>& descriptors, const RunOptions& options,
                                 std::ostream& out);

struct QueryRequest {
  std::filesystem::path image;
  std::filesystem::path db;
  std::filesystem::path height_db;  // unused with full
  std::size_t k_height = 1;
  std::size_t k_place = 10;
  bool full = false;
};

QueryResult cmd_query(const QueryRequest& request, const RunConfig& config, const RunOptions& options,
                      std::ostream& out);

std::string query_result_to_json(const QueryResult& result);
/// Errc::schema on missing or mistyped fields.
QueryResult query_result_from_json(const std::string& text);

struct EvaluateRequest {
  std::filesystem::path queries;  // manifest with ground truth
  std::filesystem::path db;
  std::filesystem::path height_db;
  std::filesystem::path out_dir;  // report.json, report.txt (and report.csv)
  bool csv = false;
  std::optional<std::filesystem::path> place_descriptors;   // HEVD keyed by query id
  std::optional<std::filesystem::path> height_descriptors;
};

/// Methods: "full", "he-vpr(k)" per configured k, and "oracle-height"
/// (the sub-database of the true height). Queries run in parallel and are
/// merged in manifest order.
EvalReport cmd_evaluate(const EvaluateRequest& request, const RunConfig& config, const RunOptions& options,
                        std::ostream& out);

SyntheticCorpus cmd_gen_synthetic(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& out);

}  // namespace heviper
