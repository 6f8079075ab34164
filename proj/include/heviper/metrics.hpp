#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "heviper/height_db.hpp"
#include "heviper/retrieval.hpp"

namespace heviper {

struct GroundTruth {
  double east_m = 0.0;
  double north_m = 0.0;
  double height_m = 0.0;
};

/// Percentage of queries with at least one of the first n retrieved
/// positions within `threshold_m` (planar Euclidean) of the true position.
/// Shorter rankings count only what they hold.
double recall_at_n(std::span<const std::vector<Position>> retrieved, std::span<const GroundTruth> truth, std::size_t n,
                   double threshold_m);

/// Same with |label - true height| <= threshold_m as the hit test.
double height_recall(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth, std::size_t n,
                     double threshold_m);

/// Mean |top-1 label - true height|.
double avg_height_error(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth);

/// 100 * mean(searched / total).
double memory_usage_pct(std::span<const std::size_t> searched_counts, std::size_t total_count);

struct RecallTriple {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
};

struct PerformanceRatio {
  double ratio_pct = 0.0;
  double delta_pct = 0.0;  // ratio - 100
};

/// 100 * (R@1 + R@5 + R@10)_method / (R@1 + R@5 + R@10)_baseline.
PerformanceRatio performance_ratio_pct(const RecallTriple& method, const RecallTriple& baseline);

/// Half-up rounding to `decimals` places, tolerant of binary representation
/// (86.105 rounds to 86.11).
double round_half_up(double value, int decimals = 2);

/// id -> position for every entry of the database.
std::unordered_map<std::uint64_t, Position> position_index(const HeightPartitionedDatabase& db);

std::vector<Position> retrieved_positions(const RankedList& ranking,
                                          const std::unordered_map<std::uint64_t, Position>& index);

/// recall[t][i] is R@ns[i] at thresholds[t], percent.
struct RecallTable {
  std::vector<std::size_t> ns;
  std::vector<double> thresholds_m;
  std::vector<std::vector<double>> recall;

  double at(double threshold_m, std::size_t n) const;
};

RecallTable recall_table(std::span<const std::vector<Position>> retrieved, std::span<const GroundTruth> truth,
                         std::span<const std::size_t> ns, std::span<const double> thresholds_m);
RecallTable height_recall_table(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth,
                                std::span<const std::size_t> ns, std::span<const double> thresholds_m);

struct MethodReport {
  std::string name;                     // "full", "he-vpr(k)", "oracle-height"
  std::optional<std::size_t> k_height;  // set for he-vpr rows
  RecallTable recall;
  double memory_usage_pct = 0.0;
  PerformanceRatio performance;
};

struct EvalReport {
  std::size_t query_count = 0;
  std::size_t database_count = 0;
  std::size_t height_database_count = 0;
  double performance_threshold_m = 100.0;
  RecallTable height_recall;
  double e_avg_m = 0.0;
  std::vector<MethodReport> methods;

  const MethodReport* method(const std::string& name) const;
};

/// Throws Errc::input if a table is not monotone in N and threshold or a
/// percentage leaves [0, 100].
void check_report_invariants(const EvalReport& report);

/// JSON with every percentage rounded half-up to two decimals. Key order is
/// fixed, so equal reports serialise to equal bytes.
std::string report_to_json(const EvalReport& report);
/// Table layout: one row per method, R@N grouped by threshold, then memory
/// usage and performance ratio with its signed delta.
std::string report_to_text(const EvalReport& report);
/// One row per (method, N, threshold) cell, height rows under method "height".
std::string report_to_csv(const EvalReport& report);

}  // namespace heviper
