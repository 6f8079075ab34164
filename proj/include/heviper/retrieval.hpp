#pragma once

// Exact nearest-neighbour search and the two-stage query: estimate height by
// retrieval over the height database, select the sub-databases of the top-k
// height labels, then rank places inside the union of those sub-databases.

#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "heviper/height_db.hpp"

namespace heviper {

struct Hit {
  std::uint64_t id = 0;
  float score = 0.0f;

  friend bool operator==(const Hit&, const Hit&) = default;
};

/// Best first: descending score, ties by ascending id.
using RankedList = std::vector<Hit>;

inline bool ranks_before(const Hit& a, const Hit& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

struct HeightHit {
  std::uint64_t id = 0;
  float score = 0.0f;
  float height_m = 0.0f;

  friend bool operator==(const HeightHit&, const HeightHit&) = default;
};

struct Candidate {
  std::uint64_t id;
  std::span<const float> values;
};

/// Exact top-min(k, |pool|) by dot product of unit vectors. With threads > 1
/// the scan is split into chunks whose partial results are merged; the
/// output is identical to the sequential scan.
RankedList knn(std::span<const float> query, std::span<const Candidate> pool, std::size_t k, std::size_t threads = 1);

std::vector<Candidate> candidates(std::span<const PlaceEntry> entries);

/// knn over the height database; hits carry their labels. The first label is
/// the point estimate.
std::vector<HeightHit> estimate_height(const Descriptor& query, const HeightDatabase& hdb, std::size_t k,
                                       std::size_t threads = 1);

/// Levels of the top-k height labels, deduplicated.
std::set<std::uint32_t> select_subdatabases(std::span<const HeightHit> ranking, std::size_t k,
                                            const Partition& partition);

struct QueryResult {
  std::vector<HeightHit> height_candidates;
  std::set<std::uint32_t> selected_levels;
  RankedList place_ranking;
  std::size_t searched_count = 0;

  friend bool operator==(const QueryResult&, const QueryResult&) = default;
};

/// Stage 2 alone: one global ranking over the union of `levels`.
/// Errc::empty_search_space when every selected sub-database is empty.
QueryResult search_levels(const Descriptor& place, const HeightPartitionedDatabase& db,
                          const std::set<std::uint32_t>& levels, std::size_t k_place, std::size_t threads = 1);

/// Both stages from precomputed descriptors.
QueryResult he_vpr_query(const Descriptor& height, const Descriptor& place, const HeightDatabase& hdb,
                         const HeightPartitionedDatabase& db, std::size_t k_height, std::size_t k_place,
                         std::size_t threads = 1);

/// Baseline over every sub-database.
QueryResult full_query(const Descriptor& place, const HeightPartitionedDatabase& db, std::size_t k_place,
                       std::size_t threads = 1);

}  // namespace heviper
