#include "heviper/retrieval.hpp"

#include <algorithm>
#include <string>
#include <thread>
#include <unordered_map>

#include "heviper/error.hpp"

namespace heviper {

namespace {

constexpr std::size_t kMinChunk = 4096;

RankedList top_k(std::span<const float> query, std::span<const Candidate> pool, std::size_t k) {
  RankedList hits;
  hits.reserve(pool.size());
  for (const Candidate& c : pool) hits.push_back({c.id, dot(query, c.values)});
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), ranks_before);
  hits.resize(keep);
  return hits;
}

}  // namespace

RankedList knn(std::span<const float> query, std::span<const Candidate> pool, std::size_t k, std::size_t threads) {
  if (k < 1) fail(Errc::config, "knn: k must be >= 1");
  if (pool.empty()) fail(Errc::empty_pool, "knn: empty search pool");
  for (const Candidate& c : pool)
    if (c.values.size() != query.size())
      fail(Errc::input, "knn: candidate " + std::to_string(c.id) + " has dim " + std::to_string(c.values.size()) +
                            ", query has " + std::to_string(query.size()));

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, pool.size() / kMinChunk));
  if (workers == 1) return top_k(query, pool, k);

  // Each chunk keeps its own top-k; the union contains the global top-k and
  // is re-ranked with the same total order, so the result is schedule-free.
  std::vector<RankedList> partial(workers);
  std::vector<std::thread> pool_threads;
  const std::size_t chunk = (pool.size() + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(pool.size(), begin + chunk);
    pool_threads.emplace_back([&, w, begin, end] { partial[w] = top_k(query, pool.subspan(begin, end - begin), k); });
  }
  for (auto& t : pool_threads) t.join();
  RankedList merged;
  for (const auto& p : partial) merged.insert(merged.end(), p.begin(), p.end());
  const std::size_t keep = std::min(k, merged.size());
  std::partial_sort(merged.begin(), merged.begin() + static_cast<std::ptrdiff_t>(keep), merged.end(), ranks_before);
  merged.resize(keep);
  return merged;
}

std::vector<Candidate> candidates(std::span<const PlaceEntry> entries) {
  std::vector<Candidate> out;
  out.reserve(entries.size());
  for (const PlaceEntry& e : entries) out.push_back({e.id, e.descriptor.values});
  return out;
}

std::vector<HeightHit> estimate_height(const Descriptor& query, const HeightDatabase& hdb, std::size_t k,
                                       std::size_t threads) {
  if (hdb.entries.empty()) fail(Errc::empty_pool, "estimate_height: empty height database");
  std::vector<Candidate> pool;
  pool.reserve(hdb.entries.size());
  std::unordered_map<std::uint64_t, float> labels;
  for (const HeightEntry& e : hdb.entries) {
    pool.push_back({e.id, e.descriptor.values});
    labels.emplace(e.id, e.height_label);
  }
  std::vector<HeightHit> out;
  for (const Hit& h : knn(query.values, pool, k, threads)) out.push_back({h.id, h.score, labels.at(h.id)});
  return out;
}

std::set<std::uint32_t> select_subdatabases(std::span<const HeightHit> ranking, std::size_t k,
                                            const Partition& partition) {
  if (k < 1) fail(Errc::config, "select_subdatabases: k must be >= 1");
  std::set<std::uint32_t> levels;
  const std::size_t take = std::min(k, ranking.size());
  for (std::size_t i = 0; i < take; ++i) levels.insert(height_to_level(ranking[i].height_m, partition));
  return levels;
}

QueryResult search_levels(const Descriptor& place, const HeightPartitionedDatabase& db,
                          const std::set<std::uint32_t>& levels, std::size_t k_place, std::size_t threads) {
  QueryResult result;
  result.selected_levels = levels;
  std::vector<Candidate> pool;
  for (std::uint32_t l : levels) {
    if (l < 1 || l > db.sub_dbs.size()) fail(Errc::range, "level " + std::to_string(l) + " not in the database");
    const auto& sub = db.level(l);
    result.searched_count += sub.size();
    for (const PlaceEntry& e : sub) pool.push_back({e.id, e.descriptor.values});
  }
  if (pool.empty()) {
    std::string names;
    for (std::uint32_t l : levels) names += (names.empty() ? "" : ", ") + std::to_string(l);
    fail(Errc::empty_search_space, "selected sub-databases {" + names + "} are all empty");
  }
  result.place_ranking = knn(place.values, pool, k_place, threads);
  return result;
}

QueryResult he_vpr_query(const Descriptor& height, const Descriptor& place, const HeightDatabase& hdb,
                         const HeightPartitionedDatabase& db, std::size_t k_height, std::size_t k_place,
                         std::size_t threads) {
  std::vector<HeightHit> ranking = estimate_height(height, hdb, k_height, threads);
  QueryResult result = search_levels(place, db, select_subdatabases(ranking, k_height, db.partition), k_place, threads);
  result.height_candidates = std::move(ranking);
  return result;
}

QueryResult full_query(const Descriptor& place, const HeightPartitionedDatabase& db, std::size_t k_place,
                       std::size_t threads) {
  if (db.total_count() == 0) fail(Errc::empty_pool, "full_query: empty database");
  std::set<std::uint32_t> all;
  for (std::uint32_t l = 1; l <= db.sub_dbs.size(); ++l) all.insert(l);
  return search_levels(place, db, all, k_place, threads);
}

}  // namespace heviper
