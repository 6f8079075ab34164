#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "heviper/retrieval.hpp"
#include "support.hpp"

using namespace heviper;

namespace {

const Partition kDefault(100.0, 1200.0, 50.0);

Descriptor unit(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  rng.fill_uniform(v, -1.0, 1.0);
  return l2_normalize({v, false});
}

// Sequential reference: score everything, sort fully, cut.
RankedList brute_force(std::span<const float> q, std::span<const Candidate> pool, std::size_t k) {
  RankedList all;
  for (const Candidate& c : pool) {
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) s += static_cast<double>(q[i]) * c.values[i];
    all.push_back({c.id, static_cast<float>(s)});
  }
  std::sort(all.begin(), all.end(), ranks_before);
  all.resize(std::min(k, all.size()));
  return all;
}

std::vector<std::uint64_t> ids_of(const RankedList& r) {
  std::vector<std::uint64_t> out;
  for (const Hit& h : r) out.push_back(h.id);
  return out;
}

struct Fixture {
  HeightPartitionedDatabase db;
  HeightDatabase hdb;
};

// Entries spread over `levels` of the default partition, `per_level` each.
Fixture make_fixture(std::uint64_t seed, const std::vector<std::uint32_t>& levels, std::size_t per_level,
                     std::size_t dim = 16) {
  Rng rng(seed);
  std::vector<GeoTaggedDescriptor> entries;
  std::uint64_t id = 0;
  for (std::uint32_t l : levels)
    for (std::size_t i = 0; i < per_level; ++i)
      entries.push_back({id++, unit(rng, dim), {rng.uniform(0, 1000), rng.uniform(0, 1000)},
                         kDefault.level(l).h_min + rng.uniform(0.0, 49.0)});
  Fixture f;
  f.db = build_partitioned_db(entries, kDefault).db;
  f.hdb = build_height_db(entries, kDefault, 3, seed);
  return f;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("knn ranks by dot product") {
  const std::vector<float> a{1, 0}, b{0, 1}, c{0.6f, 0.8f};
  const std::vector<Candidate> pool{{1, a}, {2, b}, {3, c}};
  const std::vector<float> q{1, 0};
  const RankedList r = knn(q, pool, 2);
  REQUIRE(r.size() == 2);
  CHECK(r[0] == Hit{1, 1.0f});
  CHECK(r[1] == Hit{3, 0.6f});
  CHECK(knn(q, pool, 10).size() == 3);
  CHECK(knn(q, pool, 10)[2] == Hit{2, 0.0f});
  CHECK(test::error_code([&] { knn(q, pool, 0); }) == Errc::config);
  CHECK(test::error_code([&] { knn(q, std::span<const Candidate>{}, 1); }) == Errc::empty_pool);
  const std::vector<float> wide{1, 0, 0};
  const std::vector<Candidate> mixed{{1, a}, {2, wide}};
  CHECK(test::error_code([&] { knn(q, mixed, 1); }) == Errc::input);
}

TEST_CASE("ties break by ascending id") {
  const std::vector<float> v{0.6f, 0.8f};
  const std::vector<Candidate> pool{{9, v}, {4, v}, {7, v}};
  const std::vector<float> q{0.6f, 0.8f};
  CHECK(ids_of(knn(q, pool, 3)) == std::vector<std::uint64_t>{4, 7, 9});
}

TEST_CASE("knn matches a full sort, with heavy ties") {
  Rng rng(70);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.below(300);
    const std::size_t dim = 4;
    std::vector<std::vector<float>> store(n, std::vector<float>(dim));
    std::vector<Candidate> pool;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grid of values so many scores collide exactly.
      for (float& x : store[i]) x = static_cast<float>(rng.below(3)) * 0.5f;
      pool.push_back({rng.below(1000) * 1000 + i, store[i]});
    }
    std::vector<float> q(dim);
    for (float& x : q) x = static_cast<float>(rng.below(3)) * 0.5f;
    const std::size_t k = 1 + rng.below(n + 5);
    CHECK(knn(q, pool, k) == brute_force(q, pool, k));
  }
}

TEST_CASE("threaded knn equals the sequential scan") {
  Rng rng(71);
  const std::size_t n = 20000, dim = 32;
  std::vector<std::vector<float>> store;
  std::vector<Candidate> pool;
  store.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    store.push_back(unit(rng, dim).values);
    // Duplicated rows force equal scores across chunk boundaries.
    if (i % 997 == 0 && i > 0) store.back() = store[i - 1];
    pool.push_back({n - i, store.back()});
  }
  const Descriptor q = unit(rng, dim);
  const RankedList seq = knn(q.values, pool, 50, 1);
  for (std::size_t t : {2u, 3u, 4u, 8u}) CHECK(knn(q.values, pool, 50, t) == seq);
  CHECK(ids_of(seq) == ids_of(brute_force(q.values, pool, 50)));
}

TEST_CASE("height estimate and sub-database selection") {
  const std::vector<HeightHit> ranking{{1, 0.9f, 150.0f}, {2, 0.8f, 150.0f}, {3, 0.7f, 200.0f}};
  CHECK(select_subdatabases(ranking, 3, kDefault) == std::set<std::uint32_t>{2, 3});
  CHECK(select_subdatabases(ranking, 1, kDefault) == std::set<std::uint32_t>{2});
  CHECK(select_subdatabases(ranking, 10, kDefault) == std::set<std::uint32_t>{2, 3});
  CHECK(test::error_code([&] { select_subdatabases(ranking, 0, kDefault); }) == Errc::config);

  HeightDatabase hdb;
  hdb.partition = kDefault;
  hdb.entries.push_back({5, {{1, 0}, true}, {}, 430.0f});
  hdb.entries.push_back({6, {{0, 1}, true}, {}, 900.0f});
  const auto est = estimate_height({{0.6f, 0.8f}, true}, hdb, 2);
  REQUIRE(est.size() == 2);
  CHECK(est[0] == HeightHit{6, 0.8f, 900.0f});
  CHECK(est[1] == HeightHit{5, 0.6f, 430.0f});
  CHECK(test::error_code([] { estimate_height({{1}, true}, HeightDatabase{kDefault, {}}, 1); }) == Errc::empty_pool);
}

TEST_CASE("selecting every level reproduces the full search") {
  const Fixture f = make_fixture(72, {1, 3, 4, 9, 22}, 20);
  Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const Descriptor h = unit(rng, 16), p = unit(rng, 16);
    const QueryResult full = full_query(p, f.db, 10);
    CHECK(full.searched_count == 100);
    const QueryResult all = he_vpr_query(h, p, f.hdb, f.db, f.hdb.entries.size(), 10);
    CHECK(all.selected_levels == std::set<std::uint32_t>{1, 3, 4, 9, 22});
    CHECK(all.place_ranking == full.place_ranking);
    CHECK(all.searched_count == full.searched_count);
  }
}

TEST_CASE("restricted search equals brute force over the chosen levels") {
  const Fixture f = make_fixture(74, {2, 5, 6, 7, 15}, 30);
  Rng rng(75);
  const std::vector<std::set<std::uint32_t>> choices{{5}, {2, 15}, {5, 6, 7}, {1, 2}};
  for (const auto& levels : choices) {
    const Descriptor p = unit(rng, 16);
    std::vector<PlaceEntry> subset;
    for (std::uint32_t l : levels) subset.insert(subset.end(), f.db.level(l).begin(), f.db.level(l).end());
    const QueryResult r = search_levels(p, f.db, levels, 7);
    CHECK(r.searched_count == subset.size());
    CHECK(ids_of(r.place_ranking) == ids_of(brute_force(p.values, candidates(subset), 7)));
    for (const Hit& h : r.place_ranking) {
      const auto it = std::find_if(subset.begin(), subset.end(), [&](const PlaceEntry& e) { return e.id == h.id; });
      CHECK(it != subset.end());
    }
  }
}

TEST_CASE("search space grows monotonically with k") {
  const Fixture f = make_fixture(76, {1, 2, 3, 4, 5, 6, 7, 8}, 10);
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Descriptor h = unit(rng, 16), p = unit(rng, 16);
    std::set<std::uint32_t> prev;
    std::size_t prev_count = 0;
    for (std::size_t k = 1; k <= f.hdb.entries.size(); ++k) {
      const QueryResult r = he_vpr_query(h, p, f.hdb, f.db, k, 5);
      CHECK(std::includes(r.selected_levels.begin(), r.selected_levels.end(), prev.begin(), prev.end()));
      CHECK(r.searched_count >= prev_count);
      CHECK(r.selected_levels.size() <= k);
      CHECK(r.height_candidates.size() == k);
      std::size_t expected = 0;
      for (std::uint32_t l : r.selected_levels) expected += f.db.level(l).size();
      CHECK(r.searched_count == expected);
      prev = r.selected_levels;
      prev_count = r.searched_count;
    }
  }
}

TEST_CASE("stage two agrees with the filtered full ranking") {
  const Fixture f = make_fixture(80, {1, 2, 4, 6, 9, 13}, 25);
  Rng rng(81);
  for (int trial = 0; trial < 30; ++trial) {
    const Descriptor h = unit(rng, 16), p = unit(rng, 16);
    const std::size_t k_height = 1 + rng.below(6);
    const QueryResult r = he_vpr_query(h, p, f.hdb, f.db, k_height, 8);
    const QueryResult full = full_query(p, f.db, f.db.total_count());
    std::set<std::uint64_t> allowed;
    for (std::uint32_t l : r.selected_levels)
      for (const PlaceEntry& e : f.db.level(l)) allowed.insert(e.id);
    RankedList filtered;
    for (const Hit& hit : full.place_ranking)
      if (allowed.contains(hit.id) && filtered.size() < 8) filtered.push_back(hit);
    CHECK(r.place_ranking == filtered);
    CHECK_FALSE(r.selected_levels.empty());
    CHECK(he_vpr_query(h, p, f.hdb, f.db, k_height, 8) == r);
  }
}

TEST_CASE("empty selections and databases") {
  const Fixture f = make_fixture(78, {3}, 5);
  const Descriptor p{{1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}, true};
  CHECK(test::error_code([&] { search_levels(p, f.db, {1, 2}, 5); }) == Errc::empty_search_space);
  CHECK(search_levels(p, f.db, {1, 3}, 5).searched_count == 5);
  CHECK(test::error_code([&] { search_levels(p, f.db, {23}, 5); }) == Errc::range);
  const HeightPartitionedDatabase empty = build_partitioned_db({}, kDefault).db;
  CHECK(test::error_code([&] { full_query(p, empty, 5); }) == Errc::empty_pool);
}

TEST_CASE("a single-level database makes both paths agree") {
  const Partition one(100.0, 150.0, 50.0);
  Rng rng(79);
  std::vector<GeoTaggedDescriptor> entries;
  for (std::uint64_t i = 0; i < 40; ++i) entries.push_back({i, unit(rng, 8), {}, 100.0 + rng.uniform(0, 49)});
  const auto db = build_partitioned_db(entries, one).db;
  const auto hdb = build_height_db(entries, one, 5, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const Descriptor h = unit(rng, 8), p = unit(rng, 8);
    const QueryResult a = he_vpr_query(h, p, hdb, db, 1, 10);
    const QueryResult b = full_query(p, db, 10);
    CHECK(a.place_ranking == b.place_ranking);
    CHECK(a.searched_count == b.searched_count);
  }
}

}
