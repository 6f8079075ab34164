#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "heviper/synthetic.hpp"
#include "support.hpp"

using namespace heviper;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.partition = {100.0, 300.0, 50.0};
  c.synthetic.places = 10;
  c.synthetic.image_size = 32;
  c.synthetic.descriptor_dim = 16;
  return c;
}

double iou(const CropRect& a, const CropRect& b) {
  const double inter = overlap_area(a, b);
  return inter / (a.area() + b.area() - inter);
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("overlap of crops") {
  CHECK(overlap_area({0, 0, 2}, {0, 0, 2}) == 4.0);
  CHECK(overlap_area({0, 0, 2}, {1, 1, 2}) == 1.0);
  CHECK(overlap_area({0, 0, 2}, {5, 0, 2}) == 0.0);
  CHECK(overlap_area({0, 0, 4}, {0, 0, 2}) == 4.0);
}

TEST_CASE("corpus layout and ids") {
  const RunConfig c = small_config();
  const SyntheticCorpus corpus = generate_synthetic(c);
  CHECK(corpus.places == 10);
  CHECK(corpus.levels == 4);
  REQUIRE(corpus.database.size() == 40);
  REQUIRE(corpus.queries.size() == 40);
  const Partition part = c.make_partition();
  for (std::size_t i = 0; i < 40; ++i) {
    const SyntheticView& d = corpus.database[i];
    const SyntheticView& q = corpus.queries[i];
    CHECK(d.place == i / 4);
    CHECK(d.level == i % 4 + 1);
    CHECK(d.row.id == d.place * 4 + d.level);
    CHECK(q.row.id == d.row.id + kQueryIdOffset);
    CHECK(q.place == d.place);
    CHECK(q.level == d.level);
    CHECK(d.row.height_m == static_cast<float>(part.level(d.level).h_min + 25.0));
    CHECK(std::abs(q.row.height_m - d.row.height_m) <= 10.0f);
    CHECK(height_to_level(q.row.height_m, part) == q.level);
    CHECK(q.row.east_m == d.row.east_m);
    CHECK(q.row.north_m == d.row.north_m);
    CHECK(d.image.width == 32);
    CHECK(d.image.height == 32);
    for (float v : d.image.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      CHECK(std::round(v * 255.0f) == doctest::Approx(v * 255.0f).epsilon(1e-5));
    }
    CHECK(d.height.normalized);
    CHECK(d.place_descriptor.dim() == 16);
  }
  // Distinct places sit on distinct positions.
  const bool moved = corpus.database[0].row.east_m != corpus.database[4].row.east_m ||
                     corpus.database[0].row.north_m != corpus.database[4].row.north_m;
  CHECK(moved);
}

TEST_CASE("a query overlaps its own level's view the most") {
  const SyntheticCorpus corpus = generate_synthetic(small_config());
  for (const SyntheticView& q : corpus.queries) {
    double best = -1.0;
    std::uint32_t best_level = 0;
    for (const SyntheticView& d : corpus.database) {
      if (d.place != q.place) continue;
      CHECK(d.crop.center_x == q.crop.center_x);
      const double v = iou(q.crop, d.crop);
      if (v > best) best = v, best_level = d.level;
    }
    CHECK(best_level == q.level);
  }
}

TEST_CASE("footprints grow with height") {
  const SyntheticCorpus corpus = generate_synthetic(small_config());
  for (std::size_t p = 0; p < corpus.places; ++p)
    for (std::size_t l = 1; l < corpus.levels; ++l)
      CHECK(corpus.database[p * 4 + l].crop.side > corpus.database[p * 4 + l - 1].crop.side);
}

TEST_CASE("generation is deterministic in the seed") {
  RunConfig c = small_config();
  const auto a = generate_synthetic(c);
  const auto b = generate_synthetic(c);
  c.seed += 1;
  const auto other = generate_synthetic(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.database.size(); ++i) {
    CHECK(test::bits_equal(a.database[i].image.pixels, b.database[i].image.pixels));
    CHECK(test::bits_equal(a.queries[i].place_descriptor.values, b.queries[i].place_descriptor.values));
    CHECK(a.queries[i].row.height_m == b.queries[i].row.height_m);
    any_diff |= !test::bits_equal(a.database[i].image.pixels, other.database[i].image.pixels);
  }
  CHECK(any_diff);

  const auto d1 = test::scratch_dir("synthetic_a"), d2 = test::scratch_dir("synthetic_b");
  write_synthetic(a, d1);
  write_synthetic(b, d2);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), d1);
    CHECK(test::read_bytes(entry.path()) == test::read_bytes(d2 / rel));
  }
}

TEST_CASE("written corpus matches the generated views") {
  const auto corpus = generate_synthetic(small_config());
  const auto dir = test::scratch_dir("synthetic_files");
  write_synthetic(corpus, dir);
  const auto db_rows = load_manifest(dir / "db_manifest.csv");
  const auto q_rows = load_manifest(dir / "query_manifest.csv");
  REQUIRE(db_rows.size() == 40);
  REQUIRE(q_rows.size() == 40);
  for (std::size_t i = 0; i < 40; i += 7) {
    CHECK(db_rows[i].id == corpus.database[i].row.id);
    CHECK(q_rows[i].height_m == corpus.queries[i].row.height_m);
    const Image img = load_image(db_rows[i].path);
    CHECK(test::bits_equal(img.pixels, corpus.database[i].image.pixels));
  }
  const DescriptorSet places = load_descriptor_set(dir / "query_place.hevd");
  CHECK(places.size() == 40);
  const auto row = places.find(corpus.queries[3].row.id);
  REQUIRE(row.has_value());
  const auto values = places.row(*row);
  CHECK(test::bits_equal({values.begin(), values.end()}, corpus.queries[3].place_descriptor.values));
  for (const char* name : {"db_height.hevd", "db_place.hevd", "query_height.hevd"})
    CHECK(std::filesystem::exists(dir / name));
}

TEST_CASE("separable descriptors need one dimension per level") {
  RunConfig c = small_config();
  c.synthetic.descriptor_dim = 3;
  CHECK(test::error_code([&] { generate_synthetic(c); }) == Errc::config);
}

}
