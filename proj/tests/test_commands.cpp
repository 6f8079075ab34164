#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "heviper/commands.hpp"
#include "heviper/system.hpp"
#include "support.hpp"

using namespace heviper;

namespace {

RunConfig small_config() {
  RunConfig c;
  c.partition = {100.0, 300.0, 50.0};
  c.adapter.layers = 2;
  c.adapter.dim = 32;
  c.adapter.bottleneck = 16;
  c.synthetic.places = 6;
  c.synthetic.image_size = 32;
  c.synthetic.descriptor_dim = 16;
  return c;
}

struct Corpus {
  RunConfig config = small_config();
  std::filesystem::path dir;
  SyntheticCorpus data;

  explicit Corpus(const std::string& name) : dir(test::scratch_dir(name)) {
    std::ostringstream sink;
    data = cmd_gen_synthetic(config, dir, sink);
  }
  std::filesystem::path path(const char* name) const { return dir / name; }
};

void write_text(const std::filesystem::path& p, const std::string& s) { test::write_bytes(p, {s.begin(), s.end()}); }

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("build-db routes a small manifest into levels") {
  const Corpus c("cmd_build");
  const auto& db = c.data.database;
  // Level 1 once, level 3 twice.
  const std::vector<ManifestRow> rows{db[0].row, db[2].row, db[6].row};
  std::vector<ManifestRow> abs_rows = rows;
  for (auto& r : abs_rows) r.path = c.dir / r.path;
  save_manifest(c.path("three.csv"), abs_rows);
  std::ostringstream out;
  const BuildSummary s = cmd_build_db(c.path("three.csv"), c.config, c.path("three.hevb"), std::nullopt, {}, out);
  CHECK(s.total == 3);
  CHECK(s.level_sizes == std::vector<std::size_t>{1, 0, 2, 0});
  CHECK(s.rejected.empty());
  CHECK(out.str().find("3 entries in 4 levels") != std::string::npos);

  const auto loaded = load_place_db(c.path("three.hevb"));
  CHECK(loaded.level_sizes() == s.level_sizes);
  const Extractor ex(c.config);
  const Descriptor expect = ex.place(db[2].image);
  CHECK(test::bits_equal(loaded.level(3)[0].descriptor.values, expect.values));
  CHECK(loaded.level(3)[0].position.east == db[2].row.east_m);
}

TEST_CASE("build-db refuses an empty manifest") {
  const auto dir = test::scratch_dir("cmd_empty");
  write_text(dir / "m.csv", "id,path,height_m,east_m,north_m\n");
  std::ostringstream out;
  CHECK(test::error_code([&] { cmd_build_db(dir / "m.csv", small_config(), dir / "db.hevb", std::nullopt, {}, out); }) ==
        Errc::input);
  CHECK_FALSE(std::filesystem::exists(dir / "db.hevb"));
}

TEST_CASE("rebuilding is bit identical across thread counts") {
  const Corpus c("cmd_rebuild");
  std::ostringstream out;
  cmd_build_db(c.path("db_manifest.csv"), c.config, c.path("a.hevb"), std::nullopt, {1, false}, out);
  cmd_build_db(c.path("db_manifest.csv"), c.config, c.path("b.hevb"), std::nullopt, {4, false}, out);
  CHECK(test::read_bytes(c.path("a.hevb")) == test::read_bytes(c.path("b.hevb")));
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("a.hevh"), std::nullopt, {1, false}, out);
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("b.hevh"), std::nullopt, {3, false}, out);
  CHECK(test::read_bytes(c.path("a.hevh")) == test::read_bytes(c.path("b.hevh")));
}

TEST_CASE("build-db reports out-of-range entries and keeps going") {
  const Corpus c("cmd_reject");
  auto rows = load_manifest(c.path("db_manifest.csv"));
  rows[1].height_m = 950.0f;
  save_manifest(c.path("edited.csv"), rows);
  std::ostringstream out;
  const BuildSummary s =
      cmd_build_db(c.path("edited.csv"), c.config, c.path("db.hevb"), c.path("db_place.hevd"), {}, out);
  CHECK(s.rejected == std::vector<std::uint64_t>{rows[1].id});
  CHECK(s.total == rows.size() - 1);
  CHECK(out.str().find("rejected") != std::string::npos);
}

TEST_CASE("height database stays within its cap") {
  const Corpus c("cmd_height");
  std::ostringstream out;
  RunConfig cfg = c.config;
  cfg.height_db.per_level_cap = 2;
  const BuildSummary s = cmd_build_height_db(c.path("db_manifest.csv"), cfg, c.path("h.hevh"), std::nullopt, {}, out);
  CHECK(s.total == 2 * 4);
  for (auto n : s.level_sizes) CHECK(n <= 2);
  const HeightDatabase hdb = load_height_db(c.path("h.hevh"));
  CHECK(hdb.entries.size() == s.total);
  const Extractor ex(cfg);
  for (const auto& e : hdb.entries) {
    const SyntheticView& v = c.data.database.at(e.id - 1);
    REQUIRE(v.row.id == e.id);
    CHECK(e.height_label == v.row.height_m);
    CHECK(test::bits_equal(e.descriptor.values, ex.height(v.image).values));
  }
}

TEST_CASE("query agrees with the library pipeline") {
  const Corpus c("cmd_query");
  std::ostringstream out;
  cmd_build_db(c.path("db_manifest.csv"), c.config, c.path("db.hevb"), std::nullopt, {}, out);
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("h.hevh"), std::nullopt, {}, out);
  const auto db = load_place_db(c.path("db.hevb"));
  const auto hdb = load_height_db(c.path("h.hevh"));
  const Extractor ex(c.config);
  const SyntheticView& q = c.data.queries[5];
  const std::filesystem::path image = c.dir / q.row.path;

  QueryRequest req{image, c.path("db.hevb"), c.path("h.hevh"), 2, 5, false};
  std::ostringstream text;
  const QueryResult r = cmd_query(req, c.config, {}, text);
  const DescriptorPair d = ex.describe(q.image);
  CHECK(r == he_vpr_query(d.height, d.place, hdb, db, 2, 5));
  CHECK(text.str().find("selected levels:") != std::string::npos);

  req.full = true;
  std::ostringstream json;
  const QueryResult full = cmd_query(req, c.config, {1, true}, json);
  CHECK(full == full_query(d.place, db, 5));
  CHECK(full.searched_count == db.total_count());
  CHECK(query_result_from_json(json.str()) == full);
  CHECK(query_result_from_json(query_result_to_json(r)) == r);
  CHECK(test::error_code([] { query_result_from_json("{\"selected_levels\": []}"); }) == Errc::schema);
  CHECK(test::error_code([] { query_result_from_json("not json"); }) == Errc::schema);
}

TEST_CASE("evaluate on separable descriptors") {
  const Corpus c("cmd_eval");
  std::ostringstream out;
  cmd_build_db(c.path("db_manifest.csv"), c.config, c.path("db.hevb"), c.path("db_place.hevd"), {}, out);
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("h.hevh"), c.path("db_height.hevd"), {}, out);
  EvaluateRequest req{c.path("query_manifest.csv"), c.path("db.hevb"),          c.path("h.hevh"), c.path("r1"), true,
                      c.path("query_place.hevd"),   c.path("query_height.hevd")};
  const EvalReport a = cmd_evaluate(req, c.config, {1, false}, out);
  CHECK(a.query_count == 24);
  CHECK(a.height_recall.at(50, 1) == 100.0);
  const MethodReport* full = a.method("full");
  const MethodReport* he1 = a.method("he-vpr(1)");
  const MethodReport* oracle = a.method("oracle-height");
  REQUIRE(full);
  REQUIRE(he1);
  REQUIRE(oracle);
  CHECK(full->memory_usage_pct == 100.0);
  CHECK(full->performance.ratio_pct == 100.0);
  CHECK(he1->memory_usage_pct == doctest::Approx(25.0));
  CHECK(he1->recall.at(100, 1) == oracle->recall.at(100, 1));
  CHECK(oracle->memory_usage_pct == doctest::Approx(25.0));
  for (const MethodReport& m : a.methods) {
    CHECK(m.memory_usage_pct > 0.0);
    CHECK(m.memory_usage_pct <= 100.0);
  }
  for (const char* f : {"report.json", "report.txt", "report.csv"}) CHECK(std::filesystem::exists(req.out_dir / f));

  req.out_dir = c.path("r8");
  cmd_evaluate(req, c.config, {8, false}, out);
  CHECK(test::read_bytes(c.path("r1") / "report.json") == test::read_bytes(c.path("r8") / "report.json"));

  const auto j = nlohmann::json::parse(std::string(test::read_bytes(c.path("r1") / "report.json").data(),
                                                   test::read_bytes(c.path("r1") / "report.json").size()));
  CHECK(j["methods"].size() == 5);
  CHECK(j["methods"][0]["performance_ratio_pct"] == 100.0);
}

TEST_CASE("evaluate with extracted descriptors is thread independent") {
  const Corpus c("cmd_eval_stub");
  std::ostringstream out;
  cmd_build_db(c.path("db_manifest.csv"), c.config, c.path("db.hevb"), std::nullopt, {}, out);
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("h.hevh"), std::nullopt, {}, out);
  EvaluateRequest req{c.path("query_manifest.csv"), c.path("db.hevb"), c.path("h.hevh"), c.path("a"), false,
                      std::nullopt, std::nullopt};
  const EvalReport a = cmd_evaluate(req, c.config, {1, false}, out);
  req.out_dir = c.path("b");
  cmd_evaluate(req, c.config, {3, false}, out);
  CHECK(test::read_bytes(c.path("a") / "report.json") == test::read_bytes(c.path("b") / "report.json"));
  CHECK_FALSE(std::filesystem::exists(c.path("a") / "report.csv"));
  CHECK(a.method("full")->memory_usage_pct == 100.0);
}

TEST_CASE("evaluate counts empty search spaces as misses") {
  const Corpus c("cmd_eval_empty");
  std::ostringstream out;
  // Database holds only level 1 and 2 views; queries of levels 3-4 find nothing in their own level.
  auto rows = load_manifest(c.path("db_manifest.csv"));
  std::erase_if(rows, [](const ManifestRow& r) { return r.height_m > 200.0f; });
  save_manifest(c.path("low.csv"), rows);
  cmd_build_db(c.path("low.csv"), c.config, c.path("db.hevb"), c.path("db_place.hevd"), {}, out);
  cmd_build_height_db(c.path("db_manifest.csv"), c.config, c.path("h.hevh"), c.path("db_height.hevd"), {}, out);
  EvaluateRequest req{c.path("query_manifest.csv"), c.path("db.hevb"), c.path("h.hevh"), c.path("r"), false,
                      c.path("query_place.hevd"), c.path("query_height.hevd")};
  const EvalReport r = cmd_evaluate(req, c.config, {}, out);
  const MethodReport* oracle = r.method("oracle-height");
  REQUIRE(oracle);
  CHECK(oracle->recall.at(50, 10) <= 50.0);
  CHECK(oracle->memory_usage_pct == doctest::Approx(50.0 * 0.5));
}

}
