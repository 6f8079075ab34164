// heviper: build databases, query and evaluate the two-stage height-aware
// place recognition pipeline.

#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "heviper/commands.hpp"
#include "heviper/error.hpp"

namespace {

int exit_code(heviper::Errc code) {
  switch (code) {
    case heviper::Errc::config:
    case heviper::Errc::shape:
      return 2;
    case heviper::Errc::empty_search_space:
      return 4;
    default:
      return 3;
  }
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("heviper");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("%^%l%$: %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("HEVIPER_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Height-aware visual place recognition"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  heviper::RunOptions options;
  app.add_option("--config", config_path, "Run configuration (TOML-style)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--threads", options.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--json", options.json, "Print JSON instead of text");
  app.fallthrough();

  std::string manifest, out_path;
  std::optional<std::string> descriptors;
  auto* build_db = app.add_subcommand("build-db", "Build the height-partitioned place database");
  build_db->add_option("--manifest", manifest, "Image manifest CSV")->required();
  build_db->add_option("--out", out_path, "Output database file")->required();
  build_db->add_option("--descriptors", descriptors, "Precomputed place descriptors (HEVD) keyed by id");

  std::optional<std::size_t> cap;
  auto* build_hdb = app.add_subcommand("build-height-db", "Build the compact height database");
  build_hdb->add_option("--manifest", manifest, "Image manifest CSV")->required();
  build_hdb->add_option("--out", out_path, "Output height database file")->required();
  build_hdb->add_option("--descriptors", descriptors, "Precomputed height descriptors (HEVD) keyed by id");
  build_hdb->add_option("--cap", cap, "Entries per level (overrides config)");

  heviper::QueryRequest query;
  std::optional<std::size_t> k_height, k_place;
  std::string image, db, hdb;
  auto* query_cmd = app.add_subcommand("query", "Retrieve places for one image");
  query_cmd->add_option("--image", image, "Query image (PGM/PPM or raw f32)")->required();
  query_cmd->add_option("--db", db, "Place database")->required();
  query_cmd->add_option("--height-db", hdb, "Height database");
  query_cmd->add_option("--k-height", k_height, "Height candidates used for sub-database selection");
  query_cmd->add_option("--k-place", k_place, "Places to return");
  query_cmd->add_flag("--full", query.full, "Search every sub-database");

  heviper::EvaluateRequest eval;
  std::string queries, out_dir;
  std::optional<std::string> place_desc, height_desc;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate against a ground-truth query manifest");
  eval_cmd->add_option("--queries", queries, "Query manifest CSV with ground truth")->required();
  eval_cmd->add_option("--db", db, "Place database")->required();
  eval_cmd->add_option("--height-db", hdb, "Height database")->required();
  eval_cmd->add_option("--out-dir", out_dir, "Report directory")->required();
  eval_cmd->add_flag("--csv", eval.csv, "Also write report.csv");
  eval_cmd->add_option("--place-descriptors", place_desc, "Precomputed query place descriptors (HEVD)");
  eval_cmd->add_option("--height-descriptors", height_desc, "Precomputed query height descriptors (HEVD)");

  auto* gen = app.add_subcommand("gen-synthetic", "Generate a seeded synthetic corpus");
  gen->add_option("--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    heviper::RunConfig config = config_path.empty() ? heviper::RunConfig{} : heviper::load_config(config_path);
    if (seed) config.seed = *seed;
    if (cap) config.height_db.per_level_cap = *cap;
    config.validate();

    auto opt_path = [](const std::optional<std::string>& s) -> std::optional<std::filesystem::path> {
      if (!s) return std::nullopt;
      return std::filesystem::path(*s);
    };

    if (build_db->parsed()) {
      heviper::cmd_build_db(manifest, config, out_path, opt_path(descriptors), options, std::cout);
    } else if (build_hdb->parsed()) {
      heviper::cmd_build_height_db(manifest, config, out_path, opt_path(descriptors), options, std::cout);
    } else if (query_cmd->parsed()) {
      if (!query.full && hdb.empty()) throw heviper::Error(heviper::Errc::config, "query needs --height-db unless --full");
      query.image = image;
      query.db = db;
      query.height_db = hdb;
      query.k_height = k_height.value_or(config.retrieval.k_height);
      query.k_place = k_place.value_or(config.retrieval.k_place);
      heviper::cmd_query(query, config, options, std::cout);
    } else if (eval_cmd->parsed()) {
      eval.queries = queries;
      eval.db = db;
      eval.height_db = hdb;
      eval.out_dir = out_dir;
      eval.place_descriptors = opt_path(place_desc);
      eval.height_descriptors = opt_path(height_desc);
      heviper::cmd_evaluate(eval, config, options, std::cout);
    } else if (gen->parsed()) {
      heviper::cmd_gen_synthetic(config, out_dir, std::cout);
    }
  } catch (const heviper::Error& e) {
    spdlog::error("{} ({})", e.what(), heviper::to_string(e.code()));
    return exit_code(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return 0;
}
