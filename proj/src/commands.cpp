#include "heviper/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "heviper/error.hpp"
#include "heviper/manifest.hpp"
#include "heviper/system.hpp"
#include <json.hpp>
#include "parallel.hpp"

namespace heviper {

namespace {

using nlohmann::ordered_json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

Descriptor injected(const DescriptorSet& set, std::uint64_t id, const std::filesystem::path& from) {
  const auto row = set.find(id);
  if (!row) fail(Errc::input, from.string() + " has no descriptor for id " + std::to_string(id));
  const auto values = set.row(*row);
  return Descriptor{{values.begin(), values.end()}, false};
}

GeoTaggedDescriptor tagged(const ManifestRow& row, Descriptor d) {
  return {row.id, std::move(d), Position{row.east_m, row.north_m}, row.height_m};
}

std::vector<ManifestRow> nonempty_manifest(const std::filesystem::path& path) {
  auto rows = load_manifest(path);
  if (rows.empty()) fail(Errc::input, path.string() + ": manifest has no entries");
  return rows;
}

void print_levels(std::ostream& out, const std::vector<std::size_t>& sizes, const Partition& partition) {
  for (std::uint32_t l = 1; l <= sizes.size(); ++l) {
    const HeightLevel& lvl = partition.level(l);
    out << "  level " << l << " [" << lvl.h_min << ", " << lvl.h_max << ") m: " << sizes[l - 1] << "\n";
  }
}

std::string id_list(const std::vector<std::uint64_t>& ids) {
  std::string s;
  for (auto id : ids) s += (s.empty() ? "" : ", ") + std::to_string(id);
  return s;
}

}  // namespace

BuildSummary cmd_build_db(const std::filesystem::path& manifest, const RunConfig& config,
                          const std::filesystem::path& out_path, const std::optional<std::filesystem::path>& descriptors,
                          const RunOptions& options, std::ostream& out) {
  config.validate();
  const auto rows = nonempty_manifest(manifest);
  std::vector<GeoTaggedDescriptor> entries(rows.size());
  if (descriptors) {
    const DescriptorSet set = load_descriptor_set(*descriptors);
    for (std::size_t i = 0; i < rows.size(); ++i) entries[i] = tagged(rows[i], injected(set, rows[i].id, *descriptors));
  } else {
    const Extractor extractor(config);
    detail::parallel_for(rows.size(), options.threads, [&](std::size_t i) {
      entries[i] = tagged(rows[i], extractor.place(load_image(rows[i].path)));
    });
  }

  const PartitionBuild build = build_partitioned_db(entries, config.make_partition());
  if (!build.rejected.empty())
    spdlog::warn("rejected {} entries with heights outside [{}, {}): {}", build.rejected.size(),
                 build.db.partition.range_min(), build.db.partition.range_max(), id_list(build.rejected));
  save_place_db(out_path, build.db);

  BuildSummary summary{build.db.level_sizes(), build.rejected, build.db.total_count()};
  out << "wrote " << out_path.string() << ": " << summary.total << " entries in " << summary.level_sizes.size()
      << " levels\n";
  print_levels(out, summary.level_sizes, build.db.partition);
  if (!summary.rejected.empty()) out << "rejected (height out of range): " << id_list(summary.rejected) << "\n";
  return summary;
}

BuildSummary cmd_build_height_db(const std::filesystem::path& manifest, const RunConfig& config,
                                 const std::filesystem::path& out_path,
                                 const std::optional<std::filesystem::path>& descriptors, const RunOptions& options,
                                 std::ostream& out) {
  config.validate();
  const auto rows = nonempty_manifest(manifest);
  const Partition partition = config.make_partition();

  // Sampling only looks at heights, so pick the sample with placeholder
  // descriptors and extract just the chosen images.
  std::vector<GeoTaggedDescriptor> placeholders;
  placeholders.reserve(rows.size());
  for (const auto& r : rows) placeholders.push_back(tagged(r, Descriptor{{1.0f}, false}));
  HeightDatabase hdb = build_height_db(placeholders, partition, config.height_db.per_level_cap, config.seed);

  std::unordered_map<std::uint64_t, const ManifestRow*> by_id;
  for (const auto& r : rows) by_id.emplace(r.id, &r);
  if (descriptors) {
    const DescriptorSet set = load_descriptor_set(*descriptors);
    for (auto& e : hdb.entries) e.descriptor = l2_normalize(injected(set, e.id, *descriptors));
  } else {
    const Extractor extractor(config);
    detail::parallel_for(hdb.entries.size(), options.threads, [&](std::size_t i) {
      auto& e = hdb.entries[i];
      e.descriptor = extractor.height(load_image(by_id.at(e.id)->path));
    });
  }
  save_height_db(out_path, hdb);

  BuildSummary summary;
  summary.level_sizes.assign(partition.level_count(), 0);
  for (const auto& e : hdb.entries) ++summary.level_sizes[height_to_level(e.height_label, partition) - 1];
  summary.total = hdb.entries.size();
  for (const auto& r : rows) {
    const double h = r.height_m;
    if (h < partition.range_min() || h >= partition.range_max()) summary.rejected.push_back(r.id);
  }
  if (summary.total >= rows.size())
    spdlog::warn("height database holds {} entries for a {}-entry source; it is not compact", summary.total,
                 rows.size());
  out << "wrote " << out_path.string() << ": " << summary.total << " height entries (cap "
      << config.height_db.per_level_cap << " per level)\n";
  print_levels(out, summary.level_sizes, partition);
  return summary;
}

std::string query_result_to_json(const QueryResult& result) {
  ordered_json j;
  j["height_candidates"] = ordered_json::array();
  for (const auto& h : result.height_candidates)
    j["height_candidates"].push_back({{"id", h.id}, {"score", h.score}, {"height_m", h.height_m}});
  j["selected_levels"] = ordered_json::array();
  for (auto l : result.selected_levels) j["selected_levels"].push_back(l);
  j["place_ranking"] = ordered_json::array();
  for (const auto& h : result.place_ranking) j["place_ranking"].push_back({{"id", h.id}, {"score", h.score}});
  j["searched_count"] = result.searched_count;
  return j.dump(2) + "\n";
}

QueryResult query_result_from_json(const std::string& text) {
  try {
    const auto j = ordered_json::parse(text);
    QueryResult r;
    for (const auto& h : j.at("height_candidates"))
      r.height_candidates.push_back(
          {h.at("id").get<std::uint64_t>(), h.at("score").get<float>(), h.at("height_m").get<float>()});
    for (const auto& l : j.at("selected_levels")) r.selected_levels.insert(l.get<std::uint32_t>());
    for (const auto& h : j.at("place_ranking"))
      r.place_ranking.push_back({h.at("id").get<std::uint64_t>(), h.at("score").get<float>()});
    r.searched_count = j.at("searched_count").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema, std::string("query result JSON: ") + e.what());
  }
}

QueryResult cmd_query(const QueryRequest& request, const RunConfig& config, const RunOptions& options,
                      std::ostream& out) {
  config.validate();
  if (request.k_height < 1 || request.k_place < 1) fail(Errc::config, "k_height and k_place must be >= 1");
  const HeightPartitionedDatabase db = load_place_db(request.db);
  std::optional<HeightDatabase> hdb;
  if (!request.full) hdb = load_height_db(request.height_db);
  const Image image = load_image(request.image);
  const Extractor extractor(config);

  QueryResult result;
  if (request.full) {
    result = full_query(extractor.place(image), db, request.k_place, options.threads);
  } else {
    const DescriptorPair d = extractor.describe(image);
    result = he_vpr_query(d.height, d.place, *hdb, db, request.k_height, request.k_place, options.threads);
  }

  if (options.json) {
    out << query_result_to_json(result);
    return result;
  }
  if (!request.full) {
    out << "height candidates:\n";
    for (const auto& h : result.height_candidates)
      out << "  " << h.id << "  label " << h.height_m << " m  score " << h.score << "\n";
  }
  out << "selected levels:";
  for (auto l : result.selected_levels) out << " " << l;
  out << "\nplaces:\n";
  for (std::size_t i = 0; i < result.place_ranking.size(); ++i)
    out << "  " << std::setw(3) << i + 1 << ". " << result.place_ranking[i].id << "  score "
        << result.place_ranking[i].score << "\n";
  out << "searched " << result.searched_count << " of " << db.total_count() << " entries\n";
  return result;
}

EvalReport cmd_evaluate(const EvaluateRequest& request, const RunConfig& config, const RunOptions& options,
                        std::ostream& out) {
  config.validate();
  const auto rows = nonempty_manifest(request.queries);
  const HeightPartitionedDatabase db = load_place_db(request.db);
  const HeightDatabase hdb = load_height_db(request.height_db);
  if (db.total_count() == 0) fail(Errc::empty_pool, request.db.string() + ": database is empty");
  const Partition& partition = db.partition;

  std::optional<DescriptorSet> place_set;
  std::optional<DescriptorSet> height_set;
  if (request.place_descriptors) place_set = load_descriptor_set(*request.place_descriptors);
  if (request.height_descriptors) height_set = load_descriptor_set(*request.height_descriptors);
  std::optional<Extractor> extractor;
  if (!place_set || !height_set) extractor.emplace(config);

  const auto& ev = config.eval;
  const std::vector<std::size_t> ns(ev.recall_n.begin(), ev.recall_n.end());
  const std::size_t max_n = std::max<std::size_t>(*std::max_element(ns.begin(), ns.end()), 10);
  const std::size_t max_k = *std::max_element(ev.k_heights.begin(), ev.k_heights.end());
  const std::size_t height_k = std::max(max_n, max_k);
  const std::size_t n_queries = rows.size();
  const std::size_t n_methods = 2 + ev.k_heights.size();  // full, he-vpr(k)..., oracle-height

  // Per query: height labels, then for each method the ranking and scan size.
  std::vector<std::vector<float>> labels(n_queries);
  std::vector<std::vector<RankedList>> rankings(n_methods, std::vector<RankedList>(n_queries));
  std::vector<std::vector<std::size_t>> searched(n_methods, std::vector<std::size_t>(n_queries, 0));
  std::vector<std::vector<char>> empty_flags(n_methods, std::vector<char>(n_queries, 0));

  detail::parallel_for(n_queries, options.threads, [&](std::size_t q) {
    const ManifestRow& row = rows[q];
    Descriptor height, place;
    if (place_set && height_set) {
      place = injected(*place_set, row.id, *request.place_descriptors);
      height = injected(*height_set, row.id, *request.height_descriptors);
    } else {
      const Image image = load_image(row.path);
      if (!place_set && !height_set) {
        DescriptorPair d = extractor->describe(image);
        height = std::move(d.height);
        place = std::move(d.place);
      } else if (place_set) {
        place = injected(*place_set, row.id, *request.place_descriptors);
        height = extractor->height(image);
      } else {
        height = injected(*height_set, row.id, *request.height_descriptors);
        place = extractor->place(image);
      }
    }
    place = l2_normalize(place);
    height = l2_normalize(height);

    const std::vector<HeightHit> hranking = estimate_height(height, hdb, height_k);
    for (const auto& h : hranking) labels[q].push_back(h.height_m);

    auto run = [&](std::size_t m, const std::set<std::uint32_t>& levels) {
      try {
        QueryResult r = search_levels(place, db, levels, max_n);
        rankings[m][q] = std::move(r.place_ranking);
        searched[m][q] = r.searched_count;
      } catch (const Error& e) {
        if (e.code() != Errc::empty_search_space) throw;
        empty_flags[m][q] = 1;
      }
    };
    std::set<std::uint32_t> all;
    for (std::uint32_t l = 1; l <= db.sub_dbs.size(); ++l) all.insert(l);
    run(0, all);
    for (std::size_t i = 0; i < ev.k_heights.size(); ++i)
      run(1 + i, select_subdatabases(hranking, ev.k_heights[i], partition));
    const double h = row.height_m;
    if (h >= partition.range_min() && h < partition.range_max())
      run(n_methods - 1, {height_to_level(h, partition)});
    else
      empty_flags[n_methods - 1][q] = 1;
  });

  std::vector<GroundTruth> truth;
  truth.reserve(n_queries);
  for (const auto& r : rows) truth.push_back({r.east_m, r.north_m, r.height_m});
  const auto index = position_index(db);

  EvalReport report;
  report.query_count = n_queries;
  report.database_count = db.total_count();
  report.height_database_count = hdb.entries.size();
  report.performance_threshold_m = ev.performance_threshold_m;
  report.height_recall = height_recall_table(labels, truth, ns, ev.height_thresholds_m);
  report.e_avg_m = avg_height_error(labels, truth);

  RecallTriple baseline;
  for (std::size_t m = 0; m < n_methods; ++m) {
    MethodReport mr;
    if (m == 0) {
      mr.name = "full";
    } else if (m + 1 == n_methods) {
      mr.name = "oracle-height";
    } else {
      mr.k_height = ev.k_heights[m - 1];
      mr.name = "he-vpr(" + std::to_string(*mr.k_height) + ")";
    }
    std::vector<std::vector<Position>> positions(n_queries);
    for (std::size_t q = 0; q < n_queries; ++q) positions[q] = retrieved_positions(rankings[m][q], index);
    mr.recall = recall_table(positions, truth, ns, ev.thresholds_m);
    mr.memory_usage_pct = memory_usage_pct(searched[m], db.total_count());
    const double t = ev.performance_threshold_m;
    const RecallTriple triple{recall_at_n(positions, truth, 1, t), recall_at_n(positions, truth, 5, t),
                              recall_at_n(positions, truth, 10, t)};
    if (m == 0) baseline = triple;
    mr.performance = performance_ratio_pct(triple, baseline);
    const auto empties = static_cast<std::size_t>(std::count(empty_flags[m].begin(), empty_flags[m].end(), 1));
    if (empties > 0)
      spdlog::warn("{}: {} of {} queries had an empty search space and count as misses", mr.name, empties, n_queries);
    report.methods.push_back(std::move(mr));
  }
  check_report_invariants(report);

  std::error_code ec;
  std::filesystem::create_directories(request.out_dir, ec);
  if (ec) fail(Errc::io, "cannot create " + request.out_dir.string() + ": " + ec.message());
  const std::string json = report_to_json(report);
  write_text(request.out_dir / "report.json", json);
  write_text(request.out_dir / "report.txt", report_to_text(report));
  if (request.csv) write_text(request.out_dir / "report.csv", report_to_csv(report));
  out << (options.json ? json : report_to_text(report));
  return report;
}

SyntheticCorpus cmd_gen_synthetic(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& out) {
  SyntheticCorpus corpus = generate_synthetic(config);
  write_synthetic(corpus, out_dir);
  out << "wrote " << corpus.database.size() << " database and " << corpus.queries.size() << " query images ("
      << corpus.places << " places x " << corpus.levels << " levels) to " << out_dir.string() << "\n";
  return corpus;
}

}  // namespace heviper
