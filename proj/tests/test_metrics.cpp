#include <doctest.h>

#include <json.hpp>

#include "heviper/metrics.hpp"
#include "support.hpp"

using namespace heviper;

namespace {

EvalReport sample_report() {
  EvalReport r;
  r.query_count = 4;
  r.database_count = 40;
  r.height_database_count = 8;
  r.height_recall = {{1, 5}, {50.0, 100.0}, {{75.0, 100.0}, {100.0, 100.0}}};
  r.e_avg_m = 12.345;
  MethodReport full{"full", std::nullopt, {{1, 5, 10}, {50.0}, {{50.0, 75.0, 100.0}}}, 100.0, {100.0, 0.0}};
  MethodReport he{"he-vpr(1)", 1, {{1, 5, 10}, {50.0}, {{25.0, 75.0, 100.0}}}, 12.5, {}};
  he.performance = performance_ratio_pct({25.0, 75.0, 100.0}, {50.0, 75.0, 100.0});
  r.methods = {full, he};
  return r;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("place recall at N") {
  const std::vector<GroundTruth> truth{{0, 0, 300}, {1000, 1000, 300}};
  const std::vector<std::vector<Position>> got{{{500, 0}, {30, 40}}, {{0, 0}}};
  CHECK(recall_at_n(got, truth, 1, 50.0) == 0.0);
  CHECK(recall_at_n(got, truth, 2, 50.0) == 50.0);
  CHECK(recall_at_n(got, truth, 2, 49.9) == 0.0);
  CHECK(recall_at_n(got, truth, 10, 2000.0) == 100.0);
  CHECK(test::error_code([] { recall_at_n({}, {}, 1, 50.0); }) == Errc::undefined_metric);
  CHECK(test::error_code([&] { recall_at_n(got, std::span(truth).first(1), 1, 50.0); }) == Errc::input);
  CHECK(test::error_code([&] { recall_at_n(got, truth, 0, 50.0); }) == Errc::input);
  CHECK(test::error_code([&] { recall_at_n(got, truth, 1, 0.0); }) == Errc::input);
}

TEST_CASE("height recall and average error") {
  const std::vector<GroundTruth> truth{{0, 0, 500}};
  const std::vector<std::vector<float>> one{{430.0f}};
  CHECK(height_recall(one, truth, 1, 50.0) == 0.0);
  CHECK(height_recall(one, truth, 1, 100.0) == 100.0);
  CHECK(avg_height_error(one, truth) == 70.0);
  const std::vector<GroundTruth> two{{0, 0, 300}, {0, 0, 600}};
  const std::vector<std::vector<float>> labels{{300.0f}, {500.0f, 600.0f}};
  CHECK(avg_height_error(labels, two) == 50.0);
  CHECK(height_recall(labels, two, 1, 50.0) == 50.0);
  CHECK(height_recall(labels, two, 2, 50.0) == 100.0);
  CHECK(test::error_code([] { avg_height_error({}, {}); }) == Errc::undefined_metric);
}

TEST_CASE("memory usage") {
  const std::vector<std::size_t> searched{100, 300, 600};
  CHECK(memory_usage_pct(searched, 1000) == doctest::Approx(100.0 / 3.0));
  const std::vector<std::size_t> one{300};
  CHECK(memory_usage_pct(one, 1000) == doctest::Approx(30.0));
  const std::vector<std::size_t> all{1000, 1000};
  CHECK(memory_usage_pct(all, 1000) == 100.0);
  CHECK(test::error_code([] { memory_usage_pct({}, 10); }) == Errc::undefined_metric);
  CHECK(test::error_code([&] { memory_usage_pct(one, 0); }) == Errc::input);
}

TEST_CASE("performance ratio on reference recall triples") {
  const RecallTriple studio{69.50, 76.42, 79.08};
  const RecallTriple flight{57.61, 72.49, 77.82};
  struct Row {
    RecallTriple method;
    const RecallTriple* base;
    double ratio;
  };
  const Row rows[] = {
      {{57.25, 66.50, 70.00}, &studio, 86.11}, {{69.92, 76.17, 78.67}, &studio, 99.89},
      {{70.42, 76.83, 79.00}, &studio, 100.56}, {{49.14, 68.07, 74.06}, &flight, 91.99},
      {{56.80, 72.94, 77.72}, &flight, 99.78}, {{57.41, 71.93, 77.46}, &flight, 99.46},
  };
  for (const Row& r : rows) {
    const PerformanceRatio p = performance_ratio_pct(r.method, *r.base);
    CHECK(round_half_up(p.ratio_pct) == doctest::Approx(r.ratio).epsilon(1e-12));
    CHECK(p.delta_pct == doctest::Approx(p.ratio_pct - 100.0));
  }
  CHECK(round_half_up(performance_ratio_pct(studio, studio).ratio_pct) == 100.0);
  CHECK(test::error_code([] { performance_ratio_pct({1, 1, 1}, {0, 0, 0}); }) == Errc::undefined_metric);
}

TEST_CASE("half-up rounding") {
  CHECK(round_half_up(86.105) == 86.11);
  CHECK(round_half_up(0.125) == 0.13);
  CHECK(round_half_up(1.004) == 1.0);
  CHECK(round_half_up(-0.125) == -0.13);
  CHECK(round_half_up(2.5, 0) == 3.0);
  CHECK(round_half_up(99.994999) == 99.99);
}

TEST_CASE("recall tables are monotone") {
  Rng rng(80);
  std::vector<GroundTruth> truth;
  std::vector<std::vector<Position>> got;
  for (int q = 0; q < 50; ++q) {
    truth.push_back({rng.uniform(0, 1000), rng.uniform(0, 1000), 300});
    std::vector<Position> r;
    for (int i = 0; i < 12; ++i) r.push_back({rng.uniform(0, 1000), rng.uniform(0, 1000)});
    got.push_back(r);
  }
  const std::vector<std::size_t> ns{1, 5, 10};
  const std::vector<double> ts{50, 100, 200};
  const RecallTable t = recall_table(got, truth, ns, ts);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b + 1 < 3; ++b) {
      CHECK(t.recall[a][b] <= t.recall[a][b + 1]);
      CHECK(t.recall[b][a] <= t.recall[b + 1][a]);
    }
  CHECK(t.at(100, 5) == t.recall[1][1]);
  CHECK(test::error_code([&] { t.at(75, 5); }) == Errc::input);
}

TEST_CASE("report invariants") {
  EvalReport r = sample_report();
  CHECK_NOTHROW(check_report_invariants(r));
  r.methods[1].recall.recall[0][2] = 10.0;
  CHECK(test::error_code([&] { check_report_invariants(r); }) == Errc::input);
  r = sample_report();
  r.height_recall.recall[1][0] = 50.0;
  CHECK(test::error_code([&] { check_report_invariants(r); }) == Errc::input);
  r = sample_report();
  r.methods[0].memory_usage_pct = 100.5;
  CHECK(test::error_code([&] { check_report_invariants(r); }) == Errc::input);
}

TEST_CASE("report serialisation") {
  const EvalReport r = sample_report();
  const std::string json = report_to_json(r);
  CHECK(json == report_to_json(sample_report()));
  const auto j = nlohmann::json::parse(json);
  CHECK(j["queries"] == 4);
  CHECK(j["height"]["e_avg_m"] == 12.35);
  CHECK(j["methods"][0]["name"] == "full");
  CHECK(j["methods"][0]["k_height"].is_null());
  CHECK(j["methods"][1]["k_height"] == 1);
  CHECK(j["methods"][1]["memory_usage_pct"] == 12.5);
  CHECK(j["methods"][1]["performance_ratio_pct"] == 88.89);
  CHECK(j["methods"][1]["performance_delta_pct"] == -11.11);
  CHECK(j["methods"][1]["recall"][0]["r@1"] == 25.0);

  const std::string text = report_to_text(r);
  CHECK(text.find("E_avg: 12.35 m") != std::string::npos);
  CHECK(text.find("88.89 (-11.11)") != std::string::npos);
  CHECK(text.find("100.00 (+0.00)") != std::string::npos);

  const std::string csv = report_to_csv(r);
  CHECK(csv.rfind("method,k_height,n,threshold_m,recall_pct\n", 0) == 0);
  CHECK(csv.find("height,,1,50,75.00\n") != std::string::npos);
  CHECK(csv.find("he-vpr(1),1,10,50,100.00\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 + 3 + 3);
}

}
