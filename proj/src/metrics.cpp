#include "heviper/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "heviper/error.hpp"
#include <json.hpp>

namespace heviper {

namespace {

void check_common(std::size_t queries, std::size_t truth, std::size_t n, double threshold_m) {
  if (queries == 0) fail(Errc::undefined_metric, "recall over zero queries is undefined");
  if (queries != truth)
    fail(Errc::input, "got " + std::to_string(queries) + " rankings for " + std::to_string(truth) + " ground truths");
  if (n < 1) fail(Errc::input, "recall N must be >= 1");
  if (!(threshold_m > 0.0) || !std::isfinite(threshold_m)) fail(Errc::input, "recall threshold must be > 0 m");
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", round_half_up(v));
  return buf;
}

std::string signed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f", round_half_up(v));
  return buf;
}

std::string threshold_label(double t) {
  std::ostringstream os;
  os << t << " m";
  return os.str();
}

}  // namespace

double recall_at_n(std::span<const std::vector<Position>> retrieved, std::span<const GroundTruth> truth, std::size_t n,
                   double threshold_m) {
  check_common(retrieved.size(), truth.size(), n, threshold_m);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < retrieved.size(); ++q) {
    const std::size_t take = std::min(n, retrieved[q].size());
    for (std::size_t i = 0; i < take; ++i) {
      const double de = retrieved[q][i].east - truth[q].east_m;
      const double dn = retrieved[q][i].north - truth[q].north_m;
      if (std::sqrt(de * de + dn * dn) <= threshold_m) {
        ++correct;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(retrieved.size());
}

double height_recall(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth, std::size_t n,
                     double threshold_m) {
  check_common(labels.size(), truth.size(), n, threshold_m);
  std::size_t correct = 0;
  for (std::size_t q = 0; q < labels.size(); ++q) {
    const std::size_t take = std::min(n, labels[q].size());
    for (std::size_t i = 0; i < take; ++i) {
      if (std::abs(static_cast<double>(labels[q][i]) - truth[q].height_m) <= threshold_m) {
        ++correct;
        break;
      }
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

double avg_height_error(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth) {
  if (labels.empty()) fail(Errc::undefined_metric, "average height error over zero queries is undefined");
  if (labels.size() != truth.size()) fail(Errc::input, "height rankings and ground truth differ in length");
  double sum = 0.0;
  for (std::size_t q = 0; q < labels.size(); ++q) {
    if (labels[q].empty()) fail(Errc::input, "query " + std::to_string(q) + " has no height candidate");
    sum += std::abs(static_cast<double>(labels[q].front()) - truth[q].height_m);
  }
  return sum / static_cast<double>(labels.size());
}

double memory_usage_pct(std::span<const std::size_t> searched_counts, std::size_t total_count) {
  if (searched_counts.empty()) fail(Errc::undefined_metric, "memory usage over zero queries is undefined");
  if (total_count == 0) fail(Errc::input, "memory usage needs a nonempty database");
  double sum = 0.0;
  for (std::size_t s : searched_counts) sum += static_cast<double>(s) / static_cast<double>(total_count);
  return 100.0 * sum / static_cast<double>(searched_counts.size());
}

PerformanceRatio performance_ratio_pct(const RecallTriple& method, const RecallTriple& baseline) {
  const double base = baseline.r1 + baseline.r5 + baseline.r10;
  if (!(base > 0.0)) fail(Errc::undefined_metric, "performance ratio needs a positive baseline recall sum");
  const double ratio = 100.0 * (method.r1 + method.r5 + method.r10) / base;
  return {ratio, ratio - 100.0};
}

double round_half_up(double value, int decimals) {
  if (!std::isfinite(value)) return value;
  const double scale = std::pow(10.0, decimals);
  const double scaled = std::abs(value) * scale;
  // Absorb representation error so ...5 in decimal rounds up.
  const double rounded = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled)) / scale;
  return value < 0 ? -rounded : rounded;
}

std::unordered_map<std::uint64_t, Position> position_index(const HeightPartitionedDatabase& db) {
  std::unordered_map<std::uint64_t, Position> index;
  for (const auto& sub : db.sub_dbs)
    for (const PlaceEntry& e : sub) index.emplace(e.id, e.position);
  return index;
}

std::vector<Position> retrieved_positions(const RankedList& ranking,
                                          const std::unordered_map<std::uint64_t, Position>& index) {
  std::vector<Position> out;
  out.reserve(ranking.size());
  for (const Hit& h : ranking) {
    auto it = index.find(h.id);
    if (it == index.end()) fail(Errc::input, "retrieved id " + std::to_string(h.id) + " is not in the database");
    out.push_back(it->second);
  }
  return out;
}

double RecallTable::at(double threshold_m, std::size_t n) const {
  for (std::size_t t = 0; t < thresholds_m.size(); ++t) {
    if (thresholds_m[t] != threshold_m) continue;
    for (std::size_t i = 0; i < ns.size(); ++i)
      if (ns[i] == n) return recall[t][i];
  }
  fail(Errc::input, "recall table has no cell for N=" + std::to_string(n) + " at " + threshold_label(threshold_m));
}

RecallTable recall_table(std::span<const std::vector<Position>> retrieved, std::span<const GroundTruth> truth,
                         std::span<const std::size_t> ns, std::span<const double> thresholds_m) {
  RecallTable table{{ns.begin(), ns.end()}, {thresholds_m.begin(), thresholds_m.end()}, {}};
  for (double t : thresholds_m) {
    std::vector<double> row;
    for (std::size_t n : ns) row.push_back(recall_at_n(retrieved, truth, n, t));
    table.recall.push_back(std::move(row));
  }
  return table;
}

RecallTable height_recall_table(std::span<const std::vector<float>> labels, std::span<const GroundTruth> truth,
                                std::span<const std::size_t> ns, std::span<const double> thresholds_m) {
  RecallTable table{{ns.begin(), ns.end()}, {thresholds_m.begin(), thresholds_m.end()}, {}};
  for (double t : thresholds_m) {
    std::vector<double> row;
    for (std::size_t n : ns) row.push_back(height_recall(labels, truth, n, t));
    table.recall.push_back(std::move(row));
  }
  return table;
}

const MethodReport* EvalReport::method(const std::string& name) const {
  for (const MethodReport& m : methods)
    if (m.name == name) return &m;
  return nullptr;
}

void check_report_invariants(const EvalReport& report) {
  auto check_table = [](const RecallTable& table, const std::string& what) {
    for (std::size_t t = 0; t < table.thresholds_m.size(); ++t) {
      for (std::size_t i = 0; i < table.ns.size(); ++i) {
        const double v = table.recall[t][i];
        if (!(v >= 0.0 && v <= 100.0)) fail(Errc::input, what + ": recall outside [0, 100]");
        for (std::size_t u = 0; u < table.thresholds_m.size(); ++u)
          if (table.thresholds_m[u] > table.thresholds_m[t] && table.recall[u][i] < v)
            fail(Errc::input, what + ": recall decreases with a larger threshold");
        for (std::size_t j = 0; j < table.ns.size(); ++j)
          if (table.ns[j] > table.ns[i] && table.recall[t][j] < v)
            fail(Errc::input, what + ": recall decreases with larger N");
      }
    }
  };
  check_table(report.height_recall, "height");
  for (const MethodReport& m : report.methods) {
    check_table(m.recall, m.name);
    if (!(m.memory_usage_pct >= 0.0 && m.memory_usage_pct <= 100.0))
      fail(Errc::input, m.name + ": memory usage outside [0, 100]");
  }
}

namespace {

nlohmann::ordered_json table_json(const RecallTable& table) {
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < table.thresholds_m.size(); ++t) {
    nlohmann::ordered_json row;
    row["threshold_m"] = table.thresholds_m[t];
    for (std::size_t i = 0; i < table.ns.size(); ++i)
      row["r@" + std::to_string(table.ns[i])] = round_half_up(table.recall[t][i]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["queries"] = report.query_count;
  j["database_entries"] = report.database_count;
  j["height_database_entries"] = report.height_database_count;
  j["performance_threshold_m"] = report.performance_threshold_m;
  j["height"]["recall"] = table_json(report.height_recall);
  j["height"]["e_avg_m"] = round_half_up(report.e_avg_m);
  auto methods = nlohmann::ordered_json::array();
  for (const MethodReport& m : report.methods) {
    nlohmann::ordered_json row;
    row["name"] = m.name;
    row["k_height"] = m.k_height ? nlohmann::ordered_json(*m.k_height) : nlohmann::ordered_json(nullptr);
    row["recall"] = table_json(m.recall);
    row["memory_usage_pct"] = round_half_up(m.memory_usage_pct);
    const double ratio = round_half_up(m.performance.ratio_pct);
    row["performance_ratio_pct"] = ratio;
    row["performance_delta_pct"] = round_half_up(ratio - 100.0);
    methods.push_back(std::move(row));
  }
  j["methods"] = std::move(methods);
  return j.dump(2) + "\n";
}

std::string report_to_text(const EvalReport& report) {
  std::ostringstream os;
  os << "Height estimation (" << report.query_count << " queries, height database " << report.height_database_count
     << " entries)\n";
  os << "  threshold ";
  for (std::size_t n : report.height_recall.ns) os << "  R@" << n << "    ";
  os << "\n";
  for (std::size_t t = 0; t < report.height_recall.thresholds_m.size(); ++t) {
    char label[32];
    std::snprintf(label, sizeof label, "  %-9s", threshold_label(report.height_recall.thresholds_m[t]).c_str());
    os << label;
    for (double v : report.height_recall.recall[t]) {
      char cell[32];
      std::snprintf(cell, sizeof cell, " %7s ", fixed2(v).c_str());
      os << cell;
    }
    os << "\n";
  }
  os << "  E_avg: " << fixed2(report.e_avg_m) << " m\n\n";

  os << "Place recognition (database " << report.database_count << " entries)\n";
  char header[64];
  std::snprintf(header, sizeof header, "  %-15s", "method");
  os << header;
  if (!report.methods.empty()) {
    for (double t : report.methods.front().recall.thresholds_m) {
      char group[32];
      std::snprintf(group, sizeof group, "| %-7s", (threshold_label(t) + ":").c_str());
      os << group;
      for (std::size_t n : report.methods.front().recall.ns) {
        char cell[32];
        std::snprintf(cell, sizeof cell, " %7s", ("R@" + std::to_string(n)).c_str());
        os << cell;
      }
      os << " ";
    }
  }
  os << "| memory % | performance ratio %\n";
  for (const MethodReport& m : report.methods) {
    char name[64];
    std::snprintf(name, sizeof name, "  %-15s", m.name.c_str());
    os << name;
    for (std::size_t t = 0; t < m.recall.thresholds_m.size(); ++t) {
      os << "|        ";
      for (double v : m.recall.recall[t]) {
        char cell[32];
        std::snprintf(cell, sizeof cell, " %7s", fixed2(v).c_str());
        os << cell;
      }
      os << " ";
    }
    char tail[96];
    std::snprintf(tail, sizeof tail, "| %8s | %s (%s)\n", fixed2(m.memory_usage_pct).c_str(),
                  fixed2(m.performance.ratio_pct).c_str(),
                  signed2(round_half_up(m.performance.ratio_pct) - 100.0).c_str());
    os << tail;
  }
  return os.str();
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "method,k_height,n,threshold_m,recall_pct\n";
  auto rows = [&](const std::string& name, const std::string& k, const RecallTable& table) {
    for (std::size_t t = 0; t < table.thresholds_m.size(); ++t)
      for (std::size_t i = 0; i < table.ns.size(); ++i)
        os << name << "," << k << "," << table.ns[i] << "," << table.thresholds_m[t] << "," << fixed2(table.recall[t][i])
           << "\n";
  };
  rows("height", "", report.height_recall);
  for (const MethodReport& m : report.methods) rows(m.name, m.k_height ? std::to_string(*m.k_height) : "", m.recall);
  return os.str();
}

}  // namespace heviper
