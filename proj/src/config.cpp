#include "heviper/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "heviper/error.hpp"

namespace heviper {

namespace {

// Every configurable field, in canonical order. Parsing and serialisation
// both walk this list, which keeps the two in lockstep.
template <class Config, class Visit>
void visit_fields(Config& c, Visit&& v) {
  v("", "seed", c.seed);
  v("partition", "range_min_m", c.partition.range_min_m);
  v("partition", "range_max_m", c.partition.range_max_m);
  v("partition", "interval_m", c.partition.interval_m);
  v("camera", "focal_px", c.camera.focal_px);
  v("camera", "image_width_px", c.camera.image_width_px);
  v("backbone", "patch_size", c.backbone.patch_size);
  v("backbone", "pool_cells", c.backbone.pool_cells);
  v("backbone", "channels", c.backbone.channels);
  v("adapter", "layers", c.adapter.layers);
  v("adapter", "dim", c.adapter.dim);
  v("adapter", "bottleneck", c.adapter.bottleneck);
  v("adapter", "dilation", c.adapter.dilation);
  v("adapter", "init_scale", c.adapter.init_scale);
  v("adapter", "he_mask", c.adapter.he_mask);
  v("adapter", "vpr_mask", c.adapter.vpr_mask);
  v("adapter", "he_weights", c.adapter.he_weights);
  v("adapter", "vpr_weights", c.adapter.vpr_weights);
  v("retrieval", "k_height", c.retrieval.k_height);
  v("retrieval", "k_place", c.retrieval.k_place);
  v("retrieval", "aggregator", c.retrieval.aggregator);
  v("retrieval", "height_gem_p", c.retrieval.height_gem_p);
  v("height_db", "per_level_cap", c.height_db.per_level_cap);
  v("eval", "thresholds_m", c.eval.thresholds_m);
  v("eval", "height_thresholds_m", c.eval.height_thresholds_m);
  v("eval", "recall_n", c.eval.recall_n);
  v("eval", "k_heights", c.eval.k_heights);
  v("eval", "performance_threshold_m", c.eval.performance_threshold_m);
  v("synthetic", "places", c.synthetic.places);
  v("synthetic", "image_size", c.synthetic.image_size);
  v("synthetic", "place_spacing_m", c.synthetic.place_spacing_m);
  v("synthetic", "meters_per_px", c.synthetic.meters_per_px);
  v("synthetic", "height_jitter_m", c.synthetic.height_jitter_m);
  v("synthetic", "descriptor_dim", c.synthetic.descriptor_dim);
  v("synthetic", "descriptor_noise", c.synthetic.descriptor_noise);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Location {
  std::size_t line;
  std::string key;
};

[[noreturn]] void bad(const Location& at, const std::string& what) {
  fail(Errc::config, "config line " + std::to_string(at.line) + " (" + at.key + "): " + what);
}

void parse_value(const std::string& text, std::uint64_t& out, const Location& at) {
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) bad(at, "expected a non-negative integer, got '" + text + "'");
}

void parse_value(const std::string& text, double& out, const Location& at) {
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad(at, "expected a number, got '" + text + "'");
}

void parse_value(const std::string& text, bool& out, const Location& at) {
  if (text == "true")
    out = true;
  else if (text == "false")
    out = false;
  else
    bad(at, "expected true or false, got '" + text + "'");
}

void parse_value(const std::string& text, std::string& out, const Location& at) {
  if (text.size() < 2 || text.front() != '"' || text.back() != '"') bad(at, "expected a quoted string");
  out.clear();
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    char ch = text[i];
    if (ch == '"') bad(at, "unescaped quote in string");
    if (ch == '\\') {
      if (i + 2 >= text.size()) bad(at, "dangling escape");
      ch = text[++i];
      if (ch == 'n')
        ch = '\n';
      else if (ch == 't')
        ch = '\t';
      else if (ch != '\\' && ch != '"')
        bad(at, std::string("unknown escape \\") + ch);
    }
    out += ch;
  }
}

template <class T>
void parse_value(const std::string& text, std::vector<T>& out, const Location& at) {
  if (text.size() < 2 || text.front() != '[' || text.back() != ']') bad(at, "expected an array");
  out.clear();
  const std::string body = trim(std::string_view(text).substr(1, text.size() - 2));
  if (body.empty()) return;
  std::stringstream items(body);
  std::string item;
  while (std::getline(items, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      if (items.eof()) break;  // trailing comma
      bad(at, "empty array element");
    }
    T v{};
    parse_value(item, v, at);
    out.push_back(v);
  }
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '\\' && in_string) {
      ++i;
    } else if (line[i] == '"') {
      in_string = !in_string;
    } else if (line[i] == '#' && !in_string) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string format_value(std::uint64_t v) { return std::to_string(v); }
std::string format_value(double v) { return format_double(v); }
std::string format_value(bool v) { return v ? "true" : "false"; }

std::string format_value(const std::string& v) {
  std::string s = "\"";
  for (char ch : v) {
    if (ch == '"' || ch == '\\')
      s += '\\', s += ch;
    else if (ch == '\n')
      s += "\\n";
    else if (ch == '\t')
      s += "\\t";
    else
      s += ch;
  }
  return s + "\"";
}

template <class T>
std::string format_value(const std::vector<T>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_value(v[i]);
  return s + "]";
}

void check(bool ok, const std::string& what) {
  if (!ok) fail(Errc::config, "config: " + what);
}

}  // namespace

void RunConfig::validate() const {
  check(partition.range_min_m > 0.0, "partition.range_min_m must be > 0");
  check(partition.range_min_m < partition.range_max_m, "partition.range_min_m must be < range_max_m");
  check(partition.interval_m > 0.0, "partition.interval_m must be > 0");
  make_partition();  // interval must divide the span
  check(camera.focal_px > 0.0, "camera.focal_px must be > 0");
  check(camera.image_width_px >= 1, "camera.image_width_px must be >= 1");
  check(backbone.patch_size >= 1, "backbone.patch_size must be >= 1");
  check(backbone.pool_cells >= 1, "backbone.pool_cells must be >= 1");
  check(backbone.patch_size % backbone.pool_cells == 0, "backbone.pool_cells must divide patch_size");
  check(backbone.channels >= 1, "backbone.channels must be >= 1");
  check(adapter.layers >= 1, "adapter.layers must be >= 1");
  check(adapter.dim >= 1, "adapter.dim must be >= 1");
  check(adapter.bottleneck >= 1 && adapter.bottleneck < adapter.dim, "adapter.bottleneck must be in [1, dim)");
  check(adapter.dilation >= 1, "adapter.dilation must be >= 1");
  check(adapter.init_scale >= 0.0, "adapter.init_scale must be >= 0");
  check(retrieval.k_height >= 1, "retrieval.k_height must be >= 1");
  check(retrieval.k_place >= 1, "retrieval.k_place must be >= 1");
  make_aggregator();
  check(retrieval.height_gem_p >= 1.0, "retrieval.height_gem_p must be >= 1");
  check(height_db.per_level_cap >= 1, "height_db.per_level_cap must be >= 1");
  check(!eval.thresholds_m.empty(), "eval.thresholds_m must not be empty");
  check(!eval.height_thresholds_m.empty(), "eval.height_thresholds_m must not be empty");
  check(!eval.recall_n.empty(), "eval.recall_n must not be empty");
  check(!eval.k_heights.empty(), "eval.k_heights must not be empty");
  for (double t : eval.thresholds_m) check(t > 0.0, "eval.thresholds_m entries must be > 0");
  for (double t : eval.height_thresholds_m) check(t > 0.0, "eval.height_thresholds_m entries must be > 0");
  for (auto n : eval.recall_n) check(n >= 1, "eval.recall_n entries must be >= 1");
  for (auto k : eval.k_heights) check(k >= 1, "eval.k_heights entries must be >= 1");
  check(eval.performance_threshold_m > 0.0, "eval.performance_threshold_m must be > 0");
  check(synthetic.places >= 1, "synthetic.places must be >= 1");
  check(synthetic.image_size >= backbone.patch_size && synthetic.image_size % backbone.patch_size == 0,
        "synthetic.image_size must be a multiple of backbone.patch_size");
  check(synthetic.place_spacing_m > 0.0, "synthetic.place_spacing_m must be > 0");
  check(synthetic.meters_per_px > 0.0, "synthetic.meters_per_px must be > 0");
  check(synthetic.height_jitter_m >= 0.0, "synthetic.height_jitter_m must be >= 0");
  check(synthetic.descriptor_noise >= 0.0, "synthetic.descriptor_noise must be >= 0");
}

Partition RunConfig::make_partition() const {
  return Partition(partition.range_min_m, partition.range_max_m, partition.interval_m);
}

CameraIntrinsics RunConfig::make_camera() const {
  return CameraIntrinsics{camera.focal_px, static_cast<std::size_t>(camera.image_width_px)};
}

BackboneStubConfig RunConfig::make_backbone() const {
  BackboneStubConfig b;
  b.seed = seed;
  b.blocks = adapter.layers;
  b.dim = adapter.dim;
  b.patch_size = backbone.patch_size;
  b.pool_cells = backbone.pool_cells;
  b.channels = backbone.channels;
  return b;
}

Aggregator RunConfig::make_aggregator() const { return Aggregator::parse(retrieval.aggregator); }

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::set<std::string> sections;
  visit_fields(config, [&](const char* section, const char*, auto&) { sections.insert(section); });

  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad({line_no, line}, "malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section.empty() || !sections.contains(section)) bad({line_no, line}, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad({line_no, line}, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    const Location at{line_no, full};
    if (!seen.insert(full).second) bad(at, "duplicate key");
    bool matched = false;
    visit_fields(config, [&](const char* s, const char* k, auto& field) {
      if (!matched && section == s && key == k) {
        parse_value(value, field, at);
        matched = true;
      }
    });
    if (!matched) bad(at, "unknown key");
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  std::string current;
  visit_fields(config, [&](const char* section, const char* key, const auto& field) {
    if (current != section) {
      current = section;
      out += "\n[" + current + "]\n";
    }
    out += std::string(key) + " = " + format_value(field) + "\n";
  });
  return out;
}

}  // namespace heviper
