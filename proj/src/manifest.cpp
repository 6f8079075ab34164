#include "heviper/manifest.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <type_traits>
#include <unordered_set>

#include "binary_io.hpp"
#include "heviper/error.hpp"

namespace heviper {

namespace {

constexpr const char* kColumns[] = {"id", "path", "height_m", "east_m", "north_m"};

std::vector<std::string> split_csv(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) fail(Errc::input, "manifest line " + std::to_string(line_no) + ": unterminated quote");
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(' ');
    const auto e = f.find_last_not_of(' ');
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

template <class T>
T parse_number(const std::string& text, const char* column, std::size_t line_no) {
  T v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end)
    fail(Errc::input, "manifest line " + std::to_string(line_no) + ": bad " + column + " '" + text + "'");
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v))
      fail(Errc::input, "manifest line " + std::to_string(line_no) + ": non-finite " + column);
  }
  return v;
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

std::string format_float(float v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<ManifestRow> parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r") != std::string::npos) header = split_csv(line, line_no);
  }
  if (header.empty()) fail(Errc::schema, "manifest has no header");

  std::size_t col[5];
  for (std::size_t c = 0; c < 5; ++c) {
    std::size_t found = header.size();
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == kColumns[c]) found = h;
    if (found == header.size()) fail(Errc::schema, std::string("manifest is missing column '") + kColumns[c] + "'");
    col[c] = found;
  }

  std::vector<ManifestRow> rows;
  std::unordered_set<std::uint64_t> ids;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \r") == std::string::npos) continue;
    const auto fields = split_csv(line, line_no);
    if (fields.size() != header.size())
      fail(Errc::schema, "manifest line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                             " fields, got " + std::to_string(fields.size()));
    ManifestRow row;
    row.id = parse_number<std::uint64_t>(fields[col[0]], "id", line_no);
    if (fields[col[1]].empty()) fail(Errc::input, "manifest line " + std::to_string(line_no) + ": empty path");
    const std::filesystem::path p(fields[col[1]]);
    row.path = p.is_absolute() ? p : base_dir / p;
    row.height_m = parse_number<float>(fields[col[2]], "height_m", line_no);
    row.east_m = parse_number<float>(fields[col[3]], "east_m", line_no);
    row.north_m = parse_number<float>(fields[col[4]], "north_m", line_no);
    if (!(row.height_m > 0.0f))
      fail(Errc::input, "manifest line " + std::to_string(line_no) + ": height must be positive");
    if (!ids.insert(row.id).second)
      fail(Errc::input, "manifest line " + std::to_string(line_no) + ": duplicate id " + std::to_string(row.id));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ManifestRow> load_manifest(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path());
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
}

std::string format_manifest(std::span<const ManifestRow> rows) {
  std::string out = "id,path,height_m,east_m,north_m\n";
  for (const auto& r : rows)
    out += std::to_string(r.id) + "," + quote_if_needed(r.path.generic_string()) + "," + format_float(r.height_m) + "," +
           format_float(r.east_m) + "," + format_float(r.north_m) + "\n";
  return out;
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestRow> rows) {
  const std::string text = format_manifest(rows);
  detail::write_file_atomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace heviper
