#include "heviper/height_db.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "heviper/error.hpp"
#include "heviper/rng.hpp"

namespace heviper {

namespace {

std::string meters(double v) {
  std::ostringstream os;
  os << v << " m";
  return os.str();
}

bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

bool same_descriptor(const Descriptor& a, const Descriptor& b) {
  if (a.normalized != b.normalized || a.values.size() != b.values.size()) return false;
  for (std::size_t k = 0; k < a.values.size(); ++k)
    if (!same_bits(a.values[k], b.values[k])) return false;
  return true;
}

bool same_position(const Position& a, const Position& b) {
  return same_bits(a.east, b.east) && same_bits(a.north, b.north);
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(focal_px > 0.0) || !std::isfinite(focal_px)) fail(Errc::config, "camera focal_px must be > 0");
  if (image_width_px == 0) fail(Errc::config, "camera image_width_px must be > 0");
}

double height_to_ground_width(double height_m, const CameraIntrinsics& camera) {
  camera.validate();
  if (!(height_m > 0.0) || !std::isfinite(height_m)) fail(Errc::input, "height must be > 0, got " + meters(height_m));
  return height_m * static_cast<double>(camera.image_width_px) / camera.focal_px;
}

Partition::Partition(double range_min, double range_max, double interval)
    : range_min_(static_cast<float>(range_min)),
      range_max_(static_cast<float>(range_max)),
      interval_(static_cast<float>(interval)) {
  if (!std::isfinite(range_min_) || !std::isfinite(range_max_) || !(range_min_ > 0.0) || !(range_max_ > range_min_))
    fail(Errc::config, "partition range must satisfy 0 < range_min < range_max");
  if (!(interval_ > 0.0) || !std::isfinite(interval_)) fail(Errc::config, "partition interval must be > 0");
  const double ratio = (range_max_ - range_min_) / interval_;
  const double count = std::round(ratio);
  if (count < 1.0 || std::abs(ratio - count) > 1e-9 * std::max(1.0, count))
    fail(Errc::config, "partition interval " + meters(interval_) + " does not divide the range span");
  const auto n = static_cast<std::uint32_t>(count);
  levels_.reserve(n);
  for (std::uint32_t l = 1; l <= n; ++l) {
    HeightLevel level;
    level.index = l;
    level.h_min = range_min_ + (l - 1) * interval_;
    level.h_max = l == n ? range_max_ : range_min_ + l * interval_;
    levels_.push_back(level);
  }
}

void Partition::attach_camera(const CameraIntrinsics& camera) {
  for (HeightLevel& level : levels_) {
    level.ground_width_min = height_to_ground_width(level.h_min, camera);
    level.ground_width_max = height_to_ground_width(level.h_max, camera);
  }
}

std::uint32_t height_to_level(double height_m, const Partition& partition) {
  const auto& levels = partition.levels();
  if (levels.empty()) fail(Errc::config, "partition has no levels");
  if (!std::isfinite(height_m) || height_m < partition.range_min() || height_m >= partition.range_max())
    fail(Errc::range, "height " + meters(height_m) + " outside the partition span [" + meters(partition.range_min()) +
                          ", " + meters(partition.range_max()) + ")");
  auto idx = static_cast<std::size_t>(std::floor((height_m - partition.range_min()) / partition.interval()));
  idx = std::min(idx, levels.size() - 1);
  // Floating-point division can land one interval off near a boundary.
  while (idx > 0 && height_m < levels[idx].h_min) --idx;
  while (idx + 1 < levels.size() && height_m >= levels[idx].h_max) ++idx;
  return levels[idx].index;
}

std::uint32_t ground_width_to_level(double width_m, const Partition& partition, const CameraIntrinsics& camera) {
  const auto& levels = partition.levels();
  if (levels.empty()) fail(Errc::config, "partition has no levels");
  const double lo = height_to_ground_width(levels.front().h_min, camera);
  const double hi = height_to_ground_width(levels.back().h_max, camera);
  if (!std::isfinite(width_m) || width_m < lo || width_m >= hi)
    fail(Errc::range, "ground width " + meters(width_m) + " outside [" + meters(lo) + ", " + meters(hi) + ")");
  // Bounds are monotone in height, so a binary search over level maxima suffices.
  auto it = std::upper_bound(levels.begin(), levels.end(), width_m, [&](double w, const HeightLevel& level) {
    return w < height_to_ground_width(level.h_max, camera);
  });
  return it->index;
}

std::size_t HeightPartitionedDatabase::total_count() const {
  std::size_t n = 0;
  for (const auto& sub : sub_dbs) n += sub.size();
  return n;
}

std::vector<std::size_t> HeightPartitionedDatabase::level_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& sub : sub_dbs) sizes.push_back(sub.size());
  return sizes;
}

PartitionBuild build_partitioned_db(std::span<const GeoTaggedDescriptor> entries, const Partition& partition) {
  PartitionBuild out;
  out.db.partition = partition;
  out.db.sub_dbs.resize(partition.level_count());
  std::unordered_set<std::uint64_t> seen;
  std::size_t dim = 0;
  for (const GeoTaggedDescriptor& e : entries) {
    if (!seen.insert(e.id).second) fail(Errc::input, "duplicate place id " + std::to_string(e.id));
    std::uint32_t level = 0;
    try {
      level = height_to_level(e.height_m, partition);
    } catch (const Error& err) {
      if (err.code() != Errc::range) throw;
      out.rejected.push_back(e.id);
      continue;
    }
    if (dim == 0) dim = e.descriptor.dim();
    if (e.descriptor.dim() != dim)
      fail(Errc::input, "place " + std::to_string(e.id) + " has descriptor dim " + std::to_string(e.descriptor.dim()) +
                            ", expected " + std::to_string(dim));
    PlaceEntry entry{e.id, l2_normalize(e.descriptor), e.position, level};
    out.db.sub_dbs[level - 1].push_back(std::move(entry));
  }
  return out;
}

HeightDatabase build_height_db(std::span<const GeoTaggedDescriptor> source, const Partition& partition,
                               std::size_t per_level_cap, std::uint64_t seed) {
  if (per_level_cap == 0) fail(Errc::config, "height database cap per level must be >= 1");
  std::vector<std::vector<std::size_t>> by_level(partition.level_count());
  for (std::size_t i = 0; i < source.size(); ++i) {
    // Group by the stored f32 label so saved files regroup identically.
    const double h = static_cast<float>(source[i].height_m);
    if (!std::isfinite(h) || h < partition.range_min() || h >= partition.range_max()) continue;
    by_level[height_to_level(h, partition) - 1].push_back(i);
  }

  Rng rng(seed);
  HeightDatabase db;
  db.partition = partition;
  for (auto& members : by_level) {
    // Partial Fisher-Yates picks the sample; sorting restores source order.
    const std::size_t take = std::min(per_level_cap, members.size());
    for (std::size_t k = 0; k < take; ++k) std::swap(members[k], members[k + rng.below(members.size() - k)]);
    members.resize(take);
    std::sort(members.begin(), members.end());
    for (std::size_t i : members) {
      const GeoTaggedDescriptor& e = source[i];
      db.entries.push_back({e.id, l2_normalize(e.descriptor), e.position, static_cast<float>(e.height_m)});
    }
  }
  return db;
}

bool bit_equal(const HeightPartitionedDatabase& a, const HeightPartitionedDatabase& b) {
  if (!(a.partition == b.partition) || a.sub_dbs.size() != b.sub_dbs.size()) return false;
  for (std::size_t l = 0; l < a.sub_dbs.size(); ++l) {
    const auto& x = a.sub_dbs[l];
    const auto& y = b.sub_dbs[l];
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].id != y[i].id || x[i].level != y[i].level || !same_position(x[i].position, y[i].position) ||
          !same_descriptor(x[i].descriptor, y[i].descriptor))
        return false;
    }
  }
  return true;
}

bool bit_equal(const HeightDatabase& a, const HeightDatabase& b) {
  if (!(a.partition == b.partition) || a.entries.size() != b.entries.size()) return false;
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.id != y.id || !same_bits(x.height_label, y.height_label) || !same_position(x.position, y.position) ||
        !same_descriptor(x.descriptor, y.descriptor))
      return false;
  }
  return true;
}

namespace {

struct Record {
  std::uint64_t id;
  const Descriptor* descriptor;
  Position position;
  const float* label;  // null for place records
};

void write_container(const std::filesystem::path& path, const char* magic, const Partition& partition,
                     const std::vector<std::vector<Record>>& levels) {
  detail::ByteWriter w;
  w.magic(magic);
  w.u32(kDatabaseFileVersion);
  w.u32(static_cast<std::uint32_t>(levels.size()));
  w.f32(static_cast<float>(partition.interval()));
  w.f32(static_cast<float>(partition.range_min()));
  w.f32(static_cast<float>(partition.range_max()));
  std::vector<std::uint32_t> crcs;
  for (const auto& records : levels) {
    const std::size_t start = w.size();
    w.u64(records.size());
    for (const Record& r : records) {
      w.u64(r.id);
      w.f32(r.position.east);
      w.f32(r.position.north);
      w.u32(static_cast<std::uint32_t>(r.descriptor->dim()));
      w.f32s(r.descriptor->values);
      if (r.label) w.f32(*r.label);
    }
    crcs.push_back(detail::crc32(w.bytes_since(start)));
  }
  for (std::uint32_t crc : crcs) w.u32(crc);
  detail::write_file_atomic(path, w.bytes());
}

struct LoadedRecord {
  std::uint64_t id;
  Descriptor descriptor;
  Position position;
  float label;
};

struct LoadedContainer {
  Partition partition;
  std::vector<std::vector<LoadedRecord>> levels;
};

LoadedContainer read_container(const std::filesystem::path& path, const char* magic, bool with_label) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, std::string(magic) + " file " + path.string());
  r.expect_magic(magic);
  const std::uint32_t version = r.u32();
  if (version != kDatabaseFileVersion)
    fail(Errc::version_mismatch, r.label() + ": unsupported version " + std::to_string(version));
  const std::uint32_t level_count = r.u32();
  const float interval = r.f32();
  const float range_min = r.f32();
  const float range_max = r.f32();

  LoadedContainer out;
  std::vector<std::pair<std::size_t, std::size_t>> sections;
  for (std::uint32_t l = 0; l < level_count; ++l) {
    const std::size_t start = r.position();
    const std::uint64_t count = r.u64();
    // Every record needs at least 20 bytes; reject absurd counts before allocating.
    if (count > r.remaining() / 20) fail(Errc::truncated, r.label() + ": file truncated in level " + std::to_string(l + 1));
    std::vector<LoadedRecord> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      LoadedRecord rec;
      rec.id = r.u64();
      rec.position.east = r.f32();
      rec.position.north = r.f32();
      const std::uint32_t dim = r.u32();
      rec.descriptor.values.resize(dim);
      r.f32s(rec.descriptor.values);
      rec.descriptor.normalized = true;
      rec.label = with_label ? r.f32() : 0.0f;
      records.push_back(std::move(rec));
    }
    sections.emplace_back(start, r.position());
    out.levels.push_back(std::move(records));
  }
  for (std::uint32_t l = 0; l < level_count; ++l) {
    const std::uint32_t stored = r.u32();
    const auto [from, to] = sections[l];
    if (detail::crc32(r.slice(from, to)) != stored)
      fail(Errc::checksum_mismatch, r.label() + ": checksum mismatch in level " + std::to_string(l + 1));
  }
  try {
    out.partition = Partition(range_min, range_max, interval);
  } catch (const Error& e) {
    fail(Errc::config, r.label() + ": invalid partition header: " + e.what());
  }
  if (out.partition.level_count() != level_count)
    fail(Errc::config, r.label() + ": level count disagrees with the partition header");
  return out;
}

}  // namespace

void save_place_db(const std::filesystem::path& path, const HeightPartitionedDatabase& db) {
  if (db.sub_dbs.size() != db.partition.level_count())
    fail(Errc::config, "database has " + std::to_string(db.sub_dbs.size()) + " sub-databases for " +
                           std::to_string(db.partition.level_count()) + " levels");
  std::vector<std::vector<Record>> levels(db.sub_dbs.size());
  for (std::size_t l = 0; l < db.sub_dbs.size(); ++l)
    for (const PlaceEntry& e : db.sub_dbs[l]) levels[l].push_back({e.id, &e.descriptor, e.position, nullptr});
  write_container(path, "HEVB", db.partition, levels);
}

HeightPartitionedDatabase load_place_db(const std::filesystem::path& path) {
  LoadedContainer c = read_container(path, "HEVB", false);
  HeightPartitionedDatabase db;
  db.partition = c.partition;
  db.sub_dbs.resize(c.levels.size());
  for (std::size_t l = 0; l < c.levels.size(); ++l)
    for (LoadedRecord& rec : c.levels[l])
      db.sub_dbs[l].push_back({rec.id, std::move(rec.descriptor), rec.position, static_cast<std::uint32_t>(l + 1)});
  return db;
}

void save_height_db(const std::filesystem::path& path, const HeightDatabase& db) {
  std::vector<std::vector<Record>> levels(db.partition.level_count());
  for (const HeightEntry& e : db.entries)
    levels[height_to_level(e.height_label, db.partition) - 1].push_back(
        {e.id, &e.descriptor, e.position, &e.height_label});
  write_container(path, "HEVH", db.partition, levels);
}

HeightDatabase load_height_db(const std::filesystem::path& path) {
  LoadedContainer c = read_container(path, "HEVH", true);
  HeightDatabase db;
  db.partition = c.partition;
  for (auto& records : c.levels)
    for (LoadedRecord& rec : records) db.entries.push_back({rec.id, std::move(rec.descriptor), rec.position, rec.label});
  return db;
}

}  // namespace heviper
