#include "heviper/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "heviper/error.hpp"
#include "heviper/height_db.hpp"
#include "heviper/rng.hpp"

namespace heviper {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(ix) ^ splitmix64(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Fractal value noise in [0, 1).
double value_noise(std::uint64_t seed, double x, double y) {
  constexpr double kCells[] = {96.0, 48.0, 24.0, 12.0, 6.0, 3.0};
  double sum = 0.0;
  double weight = 0.0;
  double amp = 1.0;
  for (std::size_t o = 0; o < std::size(kCells); ++o) {
    const double u = x / kCells[o];
    const double v = y / kCells[o];
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const auto ix = static_cast<std::int64_t>(fu);
    const auto iy = static_cast<std::int64_t>(fv);
    const double tx = smooth(u - fu);
    const double ty = smooth(v - fv);
    const std::uint64_t s = splitmix64(seed + o);
    const double a = lattice(s, ix, iy) + (lattice(s, ix + 1, iy) - lattice(s, ix, iy)) * tx;
    const double b = lattice(s, ix, iy + 1) + (lattice(s, ix + 1, iy + 1) - lattice(s, ix, iy + 1)) * tx;
    sum += amp * (a + (b - a) * ty);
    weight += amp;
    amp *= 0.6;
  }
  return sum / weight;
}

struct Raster {
  std::size_t side = 0;
  std::size_t channels = 0;
  std::vector<float> values;  // side x side x channels

  float at(std::size_t x, std::size_t y, std::size_t c) const { return values[(y * side + x) * channels + c]; }

  // Pixel i covers [i, i + 1); samples are clamped at the border.
  double bilinear(double x, double y, std::size_t c) const {
    const double u = std::clamp(x - 0.5, 0.0, static_cast<double>(side - 1));
    const double v = std::clamp(y - 0.5, 0.0, static_cast<double>(side - 1));
    const auto x0 = static_cast<std::size_t>(u);
    const auto y0 = static_cast<std::size_t>(v);
    const std::size_t x1 = std::min(x0 + 1, side - 1);
    const std::size_t y1 = std::min(y0 + 1, side - 1);
    const double tx = u - static_cast<double>(x0);
    const double ty = v - static_cast<double>(y0);
    const double a = at(x0, y0, c) + (at(x1, y0, c) - at(x0, y0, c)) * tx;
    const double b = at(x0, y1, c) + (at(x1, y1, c) - at(x0, y1, c)) * tx;
    return a + (b - a) * ty;
  }
};

Raster make_raster(std::uint64_t seed, std::size_t side, std::size_t channels) {
  Raster r{side, channels, std::vector<float>(side * side * channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    const std::uint64_t s = splitmix64(seed + 0x100 * c);
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        r.values[(y * side + x) * channels + c] =
            static_cast<float>(value_noise(s, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5));
  }
  return r;
}

// Box-filtered resample of the crop: each output pixel averages a grid of
// bilinear samples, enough to cover the source pixels it spans. Values are
// quantised to 8 bits so the in-memory image equals its PGM file.
Image render_crop(const Raster& raster, const CropRect& crop, std::size_t size) {
  Image img(size, size, raster.channels);
  const double step = crop.side / static_cast<double>(size);
  const auto sub = static_cast<std::size_t>(std::clamp(std::ceil(step), 1.0, 8.0));
  const double x0 = crop.center_x - crop.side / 2.0;
  const double y0 = crop.center_y - crop.side / 2.0;
  for (std::size_t c = 0; c < raster.channels; ++c) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        double acc = 0.0;
        for (std::size_t sy = 0; sy < sub; ++sy)
          for (std::size_t sx = 0; sx < sub; ++sx) {
            const double fx = (static_cast<double>(x) + (static_cast<double>(sx) + 0.5) / static_cast<double>(sub)) * step;
            const double fy = (static_cast<double>(y) + (static_cast<double>(sy) + 0.5) / static_cast<double>(sub)) * step;
            acc += raster.bilinear(x0 + fx, y0 + fy, c);
          }
        const double v = std::clamp(acc / static_cast<double>(sub * sub), 0.0, 1.0);
        img.at(x, y, c) = static_cast<float>(std::lround(v * 255.0)) / 255.0f;
      }
    }
  }
  return img;
}

Descriptor noisy(std::vector<float> base, double noise, Rng& rng) {
  for (float& v : base) v += rng.uniform(-noise, noise);
  return l2_normalize(Descriptor{std::move(base), false});
}

std::string view_name(const char* kind, std::size_t place, std::uint32_t level) {
  return std::string(kind) + "_p" + std::to_string(place) + "_l" + std::to_string(level) + ".pgm";
}

}  // namespace

double overlap_area(const CropRect& a, const CropRect& b) {
  const double w = std::min(a.center_x + a.side / 2, b.center_x + b.side / 2) -
                   std::max(a.center_x - a.side / 2, b.center_x - b.side / 2);
  const double h = std::min(a.center_y + a.side / 2, b.center_y + b.side / 2) -
                   std::max(a.center_y - a.side / 2, b.center_y - b.side / 2);
  return std::max(w, 0.0) * std::max(h, 0.0);
}

SyntheticCorpus generate_synthetic(const RunConfig& config) {
  config.validate();
  const auto& syn = config.synthetic;
  const Partition partition = config.make_partition();
  const CameraIntrinsics camera = config.make_camera();
  const std::size_t levels = partition.level_count();
  const std::size_t places = syn.places;
  const std::size_t dim = syn.descriptor_dim;
  if (dim < levels)
    fail(Errc::config, "synthetic.descriptor_dim (" + std::to_string(dim) + ") must be >= the level count (" +
                           std::to_string(levels) + ")");

  SyntheticCorpus corpus;
  corpus.places = places;
  corpus.levels = levels;

  const double max_side = height_to_ground_width(partition.range_max(), camera) / syn.meters_per_px;
  const auto raster_side = static_cast<std::size_t>(std::ceil(max_side)) + 2;
  const double center = static_cast<double>(raster_side) / 2.0;
  const auto grid_cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(places))));
  const std::size_t channels = config.backbone.channels;

  Rng rng(config.seed + 3);
  std::vector<std::vector<float>> place_codes(places);
  for (auto& code : place_codes) {
    code.resize(dim);
    rng.fill_uniform(code, -1.0, 1.0);
    code = l2_normalize(Descriptor{code, false}).values;
  }

  for (std::size_t p = 0; p < places; ++p) {
    const Raster raster = make_raster(splitmix64(config.seed ^ (0x5eed0000ull + p)), raster_side, channels);
    const Position pos{static_cast<float>(static_cast<double>(p % grid_cols) * syn.place_spacing_m),
                       static_cast<float>(static_cast<double>(p / grid_cols) * syn.place_spacing_m)};
    for (std::uint32_t l = 1; l <= levels; ++l) {
      const HeightLevel& lvl = partition.level(l);
      const double mid = (lvl.h_min + lvl.h_max) / 2.0;
      // Jitter stays strictly inside the level so every query keeps its label.
      const double reach = std::min(syn.height_jitter_m, (lvl.h_max - lvl.h_min) / 2.0 * 0.98);
      const double query_h = mid + (2.0 * rng.unit() - 1.0) * reach;

      std::vector<float> level_code(dim, 0.0f);
      level_code[l - 1] = 1.0f;
      std::vector<float> place_base = place_codes[p];
      for (std::size_t d = 0; d < dim; ++d) place_base[d] += 0.5f * level_code[d];

      const std::uint64_t db_id = p * levels + l;
      for (int is_query = 0; is_query < 2; ++is_query) {
        SyntheticView v;
        v.place = p;
        v.level = l;
        const double h = is_query ? query_h : mid;
        v.row.id = is_query ? db_id + kQueryIdOffset : db_id;
        v.row.path = std::filesystem::path(is_query ? "queries" : "db") / view_name(is_query ? "q" : "d", p, l);
        v.row.height_m = static_cast<float>(h);
        v.row.east_m = pos.east;
        v.row.north_m = pos.north;
        v.crop = {center, center, height_to_ground_width(h, camera) / syn.meters_per_px};
        v.image = render_crop(raster, v.crop, syn.image_size);
        v.height = noisy(level_code, syn.descriptor_noise, rng);
        v.place_descriptor = noisy(place_base, syn.descriptor_noise, rng);
        (is_query ? corpus.queries : corpus.database).push_back(std::move(v));
      }
    }
  }
  return corpus;
}

void write_synthetic(const SyntheticCorpus& corpus, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "db", ec);
  std::filesystem::create_directories(out_dir / "queries", ec);
  if (ec) fail(Errc::io, "cannot create " + out_dir.string() + ": " + ec.message());

  auto write_side = [&](const std::vector<SyntheticView>& views, const char* prefix) {
    std::vector<ManifestRow> rows;
    const auto dim = static_cast<std::uint32_t>(views.empty() ? 0 : views.front().height.dim());
    DescriptorSet heights(dim);
    DescriptorSet place(dim);
    for (const auto& v : views) {
      save_netpbm(out_dir / v.row.path, v.image);
      rows.push_back(v.row);
      heights.add(v.row.id, v.height.values);
      place.add(v.row.id, v.place_descriptor.values);
    }
    save_manifest(out_dir / (std::string(prefix) + "_manifest.csv"), rows);
    save_descriptor_set(out_dir / (std::string(prefix) + "_height.hevd"), heights);
    save_descriptor_set(out_dir / (std::string(prefix) + "_place.hevd"), place);
  };
  write_side(corpus.database, "db");
  write_side(corpus.queries, "query");
}

}  // namespace heviper
