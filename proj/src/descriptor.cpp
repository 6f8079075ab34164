#include "heviper/descriptor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "heviper/error.hpp"
#include "heviper/rng.hpp"

namespace heviper {

Descriptor l2_normalize(const Descriptor& d) {
  if (d.values.empty()) fail(Errc::input, "l2_normalize: empty descriptor");
  double sq = 0.0;
  for (float v : d.values) sq += static_cast<double>(v) * v;
  if (!(sq > 0.0) || !std::isfinite(sq)) fail(Errc::input, "l2_normalize: zero or non-finite vector");
  const double inv = 1.0 / std::sqrt(sq);
  Descriptor out{std::vector<float>(d.values.size()), true};
  for (std::size_t k = 0; k < d.values.size(); ++k) out.values[k] = static_cast<float>(d.values[k] * inv);
  return out;
}

Descriptor gem_pool(const TokenSequence& tokens, float p) {
  if (!(p >= 1.0f)) fail(Errc::config, "gem_pool: p must be >= 1");
  const std::size_t n = tokens.patch_count();
  if (n == 0) fail(Errc::shape, "gem_pool: no patch tokens");
  Descriptor out{std::vector<float>(tokens.dim), false};
  for (std::size_t k = 0; k < tokens.dim; ++k) {
    double peak = kGemEps;
    for (std::size_t t = 1; t <= n; ++t) peak = std::max(peak, static_cast<double>(tokens.token(t)[k]));
    double acc = 0.0;
    for (std::size_t t = 1; t <= n; ++t) {
      const double x = std::max(static_cast<double>(tokens.token(t)[k]), static_cast<double>(kGemEps));
      acc += std::pow(x / peak, static_cast<double>(p));
    }
    out.values[k] = static_cast<float>(peak * std::pow(acc / static_cast<double>(n), 1.0 / p));
  }
  return out;
}

Descriptor mean_pool(const TokenSequence& tokens) {
  const std::size_t n = tokens.patch_count();
  if (n == 0) fail(Errc::shape, "mean_pool: no patch tokens");
  Descriptor out{std::vector<float>(tokens.dim), false};
  for (std::size_t k = 0; k < tokens.dim; ++k) {
    double acc = 0.0;
    for (std::size_t t = 1; t <= n; ++t) acc += tokens.token(t)[k];
    out.values[k] = static_cast<float>(acc / static_cast<double>(n));
  }
  return out;
}

Aggregator Aggregator::parse(const std::string& spec) {
  if (spec == "mean") return {Kind::mean, 1.0f};
  if (spec == "gem") return {Kind::gem, 3.0f};
  if (spec.rfind("gem:", 0) == 0) {
    const std::string tail = spec.substr(4);
    float p = 0.0f;
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), p);
    if (ec != std::errc() || ptr != tail.data() + tail.size() || !(p >= 1.0f))
      fail(Errc::config, "aggregator '" + spec + "': GeM power must be a number >= 1");
    return {Kind::gem, p};
  }
  fail(Errc::config, "unknown aggregator '" + spec + "' (expected gem, gem:<p> or mean)");
}

std::string Aggregator::to_string() const {
  if (kind == Kind::mean) return "mean";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, p);
  return "gem:" + std::string(buf, ptr);
}

Descriptor aggregate(const TokenSequence& tokens, const Aggregator& aggregator) {
  return aggregator.kind == Aggregator::Kind::mean ? mean_pool(tokens) : gem_pool(tokens, aggregator.p);
}

BackboneStub::BackboneStub(const BackboneStubConfig& config) : config_(config) {
  if (config.blocks < 1 || config.dim < 1 || config.channels < 1) fail(Errc::config, "backbone stub: empty shape");
  if (config.patch_size < 1 || config.pool_cells < 1 || config.patch_size % config.pool_cells != 0)
    fail(Errc::config, "backbone stub: patch_size must be a positive multiple of pool_cells");
  const std::size_t features = config.pool_cells * config.pool_cells * config.channels;
  Rng rng(config.seed);
  projection_ = Matrix(config.dim, features);
  const double proj_scale = 1.0 / std::sqrt(static_cast<double>(features));
  rng.fill_uniform(projection_.data, -proj_scale, proj_scale);
  const double map_scale = 0.5 / std::sqrt(static_cast<double>(config.dim));
  for (std::size_t l = 0; l < config.blocks; ++l) {
    Matrix m(config.dim, config.dim);
    rng.fill_uniform(m.data, -map_scale, map_scale);
    block_maps_.push_back(std::move(m));
  }
}

std::vector<TokenSequence> BackboneStub::forward(const Image& image) const {
  const std::size_t ps = config_.patch_size;
  if (image.channels != config_.channels)
    fail(Errc::input, "backbone stub expects " + std::to_string(config_.channels) + " channel(s), image has " +
                          std::to_string(image.channels));
  if (image.width == 0 || image.width % ps != 0 || image.height % ps != 0)
    fail(Errc::input, "image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                          " is not divisible by patch size " + std::to_string(ps));
  const std::size_t side = image.width / ps;
  if (image.height / ps != side) fail(Errc::input, "image must form a square patch grid");

  const std::size_t cells = config_.pool_cells;
  const std::size_t cell_px = ps / cells;
  const std::size_t features = cells * cells * config_.channels;
  const std::size_t patches = side * side;
  const std::size_t dim = config_.dim;

  TokenSequence current(patches + 1, dim);
  std::vector<float> feat(features);
  for (std::size_t py = 0; py < side; ++py) {
    for (std::size_t px = 0; px < side; ++px) {
      for (std::size_t cy = 0; cy < cells; ++cy) {
        for (std::size_t cx = 0; cx < cells; ++cx) {
          for (std::size_t ch = 0; ch < config_.channels; ++ch) {
            double acc = 0.0;
            for (std::size_t y = 0; y < cell_px; ++y)
              for (std::size_t x = 0; x < cell_px; ++x)
                acc += image.at(px * ps + cx * cell_px + x, py * ps + cy * cell_px + y, ch);
            feat[(cy * cells + cx) * config_.channels + ch] = static_cast<float>(acc / static_cast<double>(cell_px * cell_px));
          }
        }
      }
      auto tok = current.token(1 + py * side + px);
      for (std::size_t d = 0; d < dim; ++d) tok[d] = dot(projection_.row(d), feat);
    }
  }

  std::vector<TokenSequence> stream;
  stream.reserve(config_.blocks);
  std::vector<double> mean(dim);
  for (const Matrix& map : block_maps_) {
    TokenSequence next(patches + 1, dim);
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t t = 1; t <= patches; ++t) {
      auto src = current.token(t);
      auto dst = next.token(t);
      for (std::size_t d = 0; d < dim; ++d) {
        dst[d] = src[d] + dot(map.row(d), src);
        mean[d] += dst[d];
      }
    }
    auto cls = next.token(0);
    for (std::size_t d = 0; d < dim; ++d) cls[d] = static_cast<float>(mean[d] / static_cast<double>(patches));
    stream.push_back(next);
    current = std::move(next);
  }
  return stream;
}

Descriptor height_descriptor(std::span<const TokenSequence> stream, const BranchParams& he_params, float gem_p) {
  return l2_normalize(gem_pool(run_branch(stream, he_params), gem_p));
}

Descriptor place_descriptor(std::span<const TokenSequence> stream, const BranchParams& vpr_params,
                            const Aggregator& aggregator) {
  return l2_normalize(aggregate(run_branch(stream, vpr_params), aggregator));
}

Descriptor extract_height_descriptor(const Image& image, const Backbone& backbone, const BranchParams& he_params,
                                     float gem_p) {
  return height_descriptor(backbone.forward(image), he_params, gem_p);
}

Descriptor extract_place_descriptor(const Image& image, const Backbone& backbone, const BranchParams& vpr_params,
                                    const Aggregator& aggregator) {
  return place_descriptor(backbone.forward(image), vpr_params, aggregator);
}

DescriptorPair extract_descriptors(const Image& image, const Backbone& backbone, const BranchParams& he_params,
                                   const BranchParams& vpr_params, const Aggregator& aggregator, float height_gem_p) {
  const std::vector<TokenSequence> stream = backbone.forward(image);
  return {height_descriptor(stream, he_params, height_gem_p), place_descriptor(stream, vpr_params, aggregator)};
}

void DescriptorSet::add(std::uint64_t id, std::span<const float> values) {
  if (values.size() != dim_)
    fail(Errc::input, "descriptor " + std::to_string(id) + " has dim " + std::to_string(values.size()) +
                          ", set expects " + std::to_string(dim_));
  if (!index_.emplace(id, ids_.size()).second) fail(Errc::input, "duplicate descriptor id " + std::to_string(id));
  ids_.push_back(id);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::optional<std::size_t> DescriptorSet::find(std::uint64_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set) {
  detail::ByteWriter w;
  w.magic("HEVD");
  w.u32(kDescriptorFileVersion);
  w.u64(set.size());
  w.u32(set.dim());
  w.f32s(set.values());
  for (std::uint64_t id : set.ids()) w.u64(id);
  detail::write_file_atomic(path, w.bytes());
}

DescriptorSet load_descriptor_set(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "descriptor file " + path.string());
  r.expect_magic("HEVD");
  const std::uint32_t version = r.u32();
  if (version != kDescriptorFileVersion)
    fail(Errc::version_mismatch, r.label() + ": unsupported version " + std::to_string(version));
  const std::uint64_t count = r.u64();
  const std::uint32_t dim = r.u32();
  if (dim == 0) fail(Errc::input, r.label() + ": zero descriptor dim");
  if (count > r.remaining() / (4ull * dim + 8ull)) fail(Errc::truncated, r.label() + ": file truncated");
  std::vector<float> values(count * dim);
  r.f32s(values);
  DescriptorSet set(dim);
  for (std::uint64_t i = 0; i < count; ++i)
    set.add(r.u64(), std::span<const float>(values).subspan(i * dim, dim));
  return set;
}

}  // namespace heviper
