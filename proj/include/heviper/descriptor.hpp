#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "heviper/adapter.hpp"
#include "heviper/image.hpp"
#include "heviper/tensor.hpp"

namespace heviper {

struct Descriptor {
  std::vector<float> values;
  bool normalized = false;

  std::size_t dim() const { return values.size(); }
};

/// Unit L2 norm, direction preserved. Throws Errc::input on a zero or
/// non-finite vector.
Descriptor l2_normalize(const Descriptor& d);

inline constexpr float kGemEps = 1e-6f;

/// Generalised mean over patch tokens (class token excluded), per dimension:
/// (mean_i max(x_ik, eps)^p)^(1/p). p >= 1, evaluated relative to the
/// per-dimension maximum so large p cannot overflow.
Descriptor gem_pool(const TokenSequence& tokens, float p);

/// Arithmetic mean over patch tokens.
Descriptor mean_pool(const TokenSequence& tokens);

struct Aggregator {
  enum class Kind { gem, mean };
  Kind kind = Kind::gem;
  float p = 3.0f;

  /// "gem", "gem:<p>" or "mean"; anything else is Errc::config.
  static Aggregator parse(const std::string& spec);
  std::string to_string() const;
};

Descriptor aggregate(const TokenSequence& tokens, const Aggregator& aggregator);

/// Frozen feature extractor emitting the L token sequences that enter the
/// backbone blocks (x_0 .. x_{L-1}).
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::vector<TokenSequence> forward(const Image& image) const = 0;
  virtual std::size_t blocks() const = 0;
  virtual std::size_t dim() const = 0;
};

struct BackboneStubConfig {
  std::uint64_t seed = 42;
  std::size_t blocks = 4;
  std::size_t dim = 128;
  std::size_t patch_size = 8;
  std::size_t pool_cells = 2;  // each patch is mean-pooled over pool_cells^2 sub-cells
  std::size_t channels = 1;
};

// Deterministic stand-in for a frozen ViT. Each patch is mean-pooled into
// pool_cells^2 x C features, projected to D by a seeded table, then pushed
// through L seeded maps (I + B_l) applied cumulatively; stream[l] is the
// output of map l+1. The class token is the mean of the patch tokens.
// Tables are drawn in order: projection (D x F, uniform +-1/sqrt(F)), then
// B_1 .. B_L (D x D, uniform +-0.5/sqrt(D)).
class BackboneStub final : public Backbone {
 public:
  explicit BackboneStub(const BackboneStubConfig& config);

  std::vector<TokenSequence> forward(const Image& image) const override;
  std::size_t blocks() const override { return config_.blocks; }
  std::size_t dim() const override { return config_.dim; }
  const BackboneStubConfig& config() const { return config_; }

 private:
  BackboneStubConfig config_;
  Matrix projection_;
  std::vector<Matrix> block_maps_;
};

/// Counts forward passes of a wrapped backbone.
class CountingBackbone final : public Backbone {
 public:
  explicit CountingBackbone(const Backbone& inner) : inner_(inner) {}
  std::vector<TokenSequence> forward(const Image& image) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return inner_.forward(image);
  }
  std::size_t blocks() const override { return inner_.blocks(); }
  std::size_t dim() const override { return inner_.dim(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  const Backbone& inner_;
  mutable std::atomic<std::size_t> calls_{0};
};

/// Height descriptor from an already computed backbone stream.
Descriptor height_descriptor(std::span<const TokenSequence> stream, const BranchParams& he_params, float gem_p);
/// Place descriptor from an already computed backbone stream.
Descriptor place_descriptor(std::span<const TokenSequence> stream, const BranchParams& vpr_params,
                            const Aggregator& aggregator);

Descriptor extract_height_descriptor(const Image& image, const Backbone& backbone, const BranchParams& he_params,
                                     float gem_p = 3.0f);
Descriptor extract_place_descriptor(const Image& image, const Backbone& backbone, const BranchParams& vpr_params,
                                    const Aggregator& aggregator);

struct DescriptorPair {
  Descriptor height;
  Descriptor place;
};

/// Both descriptors from a single backbone forward pass.
DescriptorPair extract_descriptors(const Image& image, const Backbone& backbone, const BranchParams& he_params,
                                   const BranchParams& vpr_params, const Aggregator& aggregator, float height_gem_p);

// Descriptor file ("HEVD", version 1): {magic, u32 version, u64 count,
// u32 dim}, count x dim f32 row-major, then count u64 record ids.
inline constexpr std::uint32_t kDescriptorFileVersion = 1;

class DescriptorSet {
 public:
  DescriptorSet() = default;
  explicit DescriptorSet(std::uint32_t dim) : dim_(dim) {}

  void add(std::uint64_t id, std::span<const float> values);
  std::size_t size() const { return ids_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::uint64_t id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t r) const { return {values_.data() + r * dim_, dim_}; }
  /// Row holding `id`, if present.
  std::optional<std::size_t> find(std::uint64_t id) const;
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  const std::vector<float>& values() const { return values_; }

 private:
  std::uint32_t dim_ = 0;
  std::vector<float> values_;
  std::vector<std::uint64_t> ids_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

void save_descriptor_set(const std::filesystem::path& path, const DescriptorSet& set);
DescriptorSet load_descriptor_set(const std::filesystem::path& path);

}  // namespace heviper
