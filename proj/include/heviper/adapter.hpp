#pragma once

// Dual bypass-adapter branches. Each backbone block l is paired with one
// adapter per branch; a branch carries its own output from block to block
// and never writes into the shared backbone stream:
//
//   x^(a)_{l,t} = Adapter_t(x_{l-1} + x^(a)_{l-1,t}),   x^(a)_{0,t} = 0
//   Adapter(x0) = x0 + U gelu(M * f_pw(f_dw(D(s1 LN(x0) + s2 x0))))
//
// with f(x) = x + conv(x) for both convolutions and M the center-weighted
// mask derived from per-channel variance.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "heviper/tensor.hpp"

namespace heviper {

enum class BranchId { he, vpr };

std::string_view to_string(BranchId id);

struct AdapterParams {
  Matrix down_proj;               // bottleneck x dim
  Matrix up_proj;                 // dim x bottleneck
  std::vector<float> dw_kernels;  // bottleneck x 9
  std::size_t dw_dilation = 1;
  Matrix pw_weights;  // bottleneck x bottleneck
  std::vector<float> pw_bias;
  float s1 = 1.0f;
  float s2 = 1.0f;
  bool mask_enabled = false;

  std::size_t dim() const { return down_proj.cols; }
  std::size_t bottleneck() const { return down_proj.rows; }

  /// Throws Errc::config on inconsistent shapes, bottleneck >= dim, or non-finite weights.
  void validate() const;
};

/// One branch's adapters, block 1 first.
using BranchParams = std::vector<AdapterParams>;

/// Per-channel mask M[c][i][j], values in (0, 1].
struct CenterMask {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;

  float at(std::size_t c, std::size_t i, std::size_t j) const { return values[(c * height + i) * width + j]; }
};

/// M[c][i][j] = exp(-((j - W/2)^2 + (i - H/2)^2) / (2 (max(H,W)/2)^2) * var[c]).
/// Underflow is clamped to the smallest normal f32 so values stay positive.
CenterMask center_mask(std::size_t height, std::size_t width, std::span<const float> variances);

TokenSequence adapter_forward(const TokenSequence& x0, const AdapterParams& params);

struct BranchState {
  TokenSequence carried;
  std::size_t block_index = 0;

  static BranchState initial(std::size_t token_count, std::size_t dim) { return {TokenSequence(token_count, dim), 0}; }
};

BranchState branch_step(const BranchState& state, const TokenSequence& backbone_out, const AdapterParams& params);

/// Folds branch_step over the stream x_0 .. x_{L-1}; returns x^(a)_L.
TokenSequence run_branch(std::span<const TokenSequence> backbone_stream, std::span<const AdapterParams> params);

/// Seeded uniform(-scale, scale) weights for every matrix, kernel and bias;
/// s1 = s2 = 1. Draw order per block follows the weight-file order.
BranchParams make_synthetic_branch(std::uint64_t seed, std::size_t blocks, std::size_t dim, std::size_t bottleneck,
                                   std::size_t dilation, bool mask_enabled, double scale = 0.02);

// Adapter weight file ("HEVA", version 1). Little-endian header
// {magic, version, L, D, bottleneck, dilation} as u32, then per block:
// down_proj, dw_kernels, pw_weights, pw_bias, up_proj, s1, s2 (f32).
inline constexpr std::uint32_t kAdapterFileVersion = 1;

void save_branch_params(const std::filesystem::path& path, std::span<const AdapterParams> params);
/// The file does not record masking; it is a property of the branch.
BranchParams load_branch_params(const std::filesystem::path& path, bool mask_enabled);

}  // namespace heviper
