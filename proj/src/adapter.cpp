#include "heviper/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "binary_io.hpp"
#include "heviper/error.hpp"
#include "heviper/rng.hpp"

namespace heviper {

std::string_view to_string(BranchId id) { return id == BranchId::he ? "he" : "vpr"; }

void AdapterParams::validate() const {
  const std::size_t d = dim();
  const std::size_t b = bottleneck();
  auto shape = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows != r || m.cols != c || m.data.size() != r * c)
      fail(Errc::config, std::string("adapter ") + name + " must be " + std::to_string(r) + "x" + std::to_string(c));
  };
  if (b == 0 || d == 0) fail(Errc::config, "adapter dimensions must be positive");
  if (b >= d) fail(Errc::config, "adapter bottleneck " + std::to_string(b) + " must be smaller than dim " + std::to_string(d));
  shape(up_proj, d, b, "up_proj");
  shape(pw_weights, b, b, "pw_weights");
  if (dw_kernels.size() != b * 9) fail(Errc::config, "adapter dw_kernels must hold bottleneck x 9 taps");
  if (pw_bias.size() != b) fail(Errc::config, "adapter pw_bias must hold bottleneck values");
  if (dw_dilation < 1) fail(Errc::config, "adapter dilation must be >= 1");
  const bool finite = all_finite(down_proj.data) && all_finite(up_proj.data) && all_finite(dw_kernels) &&
                      all_finite(pw_weights.data) && all_finite(pw_bias) && std::isfinite(s1) && std::isfinite(s2);
  if (!finite) fail(Errc::config, "adapter weights must be finite");
}

CenterMask center_mask(std::size_t height, std::size_t width, std::span<const float> variances) {
  if (height < 1 || width < 1) fail(Errc::input, "center_mask: grid must be at least 1x1");
  for (float v : variances)
    if (!(v >= 0.0f) || !std::isfinite(v)) fail(Errc::input, "center_mask: variance must be finite and >= 0");

  CenterMask mask{variances.size(), height, width, std::vector<float>(variances.size() * height * width)};
  const double ci = static_cast<double>(height) / 2.0;
  const double cj = static_cast<double>(width) / 2.0;
  const double half = static_cast<double>(std::max(height, width)) / 2.0;
  const double denom = 2.0 * half * half;
  constexpr float kFloor = std::numeric_limits<float>::min();
  for (std::size_t c = 0; c < variances.size(); ++c) {
    const double var = variances[c];
    for (std::size_t i = 0; i < height; ++i) {
      for (std::size_t j = 0; j < width; ++j) {
        const double di = static_cast<double>(i) - ci;
        const double dj = static_cast<double>(j) - cj;
        const double radial = (dj * dj + di * di) / denom;
        const auto m = static_cast<float>(std::exp(-radial * var));
        mask.values[(c * height + i) * width + j] = std::max(m, kFloor);
      }
    }
  }
  return mask;
}

TokenSequence adapter_forward(const TokenSequence& x0, const AdapterParams& params) {
  if (x0.dim != params.dim())
    fail(Errc::config, "adapter_forward: tokens have dim " + std::to_string(x0.dim) + ", adapter expects " +
                           std::to_string(params.dim()));
  const std::size_t side = x0.patch_side();

  TokenSequence hidden = linear_project(scaled_norm_input(x0, params.s1, params.s2), params.down_proj);

  // The class token has no spatial position: it skips both convolutions and the mask.
  FeatureGrid grid = patches_to_grid(hidden);
  const FeatureGrid dw = depthwise_conv3x3(grid, params.dw_kernels, params.dw_dilation);
  for (std::size_t k = 0; k < grid.data.size(); ++k) grid.data[k] += dw.data[k];
  const FeatureGrid pw = pointwise_conv(grid, params.pw_weights, params.pw_bias);
  for (std::size_t k = 0; k < grid.data.size(); ++k) grid.data[k] += pw.data[k];

  if (params.mask_enabled) {
    const CenterMask mask = center_mask(side, side, channel_variance(grid));
    for (std::size_t k = 0; k < grid.data.size(); ++k) grid.data[k] *= mask.values[k];
  }
  grid_to_patches(grid, hidden);
  gelu_inplace(hidden.data);

  TokenSequence out = linear_project(hidden, params.up_proj);
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] = x0.data[k] + out.data[k];
  return out;
}

BranchState branch_step(const BranchState& state, const TokenSequence& backbone_out, const AdapterParams& params) {
  if (backbone_out.token_count != state.carried.token_count || backbone_out.dim != state.carried.dim)
    fail(Errc::config, "branch_step: backbone output shape differs from the carried branch state");
  TokenSequence input(backbone_out.token_count, backbone_out.dim);
  for (std::size_t k = 0; k < input.data.size(); ++k) input.data[k] = backbone_out.data[k] + state.carried.data[k];
  return {adapter_forward(input, params), state.block_index + 1};
}

TokenSequence run_branch(std::span<const TokenSequence> backbone_stream, std::span<const AdapterParams> params) {
  if (backbone_stream.empty()) fail(Errc::config, "run_branch: empty backbone stream");
  if (backbone_stream.size() != params.size())
    fail(Errc::config, "run_branch: stream has " + std::to_string(backbone_stream.size()) + " blocks, branch has " +
                           std::to_string(params.size()) + " adapters");
  BranchState state = BranchState::initial(backbone_stream.front().token_count, backbone_stream.front().dim);
  for (std::size_t l = 0; l < params.size(); ++l) state = branch_step(state, backbone_stream[l], params[l]);
  return std::move(state.carried);
}

BranchParams make_synthetic_branch(std::uint64_t seed, std::size_t blocks, std::size_t dim, std::size_t bottleneck,
                                   std::size_t dilation, bool mask_enabled, double scale) {
  Rng rng(seed);
  BranchParams branch;
  branch.reserve(blocks);
  for (std::size_t l = 0; l < blocks; ++l) {
    AdapterParams p;
    p.down_proj = Matrix(bottleneck, dim);
    p.dw_kernels.resize(bottleneck * 9);
    p.pw_weights = Matrix(bottleneck, bottleneck);
    p.pw_bias.resize(bottleneck);
    p.up_proj = Matrix(dim, bottleneck);
    rng.fill_uniform(p.down_proj.data, -scale, scale);
    rng.fill_uniform(p.dw_kernels, -scale, scale);
    rng.fill_uniform(p.pw_weights.data, -scale, scale);
    rng.fill_uniform(p.pw_bias, -scale, scale);
    rng.fill_uniform(p.up_proj.data, -scale, scale);
    p.dw_dilation = dilation;
    p.mask_enabled = mask_enabled;
    p.validate();
    branch.push_back(std::move(p));
  }
  return branch;
}

void save_branch_params(const std::filesystem::path& path, std::span<const AdapterParams> params) {
  if (params.empty()) fail(Errc::config, "cannot save an empty adapter branch");
  const AdapterParams& first = params.front();
  detail::ByteWriter w;
  w.magic("HEVA");
  w.u32(kAdapterFileVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  w.u32(static_cast<std::uint32_t>(first.dim()));
  w.u32(static_cast<std::uint32_t>(first.bottleneck()));
  w.u32(static_cast<std::uint32_t>(first.dw_dilation));
  for (const AdapterParams& p : params) {
    p.validate();
    if (p.dim() != first.dim() || p.bottleneck() != first.bottleneck() || p.dw_dilation != first.dw_dilation)
      fail(Errc::config, "all adapters in a branch must share dim, bottleneck and dilation");
    w.f32s(p.down_proj.data);
    w.f32s(p.dw_kernels);
    w.f32s(p.pw_weights.data);
    w.f32s(p.pw_bias);
    w.f32s(p.up_proj.data);
    w.f32(p.s1);
    w.f32(p.s2);
  }
  detail::write_file_atomic(path, w.bytes());
}

BranchParams load_branch_params(const std::filesystem::path& path, bool mask_enabled) {
  const auto bytes = detail::read_file(path);
  detail::ByteReader r(bytes, "adapter weights " + path.string());
  r.expect_magic("HEVA");
  const std::uint32_t version = r.u32();
  if (version != kAdapterFileVersion)
    fail(Errc::version_mismatch, r.label() + ": unsupported version " + std::to_string(version));
  const std::uint32_t blocks = r.u32();
  const std::uint32_t dim = r.u32();
  const std::uint32_t bottleneck = r.u32();
  const std::uint32_t dilation = r.u32();
  if (blocks == 0) fail(Errc::config, r.label() + ": zero blocks");

  const std::size_t per_block =
      4 * (static_cast<std::size_t>(bottleneck) * dim * 2 + bottleneck * 9 + bottleneck * bottleneck + bottleneck + 2);
  r.need(per_block * blocks);

  BranchParams branch;
  branch.reserve(blocks);
  for (std::uint32_t l = 0; l < blocks; ++l) {
    AdapterParams p;
    p.down_proj = Matrix(bottleneck, dim);
    p.dw_kernels.resize(bottleneck * 9);
    p.pw_weights = Matrix(bottleneck, bottleneck);
    p.pw_bias.resize(bottleneck);
    p.up_proj = Matrix(dim, bottleneck);
    r.f32s(p.down_proj.data);
    r.f32s(p.dw_kernels);
    r.f32s(p.pw_weights.data);
    r.f32s(p.pw_bias);
    r.f32s(p.up_proj.data);
    p.s1 = r.f32();
    p.s2 = r.f32();
    p.dw_dilation = dilation;
    p.mask_enabled = mask_enabled;
    p.validate();
    branch.push_back(std::move(p));
  }
  return branch;
}

}  // namespace heviper
