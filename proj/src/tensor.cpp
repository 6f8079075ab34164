#include "heviper/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "heviper/error.hpp"

namespace heviper {

namespace {

void check_size(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual)
    fail(Errc::shape, std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                          std::to_string(actual));
}

}  // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<float> values) : rows(r), cols(c), data(std::move(values)) {
  check_size(r * c, data.size(), "Matrix");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0f;
  return m;
}

FeatureGrid::FeatureGrid(std::size_t c, std::size_t h, std::size_t w, std::vector<float> values)
    : channels(c), height(h), width(w), data(std::move(values)) {
  check_size(c * h * w, data.size(), "FeatureGrid");
}

TokenSequence::TokenSequence(std::size_t n, std::size_t d, std::vector<float> values)
    : token_count(n), dim(d), data(std::move(values)) {
  check_size(n * d, data.size(), "TokenSequence");
}

std::size_t TokenSequence::patch_side() const {
  if (token_count < 2) fail(Errc::shape, "token sequence needs a class token and at least one patch");
  const std::size_t n = token_count - 1;
  auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) fail(Errc::shape, "patch count " + std::to_string(n) + " is not a perfect square");
  return side;
}

bool all_finite(std::span<const float> values) {
  for (float v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

float dot(std::span<const float> a, std::span<const float> b) {
  const std::size_t n = a.size();
  if (n > 256) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return static_cast<float>(acc);
  }
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

FeatureGrid depthwise_conv3x3(const FeatureGrid& grid, std::span<const float> kernels, std::size_t dilation) {
  if (kernels.size() != grid.channels * 9)
    fail(Errc::config, "depthwise_conv3x3: expected " + std::to_string(grid.channels) + " kernels of 9 taps, got " +
                           std::to_string(kernels.size()) + " taps");
  if (dilation < 1) fail(Errc::config, "depthwise_conv3x3: dilation must be >= 1");
  const std::size_t extent = std::max(grid.height, grid.width);
  constexpr auto kIndexMax = static_cast<std::size_t>(std::numeric_limits<std::ptrdiff_t>::max());
  if (dilation > (kIndexMax - extent) / 2)
    fail(Errc::config, "depthwise_conv3x3: dilation " + std::to_string(dilation) + " exceeds the index range");

  FeatureGrid out(grid.channels, grid.height, grid.width);
  const auto h = static_cast<std::ptrdiff_t>(grid.height);
  const auto w = static_cast<std::ptrdiff_t>(grid.width);
  const auto d = static_cast<std::ptrdiff_t>(dilation);
  for (std::size_t c = 0; c < grid.channels; ++c) {
    const float* k = kernels.data() + c * 9;
    for (std::ptrdiff_t i = 0; i < h; ++i) {
      for (std::ptrdiff_t j = 0; j < w; ++j) {
        float acc = 0.0f;
        for (std::ptrdiff_t a = -1; a <= 1; ++a) {
          const std::ptrdiff_t ii = i + a * d;
          if (ii < 0 || ii >= h) continue;
          for (std::ptrdiff_t b = -1; b <= 1; ++b) {
            const std::ptrdiff_t jj = j + b * d;
            if (jj < 0 || jj >= w) continue;
            acc += k[(a + 1) * 3 + (b + 1)] * grid.at(c, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
          }
        }
        out.at(c, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
      }
    }
  }
  return out;
}

FeatureGrid pointwise_conv(const FeatureGrid& grid, const Matrix& weights, std::span<const float> bias) {
  if (weights.cols != grid.channels)
    fail(Errc::config, "pointwise_conv: weights expect " + std::to_string(weights.cols) + " input channels, grid has " +
                           std::to_string(grid.channels));
  if (bias.size() != weights.rows) fail(Errc::config, "pointwise_conv: bias length differs from output channels");

  const std::size_t plane = grid.plane();
  FeatureGrid out(weights.rows, grid.height, grid.width);
  std::vector<float> pixel(grid.channels);
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < grid.channels; ++c) pixel[c] = grid.data[c * plane + p];
    for (std::size_t o = 0; o < weights.rows; ++o) out.data[o * plane + p] = bias[o] + dot(weights.row(o), pixel);
  }
  return out;
}

TokenSequence linear_project(const TokenSequence& tokens, const Matrix& weights) {
  if (weights.cols != tokens.dim)
    fail(Errc::config, "linear_project: weights expect dim " + std::to_string(weights.cols) + ", tokens have " +
                           std::to_string(tokens.dim));
  TokenSequence out(tokens.token_count, weights.rows);
  for (std::size_t t = 0; t < tokens.token_count; ++t) {
    auto src = tokens.token(t);
    auto dst = out.token(t);
    for (std::size_t o = 0; o < weights.rows; ++o) dst[o] = dot(weights.row(o), src);
  }
  return out;
}

float gelu(float x) {
  const double v = x;
  return static_cast<float>(0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))));
}

void gelu_inplace(std::span<float> values) {
  for (float& v : values) v = gelu(v);
}

TokenSequence scaled_norm_input(const TokenSequence& tokens, float s1, float s2) {
  TokenSequence out(tokens.token_count, tokens.dim);
  const auto n = static_cast<double>(tokens.dim);
  for (std::size_t t = 0; t < tokens.token_count; ++t) {
    auto src = tokens.token(t);
    auto dst = out.token(t);
    double mean = 0.0;
    for (float v : src) mean += v;
    mean /= n;
    double var = 0.0;
    for (float v : src) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t k = 0; k < tokens.dim; ++k) {
      const auto normed = static_cast<float>((src[k] - mean) * inv_std);
      dst[k] = s1 * normed + s2 * src[k];
    }
  }
  return out;
}

std::vector<float> channel_variance(const FeatureGrid& grid) {
  const std::size_t plane = grid.plane();
  if (plane == 0) fail(Errc::shape, "channel_variance: empty spatial grid");
  std::vector<float> out(grid.channels);
  for (std::size_t c = 0; c < grid.channels; ++c) {
    auto values = grid.channel(c);
    double mean = 0.0;
    for (float v : values) mean += v;
    mean /= static_cast<double>(plane);
    double acc = 0.0;
    for (float v : values) acc += (v - mean) * (v - mean);
    out[c] = static_cast<float>(acc / static_cast<double>(plane));
  }
  return out;
}

FeatureGrid patches_to_grid(const TokenSequence& tokens) {
  const std::size_t side = tokens.patch_side();
  FeatureGrid grid(tokens.dim, side, side);
  const std::size_t plane = side * side;
  for (std::size_t p = 0; p < plane; ++p) {
    auto tok = tokens.token(p + 1);
    for (std::size_t c = 0; c < tokens.dim; ++c) grid.data[c * plane + p] = tok[c];
  }
  return grid;
}

void grid_to_patches(const FeatureGrid& grid, TokenSequence& tokens) {
  const std::size_t side = tokens.patch_side();
  if (grid.channels != tokens.dim || grid.height != side || grid.width != side)
    fail(Errc::shape, "grid_to_patches: grid does not match the token layout");
  const std::size_t plane = side * side;
  for (std::size_t p = 0; p < plane; ++p) {
    auto tok = tokens.token(p + 1);
    for (std::size_t c = 0; c < tokens.dim; ++c) tok[c] = grid.data[c * plane + p];
  }
}

}  // namespace heviper
