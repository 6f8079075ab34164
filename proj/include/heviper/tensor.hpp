#pragma once

// Dense f32 building blocks for the bypass adapters. Everything here is a pure
// function of its arguments.

#include <cstddef>
#include <span>
#include <vector>

namespace heviper {

/// Row-major rows x cols f32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  Matrix(std::size_t r, std::size_t c, std::vector<float> values);

  static Matrix identity(std::size_t n);

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

/// Channel-major C x H x W grid.
struct FeatureGrid {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  FeatureGrid() = default;
  FeatureGrid(std::size_t c, std::size_t h, std::size_t w) : channels(c), height(h), width(w), data(c * h * w, 0.0f) {}
  FeatureGrid(std::size_t c, std::size_t h, std::size_t w, std::vector<float> values);

  std::size_t plane() const { return height * width; }
  float& at(std::size_t c, std::size_t i, std::size_t j) { return data[(c * height + i) * width + j]; }
  float at(std::size_t c, std::size_t i, std::size_t j) const { return data[(c * height + i) * width + j]; }
  std::span<const float> channel(std::size_t c) const { return {data.data() + c * plane(), plane()}; }
};

/// Token-major (N+1) x D sequence; token 0 is the class token.
struct TokenSequence {
  std::size_t token_count = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  TokenSequence() = default;
  TokenSequence(std::size_t n, std::size_t d) : token_count(n), dim(d), data(n * d, 0.0f) {}
  TokenSequence(std::size_t n, std::size_t d, std::vector<float> values);

  std::span<float> token(std::size_t t) { return {data.data() + t * dim, dim}; }
  std::span<const float> token(std::size_t t) const { return {data.data() + t * dim, dim}; }

  std::size_t patch_count() const { return token_count == 0 ? 0 : token_count - 1; }
  /// Side of the square patch grid. Throws Errc::shape unless token_count >= 2
  /// and the patch count is a perfect square.
  std::size_t patch_side() const;
};

bool all_finite(std::span<const float> values);

/// Dot product; sums over more than 256 terms accumulate in f64.
float dot(std::span<const float> a, std::span<const float> b);

/// Same-size zero-padded 3x3 correlation per channel. `kernels` holds
/// channels x 9 taps, row-major per kernel. Receptive field 1 + 2*dilation.
FeatureGrid depthwise_conv3x3(const FeatureGrid& grid, std::span<const float> kernels, std::size_t dilation);

/// Per-pixel linear map across channels: out = weights * in + bias.
FeatureGrid pointwise_conv(const FeatureGrid& grid, const Matrix& weights, std::span<const float> bias);

/// Per-token product with a Dout x Din matrix.
TokenSequence linear_project(const TokenSequence& tokens, const Matrix& weights);

/// x * Phi(x), erf form.
float gelu(float x);
void gelu_inplace(std::span<float> values);

inline constexpr float kLayerNormEps = 1e-6f;

/// s1 * LN(x) + s2 * x with per-token layer normalisation (no affine).
TokenSequence scaled_norm_input(const TokenSequence& tokens, float s1, float s2);

/// Population variance of each channel's spatial values.
std::vector<float> channel_variance(const FeatureGrid& grid);

/// Patch tokens (class token excluded) reshaped to a D x side x side grid.
FeatureGrid patches_to_grid(const TokenSequence& tokens);
/// Writes the grid back into the patch tokens of `tokens`; the class token is untouched.
void grid_to_patches(const FeatureGrid& grid, TokenSequence& tokens);

}  // namespace heviper
