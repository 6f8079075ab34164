#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "heviper/adapter.hpp"
#include "heviper/error.hpp"
#include "heviper/rng.hpp"
#include "heviper/tensor.hpp"

namespace test {

inline std::filesystem::path data_dir() { return HEVIPER_TEST_DATA; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("heviper_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> read_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  return out;
}

inline heviper::TokenSequence random_tokens(heviper::Rng& rng, std::size_t tokens, std::size_t dim, double lo = -1.0,
                                            double hi = 1.0) {
  heviper::TokenSequence t(tokens, dim);
  rng.fill_uniform(t.data, lo, hi);
  return t;
}

inline heviper::FeatureGrid random_grid(heviper::Rng& rng, std::size_t c, std::size_t h, std::size_t w) {
  heviper::FeatureGrid g(c, h, w);
  rng.fill_uniform(g.data, -1.0, 1.0);
  return g;
}

inline bool bits_equal(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint32_t>(a[i]) != std::bit_cast<std::uint32_t>(b[i])) return false;
  return true;
}

/// ||a - b|| / max(||b||, tiny).
inline double rel_error(const std::vector<float>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-30);
}

inline double max_abs_diff(const std::vector<float>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class Fn>
heviper::Errc error_code(Fn&& fn) {
  try {
    fn();
  } catch (const heviper::Error& e) {
    return e.code();
  }
  throw std::runtime_error("expected a heviper::Error");
}

}  // namespace test

namespace test {

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream(path, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace test
