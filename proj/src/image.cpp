#include "heviper/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "heviper/error.hpp"

namespace heviper {

namespace {

constexpr std::uint32_t kRawVersion = 1;

// Skips whitespace and '#' comments, then parses an unsigned decimal.
std::size_t netpbm_field(const std::vector<std::uint8_t>& bytes, std::size_t& pos, const std::string& label) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(bytes[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= bytes.size() || !std::isdigit(bytes[pos])) fail(Errc::input, label + ": malformed netpbm header");
  std::size_t v = 0;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (v > (1u << 24)) fail(Errc::input, label + ": netpbm dimension too large");
    ++pos;
  }
  return v;
}

Image parse_netpbm(const std::vector<std::uint8_t>& bytes, const std::string& label) {
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t w = netpbm_field(bytes, pos, label);
  const std::size_t h = netpbm_field(bytes, pos, label);
  const std::size_t maxval = netpbm_field(bytes, pos, label);
  if (maxval != 255) fail(Errc::input, label + ": only 8-bit netpbm (maxval 255) is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail(Errc::input, label + ": malformed netpbm header");
  ++pos;
  if (w == 0 || h == 0) fail(Errc::input, label + ": empty image");
  Image img(w, h, channels);
  if (bytes.size() - pos < img.pixels.size()) fail(Errc::truncated, label + ": pixel data truncated");
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<float>(bytes[pos + k]) / 255.0f;
  return img;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  const std::string label = "image " + path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) return parse_netpbm(bytes, label);

  detail::ByteReader r(bytes, label);
  r.expect_magic("HEVF");
  const std::uint32_t version = r.u32();
  if (version != kRawVersion) fail(Errc::version_mismatch, label + ": unsupported raw grid version");
  const std::size_t h = r.u32();
  const std::size_t w = r.u32();
  const std::size_t c = r.u32();
  if (w == 0 || h == 0 || c == 0) fail(Errc::input, label + ": empty raw grid");
  Image img(w, h, c);
  r.f32s(img.pixels);
  for (float v : img.pixels)
    if (!std::isfinite(v)) fail(Errc::input, label + ": non-finite value in raw grid");
  return img;
}

void save_netpbm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) fail(Errc::input, "netpbm needs 1 or 3 channels");
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + image.pixels.size());
  for (float v : image.pixels) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    bytes.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
  }
  detail::write_file_atomic(path, bytes);
}

void save_raw_f32(const std::filesystem::path& path, const Image& image) {
  detail::ByteWriter w;
  w.magic("HEVF");
  w.u32(kRawVersion);
  w.u32(static_cast<std::uint32_t>(image.height));
  w.u32(static_cast<std::uint32_t>(image.width));
  w.u32(static_cast<std::uint32_t>(image.channels));
  w.f32s(image.pixels);
  detail::write_file_atomic(path, w.bytes());
}

}  // namespace heviper
