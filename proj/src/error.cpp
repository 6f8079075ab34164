#include "heviper/error.hpp"

namespace heviper {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::config: return "config";
    case Errc::shape: return "shape";
    case Errc::input: return "input";
    case Errc::range: return "range";
    case Errc::io: return "io";
    case Errc::schema: return "schema";
    case Errc::magic_mismatch: return "magic-mismatch";
    case Errc::version_mismatch: return "version-mismatch";
    case Errc::truncated: return "truncated";
    case Errc::checksum_mismatch: return "checksum-mismatch";
    case Errc::empty_pool: return "empty-pool";
    case Errc::empty_search_space: return "empty-search-space";
    case Errc::undefined_metric: return "undefined-metric";
  }
  return "unknown";
}

}  // namespace heviper
