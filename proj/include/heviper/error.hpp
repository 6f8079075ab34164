#pragma once

#include <stdexcept>
#include <string>

namespace heviper {

/// Error categories raised by the library. The CLI maps them onto exit codes.
enum class Errc {
  config,              // inconsistent dimensions, bad parameters, bad config file
  shape,               // tensor shape violates an operation's contract
  input,               // invalid value handed to an operation
  range,               // height outside the partition span
  io,                  // file cannot be opened / written
  schema,              // manifest or report missing required fields
  magic_mismatch,      // binary file carries the wrong magic
  version_mismatch,    // binary file version unsupported
  truncated,           // binary file ends early
  checksum_mismatch,   // per-section CRC32 disagrees
  empty_pool,          // nearest-neighbor search over nothing
  empty_search_space,  // every selected sub-database is empty
  undefined_metric,    // metric over zero queries
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace heviper
