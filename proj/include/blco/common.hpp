#pragma once

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace blco {

// 0-based coordinate / mode-length type. Values are double throughout.
using index_t = std::uint64_t;

// Linearized (interleaved) index. Up to 128 total encoding bits are
// constructible; only the post-split re-encoded index must fit 64 bits.
using alto_t = unsigned __int128;

inline constexpr index_t kMaxModeBits = 64;

// Bits needed to address [0, extent): ceil(log2(extent)), with extent 1 -> 0.
inline int bits_for_extent(index_t extent) {
  return extent <= 1 ? 0 : std::bit_width(extent - 1);
}

// Base error. CLI maps subclasses to exit codes: format/usage 2, I/O 3,
// verification 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class VerifyError : public Error {
 public:
  using Error::Error;
};

}  // namespace blco
