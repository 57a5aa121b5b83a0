#ifndef WAVESTYLE_COMMON_HPP
#define WAVESTYLE_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace wavestyle {

inline constexpr const char* kVersion = "0.1.0";

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecognized or unsupported file content (codec, bit depth, magic bytes).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Structurally broken input (truncated file, bad JSON).
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Data violates a documented invariant (non-finite sample, empty clip).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad argument value (negative step size, unknown preset name).
class ParamError : public Error {
 public:
  using Error::Error;
};

// Raised while wiring ops together, before any forward pass runs.
class GraphError : public Error {
 public:
  using Error::Error;
};

// Operation called out of order (backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Bad command line; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Deterministic random stream. Box-Muller on top of mt19937_64 so the
// normal draws do not depend on the standard library's distribution
// implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t integer() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 step; used to derive per-purpose seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace wavestyle

#endif  // WAVESTYLE_COMMON_HPP
