#pragma once

// Shared plumbing: error taxonomy, deterministic RNG streams, config hashing
// and number formatting used by every module.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gwnav {

inline constexpr const char* kVersion = "1.0.0";

enum class ErrorKind {
  config,       // invalid configuration values
  state,        // operation applied to an unsuitable state
  numerical,    // solver breakdown (singular pivot, lost precision)
  divergence,   // non-finite values appeared during integration
  escape,       // a wire node left the vessel lumen entirely
  generation,   // vessel generation produced invalid geometry
  composition,  // tree composition rejected
  deformation,  // deformation produced invalid geometry
  parse,        // file could not be parsed
  io,           // filesystem failure
  usage,        // bad command line / arguments
  hash_mismatch // checkpoint was produced under a different config
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool ok, ErrorKind kind, const std::string& msg) {
  if (!ok) fail(kind, msg);
}

// FNV-1a, used both for config fingerprints and for deriving named RNG
// sub-streams from a root seed. Stable across platforms by construction.
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;

inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a_mix(std::uint64_t value, std::uint64_t h) {
  for (int i = 0; i < 8; ++i) {
    h ^= (value >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h;
}

// Deterministic RNG wrapper. Draw algorithms are implemented here rather
// than with std distributions so that results do not depend on the standard
// library version and the full state is a single serializable engine.
struct Rng {
  std::mt19937_64 engine;

  Rng() = default;
  explicit Rng(std::uint64_t seed) : engine(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t uniform_index(std::uint64_t n) {
    // modulo bias is < 2^-40 for the sizes used here
    return engine() % n;
  }

  // standard normal via Box-Muller; stateless (two raw draws per sample)
  double normal() {
    double u1 = (static_cast<double>(engine() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.141592653589793238462643383279502884 * u2);
  }

  std::string save_state() const {
    std::ostringstream os;
    os << engine;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine;
    require(!is.fail(), ErrorKind::parse, "corrupt RNG state");
  }
};

// Named sub-stream of a root seed ("env", "explore", "eval", ...).
inline Rng substream(std::uint64_t root_seed, std::string_view name) {
  return Rng(fnv1a(name, fnv1a_mix(root_seed, kFnvOffset)));
}

// Shortest-possible decimal that round-trips a double exactly.
inline std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Fixed 9-significant-digit form used in CSV artifacts.
inline std::string fmt_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

} // namespace gwnav
