#pragma once

// Binary stream helpers for checkpoint files: native-endian scalars,
// length-prefixed strings, Eigen matrices. Structs are written field by
// field (never memcpy'd whole) so padding bytes can't leak into artifacts
// and reruns stay byte-identical. Readers fail loudly on truncation.

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "gwnav/common.hpp"

namespace gwnav::bin {

template <typename T>
void write(std::ostream& os, const T& v) {
  static_assert(std::is_arithmetic_v<T>);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read(std::istream& is) {
  static_assert(std::is_arithmetic_v<T>);
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  require(static_cast<bool>(is), ErrorKind::parse, "truncated binary stream");
  return v;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is) {
  auto n = read<std::uint64_t>(is);
  require(n <= (1ull << 30), ErrorKind::parse, "implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(is), ErrorKind::parse, "truncated binary stream");
  return s;
}

template <typename T>
void write_vector(std::ostream& os, const std::vector<T>& v) {
  static_assert(std::is_arithmetic_v<T>);
  write<std::uint64_t>(os, v.size());
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_vector(std::istream& is) {
  static_assert(std::is_arithmetic_v<T>);
  auto n = read<std::uint64_t>(is);
  require(n <= (1ull << 30), ErrorKind::parse, "implausible vector length");
  std::vector<T> v(n);
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(n * sizeof(T)));
  require(static_cast<bool>(is), ErrorKind::parse, "truncated binary stream");
  return v;
}

template <typename Derived>
void write_matrix(std::ostream& os, const Eigen::MatrixBase<Derived>& m) {
  write<std::int64_t>(os, m.rows());
  write<std::int64_t>(os, m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      write(os, m(r, c));
}

template <typename Mat>
Mat read_matrix(std::istream& is) {
  auto rows = read<std::int64_t>(is);
  auto cols = read<std::int64_t>(is);
  require(rows >= 0 && cols >= 0 && rows * cols <= (1ll << 28),
          ErrorKind::parse, "implausible matrix shape");
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r)
      m(r, c) = read<typename Mat::Scalar>(is);
  return m;
}

} // namespace gwnav::bin
