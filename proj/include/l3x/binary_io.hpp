#pragma once

#include "l3x/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace l3x {

// Little-endian scalar and array I/O, independent of the host byte order.

template <class T>
inline T byteswap_if_big(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
inline void write_le(std::ostream& os, T v) {
  v = byteswap_if_big(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
inline T read_le(std::istream& is) {
  T v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IntegrityError("unexpected end of file");
  return byteswap_if_big(v);
}

// Writes any dense Eigen expression column-major as float32.
template <class Derived>
inline void write_f32(std::ostream& os, const Eigen::DenseBase<Derived>& m) {
  const auto& e = m.derived().eval();
  std::vector<float> buf(std::size_t(e.size()));
  Index k = 0;
  for (Index j = 0; j < e.cols(); ++j)
    for (Index i = 0; i < e.rows(); ++i) buf[k++] = byteswap_if_big(float(e(i, j)));
  os.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * sizeof(float)));
}

// Reads rows x cols float32 values column-major.
template <class S>
inline MatX<S> read_f32(std::istream& is, Index rows, Index cols) {
  std::vector<float> buf(std::size_t(rows * cols));
  if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size() * sizeof(float))))
    throw IntegrityError("unexpected end of file while reading a float array");
  MatX<S> m(rows, cols);
  Index k = 0;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = S(byteswap_if_big(buf[k++]));
  return m;
}

inline void write_string(std::ostream& os, const std::string& s) {
  write_le<std::uint32_t>(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}

inline std::string read_string(std::istream& is, std::size_t limit = 1 << 20) {
  const auto n = read_le<std::uint32_t>(is);
  if (n > limit) throw IntegrityError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw IntegrityError("unexpected end of file while reading a string");
  return s;
}

std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace l3x
