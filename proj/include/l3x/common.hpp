#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace l3x {

using Index = Eigen::Index;

template <class S> using Vec2 = Eigen::Matrix<S, 2, 1>;
template <class S> using Vec3 = Eigen::Matrix<S, 3, 1>;
template <class S> using Vec4 = Eigen::Matrix<S, 4, 1>;
template <class S> using Mat2 = Eigen::Matrix<S, 2, 2>;
template <class S> using Mat3 = Eigen::Matrix<S, 3, 3>;
template <class S> using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S> using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S> using Mat3X = Eigen::Matrix<S, 3, Eigen::Dynamic>;
template <class S> using Mat4X = Eigen::Matrix<S, 4, Eigen::Dynamic>;

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class UnsupportedModelError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Multi-channel planar map: data is channels x (height * width), pixel index = y * width + x.
// Columns are pixels so a whole map can be pushed through a dense layer with one product.
template <class S>
struct FeatureMap {
  int height = 0;
  int width = 0;
  MatX<S> data;

  FeatureMap() = default;
  FeatureMap(int channels, int h, int w) : height(h), width(w), data(MatX<S>::Zero(channels, Index(h) * w)) {}

  int channels() const { return int(data.rows()); }
  Index pixels() const { return Index(height) * width; }
  Index pixel(int y, int x) const { return Index(y) * width + x; }
  S& at(int c, int y, int x) { return data(c, pixel(y, x)); }
  S at(int c, int y, int x) const { return data(c, pixel(y, x)); }

  template <class T>
  FeatureMap<T> cast() const {
    FeatureMap<T> out;
    out.height = height;
    out.width = width;
    out.data = data.template cast<T>();
    return out;
  }
};

// Binary or 8-bit single-channel image, row-major.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0) : height(h), width(w), data(std::size_t(h) * w, fill) {}
  bool inside(int y, int x) const { return data[std::size_t(y) * width + x] != 0; }
  std::uint8_t& operator()(int y, int x) { return data[std::size_t(y) * width + x]; }
  std::uint8_t operator()(int y, int x) const { return data[std::size_t(y) * width + x]; }
  std::size_t count() const;
};

// Nearest-neighbour resampling (pixel-center aligned); keeps masks binary.
Mask resample_nearest(const Mask& mask, int height, int width);

// Deterministic generator whose derived distributions do not depend on the standard
// library implementation (std::uniform_real_distribution and friends are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}
  // Stream keyed by (seed, a, b), used to derive per-step randomness without carrying state.
  static Rng keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t next() { return engine_(); }
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);
  double normal();
  std::uint64_t below(std::uint64_t n);    // [0, n)
  int integer(int lo, int hi);             // inclusive
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

template <class S>
inline S sigmoid(S x) {
  return S(1) / (S(1) + std::exp(-x));
}

template <class S>
inline S logit(S p) {
  return std::log(p / (S(1) - p));
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be independent.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

// Flushes subnormal floats to zero on the calling thread until destroyed. Late in training the
// decoder gradients underflow and the subnormal path costs several times the normal one.
class FlushSubnormals {
 public:
  FlushSubnormals();
  ~FlushSubnormals();
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace l3x
