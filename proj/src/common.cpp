#include "l3x/common.hpp"
#include "l3x/binary_io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace l3x {

std::size_t Mask::count() const {
  return std::size_t(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

Mask resample_nearest(const Mask& mask, int height, int width) {
  Mask out(height, width);
  for (int y = 0; y < height; ++y) {
    int sy = std::min(mask.height - 1, int((y + 0.5) * mask.height / height));
    for (int x = 0; x < width; ++x) {
      int sx = std::min(mask.width - 1, int((x + 0.5) * mask.width / width));
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::keyed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return Rng(splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL)));
}

double Rng::uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 0.0;
  while (u1 <= 0.0) u1 = uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection keeps the draw unbiased.
  std::uint64_t limit = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

int Rng::integer(int lo, int hi) { return lo + int(below(std::uint64_t(hi - lo + 1))); }

namespace {

bool subnormals_flushed() {
#if defined(__SSE__)
  return (_mm_getcsr() & 0x8040u) == 0x8040u;
#else
  return false;
#endif
}

}  // namespace

FlushSubnormals::FlushSubnormals() {
#if defined(__SSE__)
  saved_ = _mm_getcsr();
  _mm_setcsr(saved_ | 0x8040u);  // FTZ and DAZ
#endif
}

FlushSubnormals::~FlushSubnormals() {
#if defined(__SSE__)
  _mm_setcsr(saved_);
#endif
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  int workers = std::min(threads, n);
  pool.reserve(workers);
  const bool flush = subnormals_flushed();
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      std::optional<FlushSubnormals> guard;
      if (flush) guard.emplace();
      for (int i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}


// ---------------------------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace l3x
