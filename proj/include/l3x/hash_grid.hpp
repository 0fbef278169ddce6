#pragma once

#include "l3x/common.hpp"

#include <array>
#include <cstdint>

namespace l3x {

struct HashGridConfig {
  int levels = 16;
  int log2_table_size = 8;
  int features_per_entry = 2;
  double n_min = 16;
  double n_max = 2048;
  int passes = 16;
  int bottleneck_dim = 3;

  int input_dim() const { return bottleneck_dim + 1; }
  int table_size() const { return 1 << log2_table_size; }
  int output_dim() const { return levels * features_per_entry * passes; }
  double growth_factor() const;
  int resolution(int level) const;
  void validate() const;
};

// Instant-NGP spatial hash of an integer lattice point, reduced to the table size.
std::uint32_t hash_corner(const std::uint32_t* coords, int dims, int log2_table_size);

inline constexpr std::array<std::uint32_t, 7> kHashPrimes = {1u,          2654435761u, 805459861u, 3674653429u,
                                                            2097192037u, 1434869437u, 2165219737u};

// Multi-resolution hash encoding over the (squashed) bottleneck plus a pass coordinate.
// One table per level, shared by all passes. Output layout: pass-major, then level, then feature.
template <class S>
class HashGrid {
 public:
  HashGrid() = default;
  explicit HashGrid(const HashGridConfig& config);

  const HashGridConfig& config() const { return config_; }
  // features_per_entry x (levels * table_size); entry e of level l is column l * table_size + e.
  MatX<S>& table() { return table_; }
  const MatX<S>& table() const { return table_; }

  // Uniform in [-scale, scale].
  void initialize(Rng& rng, double scale = 1e-4);

  // m: bottleneck_dim x N raw bottleneck values (squashed internally). Returns output_dim x N.
  MatX<S> encode(const MatX<S>& m) const;

  // Accumulates d(table) into d_table and writes d(m) into d_m for upstream gradient d_out.
  void backward(const MatX<S>& m, const MatX<S>& d_out, MatX<S>& d_table, MatX<S>& d_m) const;

 private:
  template <bool Backward, int kD, int kF>
  void run(const MatX<S>& m, MatX<S>* out, const MatX<S>* d_out, MatX<S>* d_table, MatX<S>* d_m) const;

  HashGridConfig config_;
  MatX<S> table_;
};

}  // namespace l3x
