#include "l3x/hash_grid.hpp"

#include <cmath>

namespace l3x {

double HashGridConfig::growth_factor() const {
  if (levels <= 1) return 1.0;
  return std::exp((std::log(n_max) - std::log(n_min)) / double(levels - 1));
}

int HashGridConfig::resolution(int level) const {
  // The small epsilon keeps floor(16 * b^15) at 2048 despite rounding in the power.
  return int(std::floor(n_min * std::pow(growth_factor(), double(level)) + 1e-9));
}

void HashGridConfig::validate() const {
  if (levels < 1 || features_per_entry < 1 || passes < 1) throw Error("hash grid: levels, features and passes must be positive");
  if (log2_table_size < 1 || log2_table_size > 24) throw Error("hash grid: log2 table size out of range");
  if (bottleneck_dim < 1 || input_dim() > int(kHashPrimes.size())) throw Error("hash grid: unsupported input dimension");
  if (!(n_min >= 1) || !(n_max >= n_min)) throw Error("hash grid: resolutions must satisfy 1 <= n_min <= n_max");
}

std::uint32_t hash_corner(const std::uint32_t* coords, int dims, int log2_table_size) {
  std::uint32_t h = 0;
  for (int d = 0; d < dims; ++d) h ^= coords[d] * kHashPrimes[d];
  return h & ((1u << log2_table_size) - 1u);
}

template <class S>
HashGrid<S>::HashGrid(const HashGridConfig& config) : config_(config) {
  config_.validate();
  table_.setZero(config_.features_per_entry, Index(config_.levels) * config_.table_size());
}

template <class S>
void HashGrid<S>::initialize(Rng& rng, double scale) {
  for (Index j = 0; j < table_.cols(); ++j)
    for (Index i = 0; i < table_.rows(); ++i) table_(i, j) = S(rng.uniform(-scale, scale));
}

template <class S>
MatX<S> HashGrid<S>::encode(const MatX<S>& m) const {
  MatX<S> out(config_.output_dim(), m.cols());
  if (config_.bottleneck_dim == 3 && config_.features_per_entry == 2) run<false, 3, 2>(m, &out, nullptr, nullptr, nullptr);
  else run<false, 0, 0>(m, &out, nullptr, nullptr, nullptr);
  return out;
}

template <class S>
void HashGrid<S>::backward(const MatX<S>& m, const MatX<S>& d_out, MatX<S>& d_table, MatX<S>& d_m) const {
  if (d_table.rows() != table_.rows() || d_table.cols() != table_.cols()) d_table.setZero(table_.rows(), table_.cols());
  d_m.setZero(m.rows(), m.cols());
  if (config_.bottleneck_dim == 3 && config_.features_per_entry == 2) run<true, 3, 2>(m, nullptr, &d_out, &d_table, &d_m);
  else run<true, 0, 0>(m, nullptr, &d_out, &d_table, &d_m);
}

template <class S>
template <bool Backward, int kD, int kF>
void HashGrid<S>::run(const MatX<S>& m, MatX<S>* out, const MatX<S>* d_out, MatX<S>* d_table, MatX<S>* d_m) const {
  // kD / kF fix the bottleneck and feature widths at compile time (0 = read from the config).
  const int D = kD ? kD : config_.bottleneck_dim;
  if (m.rows() != D) throw Error("hash grid: input has " + std::to_string(m.rows()) + " rows, expected " + std::to_string(D));
  const int L = config_.levels, F = kF ? kF : config_.features_per_entry, P = config_.passes;
  const int T = config_.table_size();
  const std::uint32_t mask = std::uint32_t(T - 1);
  const int n_corners = 1 << D;
  const std::uint32_t pass_prime = kHashPrimes[D];

  // Pass coordinate lattice data, shared by every pixel: cell hash term and weight per (level, pass, side).
  std::vector<std::uint32_t> pass_hash(std::size_t(L) * P * 2);
  std::vector<S> pass_weight(std::size_t(L) * P * 2);
  std::vector<S> res(L);
  for (int l = 0; l < L; ++l) {
    res[l] = S(config_.resolution(l));
    for (int p = 0; p < P; ++p) {
      const S coord = P > 1 ? S(p) / S(P - 1) : S(0);
      const S pos = coord * res[l];
      const S cell = std::floor(pos);
      const S frac = pos - cell;
      const std::size_t base = (std::size_t(l) * P + p) * 2;
      pass_hash[base] = std::uint32_t(cell) * pass_prime;
      pass_hash[base + 1] = (std::uint32_t(cell) + 1u) * pass_prime;
      pass_weight[base] = S(1) - frac;
      pass_weight[base + 1] = frac;
    }
  }

  std::array<S, 8> squash{}, dsquash{};
  std::array<S, 8> frac{};
  std::array<std::uint32_t, 8> cell{};
  std::vector<std::uint32_t> corner_hash(n_corners);
  std::vector<S> corner_weight(n_corners);
  std::vector<S> corner_dw(std::size_t(n_corners) * D);  // d weight / d frac_d
  std::vector<S> d_frac(D);
  std::array<S, 16> acc{};
  if (F > int(acc.size())) throw Error("hash grid: at most 16 features per entry");

  const S* tab = table_.data();
  S* dtab = Backward ? d_table->data() : nullptr;
  const Index out_rows = config_.output_dim();

  for (Index col = 0; col < m.cols(); ++col) {
    S* o = Backward ? nullptr : out->data() + col * out_rows;
    const S* g_col = Backward ? d_out->data() + col * out_rows : nullptr;
    for (int d = 0; d < D; ++d) {
      squash[d] = sigmoid(m(d, col));
      dsquash[d] = squash[d] * (S(1) - squash[d]);
    }
    for (int l = 0; l < L; ++l) {
      for (int d = 0; d < D; ++d) {
        const S pos = squash[d] * res[l];
        const S c = std::floor(pos);
        cell[d] = std::uint32_t(c);
        frac[d] = pos - c;
      }
      for (int c = 0; c < n_corners; ++c) {
        std::uint32_t h = 0;
        S w = 1;
        for (int d = 0; d < D; ++d) {
          const bool hi = (c >> d) & 1;
          h ^= (cell[d] + (hi ? 1u : 0u)) * kHashPrimes[d];
          w *= hi ? frac[d] : S(1) - frac[d];
        }
        corner_hash[c] = h;
        corner_weight[c] = w;
        if constexpr (Backward) {
          for (int d = 0; d < D; ++d) {
            S dw = 1;
            for (int e = 0; e < D; ++e) {
              const bool hi = (c >> e) & 1;
              if (e == d) dw *= hi ? S(1) : S(-1);
              else dw *= hi ? frac[e] : S(1) - frac[e];
            }
            corner_dw[std::size_t(c) * D + d] = dw;
          }
        }
      }
      const std::size_t level_offset = std::size_t(l) * T;
      if constexpr (Backward) std::fill(d_frac.begin(), d_frac.end(), S(0));
      for (int p = 0; p < P; ++p) {
        const std::size_t pb = (std::size_t(l) * P + p) * 2;
        const Index row = (Index(p) * L + l) * F;
        if constexpr (!Backward)
          for (int f = 0; f < F; ++f) acc[f] = S(0);
        for (int side = 0; side < 2; ++side) {
          const S wp = pass_weight[pb + side];
          if (wp == S(0)) continue;  // contributes exactly nothing
          const std::uint32_t hp = pass_hash[pb + side];
          for (int c = 0; c < n_corners; ++c) {
            const std::size_t entry = (level_offset + ((corner_hash[c] ^ hp) & mask)) * std::size_t(F);
            const S w = wp * corner_weight[c];
            if constexpr (!Backward) {
              for (int f = 0; f < F; ++f) acc[f] += w * tab[entry + f];
            } else {
              S dot = 0;
              for (int f = 0; f < F; ++f) {
                const S g = g_col[row + f];
                dtab[entry + f] += w * g;
                dot += g * tab[entry + f];
              }
              if (dot != S(0))
                for (int d = 0; d < D; ++d) d_frac[d] += wp * corner_dw[std::size_t(c) * D + d] * dot;
            }
          }
        }
        if constexpr (!Backward)
          for (int f = 0; f < F; ++f) o[row + f] = acc[f];
      }
      if constexpr (Backward) {
        for (int d = 0; d < D; ++d) (*d_m)(d, col) += d_frac[d] * res[l] * dsquash[d];
      }
    }
  }
}

template class HashGrid<float>;
template class HashGrid<double>;

}  // namespace l3x
