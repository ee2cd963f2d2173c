#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace bmix {

/// Periodic box in d dimensions, m sites per axis, side length `box`.
/// Sites are x_j = j*h with h = box/m; momenta k_n = 2*pi*n/box with
/// n in [-m/2, m/2). m must be even so the Nyquist mode is unambiguous
/// (it is assigned the negative momentum -pi*m/box).
struct GridSpec {
  int d = 1;
  int m = 8;
  double box = 2.0 * std::numbers::pi;

  double spacing() const { return box / m; }

  std::int64_t sites() const {
    std::int64_t n = 1;
    for (int i = 0; i < d; ++i) n *= m;
    return n;
  }

  /// h^d, the quadrature weight of one site.
  double cell_volume() const { return std::pow(spacing(), d); }

  void validate() const {
    if (d < 1 || d > 3) throw std::invalid_argument("grid: d must be 1, 2 or 3");
    if (m < 4 || m % 2 != 0) throw std::invalid_argument("grid: m must be even and >= 4");
    if (!(box > 0.0)) throw std::invalid_argument("grid: box length must be positive");
  }

  bool operator==(const GridSpec& o) const {
    return d == o.d && m == o.m && box == o.box;
  }

  /// Signed mode number of axis index j, in [-m/2, m/2).
  int mode(int j) const { return j < m / 2 ? j : j - m; }

  /// Momentum of axis index j.
  double momentum(int j) const { return 2.0 * std::numbers::pi * mode(j) / box; }

  /// Minimum-image signed displacement of axis index j from the origin.
  double displacement(int j) const { return mode_wrap(j) * spacing(); }

  /// Minimum-image distance of site (given by axis indices) from the origin.
  double min_image_r(const std::array<int, 3>& j) const {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double dx = displacement(j[a]);
      r2 += dx * dx;
    }
    return std::sqrt(r2);
  }

  std::int64_t flat_index(const std::array<int, 3>& j) const {
    std::int64_t idx = 0;
    for (int a = 0; a < d; ++a) idx = idx * m + j[a];
    return idx;
  }

  std::array<int, 3> axis_indices(std::int64_t idx) const {
    std::array<int, 3> j{0, 0, 0};
    for (int a = d - 1; a >= 0; --a) {
      j[a] = static_cast<int>(idx % m);
      idx /= m;
    }
    return j;
  }

  /// Coordinates of site idx (first d entries meaningful).
  std::array<double, 3> site(std::int64_t idx) const {
    const auto j = axis_indices(idx);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) x[a] = j[a] * spacing();
    return x;
  }

 private:
  int mode_wrap(int j) const { return j <= m / 2 ? j : j - m; }
};

inline void require_same_grid(const GridSpec& a, const GridSpec& b) {
  if (!(a == b)) throw std::invalid_argument("grid mismatch");
}

}  // namespace bmix
