#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <stdexcept>
#include <vector>

#include "bmix/grid.hpp"

namespace bmix {

using cx = std::complex<double>;

/// Single-particle complex wavefunction on a periodic grid.
/// Norm convention: ||f||^2 = h^d * sum_j |f_j|^2.
struct Field {
  GridSpec grid;
  std::vector<cx> values;

  Field() = default;
  explicit Field(const GridSpec& g) : grid(g), values(g.sites(), cx{0.0, 0.0}) {}
  Field(const GridSpec& g, std::vector<cx> v) : grid(g), values(std::move(v)) {
    if (static_cast<std::int64_t>(values.size()) != g.sites())
      throw std::invalid_argument("field: value count does not match grid");
  }

  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

inline cx inner(const Field& f, const Field& g) {
  require_same_grid(f.grid, g.grid);
  cx s{0.0, 0.0};
  for (std::int64_t i = 0; i < f.size(); ++i) s += std::conj(f.values[i]) * g.values[i];
  return s * f.grid.cell_volume();
}

inline double norm(const Field& f) {
  double s = 0.0;
  for (const auto& z : f.values) s += std::norm(z);
  return std::sqrt(s * f.grid.cell_volume());
}

inline void require_finite(const Field& f) {
  for (const auto& z : f.values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
      throw std::invalid_argument("field: non-finite value");
}

inline Field& normalize(Field& f) {
  const double n = norm(f);
  if (n == 0.0) throw std::invalid_argument("field: cannot normalize zero field");
  for (auto& z : f.values) z /= n;
  return f;
}

inline Field operator+(const Field& a, const Field& b) {
  require_same_grid(a.grid, b.grid);
  Field r(a.grid);
  for (std::int64_t i = 0; i < a.size(); ++i) r.values[i] = a.values[i] + b.values[i];
  return r;
}

inline Field operator-(const Field& a, const Field& b) {
  require_same_grid(a.grid, b.grid);
  Field r(a.grid);
  for (std::int64_t i = 0; i < a.size(); ++i) r.values[i] = a.values[i] - b.values[i];
  return r;
}

inline Field operator*(cx c, const Field& a) {
  Field r = a;
  for (auto& z : r.values) z *= c;
  return r;
}

/// Pointwise |f|^2.
inline std::vector<double> density(const Field& f) {
  std::vector<double> rho(f.values.size());
  for (std::size_t i = 0; i < f.values.size(); ++i) rho[i] = std::norm(f.values[i]);
  return rho;
}

/// Normalized plane wave with integer mode numbers per axis.
inline Field plane_wave(const GridSpec& g, const std::array<int, 3>& modes) {
  Field f(g);
  const double amp = 1.0 / std::sqrt(std::pow(g.box, g.d));
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    const auto x = g.site(idx);
    double phase = 0.0;
    for (int a = 0; a < g.d; ++a) phase += 2.0 * std::numbers::pi * modes[a] * x[a] / g.box;
    f.values[idx] = std::polar(amp, phase);
  }
  return f;
}

/// Normalized wrapped Gaussian bump centred at x0, width w, with an
/// optional plane-wave boost of integer mode numbers.
inline Field gaussian_packet(const GridSpec& g, const std::array<double, 3>& x0,
                             double width, const std::array<int, 3>& modes = {0, 0, 0}) {
  if (!(width > 0.0)) throw std::invalid_argument("gaussian packet: width must be positive");
  Field f(g);
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    const auto x = g.site(idx);
    double r2 = 0.0, phase = 0.0;
    for (int a = 0; a < g.d; ++a) {
      double dx = std::fmod(x[a] - x0[a], g.box);
      if (dx > 0.5 * g.box) dx -= g.box;
      if (dx < -0.5 * g.box) dx += g.box;
      r2 += dx * dx;
      phase += 2.0 * std::numbers::pi * modes[a] * x[a] / g.box;
    }
    f.values[idx] = std::polar(std::exp(-r2 / (2.0 * width * width)), phase);
  }
  return normalize(f);
}

/// Deterministic pseudo-random field, normalized.
inline Field random_field(const GridSpec& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Field f(g);
  for (auto& z : f.values) z = cx{gauss(rng), gauss(rng)};
  return normalize(f);
}

}  // namespace bmix
