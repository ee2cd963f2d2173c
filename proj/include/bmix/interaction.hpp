#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bmix/fft.hpp"
#include "bmix/field.hpp"
#include "bmix/grid.hpp"

namespace bmix {

/// Yukawa coupling constants for the two-species mixture, plus the core
/// regularization scale used on the lattice.
struct CouplingMatrix {
  double lambda11 = 0.0, lambda22 = 0.0, lambda12 = 0.0;
  double mu11 = 0.0, mu22 = 0.0, mu12 = 0.0;
  double epsilon = 0.1;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("coupling: epsilon must be positive");
    if (mu11 < 0.0 || mu22 < 0.0 || mu12 < 0.0)
      throw std::invalid_argument("coupling: mu must be nonnegative");
  }
};

inline double negative_part(double lambda) { return -std::min(0.0, lambda); }

/// Regularized Yukawa kernel sampled over the periodic box with
/// minimum-image distances: u(x) = lambda * exp(-mu r) / sqrt(r^2 + eps^2).
struct Kernel {
  GridSpec grid;
  std::vector<double> values;
};

inline Kernel build_kernel(const GridSpec& g, double lambda, double mu, double epsilon) {
  g.validate();
  if (!(epsilon > 0.0)) throw std::invalid_argument("kernel: epsilon must be positive");
  if (mu < 0.0) throw std::invalid_argument("kernel: mu must be nonnegative");
  Kernel k{g, std::vector<double>(g.sites())};
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    const double r = g.min_image_r(g.axis_indices(idx));
    k.values[idx] = lambda * std::exp(-mu * r) / std::sqrt(r * r + epsilon * epsilon);
  }
  return k;
}

/// Periodic discrete convolution h^d * (u * density), computed spectrally.
/// The imaginary residue of the inverse transform is discarded; it is
/// checked to stay below 1e-12 relative.
inline std::vector<double> mean_field_potential(const Kernel& u,
                                                const std::vector<double>& density) {
  const GridSpec& g = u.grid;
  if (static_cast<std::int64_t>(density.size()) != g.sites())
    throw std::invalid_argument("convolution: density size does not match grid");
  for (double rho : density)
    if (rho < -1e-12) throw std::invalid_argument("convolution: negative density");

  std::vector<cx> uf(u.values.begin(), u.values.end());
  std::vector<cx> rf(density.begin(), density.end());
  fft_forward(g, uf);
  fft_forward(g, rf);
  for (std::int64_t i = 0; i < g.sites(); ++i) uf[i] *= rf[i];
  fft_inverse(g, uf);

  const double w = g.cell_volume();
  std::vector<double> out(g.sites());
  double max_abs = 0.0, max_imag = 0.0;
  for (std::int64_t i = 0; i < g.sites(); ++i) {
    out[i] = w * uf[i].real();
    max_abs = std::max(max_abs, std::abs(out[i]));
    max_imag = std::max(max_imag, std::abs(w * uf[i].imag()));
  }
  if (max_imag > 1e-12 * std::max(1.0, max_abs))
    throw std::runtime_error("convolution: unexpected imaginary residue");
  return out;
}

struct StabilityResult {
  bool pass = false;
  double margin = 0.0;
};

/// Strict stability condition on the negative parts of the couplings:
///   lambda11-, lambda22- < 4/pi  and
///   (lambda12-)^2 < (4/pi - lambda11-)(4/pi - lambda22-).
inline StabilityResult check_sr_stability(const CouplingMatrix& c) {
  const double bound = 4.0 / std::numbers::pi;
  const double l11 = negative_part(c.lambda11);
  const double l22 = negative_part(c.lambda22);
  const double l12 = negative_part(c.lambda12);
  const double g1 = bound - l11;
  const double g2 = bound - l22;
  const double det = g1 * g2 - l12 * l12;
  StabilityResult r;
  r.margin = std::min({g1, g2, det});
  r.pass = g1 > 0.0 && g2 > 0.0 && det > 0.0;
  return r;
}

/// Smallest eigenvalue of (pi/2) sqrt(-Laplacian) - u_eps/|lambda|,
/// a lattice diagnostic for the relativistic coercivity of the kernel.
/// lambda = 0 drops the kernel term entirely. Dense eigensolve up to
/// `dense_cap` sites; above that a Ritz estimate from `trials`
/// random-start Lanczos sweeps (requires trials > 0).
inline double kato_margin(const GridSpec& g, double lambda, double mu, double epsilon,
                          int trials = 4, std::int64_t dense_cap = 4096) {
  g.validate();
  const std::int64_t n = g.sites();
  const Kernel u = build_kernel(g, lambda == 0.0 ? 0.0 : 1.0, mu, epsilon);

  // |k| multiplier values in fft index order.
  std::vector<double> kabs(n);
  {
    std::array<int, 3> j{0, 0, 0};
    for (std::int64_t idx = 0; idx < n; ++idx) {
      double k2 = 0.0;
      for (int a = 0; a < g.d; ++a) {
        const double k = g.momentum(j[a]);
        k2 += k * k;
      }
      kabs[idx] = std::sqrt(k2);
      for (int a = g.d - 1; a >= 0; --a) {
        if (++j[a] < g.m) break;
        j[a] = 0;
      }
    }
  }

  const double half_pi = 0.5 * std::numbers::pi;
  auto apply_op = [&](const std::vector<cx>& x, std::vector<cx>& y) {
    y = x;
    fft_forward(g, y);
    for (std::int64_t i = 0; i < n; ++i) y[i] *= half_pi * kabs[i];
    fft_inverse(g, y);
    for (std::int64_t i = 0; i < n; ++i) y[i] -= u.values[i] * x[i];
  };

  if (n <= dense_cap) {
    Eigen::MatrixXcd mat(n, n);
    std::vector<cx> e(n, cx{0.0, 0.0}), col(n);
    for (std::int64_t jcol = 0; jcol < n; ++jcol) {
      e[jcol] = 1.0;
      apply_op(e, col);
      e[jcol] = 0.0;
      for (std::int64_t i = 0; i < n; ++i) mat(i, jcol) = col[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(mat, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }

  if (trials <= 0)
    throw std::invalid_argument("kato margin: grid exceeds dense assembly cap");

  // Ritz estimate of the smallest eigenvalue.
  double best = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(0x6b61746fULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int steps = 60;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<std::vector<cx>> basis;
    std::vector<double> alpha, beta;
    std::vector<cx> v(n), w(n);
    for (auto& z : v) z = cx{gauss(rng), gauss(rng)};
    double b0 = 0.0;
    for (const auto& z : v) b0 += std::norm(z);
    b0 = std::sqrt(b0);
    for (auto& z : v) z /= b0;
    basis.push_back(v);
    for (int mstep = 0; mstep < steps && mstep < n; ++mstep) {
      apply_op(basis[mstep], w);
      cx a{0.0, 0.0};
      for (std::int64_t i = 0; i < n; ++i) a += std::conj(basis[mstep][i]) * w[i];
      alpha.push_back(a.real());
      for (std::int64_t i = 0; i < n; ++i) w[i] -= a.real() * basis[mstep][i];
      if (mstep > 0)
        for (std::int64_t i = 0; i < n; ++i) w[i] -= beta[mstep - 1] * basis[mstep - 1][i];
      for (const auto& q : basis) {
        cx c{0.0, 0.0};
        for (std::int64_t i = 0; i < n; ++i) c += std::conj(q[i]) * w[i];
        for (std::int64_t i = 0; i < n; ++i) w[i] -= c * q[i];
      }
      double b = 0.0;
      for (const auto& z : w) b += std::norm(z);
      b = std::sqrt(b);
      if (b < 1e-13) break;
      beta.push_back(b);
      basis.push_back(w);
      for (auto& z : basis.back()) z /= b;
    }
    const int msize = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(msize, msize);
    for (int i = 0; i < msize; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < msize) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues()(0));
  }
  return best;
}

}  // namespace bmix
