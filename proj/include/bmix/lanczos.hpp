#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bmix {

using cx = std::complex<double>;

struct LanczosOptions {
  int max_dim = 20;
  double tol = 1e-10;
};

struct LanczosFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Approximates exp(-i*dt*H)*v for a Hermitian operator given as a
/// matrix-free apply, using a Lanczos Krylov space with full
/// reorthogonalization. The inner product may carry a uniform quadrature
/// weight; it cancels in the recurrence, so plain l2 is used here.
/// Throws LanczosFailure if the a-posteriori residual estimate does not
/// reach `tol * ||v||` within `max_dim` vectors.
template <typename ApplyFn>
std::vector<cx> lanczos_expm(ApplyFn&& apply_h, const std::vector<cx>& v, double dt,
                             const LanczosOptions& opt = {}) {
  const std::int64_t n = static_cast<std::int64_t>(v.size());
  const int mmax = static_cast<int>(std::min<std::int64_t>(opt.max_dim, n));

  auto dot = [n](const std::vector<cx>& a, const std::vector<cx>& b) {
    cx s{0.0, 0.0};
    for (std::int64_t i = 0; i < n; ++i) s += std::conj(a[i]) * b[i];
    return s;
  };

  const double beta0 = std::sqrt(std::abs(dot(v, v)));
  if (beta0 == 0.0 || dt == 0.0) return v;

  std::vector<std::vector<cx>> basis;
  basis.reserve(mmax);
  basis.push_back(v);
  for (auto& z : basis[0]) z /= beta0;

  std::vector<double> alpha, beta;
  std::vector<cx> w(n);

  auto small_exp = [&](int m, Eigen::VectorXcd& y) {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    Eigen::VectorXcd phases(m);
    for (int i = 0; i < m; ++i)
      phases(i) = std::polar(1.0, -dt * es.eigenvalues()(i));
    const Eigen::VectorXd first = es.eigenvectors().row(0).transpose();
    y = es.eigenvectors() * (phases.array() * first.array().cast<cx>()).matrix();
  };

  Eigen::VectorXcd y;
  int m = 0;
  bool converged = false;
  while (m < mmax) {
    apply_h(basis[m], w);
    const double a = dot(basis[m], w).real();
    alpha.push_back(a);
    for (std::int64_t i = 0; i < n; ++i) w[i] -= a * basis[m][i];
    if (m > 0)
      for (std::int64_t i = 0; i < n; ++i) w[i] -= beta[m - 1] * basis[m - 1][i];
    // Full reorthogonalization keeps the basis numerically orthonormal.
    for (int k = 0; k <= m; ++k) {
      const cx c = dot(basis[k], w);
      for (std::int64_t i = 0; i < n; ++i) w[i] -= c * basis[k][i];
    }
    const double b = std::sqrt(std::abs(dot(w, w)));
    ++m;

    small_exp(m, y);
    const double resid = b * std::abs(y(m - 1));
    if (resid <= opt.tol || b < 1e-13) {
      converged = true;
      break;
    }
    if (m == mmax) break;
    beta.push_back(b);
    basis.push_back(w);
    for (auto& z : basis[m]) z /= b;
  }

  if (!converged)
    throw LanczosFailure("lanczos: no convergence at Krylov dimension " +
                         std::to_string(mmax));

  std::vector<cx> out(n, cx{0.0, 0.0});
  for (int k = 0; k < m; ++k) {
    const cx c = beta0 * y(k);
    const auto& vk = basis[k];
    for (std::int64_t i = 0; i < n; ++i) out[i] += c * vk[i];
  }
  return out;
}

}  // namespace bmix
