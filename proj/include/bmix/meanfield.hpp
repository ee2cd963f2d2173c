#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "bmix/field.hpp"
#include "bmix/interaction.hpp"
#include "bmix/kinetic.hpp"

namespace bmix {

/// Particle numbers of the two species under the fixed-ratio scaling:
/// R = sqrt(N1/N2), m = sqrt(N1*N2).
struct MixtureSize {
  std::int64_t n1 = 1;
  std::int64_t n2 = 1;

  void validate() const {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("mixture: particle numbers must be >= 1");
  }

  double ratio() const { return std::sqrt(static_cast<double>(n1) / static_cast<double>(n2)); }
  double mean() const { return std::sqrt(static_cast<double>(n1) * static_cast<double>(n2)); }
  int slots() const { return static_cast<int>(n1 + n2); }
};

/// Exact rational check that two pairs share the same R^2 = N1/N2.
inline bool same_ratio(const MixtureSize& a, const MixtureSize& b) {
  return a.n1 * b.n2 == b.n1 * a.n2;
}

struct HartreeState {
  Field psi;
  Field phi;
  double t = 0.0;
};

struct EnergyReport {
  double kinetic1 = 0.0, kinetic2 = 0.0;
  double pot11 = 0.0, pot22 = 0.0, pot12 = 0.0;
  double e_total = 0.0;         // weighted conserved functional
  double hN_per_particle = 0.0; // many-body functional on the product ansatz, / N2
};

struct PicardFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PicardResult {
  HartreeState state;
  std::vector<double> residuals;
};

/// The coupled two-orbital mean-field system at fixed ratio R:
///   i d/dt psi = S1 psi + (u11*|psi|^2) psi + (1/R)(u12*|phi|^2) psi
///   i d/dt phi = S2 phi + (u22*|phi|^2) phi +   R  (u12*|psi|^2) phi
class HartreeSystem {
 public:
  HartreeSystem(const GridSpec& g, const KineticSpec& k1, const KineticSpec& k2,
                const CouplingMatrix& c, double ratio)
      : grid_(g),
        kin1_(g, k1),
        kin2_(g, k2),
        couplings_(c),
        ratio_(ratio),
        u11_(build_kernel(g, c.lambda11, c.mu11, c.epsilon)),
        u22_(build_kernel(g, c.lambda22, c.mu22, c.epsilon)),
        u12_(build_kernel(g, c.lambda12, c.mu12, c.epsilon)) {
    c.validate();
    if (!(ratio > 0.0)) throw std::invalid_argument("hartree: ratio must be positive");
  }

  const GridSpec& grid() const { return grid_; }
  const KineticOperator& kinetic1() const { return kin1_; }
  const KineticOperator& kinetic2() const { return kin2_; }
  const CouplingMatrix& couplings() const { return couplings_; }
  double ratio() const { return ratio_; }
  const Kernel& kernel11() const { return u11_; }
  const Kernel& kernel22() const { return u22_; }
  const Kernel& kernel12() const { return u12_; }

  /// Mean-field potentials (f, g) for the two orbitals at the given state.
  std::pair<std::vector<double>, std::vector<double>> potentials(const HartreeState& s) const {
    const auto rho1 = density(s.psi);
    const auto rho2 = density(s.phi);
    auto f = mean_field_potential(u11_, rho1);
    const auto f12 = mean_field_potential(u12_, rho2);
    auto g = mean_field_potential(u22_, rho2);
    const auto g12 = mean_field_potential(u12_, rho1);
    for (std::int64_t i = 0; i < grid_.sites(); ++i) {
      f[i] += f12[i] / ratio_;
      g[i] += ratio_ * g12[i];
    }
    return {std::move(f), std::move(g)};
  }

  std::pair<Field, Field> rhs(const HartreeState& s) const {
    require_same_grid(grid_, s.psi.grid);
    require_same_grid(grid_, s.phi.grid);
    auto [f, g] = potentials(s);
    Field dpsi = kin1_.apply(s.psi);
    Field dphi = kin2_.apply(s.phi);
    for (std::int64_t i = 0; i < grid_.sites(); ++i) {
      dpsi.values[i] = cx{0.0, -1.0} * (dpsi.values[i] + f[i] * s.psi.values[i]);
      dphi.values[i] = cx{0.0, -1.0} * (dphi.values[i] + g[i] * s.phi.values[i]);
    }
    return {std::move(dpsi), std::move(dphi)};
  }

  /// Strang step: kinetic half step, exact phase step with the densities
  /// frozen at the midpoint (they are invariant under the phase flow),
  /// kinetic half step.
  HartreeState strang_step(const HartreeState& s, double dt,
                           const LanczosOptions& opt = {}) const {
    if (!(dt > 0.0)) throw std::invalid_argument("strang: dt must be positive");
    HartreeState out;
    out.psi = kin1_.propagate(0.5 * dt, s.psi, opt);
    out.phi = kin2_.propagate(0.5 * dt, s.phi, opt);
    const auto [f, g] = potentials(out);
    for (std::int64_t i = 0; i < grid_.sites(); ++i) {
      out.psi.values[i] *= std::polar(1.0, -f[i] * dt);
      out.phi.values[i] *= std::polar(1.0, -g[i] * dt);
    }
    out.psi = kin1_.propagate(0.5 * dt, out.psi, opt);
    out.phi = kin2_.propagate(0.5 * dt, out.phi, opt);
    out.t = s.t + dt;
    return out;
  }

  HartreeState evolve_strang(HartreeState s, double total_time, double dt,
                             const LanczosOptions& opt = {}) const {
    const auto steps = static_cast<std::int64_t>(std::llround(total_time / dt));
    for (std::int64_t i = 0; i < steps; ++i) s = strang_step(s, dt, opt);
    return s;
  }

  /// Fixed-point iteration of the Duhamel map on one interval [t, t+horizon]
  /// with composite-trapezoid quadrature on n_quad subintervals. Converges
  /// only while the interval is inside the contraction regime; divergence is
  /// reported, not assumed away.
  PicardResult picard_solve(const HartreeState& s0, double horizon, int n_iter, int n_quad,
                            double fp_tol = 1e-8, const LanczosOptions& opt = {}) const {
    if (!(horizon > 0.0)) throw std::invalid_argument("picard: horizon must be positive");
    if (n_quad < 1 || n_iter < 1) throw std::invalid_argument("picard: bad iteration counts");
    const double step = horizon / n_quad;
    const int nodes = n_quad + 1;

    // Free trajectory e^{-i S s_i} applied to the initial data.
    std::vector<Field> free1(nodes), free2(nodes);
    free1[0] = s0.psi;
    free2[0] = s0.phi;
    for (int i = 1; i < nodes; ++i) {
      free1[i] = kin1_.propagate(step, free1[i - 1], opt);
      free2[i] = kin2_.propagate(step, free2[i - 1], opt);
    }

    std::vector<Field> psi = free1, phi = free2;
    std::vector<double> residuals;
    for (int it = 0; it < n_iter; ++it) {
      // Nonlinear integrand at each node of the current iterate.
      std::vector<Field> gp(nodes, Field(grid_)), gq(nodes, Field(grid_));
      for (int i = 0; i < nodes; ++i) {
        const auto [f, g] = potentials(HartreeState{psi[i], phi[i], 0.0});
        for (std::int64_t j = 0; j < grid_.sites(); ++j) {
          gp[i].values[j] = f[j] * psi[i].values[j];
          gq[i].values[j] = g[j] * phi[i].values[j];
        }
      }
      // Running trapezoid integral: I_i = e^{-iS step}(I_{i-1} + step/2 G_{i-1})
      // + step/2 G_i, with I_i carried forward in full.
      Field ip(grid_), iq(grid_);
      double resid = 0.0;
      for (int i = 1; i < nodes; ++i) {
        for (std::int64_t j = 0; j < grid_.sites(); ++j) {
          ip.values[j] += 0.5 * step * gp[i - 1].values[j];
          iq.values[j] += 0.5 * step * gq[i - 1].values[j];
        }
        ip = kin1_.propagate(step, ip, opt);
        iq = kin2_.propagate(step, iq, opt);
        for (std::int64_t j = 0; j < grid_.sites(); ++j) {
          ip.values[j] += 0.5 * step * gp[i].values[j];
          iq.values[j] += 0.5 * step * gq[i].values[j];
        }
        Field np = free1[i], nq = free2[i];
        for (std::int64_t j = 0; j < grid_.sites(); ++j) {
          np.values[j] -= cx{0.0, 1.0} * ip.values[j];
          nq.values[j] -= cx{0.0, 1.0} * iq.values[j];
        }
        resid = std::max(resid, norm(np - psi[i]) + norm(nq - phi[i]));
        psi[i] = std::move(np);
        phi[i] = std::move(nq);
      }
      residuals.push_back(resid);
      if (resid < fp_tol)
        return {HartreeState{psi[nodes - 1], phi[nodes - 1], s0.t + horizon}, residuals};
    }
    throw PicardFailure("picard: no contraction after " + std::to_string(n_iter) +
                        " iterations, residual " + std::to_string(residuals.back()));
  }

  /// Chains picard_solve over consecutive windows to cover horizons beyond
  /// the single-interval contraction regime.
  HartreeState picard_evolve(HartreeState s, double total_time, int windows, int n_iter,
                             int n_quad_per_window, double fp_tol = 1e-8,
                             const LanczosOptions& opt = {}) const {
    const double w = total_time / windows;
    for (int i = 0; i < windows; ++i)
      s = picard_solve(s, w, n_iter, n_quad_per_window, fp_tol, opt).state;
    return s;
  }

  /// All energy terms. e_total is the conserved weighted functional
  ///   R (kin1 + pot11/2) + (1/R) (kin2 + pot22/2) + pot12,
  /// hN_per_particle the per-particle many-body functional on the product
  /// ansatz (intraspecies terms empty when N_i = 1).
  EnergyReport energy_report(const HartreeState& s, const MixtureSize& mix) const {
    EnergyReport r;
    r.kinetic1 = inner(s.psi, kin1_.apply(s.psi)).real();
    r.kinetic2 = inner(s.phi, kin2_.apply(s.phi)).real();
    const auto rho1 = density(s.psi);
    const auto rho2 = density(s.phi);
    const double w = grid_.cell_volume();
    const auto v11 = mean_field_potential(u11_, rho1);
    const auto v22 = mean_field_potential(u22_, rho2);
    const auto v12 = mean_field_potential(u12_, rho2);
    for (std::int64_t i = 0; i < grid_.sites(); ++i) {
      r.pot11 += w * v11[i] * rho1[i];
      r.pot22 += w * v22[i] * rho2[i];
      r.pot12 += w * v12[i] * rho1[i];
    }
    r.e_total = ratio_ * (r.kinetic1 + 0.5 * r.pot11) +
                (r.kinetic2 + 0.5 * r.pot22) / ratio_ + r.pot12;
    const auto n1 = static_cast<double>(mix.n1);
    const auto n2 = static_cast<double>(mix.n2);
    const double hn = n1 * r.kinetic1 + n2 * r.kinetic2 +
                      (mix.n1 > 1 ? 0.5 * n1 * r.pot11 : 0.0) +
                      (mix.n2 > 1 ? 0.5 * n2 * r.pot22 : 0.0) + mix.mean() * r.pot12;
    r.hN_per_particle = hn / n2;
    return r;
  }

 private:
  GridSpec grid_;
  KineticOperator kin1_, kin2_;
  CouplingMatrix couplings_;
  double ratio_;
  Kernel u11_, u22_, u12_;
};

/// || grad f ||, via the |k| Fourier multiplier.
inline double gradient_norm(const Field& f) {
  std::vector<cx> v = f.values;
  fft_forward(f.grid, v);
  double s = 0.0;
  std::array<int, 3> j{0, 0, 0};
  for (std::int64_t idx = 0; idx < f.grid.sites(); ++idx) {
    double k2 = 0.0;
    for (int a = 0; a < f.grid.d; ++a) {
      const double k = f.grid.momentum(j[a]);
      k2 += k * k;
    }
    s += k2 * std::norm(v[idx]);
    for (int a = f.grid.d - 1; a >= 0; --a) {
      if (++j[a] < f.grid.m) break;
      j[a] = 0;
    }
  }
  return std::sqrt(s * f.grid.cell_volume() / static_cast<double>(f.grid.sites()));
}

/// sqrt(<f, D_A^2 f>) for a magnetic kinetic operator.
inline double covariant_gradient_norm(const KineticOperator& kin, const Field& f) {
  const double quad = inner(f, kin.apply(f)).real() * 2.0 * kin.spec().mass;
  return std::sqrt(std::max(0.0, quad));
}

/// Finite-difference sensitivity of the flow to the initial data:
/// ||delta psi_T|| / ||delta psi_0|| for a random normalized perturbation.
inline double sensitivity_estimate(const HartreeSystem& sys, const HartreeState& s0,
                                   double total_time, double dt, double delta,
                                   std::uint64_t seed = 12345) {
  HartreeState pert = s0;
  const auto dir = random_field(sys.grid(), seed);
  for (std::int64_t i = 0; i < sys.grid().sites(); ++i)
    pert.psi.values[i] += delta * dir.values[i];
  normalize(pert.psi);
  const double d0 = norm(pert.psi - s0.psi);
  const auto a = sys.evolve_strang(s0, total_time, dt);
  const auto b = sys.evolve_strang(pert, total_time, dt);
  return norm(a.psi - b.psi) / d0;
}

}  // namespace bmix
