#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "bmix/fft.hpp"
#include "bmix/field.hpp"
#include "bmix/grid.hpp"
#include "bmix/lanczos.hpp"

namespace bmix {

enum class KineticKind {
  MagneticNonrelativistic,  // D_A^2 / (2m), Peierls links when A != 0
  Semirelativistic,         // sqrt(m^2 - Laplacian), Fourier multiplier
};

/// Vector potential sampled at box points; returns the first d components.
using VectorSampler = std::function<std::array<double, 3>(const std::array<double, 3>&)>;

struct KineticSpec {
  KineticKind kind = KineticKind::MagneticNonrelativistic;
  double mass = 1.0;
  VectorSampler vector_potential;  // magnetic kind only; empty means A = 0

  bool fourier_diagonal() const {
    return kind == KineticKind::Semirelativistic || !vector_potential;
  }

  void validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("kinetic: mass must be positive");
    if (kind == KineticKind::Semirelativistic && vector_potential)
      throw std::invalid_argument("kinetic: semirelativistic kind takes no vector potential");
  }

  /// Symbol at momentum k for the Fourier-diagonal kinds.
  double symbol(double k2) const {
    return kind == KineticKind::Semirelativistic ? std::sqrt(mass * mass + k2)
                                                 : k2 / (2.0 * mass);
  }
};

/// Vector potential on lattice links: link[a][j] is the a-component of A
/// at the midpoint between site j and its +a neighbour.
struct GaugeLinks {
  GridSpec grid;
  std::array<std::vector<double>, 3> link;

  explicit GaugeLinks(const GridSpec& g) : grid(g) {
    for (int a = 0; a < g.d; ++a) link[a].assign(g.sites(), 0.0);
  }
};

inline GaugeLinks sample_links(const GridSpec& g, const VectorSampler& sampler) {
  GaugeLinks links(g);
  if (!sampler) return links;
  const double h = g.spacing();
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    auto x = g.site(idx);
    for (int a = 0; a < g.d; ++a) {
      auto mid = x;
      mid[a] += 0.5 * h;
      const auto av = sampler(mid);
      if (!std::isfinite(av[a]))
        throw std::invalid_argument("kinetic: non-finite vector potential on a link");
      links.link[a][idx] = av[a];
    }
  }
  return links;
}

namespace detail {

inline std::int64_t axis_stride(const GridSpec& g, int axis) {
  std::int64_t s = 1;
  for (int a = g.d - 1; a > axis; --a) s *= g.m;
  return s;
}

/// y = D_A^2 x with Peierls link phases, not yet divided by 2m.
inline void apply_peierls_raw(const GridSpec& g, const GaugeLinks& links,
                              const std::vector<cx>& x, std::vector<cx>& y) {
  const double h = g.spacing();
  const double inv_h2 = 1.0 / (h * h);
  const std::int64_t n = g.sites();
  y.assign(n, cx{0.0, 0.0});
  for (int axis = 0; axis < g.d; ++axis) {
    const std::int64_t stride = axis_stride(g, axis);
    const std::int64_t period = stride * g.m;
    const auto& a_link = links.link[axis];
    for (std::int64_t idx = 0; idx < n; ++idx) {
      const std::int64_t base = idx - (idx % period);
      const std::int64_t off = idx % period;
      const std::int64_t up = base + (off + stride) % period;
      const std::int64_t down = base + (off + period - stride) % period;
      const cx hop_up = std::polar(1.0, -h * a_link[idx]) * x[up];
      const cx hop_down = std::polar(1.0, h * a_link[down]) * x[down];
      y[idx] += inv_h2 * (2.0 * x[idx] - hop_up - hop_down);
    }
  }
}

inline void apply_multiplier(const GridSpec& g, const std::function<double(double)>& sigma,
                             std::vector<cx>& v) {
  fft_forward(g, v);
  std::array<int, 3> j{0, 0, 0};
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    double k2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      const double k = g.momentum(j[a]);
      k2 += k * k;
    }
    v[idx] *= sigma(k2);
    for (int a = g.d - 1; a >= 0; --a) {
      if (++j[a] < g.m) break;
      j[a] = 0;
    }
  }
  fft_inverse(g, v);
}

inline void apply_phase_multiplier(const GridSpec& g, const KineticSpec& spec, double dt,
                                   std::vector<cx>& v) {
  fft_forward(g, v);
  std::array<int, 3> j{0, 0, 0};
  for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
    double k2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
      const double k = g.momentum(j[a]);
      k2 += k * k;
    }
    v[idx] *= std::polar(1.0, -spec.symbol(k2) * dt);
    for (int a = g.d - 1; a >= 0; --a) {
      if (++j[a] < g.m) break;
      j[a] = 0;
    }
  }
  fft_inverse(g, v);
}

}  // namespace detail

/// Single-particle kinetic operator bound to a grid. Samples the vector
/// potential once; Fourier-diagonal kinds act as exact multipliers.
class KineticOperator {
 public:
  KineticOperator(const GridSpec& g, const KineticSpec& spec)
      : grid_(g), spec_(spec), links_(g) {
    g.validate();
    spec.validate();
    if (!spec.fourier_diagonal()) links_ = sample_links(g, spec.vector_potential);
  }

  KineticOperator(const GridSpec& g, const KineticSpec& spec, GaugeLinks links)
      : grid_(g), spec_(spec), links_(std::move(links)) {
    g.validate();
    if (spec_.kind == KineticKind::Semirelativistic)
      throw std::invalid_argument("kinetic: links require the magnetic kind");
    require_same_grid(g, links_.grid);
    has_links_ = true;
  }

  const GridSpec& grid() const { return grid_; }
  const KineticSpec& spec() const { return spec_; }
  const GaugeLinks& links() const { return links_; }

  bool fourier_diagonal() const { return spec_.fourier_diagonal() && !has_links_; }

  void apply(const std::vector<cx>& x, std::vector<cx>& y) const {
    if (fourier_diagonal()) {
      y = x;
      detail::apply_multiplier(grid_, [this](double k2) { return spec_.symbol(k2); }, y);
    } else {
      detail::apply_peierls_raw(grid_, links_, x, y);
      const double scale = 1.0 / (2.0 * spec_.mass);
      for (auto& z : y) z *= scale;
    }
  }

  Field apply(const Field& f) const {
    require_same_grid(grid_, f.grid);
    require_finite(f);
    Field out(grid_);
    apply(f.values, out.values);
    return out;
  }

  /// exp(-i * S * dt) f. Exact phase multiplier for diagonal kinds,
  /// Lanczos otherwise.
  Field propagate(double dt, const Field& f, const LanczosOptions& opt = {}) const {
    require_same_grid(grid_, f.grid);
    if (!std::isfinite(dt)) throw std::invalid_argument("kinetic: dt must be finite");
    Field out = f;
    if (dt == 0.0) return out;
    if (fourier_diagonal()) {
      detail::apply_phase_multiplier(grid_, spec_, dt, out.values);
      return out;
    }
    out.values = lanczos_expm(
        [this](const std::vector<cx>& x, std::vector<cx>& y) { apply(x, y); }, f.values,
        dt, opt);
    return out;
  }

  /// Dense matrix built column-by-column through the same apply path.
  Eigen::MatrixXcd dense_matrix() const {
    const std::int64_t n = grid_.sites();
    Eigen::MatrixXcd mat(n, n);
    std::vector<cx> e(n, cx{0.0, 0.0}), col(n);
    for (std::int64_t jcol = 0; jcol < n; ++jcol) {
      e[jcol] = 1.0;
      apply(e, col);
      e[jcol] = 0.0;
      for (std::int64_t i = 0; i < n; ++i) mat(i, jcol) = col[i];
    }
    return mat;
  }

 private:
  GridSpec grid_;
  KineticSpec spec_;
  GaugeLinks links_;
  bool has_links_ = false;
};

inline Field apply_kinetic(const KineticSpec& spec, const Field& f) {
  return KineticOperator(f.grid, spec).apply(f);
}

inline Field kinetic_propagator(const KineticSpec& spec, double dt, const Field& f,
                                const LanczosOptions& opt = {}) {
  return KineticOperator(f.grid, spec).propagate(dt, f, opt);
}

/// Multiplies f by exp(i*chi) and shifts the link potential by the
/// discrete gradient of chi; site densities are untouched.
inline std::pair<Field, GaugeLinks> gauge_transform(const Field& f, const GaugeLinks& links,
                                                    const std::vector<double>& chi) {
  require_same_grid(f.grid, links.grid);
  const GridSpec& g = f.grid;
  if (static_cast<std::int64_t>(chi.size()) != g.sites())
    throw std::invalid_argument("gauge: chi size does not match grid");

  Field fz(g);
  for (std::int64_t i = 0; i < g.sites(); ++i)
    fz.values[i] = std::polar(1.0, chi[i]) * f.values[i];

  GaugeLinks out(g);
  const double h = g.spacing();
  for (int axis = 0; axis < g.d; ++axis) {
    const std::int64_t stride = detail::axis_stride(g, axis);
    const std::int64_t period = stride * g.m;
    for (std::int64_t idx = 0; idx < g.sites(); ++idx) {
      const std::int64_t base = idx - (idx % period);
      const std::int64_t up = base + (idx % period + stride) % period;
      out.link[axis][idx] = links.link[axis][idx] + (chi[up] - chi[idx]) / h;
    }
  }
  return {std::move(fz), std::move(out)};
}

}  // namespace bmix
