#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bmix/field.hpp"
#include "bmix/grid.hpp"
#include "bmix/interaction.hpp"
#include "bmix/io.hpp"
#include "bmix/kinetic.hpp"
#include "bmix/lanczos.hpp"
#include "bmix/meanfield.hpp"

namespace bmix {

inline constexpr std::int64_t kDefaultStateCap = std::int64_t{1} << 25;

struct StateCapExceeded : std::length_error {
  using std::length_error::length_error;
};

/// Full N-body wavefunction on grid^(N1+N2). Index order: species-1
/// coordinates first, then species-2, row-major over single-particle site
/// indices. Norm convention h^(d*(N1+N2)) * sum |.|^2.
struct ManyBodyState {
  MixtureSize mixture;
  GridSpec grid;
  std::vector<cx> values;
  double t = 0.0;

  std::int64_t dim() const { return static_cast<std::int64_t>(values.size()); }

  /// Stride of the given slot in the flat amplitude index.
  std::int64_t slot_stride(int slot) const {
    std::int64_t s = 1;
    const std::int64_t n = grid.sites();
    for (int a = mixture.slots() - 1; a > slot; --a) s *= n;
    return s;
  }
};

/// n^(N1+N2), or -1 when the product overflows.
inline std::int64_t state_dimension(const GridSpec& g, const MixtureSize& mix) {
  const std::int64_t n = g.sites();
  std::int64_t dim = 1;
  for (int s = 0; s < mix.slots(); ++s) {
    if (dim > std::numeric_limits<std::int64_t>::max() / n) return -1;
    dim *= n;
  }
  return dim;
}

inline void require_within_cap(const GridSpec& g, const MixtureSize& mix,
                               std::int64_t cap = kDefaultStateCap) {
  const std::int64_t dim = state_dimension(g, mix);
  if (dim < 0 || dim > cap)
    throw StateCapExceeded("many-body state of " + std::to_string(mix.slots()) +
                           " slots exceeds the amplitude cap");
}

inline double mb_weight(const ManyBodyState& s) {
  return std::pow(s.grid.cell_volume(), s.mixture.slots());
}

inline cx mb_inner(const ManyBodyState& a, const ManyBodyState& b) {
  require_same_grid(a.grid, b.grid);
  if (a.dim() != b.dim()) throw std::invalid_argument("many-body: dimension mismatch");
  cx s{0.0, 0.0};
  for (std::int64_t i = 0; i < a.dim(); ++i) s += std::conj(a.values[i]) * b.values[i];
  return s * mb_weight(a);
}

inline double mb_norm(const ManyBodyState& s) {
  double acc = 0.0;
  for (const auto& z : s.values) acc += std::norm(z);
  return std::sqrt(acc * mb_weight(s));
}

/// psi0^{(x) N1} (x) phi0^{(x) N2}, exactly symmetric by construction.
inline ManyBodyState product_state(const Field& psi0, const Field& phi0,
                                   const MixtureSize& mix,
                                   std::int64_t cap = kDefaultStateCap) {
  require_same_grid(psi0.grid, phi0.grid);
  mix.validate();
  require_within_cap(psi0.grid, mix, cap);

  ManyBodyState s;
  s.mixture = mix;
  s.grid = psi0.grid;
  s.values = {cx{1.0, 0.0}};
  // Build from the last slot outwards so slot 0 ends up outermost.
  for (int slot = mix.slots() - 1; slot >= 0; --slot) {
    const auto& orb = slot < mix.n1 ? psi0.values : phi0.values;
    std::vector<cx> next(orb.size() * s.values.size());
    std::int64_t k = 0;
    for (const auto& a : orb)
      for (const auto& b : s.values) next[k++] = a * b;
    s.values = std::move(next);
  }
  return s;
}

struct HamiltonianSpec {
  KineticSpec kinetic1, kinetic2;
  CouplingMatrix couplings;
  MixtureSize mixture;
};

/// Matrix-free mean-field-scaled Hamiltonian
///   H = sum_slots S_slot + sum_{i<j, same species} u_ss(x_i - x_j)/(N_s - 1)
///       + sum_{cross pairs} u_12(x_i - x_j)/sqrt(N1 N2),
/// with per-slot kinetics applied as dense single-particle matrices along
/// each tensor axis and the pair potentials folded into one diagonal.
class HamiltonianOperator {
 public:
  HamiltonianOperator(const GridSpec& g, const HamiltonianSpec& spec,
                      std::int64_t cap = kDefaultStateCap)
      : grid_(g), spec_(spec) {
    spec.mixture.validate();
    spec.couplings.validate();
    require_within_cap(g, spec.mixture, cap);
    const std::int64_t n = g.sites();
    k1_ = KineticOperator(g, spec.kinetic1).dense_matrix();
    k2_ = KineticOperator(g, spec.kinetic2).dense_matrix();

    // Flat index of the minimum-image difference of two sites.
    diff_.resize(n * n);
    for (std::int64_t a = 0; a < n; ++a) {
      const auto ja = g.axis_indices(a);
      for (std::int64_t b = 0; b < n; ++b) {
        const auto jb = g.axis_indices(b);
        std::array<int, 3> w{0, 0, 0};
        for (int ax = 0; ax < g.d; ++ax) w[ax] = (ja[ax] - jb[ax] + g.m) % g.m;
        diff_[a * n + b] = g.flat_index(w);
      }
    }
    build_diagonal();
  }

  const GridSpec& grid() const { return grid_; }
  const HamiltonianSpec& spec() const { return spec_; }
  const Eigen::MatrixXcd& kinetic_matrix(int species) const { return species == 1 ? k1_ : k2_; }
  std::int64_t apply_count() const { return applies_; }

  void apply(const std::vector<cx>& in, std::vector<cx>& out) const {
    const std::int64_t dim = static_cast<std::int64_t>(in.size());
    out.resize(dim);
    for (std::int64_t i = 0; i < dim; ++i) out[i] = diagonal_[i] * in[i];
    const std::int64_t n = grid_.sites();
    const int slots = spec_.mixture.slots();
    std::int64_t stride = dim / n;
    for (int slot = 0; slot < slots; ++slot) {
      const Eigen::MatrixXcd& k = slot < spec_.mixture.n1 ? k1_ : k2_;
      const std::int64_t block = stride * n;
      for (std::int64_t base = 0; base < dim; base += block) {
        using RowMat = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        Eigen::Map<const RowMat> src(in.data() + base, n, stride);
        Eigen::Map<RowMat> dst(out.data() + base, n, stride);
        dst.noalias() += k * src;
      }
      stride /= n;
    }
    ++applies_;
  }

  ManyBodyState apply(const ManyBodyState& s) const {
    require_same_grid(grid_, s.grid);
    if (s.mixture.n1 != spec_.mixture.n1 || s.mixture.n2 != spec_.mixture.n2)
      throw std::invalid_argument("hamiltonian: mixture mismatch");
    ManyBodyState out = s;
    apply(s.values, out.values);
    return out;
  }

  double energy(const ManyBodyState& s) const { return mb_inner(s, apply(s)).real(); }

  /// One Lanczos exp(-i H dt) step per `steps`.
  ManyBodyState propagate(const ManyBodyState& s, double dt, int steps,
                          const LanczosOptions& opt = {60, 1e-11}) const {
    ManyBodyState out = s;
    for (int i = 0; i < steps; ++i) {
      out.values = lanczos_expm(
          [this](const std::vector<cx>& x, std::vector<cx>& y) { apply(x, y); },
          out.values, dt, opt);
      out.t += dt;
    }
    return out;
  }

  /// Dense assembly for oracle-size systems.
  Eigen::MatrixXcd dense_matrix(std::int64_t dense_cap = 4096) const {
    const std::int64_t dim = state_dimension(grid_, spec_.mixture);
    if (dim > dense_cap)
      throw StateCapExceeded("hamiltonian: dense assembly above the cap");
    Eigen::MatrixXcd h(dim, dim);
    std::vector<cx> e(dim, cx{0.0, 0.0}), col(dim);
    for (std::int64_t j = 0; j < dim; ++j) {
      e[j] = 1.0;
      apply(e, col);
      e[j] = 0.0;
      for (std::int64_t i = 0; i < dim; ++i) h(i, j) = col[i];
    }
    return h;
  }

 private:
  void build_diagonal() {
    const std::int64_t n = grid_.sites();
    const int slots = spec_.mixture.slots();
    const int n1 = static_cast<int>(spec_.mixture.n1);
    const auto& c = spec_.couplings;
    const Kernel u11 = build_kernel(grid_, c.lambda11, c.mu11, c.epsilon);
    const Kernel u22 = build_kernel(grid_, c.lambda22, c.mu22, c.epsilon);
    const Kernel u12 = build_kernel(grid_, c.lambda12, c.mu12, c.epsilon);
    const double c11 = spec_.mixture.n1 > 1 ? 1.0 / (spec_.mixture.n1 - 1) : 0.0;
    const double c22 = spec_.mixture.n2 > 1 ? 1.0 / (spec_.mixture.n2 - 1) : 0.0;
    const double c12 = 1.0 / spec_.mixture.mean();

    const std::int64_t dim = state_dimension(grid_, spec_.mixture);
    diagonal_.assign(dim, 0.0);
    std::vector<int> site(slots, 0);
    for (std::int64_t idx = 0; idx < dim; ++idx) {
      double v = 0.0;
      for (int a = 0; a < slots; ++a)
        for (int b = a + 1; b < slots; ++b) {
          const std::int64_t dif = diff_[site[a] * n + site[b]];
          if (a < n1 && b < n1)
            v += c11 * u11.values[dif];
          else if (a >= n1 && b >= n1)
            v += c22 * u22.values[dif];
          else
            v += c12 * u12.values[dif];
        }
      diagonal_[idx] = v;
      for (int s = slots - 1; s >= 0; --s) {
        if (++site[s] < n) break;
        site[s] = 0;
      }
    }
  }

  GridSpec grid_;
  HamiltonianSpec spec_;
  Eigen::MatrixXcd k1_, k2_;
  std::vector<std::int64_t> diff_;
  std::vector<double> diagonal_;
  mutable std::int64_t applies_ = 0;
};

inline ManyBodyState apply_hamiltonian(const HamiltonianOperator& h, const ManyBodyState& s) {
  return h.apply(s);
}

/// Applies a dense single-particle operator to one tensor slot.
inline ManyBodyState apply_slot_operator(const ManyBodyState& s, int slot,
                                         const Eigen::MatrixXcd& op) {
  const std::int64_t n = s.grid.sites();
  if (op.rows() != n || op.cols() != n)
    throw std::invalid_argument("slot operator: size does not match grid");
  if (slot < 0 || slot >= s.mixture.slots())
    throw std::invalid_argument("slot operator: slot out of range");
  ManyBodyState out = s;
  const std::int64_t stride = s.slot_stride(slot);
  const std::int64_t block = stride * n;
  using RowMat = Eigen::Matrix<cx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  for (std::int64_t base = 0; base < s.dim(); base += block) {
    Eigen::Map<const RowMat> src(s.values.data() + base, n, stride);
    Eigen::Map<RowMat> dst(out.values.data() + base, n, stride);
    dst.noalias() = op * src;
  }
  return out;
}

/// <Psi, O_slot Psi> for a dense single-particle operator.
inline cx slot_expectation(const ManyBodyState& s, int slot, const Eigen::MatrixXcd& op) {
  return mb_inner(s, apply_slot_operator(s, slot, op));
}

/// <Psi, u(x_a - x_b) Psi> for a pair-diagonal kernel.
inline double pair_expectation(const ManyBodyState& s, int slot_a, int slot_b,
                               const Kernel& u) {
  require_same_grid(s.grid, u.grid);
  const std::int64_t n = s.grid.sites();
  const GridSpec& g = s.grid;
  const std::int64_t sa = s.slot_stride(slot_a);
  const std::int64_t sb = s.slot_stride(slot_b);
  double acc = 0.0;
  for (std::int64_t idx = 0; idx < s.dim(); ++idx) {
    const int ja = static_cast<int>((idx / sa) % n);
    const int jb = static_cast<int>((idx / sb) % n);
    const auto aa = g.axis_indices(ja);
    const auto bb = g.axis_indices(jb);
    std::array<int, 3> w{0, 0, 0};
    for (int ax = 0; ax < g.d; ++ax) w[ax] = (aa[ax] - bb[ax] + g.m) % g.m;
    acc += u.values[g.flat_index(w)] * std::norm(s.values[idx]);
  }
  return acc * mb_weight(s);
}

/// Max over within-species transpositions of ||s - s o tau||; zero for
/// states with the right exchange symmetry.
inline double symmetry_defect(const ManyBodyState& s) {
  const std::int64_t n = s.grid.sites();
  const int slots = s.mixture.slots();
  const int n1 = static_cast<int>(s.mixture.n1);
  double worst = 0.0;
  auto check_pair = [&](int a, int b) {
    const std::int64_t sa = s.slot_stride(a);
    const std::int64_t sb = s.slot_stride(b);
    double acc = 0.0;
    for (std::int64_t idx = 0; idx < s.dim(); ++idx) {
      const std::int64_t ja = (idx / sa) % n;
      const std::int64_t jb = (idx / sb) % n;
      const std::int64_t swapped = idx + (jb - ja) * sa + (ja - jb) * sb;
      acc += std::norm(s.values[idx] - s.values[swapped]);
    }
    worst = std::max(worst, std::sqrt(acc * mb_weight(s)));
  };
  for (int a = 0; a + 1 < n1; ++a) check_pair(a, a + 1);
  for (int a = n1; a + 1 < slots; ++a) check_pair(a, a + 1);
  return worst;
}

/// Many-body checkpoints: the field format with the header extended by
/// (N1, N2); amplitude order as documented on ManyBodyState.
inline void write_manybody(const std::string& path, const ManyBodyState& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  detail::write_header(os, kManyBodyVersion, s.grid);
  detail::put_f64(os, static_cast<double>(s.mixture.n1));
  detail::put_f64(os, static_cast<double>(s.mixture.n2));
  detail::write_amplitudes(os, s.values);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline ManyBodyState read_manybody(const std::string& path,
                                   std::int64_t cap = kDefaultStateCap) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  GridSpec g;
  const auto version = detail::read_header(is, g);
  if (version != kManyBodyVersion)
    throw std::runtime_error("many-body file: unexpected version");
  ManyBodyState s;
  s.grid = g;
  s.mixture.n1 = static_cast<std::int64_t>(detail::get_f64(is));
  s.mixture.n2 = static_cast<std::int64_t>(detail::get_f64(is));
  s.mixture.validate();
  require_within_cap(g, s.mixture, cap);
  s.values.assign(state_dimension(g, s.mixture), cx{});
  detail::read_amplitudes(is, s.values);
  return s;
}

}  // namespace bmix
