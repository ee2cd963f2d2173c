#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <json.hpp>

#include "bmix/fock.hpp"
#include "bmix/kinetic.hpp"
#include "bmix/meanfield.hpp"

namespace bmix {

inline constexpr std::int64_t kDenseDiagnosticCap = 4096;

inline double trace_norm(const Eigen::MatrixXcd& m) {
  if (m.rows() <= 512)
    return Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues().sum();
  return Eigen::BDCSVD<Eigen::MatrixXcd>(m).singularValues().sum();
}

inline double hs_norm(const Eigen::MatrixXcd& m) { return m.norm(); }

enum class DensityRole { Reduced, Projector, Difference };

/// Operator on the kept (k,l) slots as a plain dense matrix; quadrature
/// weights are folded into the entries so that matrix trace, products and
/// singular values coincide with the operator ones.
struct ReducedDensity {
  int k = 0, l = 0;
  GridSpec grid;
  DensityRole role = DensityRole::Reduced;
  Eigen::MatrixXcd matrix;
};

inline ReducedDensity operator-(const ReducedDensity& a, const ReducedDensity& b) {
  if (a.k != b.k || a.l != b.l) throw std::invalid_argument("density: slot mismatch");
  require_same_grid(a.grid, b.grid);
  return {a.k, a.l, a.grid, DensityRole::Difference, a.matrix - b.matrix};
}

/// gamma^(k,l): keeps the first k species-1 slots and the last l species-2
/// slots, tracing everything else out.
inline ReducedDensity reduce(const ManyBodyState& s, int k, int l,
                             std::int64_t dense_cap = kDenseDiagnosticCap) {
  if (k < 0 || l < 0 || k + l == 0 || k > s.mixture.n1 || l > s.mixture.n2)
    throw std::invalid_argument("reduce: bad slot counts");
  const std::int64_t n = s.grid.sites();
  std::int64_t kept = 1;
  for (int i = 0; i < k + l; ++i) kept *= n;
  if (kept > dense_cap) throw StateCapExceeded("reduce: kept block above the dense cap");

  const int mid_slots = s.mixture.slots() - k - l;
  std::int64_t mid = 1, tail = 1;
  for (int i = 0; i < mid_slots; ++i) mid *= n;
  for (int i = 0; i < l; ++i) tail *= n;
  const std::int64_t lead = kept / tail;  // n^k

  Eigen::MatrixXcd gamma = Eigen::MatrixXcd::Zero(kept, kept);
  Eigen::VectorXcd z(kept);
  for (std::int64_t c = 0; c < mid; ++c) {
    for (std::int64_t a = 0; a < lead; ++a) {
      const std::int64_t base = (a * mid + c) * tail;
      for (std::int64_t e = 0; e < tail; ++e) z(a * tail + e) = s.values[base + e];
    }
    gamma.noalias() += z * z.adjoint();
  }
  gamma *= mb_weight(s);
  gamma = 0.5 * (gamma + gamma.adjoint()).eval();
  return {k, l, s.grid, DensityRole::Reduced, std::move(gamma)};
}

/// P^(k,l) = (|psi><psi|)^{x k} (x) (|phi><phi|)^{x l}, rank one.
inline ReducedDensity hartree_projector(const Field& psi, const Field& phi, int k, int l) {
  require_same_grid(psi.grid, phi.grid);
  if (k < 0 || l < 0 || k + l == 0) throw std::invalid_argument("projector: bad slot counts");
  Eigen::VectorXcd v(1);
  v(0) = cx{1.0, 0.0};
  const std::int64_t n = psi.grid.sites();
  // Built from the last slot outwards so the species-1 block is outermost.
  for (int s = k + l - 1; s >= 0; --s) {
    const auto& orb = s < k ? psi.values : phi.values;
    Eigen::VectorXcd next(v.size() * n);
    std::int64_t idx = 0;
    for (std::int64_t j = 0; j < n; ++j)
      for (Eigen::Index r = 0; r < v.size(); ++r) next(idx++) = orb[j] * v(r);
    v = std::move(next);
  }
  const double w = std::pow(psi.grid.cell_volume(), k + l);
  return {k, l, psi.grid, DensityRole::Projector, (v * v.adjoint() * w).eval()};
}

/// Pickl depletion functionals a1 = <Psi, q_{1,1} Psi>, a2 = <Psi, q_{1,2} Psi>
/// with q = 1 - |orbital><orbital| acting on the first slot of each species.
inline std::pair<double, double> pickl_a(const ManyBodyState& s, const Field& psi,
                                         const Field& phi) {
  require_same_grid(s.grid, psi.grid);
  const std::int64_t n = s.grid.sites();
  const double w = s.grid.cell_volume();
  auto projector = [&](const Field& orb) {
    Eigen::MatrixXcd p(n, n);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        p(i, j) = orb.values[i] * std::conj(orb.values[j]) * w;
    return p;
  };
  auto clamp01 = [](double x) {
    if (x < 0.0 && x > -1e-12) return 0.0;
    if (x > 1.0 && x < 1.0 + 1e-12) return 1.0;
    return x;
  };
  const double p1 = mb_inner(s, apply_slot_operator(s, 0, projector(psi))).real();
  const double p2 =
      mb_inner(s, apply_slot_operator(s, static_cast<int>(s.mixture.n1), projector(phi))).real();
  return {clamp01(1.0 - p1), clamp01(1.0 - p2)};
}

/// Sobolev weight S_{k,l,theta} = sum_i (1 + S_i)^theta, held as the
/// single-particle kinetic spectra and eigenbases of the two species.
struct SobolevWeight {
  double theta = 0.0;
  int k = 0, l = 0;
  Eigen::VectorXd evals1, evals2;
  Eigen::MatrixXcd basis1, basis2;
};

inline SobolevWeight make_sobolev_weight(const KineticOperator& kin1,
                                         const KineticOperator& kin2, int k, int l,
                                         double theta) {
  if (theta < 0.0 || theta > 1.0) throw std::invalid_argument("weight: theta must be in [0,1]");
  SobolevWeight w;
  w.theta = theta;
  w.k = k;
  w.l = l;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es1(kin1.dense_matrix());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es2(kin2.dense_matrix());
  w.evals1 = es1.eigenvalues().cwiseMax(0.0);
  w.evals2 = es2.eigenvalues().cwiseMax(0.0);
  w.basis1 = es1.eigenvectors();
  w.basis2 = es2.eigenvectors();
  return w;
}

namespace detail {

/// In-place congruence transform D -> (kron V)^H D (kron V) with per-slot
/// bases V, applied axis by axis.
inline void to_tensor_eigenbasis(Eigen::MatrixXcd& d,
                                 const std::vector<const Eigen::MatrixXcd*>& bases) {
  const std::int64_t dim = d.rows();
  if (bases.empty()) return;
  const std::int64_t n = bases[0]->rows();
  const int slots = static_cast<int>(bases.size());

  auto left_apply = [&](Eigen::MatrixXcd& m, bool adjoint) {
    std::int64_t stride = dim / n;
    Eigen::VectorXcd scratch(n);
    for (int s = 0; s < slots; ++s) {
      const Eigen::MatrixXcd v =
          adjoint ? bases[s]->adjoint() : Eigen::MatrixXcd(*bases[s]);
      const std::int64_t block = stride * n;
      for (Eigen::Index col = 0; col < m.cols(); ++col) {
        for (std::int64_t base = 0; base < dim; base += block) {
          for (std::int64_t off = 0; off < stride; ++off) {
            for (std::int64_t j = 0; j < n; ++j) scratch(j) = m(base + j * stride + off, col);
            const Eigen::VectorXcd out = v * scratch;
            for (std::int64_t j = 0; j < n; ++j) m(base + j * stride + off, col) = out(j);
          }
        }
      }
      stride /= n;
    }
  };

  left_apply(d, true);                        // (kron V)^H D
  d.adjointInPlace();                         // D^H kron V -> transform rows again
  left_apply(d, true);
  d.adjointInPlace();
}

/// Diagonal of S_{k,l,theta} in the tensor eigenbasis.
inline Eigen::VectorXd weight_diagonal(const SobolevWeight& w) {
  const std::int64_t n = w.evals1.size();
  std::int64_t dim = 1;
  for (int s = 0; s < w.k + w.l; ++s) dim *= n;
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(dim);
  std::vector<int> idx(w.k + w.l, 0);
  for (std::int64_t r = 0; r < dim; ++r) {
    double acc = 0.0;
    for (int s = 0; s < w.k + w.l; ++s) {
      const double lam = s < w.k ? w.evals1(idx[s]) : w.evals2(idx[s]);
      acc += std::pow(1.0 + lam, w.theta);
    }
    diag(r) = acc;
    for (int s = w.k + w.l - 1; s >= 0; --s) {
      if (++idx[s] < n) break;
      idx[s] = 0;
    }
  }
  return diag;
}

}  // namespace detail

struct WeightedNorms {
  double trace = 0.0;
  double hs = 0.0;
};

/// tr|S^{1/2} D S^{1/2}| and its Hilbert-Schmidt companion.
inline WeightedNorms weighted_norms(const ReducedDensity& diff, const SobolevWeight& w) {
  if (diff.k != w.k || diff.l != w.l) throw std::invalid_argument("weighted norms: slot mismatch");
  if (diff.matrix.rows() > kDenseDiagnosticCap)
    throw StateCapExceeded("weighted norms: matrix above the dense cap");
  Eigen::MatrixXcd d = diff.matrix;
  std::vector<const Eigen::MatrixXcd*> bases;
  for (int s = 0; s < w.k; ++s) bases.push_back(&w.basis1);
  for (int s = 0; s < w.l; ++s) bases.push_back(&w.basis2);
  detail::to_tensor_eigenbasis(d, bases);
  const Eigen::VectorXd diag = detail::weight_diagonal(w).cwiseSqrt();
  d = diag.asDiagonal() * d * diag.asDiagonal();
  return {trace_norm(d), hs_norm(d)};
}

/// Partial trace over the trailing factors; dims lists every factor size.
inline Eigen::MatrixXcd partial_trace_last(const Eigen::MatrixXcd& rho,
                                           const std::vector<std::int64_t>& dims,
                                           int q_keep) {
  std::int64_t total = 1;
  for (auto d : dims) total *= d;
  if (total != rho.rows() || total != rho.cols())
    throw std::invalid_argument("partial trace: inconsistent factorization of the dimension");
  if (q_keep <= 0 || q_keep > static_cast<int>(dims.size()))
    throw std::invalid_argument("partial trace: bad keep count");
  std::int64_t keep = 1, drop = 1;
  for (int i = 0; i < static_cast<int>(dims.size()); ++i)
    (i < q_keep ? keep : drop) *= dims[i];
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(keep, keep);
  for (std::int64_t i = 0; i < keep; ++i)
    for (std::int64_t j = 0; j < keep; ++j)
      for (std::int64_t c = 0; c < drop; ++c) out(i, j) += rho(i * drop + c, j * drop + c);
  return out;
}

/// Partial trace keeping an arbitrary slot subset of a uniform tensor grid.
inline Eigen::MatrixXcd partial_trace_slots(const Eigen::MatrixXcd& rho, std::int64_t n,
                                            int slots, const std::vector<int>& keep) {
  std::int64_t total = 1;
  for (int i = 0; i < slots; ++i) total *= n;
  if (total != rho.rows()) throw std::invalid_argument("partial trace: bad slot count");
  std::vector<int> traced;
  for (int s = 0; s < slots; ++s)
    if (std::find(keep.begin(), keep.end(), s) == keep.end()) traced.push_back(s);
  std::int64_t kd = 1, td = 1;
  for (std::size_t i = 0; i < keep.size(); ++i) kd *= n;
  for (std::size_t i = 0; i < traced.size(); ++i) td *= n;

  std::vector<std::int64_t> stride(slots, 1);
  for (int s = slots - 2; s >= 0; --s) stride[s] = stride[s + 1] * n;
  auto flat = [&](std::int64_t kept_idx, std::int64_t traced_idx) {
    std::int64_t idx = 0;
    for (int s = static_cast<int>(keep.size()) - 1; s >= 0; --s) {
      idx += (kept_idx % n) * stride[keep[s]];
      kept_idx /= n;
    }
    for (int s = static_cast<int>(traced.size()) - 1; s >= 0; --s) {
      idx += (traced_idx % n) * stride[traced[s]];
      traced_idx /= n;
    }
    return idx;
  };

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(kd, kd);
  for (std::int64_t i = 0; i < kd; ++i)
    for (std::int64_t j = 0; j < kd; ++j)
      for (std::int64_t c = 0; c < td; ++c) out(i, j) += rho(flat(i, c), flat(j, c));
  return out;
}

struct TraceContraction {
  double lhs = 0.0;
  double rhs = 0.0;
};

/// Lemma-style contraction check: tr|tr_{q+1..m} rho| <= tr|rho|.
inline TraceContraction partial_trace_contraction(const Eigen::MatrixXcd& rho,
                                                  const std::vector<std::int64_t>& dims,
                                                  int q_keep) {
  return {trace_norm(partial_trace_last(rho, dims, q_keep)), trace_norm(rho)};
}

struct KineticGaps {
  double a_gap = 0.0;       // <Psi, S_1^(1) Psi> - <psi, S^(1) psi>
  double b_gap = 0.0;       // <Psi, S_1^(2) Psi> - <phi, S^(2) phi>
  double mean_s_half = 0.0; // || S_{1,1,1/2} Psi ||
};

/// Per-species single-coordinate kinetic expectations against the exact
/// state and the mean-field orbitals, plus the mixed half-weight norm.
inline KineticGaps kinetic_gaps(const ManyBodyState& s, const Field& psi, const Field& phi,
                                const KineticOperator& kin1, const KineticOperator& kin2) {
  KineticGaps r;
  const Eigen::MatrixXcd k1 = kin1.dense_matrix();
  const Eigen::MatrixXcd k2 = kin2.dense_matrix();
  const int slot2 = static_cast<int>(s.mixture.n1);
  r.a_gap = slot_expectation(s, 0, k1).real() - inner(psi, kin1.apply(psi)).real();
  r.b_gap = slot_expectation(s, slot2, k2).real() - inner(phi, kin2.apply(phi)).real();

  auto half_power = [](const Eigen::MatrixXcd& k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(k);
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return Eigen::MatrixXcd(es.eigenvectors() *
                            (lam.array() + 1.0).sqrt().matrix().asDiagonal() *
                            es.eigenvectors().adjoint());
  };
  const auto o1 = apply_slot_operator(s, 0, half_power(k1));
  const auto o2 = apply_slot_operator(s, slot2, half_power(k2));
  ManyBodyState sum = o1;
  for (std::int64_t i = 0; i < sum.dim(); ++i) sum.values[i] += o2.values[i];
  r.mean_s_half = mb_norm(sum);
  return r;
}

/// Both sides of the conserved-energy bookkeeping identity
///   R^2 A_N + B_N = -(R^2/2) d11 - (1/2) d22 - R d12,
/// with d the exact-minus-mean-field pair-potential gaps and the
/// intraspecies terms empty for N_i = 1.
struct BookkeepingGap {
  double lhs = 0.0;
  double rhs = 0.0;
};

inline BookkeepingGap energy_bookkeeping(const ManyBodyState& s, const Field& psi,
                                         const Field& phi, const HartreeSystem& sys) {
  const auto gaps = kinetic_gaps(s, psi, phi, sys.kinetic1(), sys.kinetic2());
  const double r = sys.ratio();
  BookkeepingGap out;
  out.lhs = r * r * gaps.a_gap + gaps.b_gap;

  const auto& mix = s.mixture;
  const int n1 = static_cast<int>(mix.n1);
  const double w = s.grid.cell_volume();
  const auto rho1 = density(psi);
  const auto rho2 = density(phi);
  auto mf_pair = [&](const Kernel& u, const std::vector<double>& ra,
                     const std::vector<double>& rb) {
    const auto v = mean_field_potential(u, rb);
    double acc = 0.0;
    for (std::int64_t i = 0; i < s.grid.sites(); ++i) acc += w * v[i] * ra[i];
    return acc;
  };
  double rhs = 0.0;
  if (mix.n1 > 1) {
    const double exact = pair_expectation(s, 0, 1, sys.kernel11());
    rhs -= 0.5 * r * r * (exact - mf_pair(sys.kernel11(), rho1, rho1));
  }
  if (mix.n2 > 1) {
    const double exact = pair_expectation(s, n1, n1 + 1, sys.kernel22());
    rhs -= 0.5 * (exact - mf_pair(sys.kernel22(), rho2, rho2));
  }
  const double exact12 = pair_expectation(s, 0, n1, sys.kernel12());
  rhs -= r * (exact12 - mf_pair(sys.kernel12(), rho1, rho2));
  out.rhs = rhs;
  return out;
}

/// C_{Psi,psi,phi} of the weighted-trace-norm estimate.
inline double fidelity_constant(const KineticGaps& gaps, const Field& psi, const Field& phi,
                                const KineticOperator& kin1, const KineticOperator& kin2) {
  auto half_norm = [](const Field& f, const KineticOperator& kin) {
    const double quad = inner(f, kin.apply(f)).real();
    return std::sqrt(norm(f) * norm(f) + quad);
  };
  const double sum =
      gaps.mean_s_half + half_norm(psi, kin1) + half_norm(phi, kin2);
  return 2.0 * sum * sum;
}

/// Trace-norm bound from the depletion functionals: sqrt(8 (k a1 + l a2)).
inline double est_a_bound(double a1, double a2, int k, int l) {
  return std::sqrt(8.0 * (k * a1 + l * a2));
}

struct FidelityReport {
  double t = 0.0;
  std::int64_t n1 = 0, n2 = 0;
  int k = 1, l = 1;
  double theta = 0.0;
  double trace_norm_w = 0.0;  // tr|S^(1/2) (gamma - P) S^(1/2)|
  double hs_norm_w = 0.0;
  double plain_trace = 0.0;   // tr|gamma - P|
  double plain_hs = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double est_a_bound = 0.0;
  double thm23_bound = 0.0;
  double a_gap = 0.0, b_gap = 0.0;
  double mean_s_half = 0.0;
  std::vector<std::string> violations;
};

inline void to_json(nlohmann::json& j, const FidelityReport& r) {
  j = nlohmann::json{{"t", r.t},
                     {"N1", r.n1},
                     {"N2", r.n2},
                     {"k", r.k},
                     {"l", r.l},
                     {"theta", r.theta},
                     {"trace_norm", r.trace_norm_w},
                     {"hs_norm", r.hs_norm_w},
                     {"a1", r.a1},
                     {"a2", r.a2},
                     {"est_a_bound", r.est_a_bound},
                     {"thm23_bound", r.thm23_bound},
                     {"A_N", r.a_gap},
                     {"B_N", r.b_gap},
                     {"meanS_half", r.mean_s_half},
                     {"violations", r.violations}};
}

inline constexpr double kInequalitySlack = 1e-8;

/// Evaluates every computable diagnostic for one snapshot at the given
/// theta values. Inequality violations beyond the slack are recorded per
/// row; they indicate implementation bugs, not physics.
inline std::vector<FidelityReport> fidelity_reports(
    const ManyBodyState& s, const Field& psi, const Field& phi, const KineticOperator& kin1,
    const KineticOperator& kin2, int k, int l, const std::vector<double>& thetas,
    double slack = kInequalitySlack) {
  const auto gamma = reduce(s, k, l);
  const auto proj = hartree_projector(psi, phi, k, l);
  const auto diff = gamma - proj;
  const auto [a1, a2] = pickl_a(s, psi, phi);
  const auto gaps = kinetic_gaps(s, psi, phi, kin1, kin2);
  const double c_const = fidelity_constant(gaps, psi, phi, kin1, kin2);
  const double plain_trace = trace_norm(diff.matrix);
  const double plain_hs = hs_norm(diff.matrix);
  const double est_a = est_a_bound(a1, a2, k, l);

  std::vector<FidelityReport> rows;
  rows.reserve(thetas.size());
  for (const double theta : thetas) {
    FidelityReport r;
    r.t = s.t;
    r.n1 = s.mixture.n1;
    r.n2 = s.mixture.n2;
    r.k = k;
    r.l = l;
    r.theta = theta;
    r.a1 = a1;
    r.a2 = a2;
    r.a_gap = gaps.a_gap;
    r.b_gap = gaps.b_gap;
    r.mean_s_half = gaps.mean_s_half;
    r.plain_trace = plain_trace;
    r.plain_hs = plain_hs;
    r.est_a_bound = est_a;

    const auto w = make_sobolev_weight(kin1, kin2, k, l, theta);
    const auto norms = weighted_norms(diff, w);
    r.trace_norm_w = norms.trace;
    r.hs_norm_w = norms.hs;

    const double expo = std::min(0.5, 1.0 - theta);
    r.thm23_bound = c_const * (k + l) *
                    (std::pow(a1, expo) + std::pow(a2, expo) +
                     std::pow(plain_hs, 1.0 - theta));

    if (plain_trace > est_a + slack) r.violations.push_back("est_a");
    if (norms.trace > r.thm23_bound + slack) r.violations.push_back("thm23");
    rows.push_back(std::move(r));
  }
  return rows;
}

struct DualityCheck {
  double lhs = 0.0;           // |tr(A (gamma - P))|
  double op_norm = 0.0;       // ||S^(-1/2) A S^(-1/2)||
  double weighted_trace = 0.0;
};

/// Observable comparison: |tr(A (gamma-P))| <= ||S^-1/2 A S^-1/2|| tr|S^1/2 (gamma-P) S^1/2|.
inline DualityCheck observable_duality(const ReducedDensity& diff, const SobolevWeight& w,
                                       const Eigen::MatrixXcd& obs) {
  DualityCheck out;
  out.lhs = std::abs((obs * diff.matrix).trace());
  Eigen::MatrixXcd a = obs;
  std::vector<const Eigen::MatrixXcd*> bases;
  for (int s = 0; s < w.k; ++s) bases.push_back(&w.basis1);
  for (int s = 0; s < w.l; ++s) bases.push_back(&w.basis2);
  detail::to_tensor_eigenbasis(a, bases);
  const Eigen::VectorXd inv_sqrt = detail::weight_diagonal(w).cwiseSqrt().cwiseInverse();
  a = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  out.op_norm = a.rows() <= 512
                    ? Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues()(0)
                    : Eigen::BDCSVD<Eigen::MatrixXcd>(a).singularValues()(0);
  out.weighted_trace = weighted_norms(diff, w).trace;
  return out;
}

}  // namespace bmix
