#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "bmix/fock.hpp"
#include "bmix/meanfield.hpp"
#include "test_util.hpp"

using namespace bmix;
using testutil::to_eigen;

namespace {

GridSpec grid1d(int m = 8, double box = 2.0 * std::numbers::pi) { return {1, m, box}; }

CouplingMatrix couplings(double l11, double l22, double l12, double eps, double mu = 0.5) {
  CouplingMatrix c;
  c.lambda11 = l11;
  c.lambda22 = l22;
  c.lambda12 = l12;
  c.mu11 = c.mu22 = c.mu12 = mu;
  c.epsilon = eps;
  return c;
}

HamiltonianSpec spec_for(const MixtureSize& mix, const CouplingMatrix& c,
                         KineticKind kind = KineticKind::Semirelativistic) {
  HamiltonianSpec h;
  h.kinetic1 = {kind, 1.0, {}};
  h.kinetic2 = {kind, 1.5, {}};
  h.couplings = c;
  h.mixture = mix;
  return h;
}

std::pair<Field, Field> orbitals(const GridSpec& g) {
  return {gaussian_packet(g, {0.5 * g.box, 0, 0}, g.box / 6.0, {1, 0, 0}),
          gaussian_packet(g, {0.25 * g.box, 0, 0}, g.box / 5.0, {0, 0, 0})};
}

/// Dense H assembled in the test from first principles: DFT-diagonalized
/// kinetics per slot plus explicit minimum-image pair terms.
Eigen::MatrixXcd dense_reference_hamiltonian(const GridSpec& g, const HamiltonianSpec& spec) {
  const std::int64_t n = g.sites();
  const int slots = spec.mixture.slots();
  std::int64_t dim = 1;
  for (int s = 0; s < slots; ++s) dim *= n;

  auto dense_kinetic = [&](const KineticSpec& ks) {
    Eigen::MatrixXcd k = Eigen::MatrixXcd::Zero(n, n);
    for (std::int64_t mode = 0; mode < n; ++mode) {
      const auto mj = g.axis_indices(mode);
      double k2 = 0.0;
      for (int a = 0; a < g.d; ++a) {
        const double kk = g.momentum(mj[a]);
        k2 += kk * kk;
      }
      const double sigma = ks.kind == KineticKind::Semirelativistic
                               ? std::sqrt(ks.mass * ks.mass + k2)
                               : k2 / (2.0 * ks.mass);
      Eigen::VectorXcd pw(n);
      for (std::int64_t j = 0; j < n; ++j) {
        const auto x = g.site(j);
        double phase = 0.0;
        for (int a = 0; a < g.d; ++a)
          phase += 2.0 * std::numbers::pi * g.mode(mj[a]) * x[a] / g.box;
        pw(j) = std::polar(1.0 / std::sqrt(std::pow(g.box, g.d)), phase);
      }
      k += sigma * pw * pw.adjoint() * g.cell_volume();
    }
    return k;
  };
  const auto k1 = dense_kinetic(spec.kinetic1);
  const auto k2 = dense_kinetic(spec.kinetic2);

  auto yukawa = [&](double lambda, double mu, std::int64_t ja, std::int64_t jb) {
    const auto a = g.axis_indices(ja);
    const auto b = g.axis_indices(jb);
    double r2 = 0.0;
    for (int ax = 0; ax < g.d; ++ax) {
      int diff = (a[ax] - b[ax] + g.m) % g.m;
      if (diff > g.m / 2) diff -= g.m;
      const double dx = diff * g.spacing();
      r2 += dx * dx;
    }
    const double r = std::sqrt(r2);
    return lambda * std::exp(-mu * r) /
           std::sqrt(r2 + spec.couplings.epsilon * spec.couplings.epsilon);
  };

  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<std::int64_t> strides(slots, 1);
  for (int s = slots - 2; s >= 0; --s) strides[s] = strides[s + 1] * n;

  for (std::int64_t row = 0; row < dim; ++row) {
    for (int s = 0; s < slots; ++s) {
      const std::int64_t js = (row / strides[s]) % n;
      const auto& k = s < spec.mixture.n1 ? k1 : k2;
      for (std::int64_t jj = 0; jj < n; ++jj)
        h(row, row + (jj - js) * strides[s]) += k(js, jj);
    }
    const double c11 = spec.mixture.n1 > 1 ? 1.0 / (spec.mixture.n1 - 1) : 0.0;
    const double c22 = spec.mixture.n2 > 1 ? 1.0 / (spec.mixture.n2 - 1) : 0.0;
    for (int a = 0; a < slots; ++a)
      for (int b = a + 1; b < slots; ++b) {
        const std::int64_t ja = (row / strides[a]) % n;
        const std::int64_t jb = (row / strides[b]) % n;
        if (a < spec.mixture.n1 && b < spec.mixture.n1)
          h(row, row) += c11 * yukawa(spec.couplings.lambda11, spec.couplings.mu11, ja, jb);
        else if (a >= spec.mixture.n1 && b >= spec.mixture.n1)
          h(row, row) += c22 * yukawa(spec.couplings.lambda22, spec.couplings.mu22, ja, jb);
        else
          h(row, row) += yukawa(spec.couplings.lambda12, spec.couplings.mu12, ja, jb) /
                         spec.mixture.mean();
      }
  }
  return h;
}

}  // namespace

TEST_CASE("product state") {
  const auto g = grid1d();
  const auto [psi, phi] = orbitals(g);

  SECTION("N = (1,1) is the outer product") {
    const auto s = product_state(psi, phi, {1, 1});
    for (std::int64_t i = 0; i < g.sites(); ++i)
      for (std::int64_t j = 0; j < g.sites(); ++j)
        CHECK(s.values[i * g.sites() + j] == psi.values[i] * phi.values[j]);
  }

  SECTION("unit norm and exact symmetry") {
    const auto s = product_state(psi, phi, {3, 2});
    CHECK(std::abs(mb_norm(s) - 1.0) < 1e-12);
    CHECK(symmetry_defect(s) < 1e-13);
  }

  SECTION("cap overflow is rejected") {
    CHECK_THROWS_AS(product_state(psi, phi, {20, 20}), StateCapExceeded);
  }
}

TEST_CASE("hamiltonian application") {
  const auto g = grid1d(6);
  const auto [psi, phi] = orbitals(g);
  const auto c = couplings(0.5, -0.3, 0.4, 0.25);

  SECTION("N = (1,1) matches the two-particle reference") {
    const auto spec = spec_for({1, 1}, c);
    HamiltonianOperator h(g, spec);
    const auto dense = dense_reference_hamiltonian(g, spec);
    auto s = product_state(psi, phi, {1, 1});
    const auto hs = h.apply(s);
    const Eigen::VectorXcd ref = dense * to_eigen(s.values);
    for (std::int64_t i = 0; i < s.dim(); ++i)
      CHECK(std::abs(hs.values[i] - ref(i)) < 1e-11);
  }

  SECTION("product expectation equals the mean-field functional") {
    for (const auto mix : {MixtureSize{2, 2}, MixtureSize{3, 2}, MixtureSize{1, 2}}) {
      const auto spec = spec_for(mix, c);
      HamiltonianOperator h(g, spec);
      const auto s = product_state(psi, phi, mix);
      const double lhs = h.energy(s);
      HartreeSystem sys(g, spec.kinetic1, spec.kinetic2, c, mix.ratio());
      const double rhs =
          sys.energy_report({psi, phi, 0.0}, mix).hN_per_particle * static_cast<double>(mix.n2);
      CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
    }
  }

  SECTION("hermiticity on random states") {
    const auto spec = spec_for({2, 1}, c, KineticKind::MagneticNonrelativistic);
    HamiltonianOperator h(g, spec);
    ManyBodyState f, q;
    f.mixture = q.mixture = {2, 1};
    f.grid = q.grid = g;
    const std::int64_t dim = state_dimension(g, f.mixture);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    f.values.resize(dim);
    q.values.resize(dim);
    for (std::int64_t i = 0; i < dim; ++i) {
      f.values[i] = cx{gauss(rng), gauss(rng)};
      q.values[i] = cx{gauss(rng), gauss(rng)};
    }
    const cx lhs = mb_inner(f, h.apply(q));
    const cx rhs = mb_inner(q, h.apply(f));
    CHECK(std::abs(lhs - std::conj(rhs)) < 1e-10);
  }
}

TEST_CASE("propagation") {
  const auto g = grid1d();
  const auto [psi, phi] = orbitals(g);

  SECTION("dt = 0 is the identity") {
    HamiltonianOperator h(g, spec_for({1, 1}, couplings(0.5, 0.5, 0.5, 0.25)));
    const auto s = product_state(psi, phi, {1, 1});
    const auto out = h.propagate(s, 0.0, 1);
    for (std::int64_t i = 0; i < s.dim(); ++i) CHECK(out.values[i] == s.values[i]);
  }

  SECTION("free evolution keeps exact products") {
    const auto spec = spec_for({2, 2}, couplings(0, 0, 0, 0.25));
    HamiltonianOperator h(g, spec);
    auto s = product_state(psi, phi, {2, 2});
    s = h.propagate(s, 0.05, 10, {40, 1e-12});
    const auto ref = product_state(kinetic_propagator(spec.kinetic1, 0.5, psi),
                                   kinetic_propagator(spec.kinetic2, 0.5, phi), {2, 2});
    double dist = 0.0;
    for (std::int64_t i = 0; i < s.dim(); ++i)
      dist += std::norm(s.values[i] - ref.values[i]);
    CHECK(std::sqrt(dist * mb_weight(s)) < 1e-9);
  }

  SECTION("two-particle lanczos matches dense expm over a unit horizon") {
    const auto spec = spec_for({1, 1}, couplings(0.5, -0.3, 0.4, 0.25));
    HamiltonianOperator h(g, spec);
    const auto dense = dense_reference_hamiltonian(g, spec);
    auto s = product_state(psi, phi, {1, 1});
    const Eigen::VectorXcd ref = testutil::dense_expm_apply(dense, 1.0, to_eigen(s.values));
    s = h.propagate(s, 0.1, 10, {50, 1e-12});
    double err = 0.0;
    for (std::int64_t i = 0; i < s.dim(); ++i)
      err = std::max(err, std::abs(s.values[i] - ref(i)));
    CHECK(err < 1e-9);
  }

  SECTION("norm, symmetry and energy are conserved") {
    const auto spec = spec_for({2, 2}, couplings(0.4, 0.3, -0.4, 0.25));
    HamiltonianOperator h(g, spec);
    auto s = product_state(psi, phi, {2, 2});
    const double e0 = h.energy(s);
    s = h.propagate(s, 0.02, 25, {50, 1e-12});
    CHECK(std::abs(mb_norm(s) - 1.0) < 1e-10);
    CHECK(symmetry_defect(s) < 1e-10);
    CHECK(std::abs(h.energy(s) - e0) / std::abs(e0) < 1e-8);
  }
}

TEST_CASE("symmetry defect scales") {
  const auto g = grid1d();
  const auto a = plane_wave(g, {1, 0, 0});
  const auto b = plane_wave(g, {2, 0, 0});
  const std::int64_t n = g.sites();

  SECTION("plain product of orthogonal orbitals in one species") {
    ManyBodyState s;
    s.mixture = {2, 1};
    s.grid = g;
    s.values.resize(state_dimension(g, s.mixture));
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        for (std::int64_t k = 0; k < n; ++k)
          s.values[(i * n + j) * n + k] = a.values[i] * b.values[j] * a.values[k];
    CHECK(symmetry_defect(s) == Catch::Approx(std::sqrt(2.0)).margin(1e-12));
  }

  SECTION("antisymmetrized pair has defect twice its norm") {
    ManyBodyState s;
    s.mixture = {2, 1};
    s.grid = g;
    s.values.resize(state_dimension(g, s.mixture));
    const double inv = 1.0 / std::sqrt(2.0);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        for (std::int64_t k = 0; k < n; ++k)
          s.values[(i * n + j) * n + k] =
              inv * (a.values[i] * b.values[j] - b.values[i] * a.values[j]) * a.values[k];
    CHECK(symmetry_defect(s) == Catch::Approx(2.0).margin(1e-12));
  }
}

TEST_CASE("many-body checkpoint roundtrip") {
  const auto g = grid1d(6);
  const auto [psi, phi] = orbitals(g);
  const auto s = product_state(psi, phi, {2, 1});
  const auto path = std::filesystem::temp_directory_path() / "bmix_mb_test.bmix";
  write_manybody(path.string(), s);
  const auto back = read_manybody(path.string());
  REQUIRE(back.mixture.n1 == 2);
  REQUIRE(back.mixture.n2 == 1);
  REQUIRE(back.grid == g);
  for (std::int64_t i = 0; i < s.dim(); ++i) CHECK(back.values[i] == s.values[i]);
  std::filesystem::remove(path);
}
