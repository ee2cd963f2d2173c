#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "bmix/field.hpp"
#include "bmix/grid.hpp"
#include "bmix/io.hpp"
#include "bmix/kinetic.hpp"
#include "test_util.hpp"

using namespace bmix;
using testutil::to_eigen;

namespace {

GridSpec grid1d(int m = 8, double box = 2.0 * std::numbers::pi) {
  return GridSpec{1, m, box};
}

KineticSpec semirel(double mass = 1.0) {
  return KineticSpec{KineticKind::Semirelativistic, mass, {}};
}

KineticSpec magnetic_free(double mass = 1.0) {
  return KineticSpec{KineticKind::MagneticNonrelativistic, mass, {}};
}

KineticSpec magnetic_with(VectorSampler a, double mass = 1.0) {
  return KineticSpec{KineticKind::MagneticNonrelativistic, mass, std::move(a)};
}

VectorSampler smooth_potential(double box) {
  return [box](const std::array<double, 3>& x) {
    return std::array<double, 3>{
        0.7 + 0.3 * std::sin(2.0 * std::numbers::pi * x[0] / box),
        0.2 * std::cos(2.0 * std::numbers::pi * x[0] / box), 0.0};
  };
}

}  // namespace

TEST_CASE("grid validation") {
  CHECK_THROWS_AS((GridSpec{1, 7, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{4, 8, 1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((GridSpec{2, 8, -1.0}.validate()), std::invalid_argument);
  CHECK_NOTHROW(grid1d().validate());
  CHECK(grid1d().spacing() == Catch::Approx(2.0 * std::numbers::pi / 8));
}

TEST_CASE("nyquist momentum is negative") {
  const auto g = grid1d(8, 2.0 * std::numbers::pi);
  CHECK(g.momentum(4) == Catch::Approx(-4.0));
  CHECK(g.momentum(3) == Catch::Approx(3.0));
  CHECK(g.momentum(5) == Catch::Approx(-3.0));
}

TEST_CASE("semirelativistic kinetic on a plane wave") {
  const auto g = grid1d();
  const auto f = plane_wave(g, {1, 0, 0});
  const auto sf = apply_kinetic(semirel(), f);
  const double expected = std::sqrt(2.0);
  for (std::int64_t i = 0; i < g.sites(); ++i)
    CHECK(std::abs(sf.values[i] - expected * f.values[i]) < 1e-12);
}

TEST_CASE("free magnetic kinetic annihilates constants") {
  const auto g = grid1d(16);
  Field f(g);
  for (auto& z : f.values) z = cx{0.5, -0.25};
  const auto sf = apply_kinetic(magnetic_free(), f);
  for (const auto& z : sf.values) CHECK(std::abs(z) < 1e-13);
}

TEST_CASE("peierls operator matches dense assembly and is positive") {
  const auto g = grid1d(12);
  const auto spec = magnetic_with(smooth_potential(g.box), 1.3);
  KineticOperator op(g, spec);
  const auto dense = testutil::dense_peierls(g, op.links(), 1.3);

  const auto f = random_field(g, 11);
  const auto sf = op.apply(f);
  const Eigen::VectorXcd ref = dense * to_eigen(f.values);
  for (std::int64_t i = 0; i < g.sites(); ++i)
    CHECK(std::abs(sf.values[i] - ref(i)) < 1e-11);

  const cx quad = inner(f, sf);
  CHECK(std::abs(quad.imag()) < 1e-12);
  CHECK(quad.real() >= -1e-12);
}

TEST_CASE("hermiticity of all kinetic kinds") {
  const auto g = grid1d(10);
  const auto f = random_field(g, 21);
  const auto h = random_field(g, 22);
  for (const auto& spec :
       {semirel(0.7), magnetic_free(1.1), magnetic_with(smooth_potential(g.box))}) {
    KineticOperator op(g, spec);
    const cx lhs = inner(f, op.apply(h));
    const cx rhs = inner(h, op.apply(f));
    CHECK(std::abs(lhs - std::conj(rhs)) < 1e-12);
  }
}

TEST_CASE("semirelativistic operator is bounded below by the mass") {
  const auto g = grid1d(16);
  const double mass = 1.7;
  const auto f = random_field(g, 31);
  const cx quad = inner(f, apply_kinetic(semirel(mass), f));
  CHECK(quad.real() >= mass - 1e-12);
}

TEST_CASE("discrete diamagnetic inequality") {
  const auto g = grid1d(16);
  const double mass = 0.9;
  KineticOperator op(g, magnetic_with(smooth_potential(g.box), mass));
  for (std::uint64_t seed : {41, 42, 43, 44, 45}) {
    const auto f = random_field(g, seed);
    Field absf(g);
    for (std::int64_t i = 0; i < g.sites(); ++i) absf.values[i] = std::abs(f.values[i]);
    const double lhs = inner(absf, apply_kinetic(magnetic_free(0.5), absf)).real();
    const double rhs = inner(f, op.apply(f)).real() * 2.0 * mass;
    CHECK(lhs <= rhs + 1e-10);
  }
}

TEST_CASE("propagator basics") {
  const auto g = grid1d();
  const auto f = random_field(g, 51);

  SECTION("dt = 0 is the identity") {
    const auto out = kinetic_propagator(semirel(), 0.0, f);
    for (std::int64_t i = 0; i < g.sites(); ++i) CHECK(out.values[i] == f.values[i]);
  }

  SECTION("plane wave picks up the exact phase") {
    const auto pw = plane_wave(g, {2, 0, 0});
    const double dt = 0.37;
    const auto out = kinetic_propagator(semirel(), dt, pw);
    const cx phase = std::polar(1.0, -std::sqrt(1.0 + 4.0) * dt);
    for (std::int64_t i = 0; i < g.sites(); ++i)
      CHECK(std::abs(out.values[i] - phase * pw.values[i]) < 1e-12);
    CHECK(std::abs(norm(out) - 1.0) < 1e-13);
  }
}

TEST_CASE("lanczos propagator is unitary and matches dense expm") {
  const auto g = grid1d(16);
  const auto spec = magnetic_with(smooth_potential(g.box));
  KineticOperator op(g, spec);
  const auto f = random_field(g, 61);
  const double dt = 0.21;

  const auto out = op.propagate(dt, f, {30, 1e-12});
  CHECK(std::abs(norm(out) - norm(f)) < 1e-10);

  const auto dense = testutil::dense_peierls(g, op.links(), 1.0);
  const Eigen::VectorXcd ref = testutil::dense_expm_apply(dense, dt, to_eigen(f.values));
  double err = 0.0;
  for (std::int64_t i = 0; i < g.sites(); ++i)
    err = std::max(err, std::abs(out.values[i] - ref(i)));
  CHECK(err < 1e-9);
}

TEST_CASE("lanczos failure is reported") {
  const auto g = grid1d(32);
  KineticOperator op(g, magnetic_with(smooth_potential(g.box)));
  const auto f = random_field(g, 62);
  CHECK_THROWS_AS(op.propagate(50.0, f, {4, 1e-12}), LanczosFailure);
}

TEST_CASE("gauge transform") {
  const auto g = grid1d(16);
  KineticOperator op(g, magnetic_with(smooth_potential(g.box)));
  const auto f = random_field(g, 71);

  SECTION("zero chi changes nothing") {
    const auto [fz, links] = gauge_transform(f, op.links(), std::vector<double>(g.sites(), 0.0));
    for (std::int64_t i = 0; i < g.sites(); ++i) CHECK(fz.values[i] == f.values[i]);
    for (std::int64_t i = 0; i < g.sites(); ++i)
      CHECK(links.link[0][i] == op.links().link[0][i]);
  }

  SECTION("constant chi is a global phase") {
    const auto [fz, links] = gauge_transform(f, op.links(), std::vector<double>(g.sites(), 0.8));
    const cx phase = std::polar(1.0, 0.8);
    for (std::int64_t i = 0; i < g.sites(); ++i)
      CHECK(std::abs(fz.values[i] - phase * f.values[i]) < 1e-14);
    for (std::int64_t i = 0; i < g.sites(); ++i)
      CHECK(std::abs(links.link[0][i] - op.links().link[0][i]) < 1e-12);
  }

  SECTION("gauge covariance of the evolved densities") {
    const auto chi = testutil::random_reals(g.sites(), 77);
    const auto [fz, links2] = gauge_transform(f, op.links(), chi);
    KineticOperator op2(g, magnetic_free(), links2);

    Field a = f, b = fz;
    for (int step = 0; step < 40; ++step) {
      a = op.propagate(0.05, a, {40, 1e-12});
      b = op2.propagate(0.05, b, {40, 1e-12});
    }
    for (std::int64_t i = 0; i < g.sites(); ++i)
      CHECK(std::abs(std::abs(a.values[i]) - std::abs(b.values[i])) < 1e-10);
  }
}

TEST_CASE("inner product and norm") {
  const auto g = grid1d(16);

  SECTION("inner(f, f) is real and nonnegative") {
    const auto f = random_field(g, 81);
    const cx s = inner(f, f);
    CHECK(std::abs(s.imag()) < 1e-15);
    CHECK(s.real() >= 0.0);
    CHECK(std::abs(s.real() - 1.0) < 1e-13);
  }

  SECTION("orthogonal plane waves") {
    const auto a = plane_wave(g, {1, 0, 0});
    const auto b = plane_wave(g, {3, 0, 0});
    CHECK(std::abs(inner(a, b)) < 1e-14);
  }

  SECTION("cauchy-schwarz over random pairs") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto f = random_field(g, 1000 + seed);
      auto h = random_field(g, 2000 + seed);
      for (auto& z : f.values) z *= 1.7;
      CHECK(std::abs(inner(f, h)) <= norm(f) * norm(h) + 1e-12);
    }
  }

  SECTION("grid mismatch is rejected") {
    const auto f = random_field(g, 91);
    const auto h = random_field(grid1d(8), 92);
    CHECK_THROWS_AS(inner(f, h), std::invalid_argument);
  }
}

TEST_CASE("conjugate symmetry of inner") {
  const auto g = grid1d();
  const auto f = random_field(g, 95);
  const auto h = random_field(g, 96);
  CHECK(inner(f, h) == std::conj(inner(h, f)));
}

TEST_CASE("field binary roundtrip") {
  const auto g = GridSpec{2, 6, 3.5};
  const auto f = random_field(g, 99);
  const auto path = std::filesystem::temp_directory_path() / "bmix_field_test.bmix";
  write_field(path.string(), f);
  const auto back = read_field(path.string());
  REQUIRE(back.grid == g);
  for (std::int64_t i = 0; i < g.sites(); ++i) CHECK(back.values[i] == f.values[i]);
  std::filesystem::remove(path);
}

TEST_CASE("2d multiplier agrees with per-axis symbols") {
  const GridSpec g{2, 8, 2.0 * std::numbers::pi};
  const auto f = plane_wave(g, {2, -3, 0});
  const auto sf = apply_kinetic(magnetic_free(), f);
  const double expected = (4.0 + 9.0) / 2.0;
  for (std::int64_t i = 0; i < g.sites(); ++i)
    CHECK(std::abs(sf.values[i] - expected * f.values[i]) < 1e-11);
}
