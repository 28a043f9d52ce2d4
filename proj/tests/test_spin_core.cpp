#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "oracles.hpp"
#include "spinforge/spin_core.hpp"
#include "test_support.hpp"

using namespace spinforge;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SpinParams isotropic(double g, double A, double gN = constants::vanadium51_nuclear_mhz_per_t) {
  SpinParams p;
  p.g_principal = {g, g, g};
  p.A_principal = {A, A, A};
  p.gN_muN = gN;
  return p;
}

SpinParams beta_gs1() {
  SpinParams p;
  p.g_principal = {0.5, 0.5, 1.870};
  p.A_principal = {103.0, 188.0, 174.0};
  return p;
}

}  // namespace

TEST_CASE("spin matrices obey the angular momentum algebra", "[spin_core]") {
  const std::complex<double> i(0.0, 1.0);
  for (double j : {0.5, 1.0, 1.5, 3.5}) {
    const SpinMatrices s = spin_matrices(j);
    const auto dim = s.z.rows();
    CHECK((s.x * s.y - s.y * s.x - i * s.z).norm() < 1e-12);
    CHECK((s.y * s.z - s.z * s.y - i * s.x).norm() < 1e-12);
    CHECK((s.z * s.x - s.x * s.z - i * s.y).norm() < 1e-12);
    const CMatrix s2 = s.x * s.x + s.y * s.y + s.z * s.z;
    CHECK((s2 - j * (j + 1.0) * CMatrix::Identity(dim, dim)).norm() < 1e-12);
    CHECK(s.z(0, 0).real() == j);
  }
  CHECK_THROWS_AS(spin_matrices(0.3), std::invalid_argument);
  CHECK_THROWS_AS(spin_matrices(-0.5), std::invalid_argument);
}

TEST_CASE("tensor rotation", "[spin_core]") {
  const std::array<double, 3> pr{1.0, 2.0, 3.0};
  CHECK((rotate_tensor(pr, std::array<double, 3>{0, 0, 0}) - Vec3(1, 2, 3).asDiagonal().toDenseMatrix()).norm() == 0.0);

  const Mat3 t = rotate_tensor(pr, std::array<double, 3>{0, 52, 0});
  const Mat3 r = rotation_x(52.0);
  CHECK((t - r * Vec3(1, 2, 3).asDiagonal() * r.transpose()).norm() < 1e-12);
  CHECK((t - t.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat3> es(t);
  CHECK_THAT(es.eigenvalues()(0), WithinAbs(1.0, 1e-12));
  CHECK_THAT(es.eigenvalues()(2), WithinAbs(3.0, 1e-12));
  // the zz axis tilts by the same angle
  CHECK_THAT(std::acos(std::abs(es.eigenvectors().col(2).dot(Vec3::UnitZ()))) * 180.0 / constants::pi,
             WithinAbs(52.0, 1e-9));

  CHECK_NOTHROW(rotate_tensor(pr, std::array<double, 3>{0, 30, 30}));
  CHECK_THROWS_AS(rotate_tensor(pr, std::array<double, 3>{10, 30, 0}), std::invalid_argument);
}

TEST_CASE("electron Zeeman splitting without hyperfine or nuclear terms", "[spin_core]") {
  SpinParams p;
  p.g_principal = {0.0, 0.0, 1.870};
  p.A_principal = {0.0, 0.0, 0.0};
  p.gN_muN = 0.0;
  const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 0.1));
  CHECK_THAT(es.levels(15) - es.levels(0), WithinRel(1.870 * 13996.24493 * 0.1, 1e-12));
  CHECK_THAT(es.levels(15) - es.levels(0), WithinAbs(2617.3, 0.05));
  for (int k = 1; k < 8; ++k) CHECK_THAT(es.levels(k) - es.levels(0), WithinAbs(0.0, 1e-9));
}

TEST_CASE("nuclear Zeeman ladder", "[spin_core]") {
  SpinParams p;
  p.g_principal = {0.0, 0.0, 0.0};
  const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 1.0));
  // each nuclear level is doubly degenerate in the electron spin
  for (int k = 2; k < 16; k += 2) CHECK_THAT(es.levels(k) - es.levels(k - 2), WithinAbs(11.213, 1e-9));
}

TEST_CASE("zero couplings give a zero Hamiltonian", "[spin_core]") {
  SpinParams p;
  p.g_principal = {0, 0, 0};
  p.gN_muN = 0.0;
  CHECK(build_hamiltonian(p, FieldPoint::along(Vec3(1, 2, 3), 0.7)).norm() == 0.0);
}

TEST_CASE("field direction enters through g.B", "[spin_core]") {
  SpinParams p;
  p.g_principal = {1.0, 1.5, 2.0};
  p.gN_muN = 0.0;
  const Vec3 u = Vec3(1.0, 1.0, 1.0).normalized();
  const auto es = eigensystem(p, FieldPoint::along(u, 0.2));
  const double geff = Vec3(1.0 * u(0), 1.5 * u(1), 2.0 * u(2)).norm();
  CHECK_THAT(es.levels(15) - es.levels(0), WithinRel(geff * 13996.24493 * 0.2, 1e-12));
}

TEST_CASE("isotropic spectrum matches the closed form", "[spin_core][oracle]") {
  for (double g : {1.5, 2.0}) {
    for (double A : {50.0, 250.0, -80.0}) {
      oracle::BreitRabi br{g, A, 3.5, 11.213};
      const SpinParams p = isotropic(g, A);
      for (int k = 0; k <= 20; ++k) {
        const double B = 0.05 * k;
        const auto got = testing::sorted(eigensystem(p, FieldPoint::along(Vec3::UnitZ(), B)).levels);
        const auto want = br.spectrum(B);
        for (std::size_t n = 0; n < 16; ++n) {
          const double scale = std::max(std::abs(want[n]), std::abs(A));
          CHECK(std::abs(got[n] - want[n]) <= 1e-9 * scale);
        }
      }
    }
  }
}

TEST_CASE("zero-field hyperfine multiplets", "[spin_core]") {
  const auto es = eigensystem(isotropic(2.0, 100.0), FieldPoint{});
  for (int k = 0; k < 7; ++k) CHECK_THAT(es.levels(k), WithinAbs(-225.0, 1e-9));
  for (int k = 7; k < 16; ++k) CHECK_THAT(es.levels(k), WithinAbs(175.0, 1e-9));
}

TEST_CASE("Hamiltonian invariants on random draws", "[spin_core][property]") {
  std::mt19937_64 rng(20240611);
  for (int draw = 0; draw < 2000; ++draw) {
    const SpinParams p = testing::random_params(rng);
    const FieldPoint f = testing::random_field(rng);
    const CMatrix H = build_hamiltonian(p, f);
    const double scale = std::max(H.norm(), 1e-300);
    CHECK((H - H.adjoint()).norm() / scale < 1e-10);
    CHECK(std::abs(H.trace()) < 1e-6);
    FieldPoint rev;
    rev.b0 = -f.b0;
    const auto a = testing::sorted(eigensystem(H, f).levels);
    const auto b = testing::sorted(eigensystem(p, rev).levels);
    CHECK(testing::max_abs_diff(a, b) < 1e-9 * (1.0 + scale));
  }
}

TEST_CASE("eigensystem rejects non-Hermitian input", "[spin_core]") {
  CMatrix m = CMatrix::Identity(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(eigensystem(m), std::invalid_argument);
}

TEST_CASE("transition table", "[spin_core]") {
  SECTION("free electron gives eight equal perpendicular lines") {
    SpinParams p = isotropic(2.0, 0.0);
    const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 0.1));
    const auto table = transition_table(es, p);
    const double f = 2.0 * 13996.24493 * 0.1;
    int lines = 0;
    for (const auto& t : table) {
      if (std::abs(t.freq - f) < 1e-6) {
        ++lines;
        CHECK_THAT(t.intensity_perp, WithinRel(13996.24493 * 13996.24493, 1e-9));
        CHECK(t.intensity_parallel < 1e-12);
      }
    }
    CHECK(lines == 8);
  }
  SECTION("vanishing g_perp gives no perpendicular electron lines") {
    SpinParams p = beta_gs1();
    p.g_principal = {0.0, 0.0, 1.870};
    const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 0.02));
    TransitionOptions opt;
    opt.include_nuclear_dipole = false;
    for (const auto& t : transition_table(es, p, opt)) CHECK(t.intensity_perp < 1e-12);
  }
  SECTION("matrix elements are symmetric in i and j") {
    const SpinParams p = beta_gs1();
    const auto es = eigensystem(p, FieldPoint::along(Vec3(0.3, 0.1, 1.0), 0.03));
    const auto V = dipole_operators(p, product_operators(p));
    const Vec3 b1(0.2, -0.7, 0.4);
    for (int i = 0; i < 16; i += 3)
      for (int j = 1; j < 16; j += 4)
        CHECK_THAT(dipole_strength(es, V, i, j, b1), WithinAbs(dipole_strength(es, V, j, i, b1), 1e-6));
  }
  SECTION("thermal weights are population differences") {
    const SpinParams p = beta_gs1();
    const auto es = eigensystem(p, FieldPoint::along(Vec3::UnitZ(), 0.5));
    TransitionOptions opt;
    opt.temperature_k = 3.3;
    for (const auto& t : transition_table(es, p, opt)) {
      const double expected = std::exp(-(es.levels(t.i) - es.levels(0)) / (20836.61912 * 3.3)) -
                              std::exp(-(es.levels(t.j) - es.levels(0)) / (20836.61912 * 3.3));
      double z = 0.0;
      for (int k = 0; k < 16; ++k) z += std::exp(-(es.levels(k) - es.levels(0)) / (20836.61912 * 3.3));
      CHECK_THAT(t.thermal_weight, WithinAbs(expected / z, 1e-12));
    }
  }
}

TEST_CASE("Boltzmann populations", "[spin_core]") {
  // h / kB from the SI defining constants
  const double h_over_kb = 6.62607015e-34 / 1.380649e-23;
  const auto w = boltzmann_weights({0.0, 529.0}, 3.3);
  CHECK_THAT(w[1] / w[0], WithinRel(std::exp(-529e9 * h_over_kb / 3.3), 1e-8));
  CHECK_THAT(w[1] / w[0], WithinRel(4.6e-4, 0.02));

  const auto hot = boltzmann_weights({0.0, 43.0, 529.0}, 1e9);
  for (double x : hot) CHECK_THAT(x, WithinAbs(1.0 / 3.0, 1e-6));
  CHECK(boltzmann_weights({5.0}, 3.3) == std::vector<double>{1.0});
  CHECK_THROWS_AS(boltzmann_weights({0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("field sweeps", "[spin_core]") {
  SECTION("tracks are straight lines without hyperfine coupling") {
    SpinParams p = beta_gs1();
    p.A_principal = {0, 0, 0};
    const auto sweep = field_sweep(p, Vec3::UnitZ(), 0.0, 0.05, 51);
    for (int t = 0; t < sweep.tracks(); ++t)
      for (std::size_t k = 1; k + 1 < sweep.fields.size(); ++k)
        CHECK_THAT(sweep.energy(k - 1, t) - 2.0 * sweep.energy(k, t) + sweep.energy(k + 1, t), WithinAbs(0.0, 1e-8));
  }
  SECTION("4H beta ground state sweep stays adiabatic on a fine grid") {
    const auto sweep = field_sweep(beta_gs1(), Vec3::UnitZ(), 0.0, 0.05, 501);
    CHECK(sweep.min_overlap() > 0.5);
    CHECK_FALSE(sweep.coarse_grid);
    CHECK(sweep.step_overlap.size() == 500);
  }
  SECTION("reversed sweep gives the same spectra") {
    const auto up = field_sweep(beta_gs1(), Vec3::UnitZ(), 0.0, 0.05, 101);
    const auto down = field_sweep(beta_gs1(), Vec3::UnitZ(), 0.05, 0.0, 101);
    for (std::size_t k = 0; k < 101; ++k) {
      const auto a = testing::sorted(up.systems[k].levels);
      const auto b = testing::sorted(down.systems[100 - k].levels);
      CHECK(testing::max_abs_diff(a, b) < 1e-9);
    }
  }
  CHECK_THROWS_AS(field_sweep(beta_gs1(), Vec3::UnitZ(), 0.0, 0.05, 1), std::invalid_argument);
  CHECK_THROWS_AS(field_sweep(beta_gs1(), Vec3::Zero(), 0.0, 0.05, 11), std::invalid_argument);
}

TEST_CASE("clock transitions", "[spin_core][oracle]") {
  SECTION("none without hyperfine coupling") {
    CHECK(clock_transitions(isotropic(2.0, 0.0), Vec3::UnitZ(), 0.0, 0.05).empty());
  }
  SECTION("isotropic extrema match the closed form") {
    const oracle::BreitRabi br{2.0, 100.0, 3.5, 11.213};
    const auto want = oracle::clock_extrema(br, 0.0005, 0.04);
    ClockOptions opt;
    opt.points = 801;
    const auto got = clock_transitions(isotropic(2.0, 100.0), Vec3::UnitZ(), 0.0005, 0.04, opt);
    REQUIRE_FALSE(want.empty());
    CHECK(got.size() == want.size());
    for (const auto& w : want) {
      bool matched = false;
      for (const auto& c : got)
        matched = matched || (std::abs(c.field - w.field) < 1e-5 && std::abs(c.frequency - w.frequency) < 1e-3);
      CHECK(matched);
    }
    // bracketing slopes change sign across each returned field
    const SpinParams p = isotropic(2.0, 100.0);
    const auto sweep = field_sweep(p, Vec3::UnitZ(), 0.0005, 0.04, 801);
    for (const auto& c : got) {
      std::size_t k = 0;
      while (k + 1 < sweep.fields.size() && sweep.fields[k + 1] <= c.field) ++k;
      const auto ri = sweep.state(k, c.track_i);
      const auto rj = sweep.state(k, c.track_j);
      const auto lo = transition_slope(p, Vec3::UnitZ(), c.field - 1e-5, ri, rj);
      const auto hi = transition_slope(p, Vec3::UnitZ(), c.field + 1e-5, ri, rj);
      CHECK(lo.slope * hi.slope < 0.0);
    }
  }
}
