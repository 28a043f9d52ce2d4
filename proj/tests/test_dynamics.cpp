#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spinforge/dynamics.hpp"

using namespace spinforge;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Trapezoid over a wide, very fine grid of the standard normal.
double brute_detuning_average(double t, const RabiParams& p, int n = 200001) {
  RabiParams q = p;
  q.inhomogeneity.reset();
  const double sigma = p.inhomogeneity->detuning_sigma;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / (n - 1);
  double sum = 0.0, wsum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = lo + h * k;
    const double w = (k == 0 || k == n - 1 ? 0.5 : 1.0) * std::exp(-0.5 * z * z);
    q.delta = p.delta + sigma * z;
    sum += w * rabi_signal(t, q);
    wsum += w;
  }
  return sum / wsum;
}

SpectrumTrace sample(const std::vector<double>& x, const std::function<double(double)>& f) {
  SpectrumTrace t;
  t.x = x;
  for (double v : x) t.y.push_back(f(v));
  return t;
}

}  // namespace

TEST_CASE("resonant undamped Rabi oscillation", "[dynamics]") {
  RabiParams p;
  p.omega_r = 2.0 * kPi * 3.0;
  for (double t : {0.0, 0.01, 0.05, 0.123, 0.4, 1.7}) {
    const double s = std::sin(0.5 * p.omega_r * t);
    CHECK_THAT(rabi_signal(t, p), WithinAbs(s * s, 1e-12));
  }
  CHECK_THAT(rabi_signal(kPi / p.omega_r, p), WithinAbs(1.0, 1e-12));
  CHECK_THAT(rabi_signal(2.0 * kPi / p.omega_r, p), WithinAbs(0.0, 1e-12));
}

TEST_CASE("damped Rabi signal stays inside its envelope", "[dynamics][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    RabiParams p;
    p.omega_r = 50.0 * u(rng);
    p.delta = 40.0 * (u(rng) - 0.5);
    p.gamma = 5.0 * u(rng);
    const double t = 3.0 * u(rng);
    const double envelope = p.omega_r * p.omega_r /
                            (p.delta * p.delta + p.omega_r * p.omega_r + p.gamma * p.gamma) * std::exp(-p.gamma * t);
    const double s = rabi_signal(t, p);
    CHECK(s >= 0.0);
    CHECK(s <= envelope + 1e-15);
  }
  RabiParams zero;
  CHECK(rabi_signal(1.0, zero) == 0.0);
  RabiParams bad;
  bad.gamma = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("the two Rabi forms agree without damping", "[dynamics]") {
  RabiParams a;
  a.omega_r = 12.0;
  a.delta = 7.0;
  RabiParams b = a;
  b.form = RabiForm::symmetric;
  for (double t : {0.1, 0.3, 0.9}) CHECK_THAT(rabi_signal(t, a), WithinAbs(rabi_signal(t, b), 1e-14));
  a.gamma = b.gamma = 2.0;
  CHECK(std::abs(rabi_signal(0.3, a) - rabi_signal(0.3, b)) > 1e-6);
}

TEST_CASE("inhomogeneous average", "[dynamics]") {
  RabiParams p;
  p.omega_r = 2.0 * kPi * 4.0;
  p.delta = 3.0;
  p.gamma = 0.4;

  SECTION("zero widths return the bare signal") {
    RabiParams q = p;
    q.inhomogeneity = RabiInhomogeneity{0.0, 0.0};
    for (double t : {0.0, 0.2, 1.3}) {
      const auto r = rabi_inhomogeneous(t, q);
      CHECK_THAT(r.value, WithinAbs(rabi_signal(t, p), 1e-12));
      CHECK(r.converged);
    }
  }
  SECTION("detuning average matches a brute-force integral") {
    RabiParams q = p;
    q.inhomogeneity = RabiInhomogeneity{60.0, 0.0};
    for (double t : {0.05, 0.5, 2.0}) {
      const auto r = rabi_inhomogeneous(t, q);
      REQUIRE(r.converged);
      CHECK_THAT(r.value, WithinAbs(brute_detuning_average(t, q), 2e-4));
    }
  }
  SECTION("joint average matches Monte Carlo") {
    RabiParams q = p;
    q.inhomogeneity = RabiInhomogeneity{10.0, 0.1};
    std::mt19937_64 rng(99);
    std::normal_distribution<double> n01;
    const double t = 0.8;
    const int n = 400000;
    double sum = 0.0, sum2 = 0.0;
    RabiParams s = p;
    for (int k = 0; k < n; ++k) {
      s.delta = p.delta + 10.0 * n01(rng);
      s.omega_r = std::abs(p.omega_r * (1.0 + 0.1 * n01(rng)));
      const double v = rabi_signal(t, s);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double stderr_ = std::sqrt((sum2 / n - mean * mean) / n);
    const auto r = rabi_inhomogeneous(t, q);
    REQUIRE(r.converged);
    CHECK(std::abs(r.value - mean) < 5.0 * stderr_ + 1e-4);
  }
  SECTION("undamped average is even in the detuning") {
    RabiParams q = p;
    q.gamma = 0.0;
    q.inhomogeneity = RabiInhomogeneity{15.0, 0.05};
    RabiParams m = q;
    m.delta = -q.delta;
    for (double t : {0.1, 0.7}) CHECK_THAT(rabi_inhomogeneous(t, q).value, WithinAbs(rabi_inhomogeneous(t, m).value, 2e-4));
  }
  SECTION("node budget exhaustion is reported") {
    RabiParams q = p;
    q.inhomogeneity = RabiInhomogeneity{500.0, 0.5};
    QuadratureOptions opt;
    opt.tolerance = 1e-14;
    opt.max_nodes = 2000;
    CHECK_FALSE(rabi_inhomogeneous(5.0, q, opt).converged);
  }
}

TEST_CASE("pulsed ODMR spectrum", "[dynamics]") {
  RabiParams p;
  p.omega_r = 2.0 * kPi * 2.0;  // 2 MHz Rabi frequency
  const double t_pi = kPi / p.omega_r;
  const double f0 = 100.0;
  const double zero_offset = std::sqrt(3.0) * p.omega_r / (2.0 * kPi);
  const auto spec = pulsed_odmr_spectrum({f0 - zero_offset, f0 - 1.0, f0, f0 + 1.0, f0 + zero_offset}, f0, p, t_pi);
  CHECK_THAT(spec.y[2], WithinAbs(1.0, 1e-12));
  CHECK_THAT(spec.y[0], WithinAbs(0.0, 1e-12));
  CHECK_THAT(spec.y[4], WithinAbs(0.0, 1e-12));
  CHECK_THAT(spec.y[1], WithinAbs(spec.y[3], 1e-12));
  CHECK(spec.y[1] < spec.y[2]);

  const auto grid = linspace(f0 - 5.0, f0 + 5.0, 1001);
  const auto wide = pulsed_odmr_spectrum(grid, f0, p, t_pi);
  const auto peak = std::max_element(wide.y.begin(), wide.y.end()) - wide.y.begin();
  CHECK_THAT(grid[static_cast<std::size_t>(peak)], WithinAbs(f0, 1e-9));
  CHECK_THROWS_AS(pulsed_odmr_spectrum(grid, f0, p, 0.0), std::invalid_argument);
}

TEST_CASE("g2 model", "[dynamics]") {
  const G2Params paper{1.0, 0.1, 0.07, 2.0};
  CHECK(g2_model(0.0, paper) == 1.0 - paper.a + paper.b);
  CHECK(g2_model(0.0, paper) < 0.5);
  CHECK(g2_model(2.0, paper) > 1.0);
  CHECK_THAT(g2_model(200.0, paper), WithinAbs(1.0, 1e-12));
  CHECK(g2_model(-0.3, paper) == g2_model(0.3, paper));
  // monotone approach to 1 at long delay
  for (double t = 10.0; t < 40.0; t += 1.0) CHECK(g2_model(t, paper) > g2_model(t + 1.0, paper));

  const G2Params generic{0.6, 0.3, 0.1, 1.5};
  CHECK(g2_model(0.0, generic) == 1.0 - 0.6 + 0.3);
  CHECK_THROWS_AS((G2Params{1.0, 0.1, 0.0, 1.0}).validate(), std::invalid_argument);
}

TEST_CASE("g2 background correction", "[dynamics]") {
  const auto trace = sample(linspace(0.0, 5.0, 11), [](double t) { return 1.0 - 0.5 * std::exp(-t); });
  const auto fixed = correct_g2_background(trace, 0.03);
  for (std::size_t k = 0; k < trace.size(); ++k)
    CHECK_THAT(fixed.y[k] - 1.0, WithinRel((trace.y[k] - 1.0) / (0.97 * 0.97), 1e-12));
  CHECK(correct_g2_background(trace, 0.0).y == trace.y);
  CHECK_THROWS_AS(correct_g2_background(trace, 1.0), std::invalid_argument);
}

TEST_CASE("exponential decay fit", "[dynamics][fitting]") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  const DecayParams truth{1000.0, 167.0, 20.0};
  auto noisy = sample(linspace(0.0, 1000.0, 501), [&](double t) { return exp_decay(t, truth); });
  for (double& y : noisy.y) y += 0.01 * truth.amplitude * n01(rng);
  const auto fit = fit_exp_decay(noisy);
  REQUIRE(fit.converged());
  CHECK_THAT(fit.value("tau"), WithinRel(167.0, 0.02));
  CHECK(std::abs(fit.value("tau") - 167.0) < 2.0 * fit.interval("tau") + 1e-9);

  const auto clean = sample(linspace(0.0, 60.0, 301), [](double t) { return 5.0 * std::exp(-t / 11.0); });
  const auto fit11 = fit_exp_decay(clean);
  REQUIRE(fit11.converged());
  CHECK_THAT(fit11.value("tau"), WithinRel(11.0, 1e-6));
  CHECK_THAT(fit11.value("baseline"), WithinAbs(0.0, 1e-6));
}

TEST_CASE("g2 fit round trip", "[dynamics][fitting]") {
  const G2Params truth{1.0, 0.1, 0.07, 2.0};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  auto data = sample(linspace(0.0, 10.0, 1001), [&](double t) { return g2_model(t, truth); });
  for (double& y : data.y) y += 0.01 * n01(rng);
  const auto fit = fit_g2(data, G2Params{0.8, 0.2, 0.05, 1.0});
  REQUIRE(fit.converged());
  CHECK_THAT(fit.value("a"), WithinRel(1.0, 0.05));
  CHECK_THAT(fit.value("b"), WithinRel(0.1, 0.05));
  CHECK_THAT(fit.value("tau1"), WithinRel(0.07, 0.05));
  CHECK_THAT(fit.value("tau2"), WithinRel(2.0, 0.05));
}

TEST_CASE("Rabi fit round trip", "[dynamics][fitting]") {
  RabiParams truth;
  truth.omega_r = 2.0 * kPi * 5.0;
  truth.gamma = 0.5;
  auto data = sample(linspace(0.0, 2.0, 401), [&](double t) { return 0.1 + 0.8 * rabi_signal(t, truth); });
  RabiFitInit init;
  init.params.omega_r = truth.omega_r * 1.03;
  init.params.gamma = 0.3;
  init.amplitude = 1.0;
  const auto fit = fit_rabi(data, init);
  REQUIRE(fit.converged());
  CHECK_THAT(fit.value("omega_r"), WithinRel(truth.omega_r, 1e-6));
  CHECK_THAT(fit.value("gamma"), WithinRel(0.5, 1e-5));
  CHECK_THAT(fit.value("amplitude"), WithinRel(0.8, 1e-5));
  CHECK(fit.value("delta") == 0.0);
}
