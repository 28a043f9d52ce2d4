#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "spinforge/dynamics.hpp"

namespace spinforge {

namespace {

constexpr double kRange = 8.0;  // sigmas covered on each side
constexpr int kOrder = 8;

struct Rule {
  std::vector<double> z;
  std::vector<double> w;  // includes the normal density, normalized to 1
};

// Composite Gauss-Legendre rule for a standard normal weight on [-kRange, kRange].
Rule normal_rule(int panels) {
  using GL = boost::math::quadrature::gauss<double, kOrder>;
  const auto& abscissa = GL::abscissa();
  const auto& weights = GL::weights();
  Rule r;
  const double h = 2.0 * kRange / panels;
  for (int p = 0; p < panels; ++p) {
    const double mid = -kRange + (p + 0.5) * h;
    for (std::size_t k = 0; k < abscissa.size(); ++k) {
      for (int sign : {-1, 1}) {
        if (abscissa[k] == 0.0 && sign > 0) continue;
        const double z = mid + sign * abscissa[k] * 0.5 * h;
        r.z.push_back(z);
        r.w.push_back(weights[k] * 0.5 * h * std::exp(-0.5 * z * z));
      }
    }
  }
  double total = 0.0;
  for (double w : r.w) total += w;
  for (double& w : r.w) w /= total;
  return r;
}

// Smallest feature, in standard-normal units, of the integrand along each axis.
int base_panels(double feature) {
  if (!(feature > 0.0) || !std::isfinite(feature)) return 4;
  const double n = std::ceil(2.0 * kRange / feature);
  return static_cast<int>(std::clamp(n, 4.0, 1e6));
}

double average(double t, const RabiParams& p, const Rule& rd, const Rule& rf) {
  const auto& in = *p.inhomogeneity;
  RabiParams q = p;
  q.inhomogeneity.reset();
  double sum = 0.0;
  for (std::size_t i = 0; i < rd.z.size(); ++i) {
    q.delta = p.delta + in.detuning_sigma * rd.z[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < rf.z.size(); ++j) {
      q.omega_r = std::abs(p.omega_r * (1.0 + in.drive_sigma * rf.z[j]));
      inner += rf.w[j] * rabi_signal(t, q);
    }
    sum += rd.w[i] * inner;
  }
  return sum;
}

Rule point_rule() { return Rule{{0.0}, {1.0}}; }

}  // namespace

void RabiParams::validate() const {
  if (!(omega_r >= 0.0) || !std::isfinite(omega_r)) throw std::invalid_argument("omega_r must be finite and >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite and >= 0");
  if (!std::isfinite(delta)) throw std::invalid_argument("delta must be finite");
  if (inhomogeneity) {
    if (!(inhomogeneity->detuning_sigma >= 0.0) || !(inhomogeneity->drive_sigma >= 0.0))
      throw std::invalid_argument("inhomogeneous widths must be >= 0");
  }
}

double rabi_signal(double t_us, const RabiParams& p) {
  const double w2 = p.omega_r * p.omega_r;
  const double denom = p.delta * p.delta + w2 + p.gamma * p.gamma;
  if (denom <= 0.0) return 0.0;
  const double root = p.form == RabiForm::printed
                          ? std::sqrt((p.delta + p.gamma) * (p.delta + p.gamma) + w2)
                          : std::sqrt(denom);
  const double s = std::sin(0.5 * t_us * root);
  return w2 / denom * s * s * std::exp(-p.gamma * t_us);
}

QuadratureResult rabi_inhomogeneous(double t_us, const RabiParams& p, const QuadratureOptions& options) {
  p.validate();
  const RabiInhomogeneity in = p.inhomogeneity.value_or(RabiInhomogeneity{});
  const bool avg_d = in.detuning_sigma > 0.0;
  const bool avg_f = in.drive_sigma > 0.0 && p.omega_r > 0.0;
  QuadratureResult out;
  if (!avg_d && !avg_f) {
    out.value = rabi_signal(t_us, p);
    return out;
  }

  const double t = std::abs(t_us);
  const double half_period_scale = 2.0 * constants::pi;  // sin^2 period in phase units times 2
  int pd = 1, pf = 1;
  if (avg_d) {
    const double osc = t * in.detuning_sigma > 0.0 ? half_period_scale / (t * in.detuning_sigma) : 1e300;
    const double lorentz = std::hypot(p.omega_r, p.gamma) / in.detuning_sigma;
    pd = base_panels(std::min(osc, lorentz > 0.0 ? lorentz : 1e300));
  }
  if (avg_f) {
    const double rate = t * p.omega_r * in.drive_sigma;
    const double osc = rate > 0.0 ? half_period_scale / rate : 1e300;
    const double lorentz = std::hypot(p.delta, p.gamma) > 0.0
                               ? std::hypot(p.delta, p.omega_r) / (p.omega_r * in.drive_sigma)
                               : 1e300;
    pf = base_panels(std::min(osc, lorentz));
  }

  // 4x nodes: both panel counts doubled in 2-D, quadrupled in 1-D.
  const int factor = (avg_d && avg_f) ? 2 : 4;
  while (true) {
    const Rule cd = avg_d ? normal_rule(pd) : point_rule();
    const Rule cf = avg_f ? normal_rule(pf) : point_rule();
    const Rule fd = avg_d ? normal_rule(pd * factor) : point_rule();
    const Rule ff = avg_f ? normal_rule(pf * factor) : point_rule();
    const double coarse = average(t_us, p, cd, cf);
    const double fine = average(t_us, p, fd, ff);
    out.value = fine;
    out.error = std::abs(fine - coarse);
    out.nodes = static_cast<int>(fd.z.size() * ff.z.size());
    if (out.error < options.tolerance) {
      out.converged = true;
      return out;
    }
    const long next = static_cast<long>(avg_d ? pd * 2 * factor * kOrder : 1) *
                      static_cast<long>(avg_f ? pf * 2 * factor * kOrder : 1);
    if (next > options.max_nodes) {
      out.converged = false;
      return out;
    }
    if (avg_d) pd *= 2;
    if (avg_f) pf *= 2;
  }
}

SpectrumTrace pulsed_odmr_spectrum(const std::vector<double>& drive_mhz, double f0_mhz, const RabiParams& p,
                                   double t_pi_us) {
  if (!(t_pi_us > 0.0)) throw std::invalid_argument("pulse length must be positive");
  p.validate();
  SpectrumTrace trace;
  trace.x = drive_mhz;
  trace.x_label = "drive_frequency";
  trace.x_unit = "MHz";
  trace.y_label = "population_transfer";
  trace.y_unit = "1";
  trace.y.reserve(drive_mhz.size());
  RabiParams q = p;
  for (double f : drive_mhz) {
    q.delta = 2.0 * constants::pi * (f - f0_mhz);
    if (q.inhomogeneity) {
      const auto r = rabi_inhomogeneous(t_pi_us, q);
      if (!r.converged) throw std::runtime_error("inhomogeneous average did not converge");
      trace.y.push_back(r.value);
    } else {
      trace.y.push_back(rabi_signal(t_pi_us, q));
    }
  }
  trace.validate();
  return trace;
}

void G2Params::validate() const {
  if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("g2 time constants must be positive");
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("g2 amplitudes must be finite");
}

double g2_model(double tau_us, const G2Params& p) {
  const double t = std::abs(tau_us);
  return 1.0 - p.a * std::exp(-t / p.tau1) + p.b * std::exp(-t / p.tau2);
}

void DecayParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("decay time must be positive");
}

double exp_decay(double t, const DecayParams& p) { return p.baseline + p.amplitude * std::exp(-t / p.tau); }

SpectrumTrace correct_g2_background(const SpectrumTrace& g2, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("background fraction must lie in [0, 1)");
  const double rho = 1.0 - fraction;
  SpectrumTrace out = g2;
  for (double& y : out.y) y = 1.0 + (y - 1.0) / (rho * rho);
  return out;
}

FitResult fit_exp_decay(const SpectrumTrace& trace, const std::optional<DecayParams>& init) {
  trace.validate();
  if (trace.size() < 4) throw std::invalid_argument("decay fit needs at least 4 samples");
  DecayParams start;
  if (init) {
    init->validate();
    start = *init;
  } else {
    const std::size_t tail = std::max<std::size_t>(1, trace.size() / 10);
    double base = 0.0;
    for (std::size_t k = trace.size() - tail; k < trace.size(); ++k) base += trace.y[k];
    base /= static_cast<double>(tail);
    start.baseline = base;
    start.amplitude = trace.y.front() - base;
    const double span = trace.x.back() - trace.x.front();
    start.tau = span / 3.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
      if (std::abs(trace.y[k] - base) < std::abs(start.amplitude) / std::exp(1.0)) {
        start.tau = std::max(trace.x[k] - trace.x.front(), span / static_cast<double>(trace.size()));
        break;
      }
    }
    start.amplitude *= std::exp(trace.x.front() / start.tau);
  }
  const double amp_scale = std::max(std::abs(start.amplitude), 1e-12);

  FitProblem problem;
  problem.model = "exp-decay";
  problem.parameters = {
      {"amplitude", start.amplitude, -std::numeric_limits<double>::infinity(),
       std::numeric_limits<double>::infinity(), false, amp_scale},
      {"tau", start.tau, 1e-12 * start.tau, std::numeric_limits<double>::infinity(), false, start.tau},
      {"baseline", start.baseline, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
       false, amp_scale},
  };
  problem.residuals = [&](const Eigen::VectorXd& x) {
    const DecayParams d{x(0), x(1), x(2)};
    Eigen::VectorXd r(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t k = 0; k < trace.size(); ++k) r(k) = exp_decay(trace.x[k], d) - trace.y[k];
    return r;
  };
  return least_squares(problem);
}

FitResult fit_g2(const SpectrumTrace& trace, const G2Params& init) {
  trace.validate();
  init.validate();
  if (trace.size() < 5) throw std::invalid_argument("g2 fit needs at least 5 samples");
  const double inf = std::numeric_limits<double>::infinity();
  FitProblem problem;
  problem.model = "g2";
  problem.parameters = {
      {"a", init.a, -10.0, 10.0, false, 1.0},
      {"b", init.b, -10.0, 10.0, false, 1.0},
      {"tau1", init.tau1, 1e-9, inf, false, init.tau1},
      {"tau2", init.tau2, 1e-9, inf, false, init.tau2},
  };
  problem.residuals = [&](const Eigen::VectorXd& x) {
    const G2Params g{x(0), x(1), x(2), x(3)};
    Eigen::VectorXd r(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t k = 0; k < trace.size(); ++k) r(k) = g2_model(trace.x[k], g) - trace.y[k];
    return r;
  };
  return least_squares(problem);
}

FitResult fit_rabi(const SpectrumTrace& trace, const RabiFitInit& init) {
  trace.validate();
  init.params.validate();
  if (trace.size() < 6) throw std::invalid_argument("Rabi fit needs at least 6 samples");
  const double inf = std::numeric_limits<double>::infinity();
  const double w = std::max(init.params.omega_r, 1e-6);
  RabiParams base = init.params;
  base.inhomogeneity.reset();

  FitProblem problem;
  problem.model = "rabi";
  problem.parameters = {
      {"omega_r", init.params.omega_r, 0.0, inf, false, w},
      {"delta", init.params.delta, -inf, inf, !init.fit_delta, w},
      {"gamma", init.params.gamma, 0.0, inf, false, std::max(init.params.gamma, 1e-3 * w)},
      {"amplitude", init.amplitude, -inf, inf, false, std::max(std::abs(init.amplitude), 1e-12)},
      {"offset", init.offset, -inf, inf, false, std::max(std::abs(init.amplitude), 1e-12)},
  };
  problem.residuals = [&, base](const Eigen::VectorXd& x) {
    RabiParams q = base;
    q.omega_r = x(0);
    q.delta = x(1);
    q.gamma = x(2);
    Eigen::VectorXd r(static_cast<Eigen::Index>(trace.size()));
    for (std::size_t k = 0; k < trace.size(); ++k) r(k) = x(4) + x(3) * rabi_signal(trace.x[k], q) - trace.y[k];
    return r;
  };
  return least_squares(problem);
}

}  // namespace spinforge
