#pragma once

#include <optional>
#include <vector>

#include "spinforge/fitting.hpp"
#include "spinforge/trace.hpp"

namespace spinforge {

// Angular frequencies are rad/us, rates 1/us, times us throughout.

struct RabiInhomogeneity {
  double detuning_sigma = 0.0;  // rad/us
  double drive_sigma = 0.0;     // fractional std-dev of omega_r
};

enum class RabiForm {
  printed,    // sqrt((delta + gamma)^2 + omega^2) inside the sine
  symmetric,  // sqrt(delta^2 + gamma^2 + omega^2)
};

struct RabiParams {
  double omega_r = 0.0;  // rad/us
  double delta = 0.0;    // rad/us
  double gamma = 0.0;    // 1/us
  std::optional<RabiInhomogeneity> inhomogeneity;
  RabiForm form = RabiForm::printed;

  /// Throws std::invalid_argument on negative omega_r, gamma or widths.
  void validate() const;
};

/// omega^2 / (delta^2 + omega^2 + gamma^2) * sin^2(t/2 * root) * exp(-gamma t).
double rabi_signal(double t_us, const RabiParams& p);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;   // |fine - coarse|, fine has 4x the nodes
  int nodes = 1;        // nodes of the returned (fine) rule
  bool converged = true;
};

struct QuadratureOptions {
  double tolerance = 1e-4;
  int max_nodes = 1 << 22;
};

/// Gaussian average of rabi_signal over detuning and fractional drive.
/// Composite 8-point Gauss-Legendre on +-8 sigma, at least 32 nodes per
/// averaged dimension, refined until it agrees with a 4x coarser rule.
QuadratureResult rabi_inhomogeneous(double t_us, const RabiParams& p, const QuadratureOptions& options = {});

/// Signal after a pulse of length t_pi at each drive frequency (MHz);
/// delta = 2 pi (f - f0).  Throws std::runtime_error when averaging fails to converge.
SpectrumTrace pulsed_odmr_spectrum(const std::vector<double>& drive_mhz, double f0_mhz, const RabiParams& p,
                                   double t_pi_us);

struct G2Params {
  double a = 0.0;
  double b = 0.0;
  double tau1 = 1.0;  // us
  double tau2 = 1.0;  // us

  void validate() const;
};

/// 1 - a exp(-|tau|/tau1) + b exp(-|tau|/tau2).
double g2_model(double tau_us, const G2Params& p);

struct DecayParams {
  double amplitude = 1.0;
  double tau = 1.0;  // same unit as t
  double baseline = 0.0;

  void validate() const;
};

double exp_decay(double t, const DecayParams& p);

/// Removes an uncorrelated background that makes up `fraction` of the counts:
/// g2_true = 1 + (g2 - 1) / rho^2 with rho = 1 - fraction.
SpectrumTrace correct_g2_background(const SpectrumTrace& g2, double fraction);

/// Parameters amplitude, tau, baseline.  A missing init is estimated from the data.
FitResult fit_exp_decay(const SpectrumTrace& trace, const std::optional<DecayParams>& init = std::nullopt);

/// Parameters a, b, tau1, tau2.
FitResult fit_g2(const SpectrumTrace& trace, const G2Params& init);

struct RabiFitInit {
  RabiParams params;
  double amplitude = 1.0;
  double offset = 0.0;
  bool fit_delta = false;
};

/// offset + amplitude * rabi_signal(t).  Parameters omega_r, delta, gamma,
/// amplitude, offset (delta fixed unless requested).
FitResult fit_rabi(const SpectrumTrace& trace, const RabiFitInit& init);

}  // namespace spinforge
