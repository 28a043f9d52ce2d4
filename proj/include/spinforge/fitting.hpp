#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinforge/spin_core.hpp"
#include "spinforge/trace.hpp"

namespace spinforge {

// ---------------------------------------------------------------------------
// Bounded nonlinear least squares
// ---------------------------------------------------------------------------

struct FitParameter {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool fixed = false;
  /// Typical magnitude; sets the finite-difference step when |value| is small.
  double scale = 1.0;
};

enum class Loss { squares, soft_l1 };

enum class FitStatus { converged, max_iterations, singular };

const char* to_string(FitStatus s);

/// Residuals as a function of the full parameter vector (fixed entries included).
using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct FitProblem {
  std::vector<FitParameter> parameters;
  ResidualFunction residuals;
  Loss loss = Loss::squares;
  double loss_scale = 1.0;  // soft-L1 transition scale, residual units
  std::string model;        // model id, for reports
  std::string dataset;      // dataset reference, for reports

  int max_iterations = 500;
  double cost_tol = 1e-10;      // relative cost change
  double gradient_tol = 1e-8;   // infinity norm of the projected gradient

  /// Throws std::invalid_argument on inconsistent bounds or too few residuals.
  void validate() const;
  Eigen::VectorXd initial_values() const;
};

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd estimates;
  Eigen::VectorXd ci95;  // symmetric half widths; 0 for fixed parameters
  Eigen::MatrixXd covariance;  // over all parameters, zero rows for fixed
  std::vector<bool> at_bound;
  double cost = 0.0;  // 0.5 * sum rho(r^2)
  double rms = 0.0;
  int residual_count = 0;
  int iterations = 0;   // accepted steps
  int evaluations = 0;  // residual function calls
  FitStatus status = FitStatus::converged;
  double singular_ratio = 1.0;  // smallest / largest singular value of J
  std::string message;
  std::vector<std::string> warnings;

  bool converged() const { return status == FitStatus::converged; }
  int index(const std::string& name) const;
  double value(const std::string& name) const;
  double interval(const std::string& name) const;
};

FitResult least_squares(const FitProblem& problem);

/// Central-difference Jacobian (one-sided near bounds).  steps[i] is the
/// absolute step for parameter i.
Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& steps, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const Eigen::VectorXd* f0 = nullptr);

/// Two-sided Student-t quantile used for the 95% intervals.
double student_t_975(int dof);

// ---------------------------------------------------------------------------
// Peak extraction
// ---------------------------------------------------------------------------

struct Peak {
  double sweep = 0.0;     // slice coordinate (e.g. field)
  double position = 0.0;  // refined x
  double height = 0.0;
  double width = 0.0;     // FWHM
  double uncertainty = 0.0;
  double prominence = 0.0;
};

struct PeakSet {
  std::vector<Peak> peaks;

  std::size_t size() const { return peaks.size(); }
  bool empty() const { return peaks.empty(); }
};

/// Stack of slices, one per sweep coordinate.
struct SpectrumMap {
  std::vector<double> sweep;
  std::vector<SpectrumTrace> slices;
};

/// Local maxima with log-parabolic sub-grid refinement and a prominence
/// filter.  Plateaus resolve to their lowest-x sample.  Ordered by x.
std::vector<Peak> find_peaks(const SpectrumTrace& slice, double min_prominence, double sweep = 0.0);
PeakSet extract_peaks(const SpectrumMap& map, double min_prominence);

// ---------------------------------------------------------------------------
// Spin-Hamiltonian parameter fits
// ---------------------------------------------------------------------------

enum class DriveGeometry { parallel, perpendicular };

struct SpinFitMask {
  bool g_xx = false;
  bool g_yy = false;
  bool g_zz = true;
  bool A_xx = true;
  bool A_yy = true;
  bool A_zz = true;
  bool A_tilt = false;
};

struct SpinFitOptions {
  Vec3 axis = Vec3::UnitZ();
  DriveGeometry geometry = DriveGeometry::parallel;
  double intensity_floor = 1e-3;  // relative to the strongest transition at that field
  bool include_nuclear_dipole = true;
  double field_unit = 1.0;  // peaks' sweep coordinate times this gives tesla
};

struct SpinFitResult {
  FitResult fit;
  SpinParams params;
  std::vector<std::string> warnings;
};

/// Allowed transition frequencies (MHz) at one field for the drive geometry.
std::vector<double> allowed_frequencies(const SpinParams& p, const SpinOperators& ops, const FieldPoint& f,
                                        DriveGeometry geometry, double intensity_floor,
                                        bool include_nuclear_dipole = true);

/// Noiseless ODMR peak list: every allowed transition at every field.
PeakSet simulate_odmr_peaks(const SpinParams& p, const std::vector<double>& fields_t, const SpinFitOptions& options = {});

SpinFitResult fit_spin_params(const PeakSet& peaks, const SpinParams& init, const SpinFitMask& mask,
                              const SpinFitOptions& options = {});

/// Heuristic starting point: g_zz from the high-field slope of the highest
/// branch, A_zz from the zero-field spread.
SpinParams initial_spin_guess(const PeakSet& peaks, const SpinParams& base, const SpinFitOptions& options = {});

// ---------------------------------------------------------------------------
// ESR resonance fields
// ---------------------------------------------------------------------------

struct EsrResonance {
  double field = 0.0;      // T
  double intensity = 0.0;  // (MHz/T)^2, B1 perpendicular to B0, summed over coincident lines
  int track_i = 0;
  int track_j = 0;
};

struct EsrOptions {
  int points = 401;
  double azimuth_deg = 90.0;  // field plane; 90 puts B0 in the lab y-z plane
  /// Minimum intensity counted as a line, (MHz/T)^2: 1% of a fully
  /// allowed free-electron transition.
  double intensity_floor = 1e-2 * constants::bohr_mhz_per_t * constants::bohr_mhz_per_t;
  bool include_nuclear_dipole = true;
  double merge_tol = 1e-7;  // T
};

/// Direction of B0 for a polar angle from the c-axis.
Vec3 esr_field_axis(double angle_from_c_deg, double azimuth_deg);

std::vector<EsrResonance> esr_resonance_fields(const SpinParams& p, double f_mw_ghz, double angle_from_c_deg,
                                               double b_start, double b_stop, const EsrOptions& options = {});

}  // namespace spinforge
