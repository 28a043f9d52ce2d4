#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "spinforge/fitting.hpp"

namespace spinforge {

namespace {

constexpr const char* kSpinNames[7] = {"g_xx", "g_yy", "g_zz", "A_xx", "A_yy", "A_zz", "A_tilt"};

SpinParams apply(const SpinParams& base, const Eigen::VectorXd& x) {
  SpinParams p = base;
  p.g_principal = {x(0), x(1), x(2)};
  p.A_principal = {x(3), x(4), x(5)};
  if (!p.A_rotation) {
    p.A_angles = {0.0, x(6), 0.0};
  }
  return p;
}

double base_tilt(const SpinParams& p) {
  double tilt = 0.0;
  for (double a : p.A_angles)
    if (a != 0.0) tilt = a;
  return tilt;
}

}  // namespace

std::vector<double> allowed_frequencies(const SpinParams& p, const SpinOperators& ops, const FieldPoint& f,
                                        DriveGeometry geometry, double intensity_floor,
                                        bool include_nuclear_dipole) {
  const EigenSystem es = eigensystem(build_hamiltonian(p, ops, f), f);
  const auto V = dipole_operators(p, ops, include_nuclear_dipole);
  const int n = static_cast<int>(es.size());

  Eigen::MatrixXd strength;
  if (geometry == DriveGeometry::parallel) {
    strength = (es.states.adjoint() * V[2] * es.states).cwiseAbs2();
  } else {
    strength = 0.5 * ((es.states.adjoint() * V[0] * es.states).cwiseAbs2() +
                      (es.states.adjoint() * V[1] * es.states).cwiseAbs2());
  }

  // Degenerate clusters: only summed strengths are basis independent.
  const double tol = 1e-7 * (1.0 + es.levels.cwiseAbs().maxCoeff());
  std::vector<int> start;
  for (int k = 0; k < n; ++k)
    if (k == 0 || es.levels(k) - es.levels(k - 1) > tol) start.push_back(k);
  start.push_back(n);
  const int clusters = static_cast<int>(start.size()) - 1;

  std::vector<std::pair<double, double>> lines;  // (freq, strength)
  double strongest = 0.0;
  for (int a = 0; a < clusters; ++a) {
    for (int b = a + 1; b < clusters; ++b) {
      const double s = strength.block(start[a], start[b], start[a + 1] - start[a], start[b + 1] - start[b]).sum();
      const double freq = es.levels(start[b]) - es.levels(start[a]);
      lines.emplace_back(freq, s);
      strongest = std::max(strongest, s);
    }
  }
  std::vector<double> out;
  if (strongest <= 0.0) return out;
  for (const auto& [freq, s] : lines)
    if (s >= intensity_floor * strongest) out.push_back(freq);
  std::sort(out.begin(), out.end());
  return out;
}

PeakSet simulate_odmr_peaks(const SpinParams& p, const std::vector<double>& fields_t, const SpinFitOptions& options) {
  p.validate();
  const SpinOperators ops = product_operators(p);
  PeakSet set;
  for (double b : fields_t) {
    const auto freqs = allowed_frequencies(p, ops, FieldPoint::along(options.axis, b), options.geometry,
                                           options.intensity_floor, options.include_nuclear_dipole);
    for (double f : freqs) {
      Peak pk;
      pk.sweep = b / options.field_unit;
      pk.position = f;
      pk.height = 1.0;
      pk.width = 1.0;
      set.peaks.push_back(pk);
    }
  }
  return set;
}

SpinFitResult fit_spin_params(const PeakSet& peaks, const SpinParams& init, const SpinFitMask& mask,
                              const SpinFitOptions& options) {
  init.validate();
  if (peaks.empty()) throw std::invalid_argument("no peaks to fit");

  // Unique fields, in order of first appearance.
  std::vector<double> fields;
  std::vector<int> field_index(peaks.size());
  std::map<double, int> seen;
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    const double b = peaks.peaks[k].sweep * options.field_unit;
    auto [it, inserted] = seen.emplace(b, static_cast<int>(fields.size()));
    if (inserted) fields.push_back(b);
    field_index[k] = it->second;
  }

  const SpinOperators ops = product_operators(init);
  auto residuals = [&](const Eigen::VectorXd& x) {
    const SpinParams p = apply(init, x);
    std::vector<std::vector<double>> allowed(fields.size());
    for (std::size_t f = 0; f < fields.size(); ++f)
      allowed[f] = allowed_frequencies(p, ops, FieldPoint::along(options.axis, fields[f]), options.geometry,
                                       options.intensity_floor, options.include_nuclear_dipole);
    Eigen::VectorXd r(static_cast<Eigen::Index>(peaks.size()));
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      const auto& lines = allowed[field_index[k]];
      const double obs = peaks.peaks[k].position;
      if (lines.empty()) {
        r(k) = obs;
        continue;
      }
      auto it = std::lower_bound(lines.begin(), lines.end(), obs);
      double best = std::numeric_limits<double>::infinity();
      if (it != lines.end()) best = *it - obs;
      if (it != lines.begin() && std::abs(*std::prev(it) - obs) < std::abs(best)) best = *std::prev(it) - obs;
      r(k) = -best;
    }
    return r;
  };

  const bool free[7] = {mask.g_xx, mask.g_yy, mask.g_zz, mask.A_xx, mask.A_yy, mask.A_zz,
                        mask.A_tilt && !init.A_rotation};
  const double values[7] = {init.g_principal[0], init.g_principal[1], init.g_principal[2], init.A_principal[0],
                            init.A_principal[1],  init.A_principal[2],  base_tilt(init)};

  FitProblem problem;
  problem.model = "spin-hamiltonian";
  problem.dataset = "odmr-peaks";
  problem.residuals = residuals;
  for (int i = 0; i < 7; ++i) {
    FitParameter fp;
    fp.name = kSpinNames[i];
    fp.value = values[i];
    fp.fixed = !free[i];
    if (i < 3) {
      fp.lower = 0.0;
      fp.upper = 4.0;
      fp.scale = 1.0;
    } else if (i < 6) {
      fp.lower = -5000.0;
      fp.upper = 5000.0;
      fp.scale = 100.0;
    } else {
      fp.lower = 0.0;
      fp.upper = 180.0;
      fp.scale = 10.0;
    }
    fp.value = std::clamp(fp.value, fp.lower, fp.upper);
    problem.parameters.push_back(fp);
  }

  SpinFitResult out;
  out.fit = least_squares(problem);
  out.params = apply(init, out.fit.estimates);
  out.warnings = out.fit.warnings;
  if (out.fit.singular_ratio < 1e-6)
    out.warnings.push_back("identifiability: Jacobian singular value ratio " + std::to_string(out.fit.singular_ratio) +
                           " below 1e-6; some free parameters are not constrained by these peaks");
  return out;
}

SpinParams initial_spin_guess(const PeakSet& peaks, const SpinParams& base, const SpinFitOptions& options) {
  std::map<double, std::pair<double, double>> range;  // field -> (min f, max f)
  for (const auto& p : peaks.peaks) {
    const double b = p.sweep * options.field_unit;
    auto [it, inserted] = range.emplace(b, std::make_pair(p.position, p.position));
    if (!inserted) {
      it->second.first = std::min(it->second.first, p.position);
      it->second.second = std::max(it->second.second, p.position);
    }
  }
  SpinParams guess = base;
  if (range.size() >= 2) {
    const auto last = std::prev(range.end());
    const auto before = std::prev(last);
    const double slope = (last->second.second - before->second.second) / (last->first - before->first);
    if (slope > 0.0 && std::isfinite(slope)) guess.g_principal[2] = slope / constants::bohr_mhz_per_t;
  }
  if (!range.empty()) {
    const auto& low = range.begin()->second;
    // The zero-field line of an isotropic coupling sits at A (I + 1/2).
    if (low.second > 0.0) guess.A_principal[2] = low.second / (base.I + 0.5);
  }
  return guess;
}

}  // namespace spinforge
